//! Config parsing, diagnostics CSV, field dumps, reports and run manifests.
//!
//! # Config format
//!
//! A plain sectioned key-value file. `#` starts a comment; blank lines are
//! ignored; lists are comma separated. Unknown sections and keys are errors.
//!
//! ```text
//! [grid]
//! dim = 1              # 1, 2 or 3 (default 1)
//! n = 512              # required, even, >= 4
//! length = 32          # required, box side L
//!
//! [model]
//! sigma = 1            # default 1
//! epsilon = 1          # +1 defocusing (default) or -1 focusing
//! saturation = cutoff  # none (default) | cutoff | plateau | rational-sat
//! h = 0.25             # required unless saturation = none and dispersion = laplacian
//! profile = smooth-compact   # smooth-compact (default) | gaussian | sharp
//! dispersion = laplacian     # laplacian (default) | rational | arctan
//! dispersion_h = 0.25  # default: h
//! dealias = false      # 2/3 rule on the unsaturated potential
//!
//! [time]
//! dt = 0.001           # required
//! t_final = 1          # required
//! splitting = strang   # strang (default) | lie
//!
//! [datum]
//! kind = gaussian      # required: gaussian | sech | concentrated |
//!                      #   prescribed-regularity | plane-wave | file
//! # gaussian: amplitude (1), width (1), center (0), wave_vector (0)
//! # sech: amplitude (1), width (1)
//! # concentrated: scale, regularity (both required)
//! # prescribed-regularity: regularity (required), seed (0)
//! # plane-wave: amplitude (1), mode (0)
//! # file: path (required)
//!
//! [diagnostics]
//! every = 10           # default 1
//! norms = 1.5, 2       # extra H^s columns (default none)
//!
//! [study]              # optional, read by the experiment subcommands
//! h_list = 0.125, 0.0625, 0.03125, 0.015625
//! norms = 0, 1
//! k = 1
//! h_cut = 0.5
//! perturbation = 0.001, 0.0005
//! sample_times = 0.25, 0.5, 0.75, 1
//! amplitudes = 1, 1.5, 2, 2.5, 3
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::datum::InitialDatum;
use crate::error::{Error, Result};
use crate::integrator::{DiagnosticsSeries, SimulationConfig, Splitting};
use crate::operators::{
    check_resolution, CutoffProfile, DispersionSymbol, ModelParams, SaturationScheme, Sign,
};
use crate::spectral::{Complex, Field, SpectralGrid};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Options for the experiment subcommands (`[study]` section).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StudyOptions {
    pub h_list: Option<Vec<f64>>,
    pub norms: Option<Vec<f64>>,
    pub k: Option<u32>,
    pub h_cut: Option<f64>,
    pub perturbation: Option<Vec<f64>>,
    pub sample_times: Option<Vec<f64>>,
    pub amplitudes: Option<Vec<f64>>,
}

/// A parsed config file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub simulation: SimulationConfig,
    pub study: StudyOptions,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("grid", &["dim", "n", "length"]),
    (
        "model",
        &["sigma", "epsilon", "saturation", "h", "profile", "dispersion", "dispersion_h", "dealias"],
    ),
    ("time", &["dt", "t_final", "splitting"]),
    (
        "datum",
        &[
            "kind", "amplitude", "width", "center", "wave_vector", "scale", "regularity", "seed",
            "mode", "path",
        ],
    ),
    ("diagnostics", &["every", "norms"]),
    (
        "study",
        &["h_list", "norms", "k", "h_cut", "perturbation", "sample_times", "amplitudes"],
    ),
];

fn datum_keys(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "gaussian" => &["kind", "amplitude", "width", "center", "wave_vector"],
        "sech" => &["kind", "amplitude", "width"],
        "concentrated" => &["kind", "scale", "regularity"],
        "prescribed-regularity" => &["kind", "regularity", "seed"],
        "plane-wave" => &["kind", "amplitude", "mode"],
        "file" => &["kind", "path"],
        _ => return None,
    })
}

struct Entry {
    line: usize,
    value: String,
}

type Sections = BTreeMap<String, BTreeMap<String, Entry>>;

fn tokenize(text: &str, errors: &mut Vec<ConfigError>) -> Sections {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                errors.push(ConfigError::at(line_no, format!("malformed section header '{line}'")));
                continue;
            };
            let name = name.trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                errors.push(ConfigError::at(line_no, format!("unknown section [{name}]")));
                current = None;
                continue;
            }
            if sections.contains_key(name) {
                errors.push(ConfigError::at(line_no, format!("duplicate section [{name}]")));
            }
            sections.entry(name.to_string()).or_default();
            current = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(ConfigError::at(line_no, format!("expected 'key = value', got '{line}'")));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(section) = current.as_ref() else {
            errors.push(ConfigError::at(line_no, format!("key '{key}' outside of a known section")));
            continue;
        };
        let known = SECTIONS
            .iter()
            .find(|(s, _)| s == section)
            .map(|(_, keys)| keys.contains(&key))
            .unwrap_or(false);
        if !known {
            errors.push(ConfigError::at(line_no, format!("unknown key '{key}' in [{section}]")));
            continue;
        }
        let table = sections.get_mut(section).expect("section exists");
        if table.contains_key(key) {
            errors.push(ConfigError::at(line_no, format!("duplicate key '{key}' in [{section}]")));
            continue;
        }
        table.insert(
            key.to_string(),
            Entry {
                line: line_no,
                value: value.to_string(),
            },
        );
    }
    sections
}

/// Typed access to the tokenized sections, accumulating errors.
struct Reader<'a> {
    sections: &'a Sections,
    errors: Vec<ConfigError>,
}

impl<'a> Reader<'a> {
    fn entry(&self, section: &str, key: &str) -> Option<&'a Entry> {
        self.sections.get(section).and_then(|t| t.get(key))
    }

    fn line(&self, section: &str, key: &str) -> Option<usize> {
        self.entry(section, key).map(|e| e.line)
    }

    fn parsed<T>(&mut self, section: &str, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Option<T> {
        let entry = self.entry(section, key)?;
        match parse(&entry.value) {
            Ok(v) => Some(v),
            Err(msg) => {
                self.errors
                    .push(ConfigError::at(entry.line, format!("[{section}] {key}: {msg}")));
                None
            }
        }
    }

    fn required<T>(&mut self, section: &str, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Option<T> {
        if self.entry(section, key).is_none() {
            self.errors
                .push(ConfigError::global(format!("missing required key '{key}' in [{section}]")));
            return None;
        }
        self.parsed(section, key, parse)
    }

    fn fail(&mut self, section: &str, key: &str, message: impl Into<String>) {
        let message = format!("[{section}] {key}: {}", message.into());
        self.errors.push(match self.line(section, key) {
            Some(line) => ConfigError::at(line, message),
            None => ConfigError::global(message),
        });
    }
}

fn float(v: &str) -> std::result::Result<f64, String> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("expected a number, got '{v}'"))
}

fn uint(v: &str) -> std::result::Result<u64, String> {
    v.parse::<u64>()
        .map_err(|_| format!("expected a non-negative integer, got '{v}'"))
}

fn int(v: &str) -> std::result::Result<i64, String> {
    v.parse::<i64>().map_err(|_| format!("expected an integer, got '{v}'"))
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

fn word(v: &str) -> std::result::Result<String, String> {
    if v.is_empty() {
        Err("empty value".to_string())
    } else {
        Ok(v.to_string())
    }
}

/// Comma-separated list of numbers.
pub fn parse_float_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    let items: std::result::Result<Vec<f64>, String> = v
        .split(',')
        .map(|s| float(s.trim()))
        .collect();
    match items {
        Ok(list) if !list.is_empty() => Ok(list),
        Ok(_) => Err("empty list".to_string()),
        Err(e) => Err(e),
    }
}

fn int_list(v: &str) -> std::result::Result<Vec<i64>, String> {
    v.split(',').map(|s| int(s.trim())).collect()
}

fn vector3<T: Copy + Default>(values: Option<Vec<T>>, dim: usize, r: &mut Reader, section: &str, key: &str) -> [T; 3] {
    let mut out = [T::default(); 3];
    if let Some(values) = values {
        if values.len() == 1 {
            out[..dim].fill(values[0]);
        } else if values.len() == dim {
            out[..dim].copy_from_slice(&values);
        } else {
            r.fail(section, key, format!("expected 1 or {dim} components, got {}", values.len()));
        }
    }
    out
}

/// Parses and validates a config, reporting every problem found.
pub fn parse_config(text: &str) -> Result<SimulationConfig> {
    parse_run_config(text).map(|c| c.simulation)
}

pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let mut errors = Vec::new();
    let sections = tokenize(text, &mut errors);
    let mut r = Reader {
        sections: &sections,
        errors,
    };

    // [grid]
    let dim = r.parsed("grid", "dim", uint).unwrap_or(1) as usize;
    let n = r.required("grid", "n", uint).map(|v| v as usize);
    let length = r.required("grid", "length", float);
    let grid = match (n, length) {
        (Some(n), Some(length)) => match SpectralGrid::new(dim, n, length) {
            Ok(g) => Some(g),
            Err(e) => {
                let key = if !(1..=3).contains(&dim) {
                    "dim"
                } else if n < 4 || n % 2 != 0 {
                    "n"
                } else {
                    "length"
                };
                r.fail("grid", key, e.to_string());
                None
            }
        },
        _ => None,
    };

    // [model]
    let sigma = r.parsed("model", "sigma", uint).unwrap_or(1);
    if sigma < 1 {
        r.fail("model", "sigma", "sigma must be an integer >= 1");
    }
    let sign = r
        .parsed("model", "epsilon", int)
        .and_then(|e| match Sign::from_value(e) {
            Ok(s) => Some(s),
            Err(err) => {
                r.fail("model", "epsilon", err.to_string());
                None
            }
        })
        .unwrap_or(Sign::Defocusing);
    let saturation = r.parsed("model", "saturation", word).unwrap_or_else(|| "none".to_string());
    let dispersion_name = r.parsed("model", "dispersion", word).unwrap_or_else(|| "laplacian".to_string());
    let profile = r
        .parsed("model", "profile", |v| v.parse::<CutoffProfile>().map_err(|e| e.to_string()))
        .unwrap_or_default();
    let h = r.parsed("model", "h", float);
    let dispersion_h = r.parsed("model", "dispersion_h", float).or(h);
    let dealias = r.parsed("model", "dealias", boolean).unwrap_or(false);

    let needs_h = saturation != "none";
    if needs_h && h.is_none() && r.entry("model", "h").is_none() {
        r.fail("model", "h", format!("saturation '{saturation}' needs h"));
    }
    let scheme = match SaturationScheme::from_name(&saturation, h.unwrap_or(1.0), profile) {
        Ok(s) => Some(s),
        Err(e) => {
            r.fail("model", "saturation", e.to_string());
            None
        }
    };
    if dispersion_name != "laplacian" && dispersion_h.is_none() {
        r.fail("model", "dispersion", format!("dispersion '{dispersion_name}' needs h or dispersion_h"));
    }
    let dispersion = match DispersionSymbol::from_name(&dispersion_name, dispersion_h.unwrap_or(1.0)) {
        Ok(d) => Some(d),
        Err(e) => {
            r.fail("model", "dispersion", e.to_string());
            None
        }
    };
    let mut params = None;
    if let (Some(scheme), Some(dispersion)) = (scheme, dispersion) {
        if let Some(hv) = scheme.h() {
            if !(hv > 0.0 && hv <= 1.0) {
                r.fail("model", "h", format!("h must lie in (0, 1], got {hv}"));
            }
        }
        if let Some(hv) = dispersion.h() {
            if !(hv > 0.0 && hv <= 1.0) {
                let key = if r.entry("model", "dispersion_h").is_some() { "dispersion_h" } else { "h" };
                r.fail("model", key, format!("dispersion h must lie in (0, 1], got {hv}"));
            }
        }
        let p = ModelParams {
            sigma: sigma as u32,
            sign,
            scheme,
            dispersion,
        };
        if p.validate().is_ok() {
            if let Some(grid) = grid {
                if let Err(e) = check_resolution(&scheme, &grid) {
                    r.fail("model", "h", e.to_string());
                }
            }
            params = Some(p);
        }
    }

    // [time]
    let dt = r.required("time", "dt", float);
    let t_final = r.required("time", "t_final", float);
    let splitting = r
        .parsed("time", "splitting", |v| match v {
            "strang" => Ok(Splitting::Strang),
            "lie" => Ok(Splitting::Lie),
            other => Err(format!("expected strang or lie, got '{other}'")),
        })
        .unwrap_or_default();

    // [datum]
    let datum = parse_datum(&mut r, dim.clamp(1, 3));

    // [diagnostics]
    let every = r.parsed("diagnostics", "every", uint).unwrap_or(1) as usize;
    let norms = r.parsed("diagnostics", "norms", parse_float_list).unwrap_or_default();

    // [study]
    let study = StudyOptions {
        h_list: r.parsed("study", "h_list", parse_float_list),
        norms: r.parsed("study", "norms", parse_float_list),
        k: r.parsed("study", "k", uint).map(|k| k as u32),
        h_cut: r.parsed("study", "h_cut", float),
        perturbation: r.parsed("study", "perturbation", parse_float_list),
        sample_times: r.parsed("study", "sample_times", parse_float_list),
        amplitudes: r.parsed("study", "amplitudes", parse_float_list),
    };

    let mut simulation = None;
    if let (Some(grid), Some(params), Some(dt), Some(t_final), Some(datum)) = (grid, params, dt, t_final, datum) {
        let config = SimulationConfig {
            grid,
            params,
            dt,
            t_final,
            datum,
            diagnostics_every: every,
            splitting,
            norms,
            dealias,
        };
        match config.validate() {
            Ok(()) => simulation = Some(config),
            Err(e) => {
                let key = if every == 0 { ("diagnostics", "every") } else { ("time", "dt") };
                r.fail(key.0, key.1, e.to_string());
            }
        }
    }

    let mut errors = r.errors;
    errors.sort_by_key(|e| e.line.unwrap_or(usize::MAX));
    match simulation {
        Some(simulation) if errors.is_empty() => Ok(RunConfig { simulation, study }),
        _ => {
            if errors.is_empty() {
                errors.push(ConfigError::global("invalid config"));
            }
            Err(Error::Config(errors))
        }
    }
}

fn parse_datum(r: &mut Reader, dim: usize) -> Option<InitialDatum> {
    let kind = r.required("datum", "kind", word)?;
    let Some(allowed) = datum_keys(&kind) else {
        r.fail("datum", "kind", format!("unknown datum kind '{kind}'"));
        return None;
    };
    if let Some(table) = r.sections.get("datum") {
        for (key, entry) in table {
            if !allowed.contains(&key.as_str()) {
                r.errors.push(ConfigError::at(
                    entry.line,
                    format!("[datum] key '{key}' does not apply to kind '{kind}'"),
                ));
            }
        }
    }
    let amplitude = r.parsed("datum", "amplitude", float).unwrap_or(1.0);
    let width = r.parsed("datum", "width", float).unwrap_or(1.0);
    Some(match kind.as_str() {
        "gaussian" => {
            let center = r.parsed("datum", "center", parse_float_list);
            let center = vector3(center, dim, r, "datum", "center");
            let wave = r.parsed("datum", "wave_vector", parse_float_list);
            let wave_vector = vector3(wave, dim, r, "datum", "wave_vector");
            InitialDatum::Gaussian {
                amplitude,
                width,
                center,
                wave_vector,
            }
        }
        "sech" => InitialDatum::Sech { amplitude, width },
        "concentrated" => InitialDatum::Concentrated {
            scale: r.required("datum", "scale", float)?,
            regularity: r.required("datum", "regularity", float)?,
        },
        "prescribed-regularity" => {
            let regularity = r.required("datum", "regularity", float)?;
            if regularity <= 0.0 {
                r.fail("datum", "regularity", "must be positive");
            }
            InitialDatum::PrescribedRegularity {
                regularity,
                seed: r.parsed("datum", "seed", uint).unwrap_or(0),
            }
        }
        "plane-wave" => {
            let mode = r.parsed("datum", "mode", int_list);
            InitialDatum::PlaneWave {
                amplitude,
                mode: vector3(mode, dim, r, "datum", "mode"),
            }
        }
        "file" => InitialDatum::File {
            path: PathBuf::from(r.required("datum", "path", word)?),
        },
        _ => unreachable!(),
    })
}

fn list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

/// Re-emits a config with every key explicit, in a fixed order.
pub fn canonical_config_text(config: &RunConfig) -> String {
    let c = &config.simulation;
    let d = c.grid.dim();
    let mut out = String::new();
    let _ = writeln!(out, "[grid]\ndim = {d}\nn = {}\nlength = {}", c.grid.n(), c.grid.length());

    let p = &c.params;
    let _ = writeln!(
        out,
        "\n[model]\nsigma = {}\nepsilon = {}\nsaturation = {}",
        p.sigma,
        p.sign.value() as i64,
        p.scheme.name()
    );
    if let Some(h) = p.scheme.h() {
        let _ = writeln!(out, "h = {h}");
    }
    if let SaturationScheme::Cutoff { profile, .. } = p.scheme {
        let _ = writeln!(out, "profile = {profile}");
    }
    let _ = writeln!(out, "dispersion = {}", p.dispersion.name());
    if let Some(h) = p.dispersion.h() {
        let _ = writeln!(out, "dispersion_h = {h}");
    }
    let _ = writeln!(out, "dealias = {}", c.dealias);

    let _ = writeln!(
        out,
        "\n[time]\ndt = {}\nt_final = {}\nsplitting = {}",
        c.dt,
        c.t_final,
        c.splitting.name()
    );

    let _ = writeln!(out, "\n[datum]\nkind = {}", c.datum.kind());
    match &c.datum {
        InitialDatum::Gaussian {
            amplitude,
            width,
            center,
            wave_vector,
        } => {
            let _ = writeln!(
                out,
                "amplitude = {amplitude}\nwidth = {width}\ncenter = {}\nwave_vector = {}",
                list(&center[..d]),
                list(&wave_vector[..d])
            );
        }
        InitialDatum::Sech { amplitude, width } => {
            let _ = writeln!(out, "amplitude = {amplitude}\nwidth = {width}");
        }
        InitialDatum::Concentrated { scale, regularity } => {
            let _ = writeln!(out, "scale = {scale}\nregularity = {regularity}");
        }
        InitialDatum::PrescribedRegularity { regularity, seed } => {
            let _ = writeln!(out, "regularity = {regularity}\nseed = {seed}");
        }
        InitialDatum::PlaneWave { amplitude, mode } => {
            let modes: Vec<String> = mode[..d].iter().map(|m| m.to_string()).collect();
            let _ = writeln!(out, "amplitude = {amplitude}\nmode = {}", modes.join(", "));
        }
        InitialDatum::File { path } => {
            let _ = writeln!(out, "path = {}", path.display());
        }
    }

    let _ = writeln!(out, "\n[diagnostics]\nevery = {}", c.diagnostics_every);
    if !c.norms.is_empty() {
        let _ = writeln!(out, "norms = {}", list(&c.norms));
    }

    let s = &config.study;
    let mut study = String::new();
    let mut put = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            let _ = writeln!(study, "{key} = {v}");
        }
    };
    put("h_list", s.h_list.as_deref().map(list));
    put("norms", s.norms.as_deref().map(list));
    put("k", s.k.map(|k| k.to_string()));
    put("h_cut", s.h_cut.map(|v| v.to_string()));
    put("perturbation", s.perturbation.as_deref().map(list));
    put("sample_times", s.sample_times.as_deref().map(list));
    put("amplitudes", s.amplitudes.as_deref().map(list));
    if !study.is_empty() {
        let _ = write!(out, "\n[study]\n{study}");
    }
    out
}

/// SHA-256 of the canonical config text, hex encoded.
pub fn config_digest(config: &RunConfig) -> String {
    sha256_hex(canonical_config_text(config).as_bytes())
}

/// Digest of a bare simulation config (no study options).
pub fn simulation_digest(config: &SimulationConfig) -> String {
    config_digest(&RunConfig {
        simulation: config.clone(),
        study: StudyOptions::default(),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn fmt_s(s: f64) -> String {
    s.to_string()
}

/// The diagnostics table as CSV text.
pub fn diagnostics_csv(series: &DiagnosticsSeries) -> String {
    let mut out = String::from("t,mass,energy,h1_norm");
    for (s, _) in &series.sobolev {
        let _ = write!(out, ",hs_{}", fmt_s(*s));
    }
    out.push('\n');
    for i in 0..series.len() {
        let _ = write!(
            out,
            "{},{},{},{}",
            series.times[i], series.mass[i], series.energy[i], series.h1[i]
        );
        for (_, column) in &series.sobolev {
            let _ = write!(out, ",{}", column[i]);
        }
        out.push('\n');
    }
    out
}

pub fn write_diagnostics_csv(series: &DiagnosticsSeries, path: &Path) -> Result<()> {
    fs::write(path, diagnostics_csv(series)).map_err(|e| Error::io(path, e))
}

/// Writes a report as pretty-printed JSON.
pub fn write_report(report: &impl Serialize, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

const FIELD_MAGIC: &str = "# satnls field v1";

/// Writes a field dump: a header with the grid and time, then one
/// `re im` pair per point in row-major order.
pub fn write_field(path: &Path, field: &Field, time: f64) -> Result<()> {
    let g = field.grid();
    let mut out = format!(
        "{FIELD_MAGIC}\ndim {}\nn {}\nlength {}\ntime {}\n",
        g.dim(),
        g.n(),
        g.length(),
        time
    );
    for v in field.values() {
        let _ = writeln!(out, "{} {}", v.re, v.im);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a field dump written by [`write_field`], returning the field and
/// its time stamp.
pub fn read_field(path: &Path) -> Result<(Field, f64)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    if lines.next() != Some(FIELD_MAGIC) {
        return Err(bad("missing field dump header".to_string()));
    }
    let mut header = |name: &str| -> Result<String> {
        let line = lines.next().unwrap_or("");
        line.strip_prefix(name)
            .map(|v| v.trim().to_string())
            .ok_or_else(|| bad(format!("expected '{name}' header line, got '{line}'")))
    };
    let dim: usize = header("dim")?.parse().map_err(|_| bad("bad dim".to_string()))?;
    let n: usize = header("n")?.parse().map_err(|_| bad("bad n".to_string()))?;
    let length: f64 = header("length")?.parse().map_err(|_| bad("bad length".to_string()))?;
    let time: f64 = header("time")?.parse().map_err(|_| bad("bad time".to_string()))?;
    let grid = SpectralGrid::new(dim, n, length)?;
    let mut values = Vec::with_capacity(grid.len());
    for (i, line) in lines.enumerate() {
        let mut parts = line.split_whitespace();
        let parse = |p: Option<&str>| p.and_then(|s| s.parse::<f64>().ok());
        match (parse(parts.next()), parse(parts.next())) {
            (Some(re), Some(im)) => values.push(Complex::new(re, im)),
            _ => return Err(bad(format!("bad value on data line {}", i + 1))),
        }
    }
    Ok((Field::new(grid, values)?, time))
}

/// Provenance record written next to every output set.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RunManifest {
    pub config_digest: String,
    pub tool_version: String,
    pub subcommand: String,
    /// Seconds since the Unix epoch when the run started.
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub seeds: BTreeMap<String, u64>,
    pub outputs: Vec<String>,
}

/// Emits a gnuplot script plotting `columns` of `data_file` against its
/// first column. CSV files are read with their header as column titles.
pub fn gnuplot_script(title: &str, data_file: &str, columns: &[String], log_log: bool) -> String {
    let csv = data_file.ends_with(".csv");
    let mut out = String::new();
    let _ = writeln!(out, "# gnuplot script; run with: gnuplot -p <this file>");
    let _ = writeln!(out, "set title \"{title}\"");
    if log_log {
        let _ = writeln!(out, "set logscale xy");
    }
    let _ = writeln!(out, "set key left top");
    if csv {
        let _ = writeln!(out, "set datafile separator \",\"");
        let _ = writeln!(out, "set key autotitle columnhead");
    }
    let plots: Vec<String> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if csv {
                format!("\"{data_file}\" using 1:{} with lines", i + 2)
            } else {
                format!("\"{data_file}\" using 1:{} with linespoints title \"{c}\"", i + 2)
            }
        })
        .collect();
    let _ = writeln!(out, "plot {}", plots.join(", \\\n     "));
    out
}

/// Whitespace-separated table for gnuplot: `x y1 y2 ...`.
pub fn plot_table(x: &[f64], columns: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for (i, xi) in x.iter().enumerate() {
        let _ = write!(out, "{xi}");
        for c in columns {
            let _ = write!(out, " {}", c.get(i).copied().unwrap_or(f64::NAN));
        }
        out.push('\n');
    }
    out
}
