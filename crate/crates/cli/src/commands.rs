use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use satnls_core::experiments::{
    blowup_prevention_check, continuity_study, convergence_study, cutoff_inflation_counterpart,
    default_h_list, norm_label, ode_inflation_demo, CutoffCounterpart, InflationReport, Verdict,
};
use satnls_core::integrator::Simulation;
use satnls_core::io::{
    config_digest, diagnostics_csv, gnuplot_script, parse_run_config, plot_table, write_field,
    RunConfig, RunManifest,
};
use satnls_core::{
    CutoffProfile, DiagnosticsSeries, Error, InitialDatum, ModelParams, SaturationScheme,
};

use crate::{Common, Outcome};

/// Largest relative mass drift accepted by `conserve`.
const MASS_TOLERANCE: f64 = 1e-11;

pub enum CliError {
    /// Bad flags or config: exit code 2.
    Usage(String),
    /// The run itself failed: exit code 1.
    Run(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Aborted(_) | Error::Io { .. } | Error::Format { .. } => CliError::Run(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

struct Context {
    out: PathBuf,
    config: RunConfig,
    quiet: bool,
    started: Instant,
    started_unix: u64,
    outputs: Vec<String>,
}

impl Context {
    fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Run(Error::io(&path, e).to_string()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Run(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn finish(mut self, subcommand: &str) -> CliResult<()> {
        let mut seeds = BTreeMap::new();
        if let Some(seed) = self.config.simulation.datum.seed() {
            seeds.insert("datum".to_string(), seed);
        }
        self.outputs.push("manifest.json".to_string());
        let manifest = RunManifest {
            config_digest: config_digest(&self.config),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            started_unix: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            seeds,
            outputs: self.outputs.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Run(e.to_string()))?;
        let path = self.out.join("manifest.json");
        fs::write(&path, text + "\n").map_err(|e| CliError::Run(Error::io(&path, e).to_string()))
    }
}

fn load(common: &Common, subcommand: &str) -> CliResult<Context> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| CliError::Usage(Error::io(&common.config, e).to_string()))?;
    let mut config = parse_run_config(&text)?;
    if let Some(seed) = common.seed {
        if config.simulation.datum.seed().is_none() {
            return Err(CliError::Usage(format!(
                "--seed given but datum kind '{}' takes no seed",
                config.simulation.datum.kind()
            )));
        }
        config.simulation.datum = config.simulation.datum.with_seed(seed);
    }
    let takes_h_list = matches!(subcommand, "converge" | "ode-demo");
    if common.h_list.is_some() && !takes_h_list {
        return Err(CliError::Usage(format!("--h-list does not apply to {subcommand}")));
    }
    if let Some(norms) = &common.norms {
        match subcommand {
            "simulate" | "conserve" => config.simulation.norms = norms.clone(),
            "converge" => config.study.norms = Some(norms.clone()),
            _ => return Err(CliError::Usage(format!("--norms does not apply to {subcommand}"))),
        }
    }
    if let Some(h) = &common.h_list {
        config.study.h_list = Some(h.clone());
    }
    fs::create_dir_all(&common.out)
        .map_err(|e| CliError::Run(Error::io(&common.out, e).to_string()))?;
    Ok(Context {
        out: common.out.clone(),
        config,
        quiet: common.quiet,
        started: Instant::now(),
        started_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        outputs: Vec::new(),
    })
}

pub fn run(subcommand: &str, common: &Common) -> CliResult<Outcome> {
    let mut ctx = load(common, subcommand)?;
    let outcome = match subcommand {
        "simulate" => simulate(&mut ctx, false)?,
        "conserve" => simulate(&mut ctx, true)?,
        "converge" => converge(&mut ctx)?,
        "ode-demo" => ode_demo(&mut ctx)?,
        "continuity" => continuity(&mut ctx)?,
        "blowup" => blowup(&mut ctx)?,
        other => return Err(CliError::Usage(format!("unknown subcommand '{other}'"))),
    };
    ctx.finish(subcommand)?;
    Ok(outcome)
}

fn write_diagnostics(ctx: &mut Context, series: &DiagnosticsSeries) -> CliResult<()> {
    ctx.write("diagnostics.csv", &diagnostics_csv(series))?;
    let mut columns = vec!["mass".to_string(), "energy".to_string(), "h1_norm".to_string()];
    columns.extend(series.sobolev.iter().map(|(s, _)| format!("hs_{s}")));
    ctx.write("diagnostics.gp", &gnuplot_script("diagnostics", "diagnostics.csv", &columns, false))
}

#[derive(Serialize)]
struct ConserveReport {
    config_digest: String,
    steps: usize,
    mass_drift: f64,
    energy_drift: Option<f64>,
    tolerance: f64,
    verdict: Verdict,
}

fn simulate(ctx: &mut Context, conserve: bool) -> CliResult<Outcome> {
    let config = ctx.config.simulation.clone();
    let mut sim = Simulation::new(&config)?;
    let mut series = DiagnosticsSeries::with_norms(&config.norms);
    let result = sim.run(&mut series, |_| {});
    write_diagnostics(ctx, &series)?;
    if let Err(Error::Aborted(abort)) = &result {
        ctx.write_json(
            "abort.json",
            &serde_json::json!({
                "step": abort.step,
                "time": abort.time,
                "reason": abort.reason,
                "message": abort.to_string(),
            }),
        )?;
        ctx.say(format!("aborted: {abort}"));
        return Ok(Outcome::Fail);
    }
    result?;
    write_field(&ctx.out.join("final.field"), sim.field(), sim.time())
        .map_err(CliError::from)?;
    ctx.outputs.push("final.field".to_string());

    let mass_drift = series.mass_drift();
    let energy_drift = series
        .energy
        .first()
        .filter(|e| e.is_finite())
        .map(|_| series.energy_drift());
    ctx.say(format!(
        "{} steps to t = {}; relative mass drift {mass_drift:e}",
        sim.total_steps(),
        sim.time()
    ));
    if let Some(e) = energy_drift {
        ctx.say(format!("energy drift {e:e}"));
    }
    if !conserve {
        return Ok(Outcome::Pass);
    }
    let verdict = if mass_drift <= MASS_TOLERANCE {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    ctx.write_json(
        "conserve.json",
        &ConserveReport {
            config_digest: config_digest(&ctx.config),
            steps: sim.total_steps(),
            mass_drift,
            energy_drift,
            tolerance: MASS_TOLERANCE,
            verdict,
        },
    )?;
    ctx.say(format!("verdict: {}", verdict.name()));
    Ok(outcome_of(verdict))
}

fn outcome_of(verdict: Verdict) -> Outcome {
    match verdict {
        Verdict::Fail | Verdict::Inconclusive => Outcome::Fail,
        _ => Outcome::Pass,
    }
}

fn converge(ctx: &mut Context) -> CliResult<Outcome> {
    let h_list = ctx.config.study.h_list.clone().unwrap_or_else(default_h_list);
    let norms = ctx.config.study.norms.clone().unwrap_or_else(|| vec![0.0, 1.0]);
    let report = convergence_study(&ctx.config.simulation, &h_list, &norms)?;
    ctx.write_json("converge.json", &report)?;
    let labels: Vec<String> = norms.iter().map(|&s| norm_label(s)).collect();
    let columns: Vec<Vec<f64>> = labels.iter().map(|l| report.errors[l].clone()).collect();
    ctx.write("rates.dat", &plot_table(&report.h, &columns))?;
    ctx.write("rates.gp", &gnuplot_script("error vs h", "rates.dat", &labels, true))?;
    for d in &report.dropped {
        ctx.say(format!("dropped h = {}: {}", d.h, d.reason));
    }
    for l in &labels {
        match (report.slope.get(l), report.r2.get(l)) {
            (Some(slope), Some(r2)) => ctx.say(format!(
                "{l}: slope {slope:.3} (R^2 {r2:.4}), claimed {}",
                report.claimed_rate[l].map_or("none".to_string(), |r| r.to_string())
            )),
            _ => ctx.say(format!("{l}: too few points to fit")),
        }
    }
    ctx.say(format!("verdict: {}", report.verdict.name()));
    Ok(outcome_of(report.verdict))
}

#[derive(Serialize)]
struct OdeDemoReport {
    inflation: InflationReport,
    cutoff: Option<CutoffCounterpart>,
    verdict: Verdict,
}

fn ode_demo(ctx: &mut Context) -> CliResult<Outcome> {
    let sim = &ctx.config.simulation;
    let InitialDatum::Concentrated { regularity, .. } = sim.datum else {
        return Err(CliError::Usage(
            "ode-demo needs a 'concentrated' datum to read the regularity s from".to_string(),
        ));
    };
    let study = &ctx.config.study;
    let h_list = study.h_list.clone().unwrap_or_else(default_h_list);
    let k = study.k.unwrap_or(1) as f64;
    let inflation = ode_inflation_demo(&sim.grid, sim.params.sigma, regularity, k, &h_list, sim.t_final)?;

    let h_cut = match sim.params.scheme {
        SaturationScheme::Cutoff { h, .. } => Some(h),
        _ => study.h_cut,
    };
    let cutoff = match h_cut {
        Some(h) => {
            let profile = match sim.params.scheme {
                SaturationScheme::Cutoff { profile, .. } => profile,
                _ => CutoffProfile::default(),
            };
            let params = ModelParams {
                scheme: SaturationScheme::Cutoff { h, profile },
                ..sim.params.unsaturated()
            };
            Some(cutoff_inflation_counterpart(&sim.grid, &params, regularity, &h_list, sim.t_final)?)
        }
        None => None,
    };
    let failed = inflation.verdict.is_failure() || cutoff.as_ref().is_some_and(|c| c.verdict.is_failure());
    let verdict = if failed { Verdict::Fail } else { Verdict::Pass };

    ctx.write(
        "inflation.dat",
        &plot_table(&inflation.h, &[inflation.norms.clone(), inflation.initial_norms.clone()]),
    )?;
    ctx.write(
        "inflation.gp",
        &gnuplot_script(
            "homogeneous norm of the ODE solution vs h",
            "inflation.dat",
            &["t".to_string(), "0".to_string()],
            true,
        ),
    )?;
    ctx.say(format!(
        "fitted exponent {:.3} (R^2 {:.4}); stated prediction {:.3}; closed-form asymptote {:.3}; threshold k* = {:.3}",
        inflation.fitted_exponent,
        inflation.r2,
        inflation.predicted_exponent,
        inflation.closed_form_exponent,
        inflation.threshold
    ));
    if let Some(c) = &cutoff {
        ctx.say(format!("cutoff counterpart (h = {}): max growth {:.3}", c.h_cut, c.max_ratio));
    }
    ctx.write_json(
        "ode_demo.json",
        &OdeDemoReport {
            inflation,
            cutoff,
            verdict,
        },
    )?;
    ctx.say(format!("verdict: {}", verdict.name()));
    Ok(outcome_of(verdict))
}

fn continuity(ctx: &mut Context) -> CliResult<Outcome> {
    let sim = ctx.config.simulation.clone();
    let study = &ctx.config.study;
    let perturbations = study.perturbation.clone().unwrap_or_else(|| vec![1e-3, 5e-4]);
    let times = study
        .sample_times
        .clone()
        .unwrap_or_else(|| (1..=4).map(|j| sim.t_final * j as f64 / 4.0).collect());
    let report = continuity_study(&sim, &perturbations, &times)?;
    let columns: Vec<Vec<f64>> = report.reports.iter().map(|r| r.ratios.clone()).collect();
    let labels: Vec<String> = perturbations.iter().map(|p| format!("delta = {p}")).collect();
    ctx.write("continuity.dat", &plot_table(&times, &columns))?;
    ctx.write(
        "continuity.gp",
        &gnuplot_script("separation ratio vs t", "continuity.dat", &labels, false),
    )?;
    for (p, r) in perturbations.iter().zip(&report.reports) {
        ctx.say(format!("delta = {p}: C = {:.4}", r.growth_constant));
    }
    ctx.say(format!(
        "relative change {:.3}; gauge deviation {:e}",
        report.relative_change, report.gauge_deviation
    ));
    ctx.say(format!("verdict: {}", report.verdict.name()));
    let verdict = report.verdict;
    ctx.write_json("continuity.json", &report)?;
    Ok(outcome_of(verdict))
}

fn blowup(ctx: &mut Context) -> CliResult<Outcome> {
    let sim = ctx.config.simulation.clone();
    let study = &ctx.config.study;
    let amplitudes = study
        .amplitudes
        .clone()
        .unwrap_or_else(|| vec![1.0, 1.5, 2.0, 2.5, 3.0]);
    let saturated = if sim.params.scheme.is_saturated() {
        vec![sim.params]
    } else {
        let base = sim.params.unsaturated();
        vec![
            ModelParams {
                scheme: SaturationScheme::Cutoff {
                    h: study.h_cut.unwrap_or(0.5),
                    profile: CutoffProfile::default(),
                },
                ..base
            },
            ModelParams {
                scheme: SaturationScheme::Rational { h: 0.5 },
                ..base
            },
        ]
    };
    let report = blowup_prevention_check(&sim, &amplitudes, &saturated)?;
    for s in &report.nls_scan {
        ctx.say(format!(
            "none, A = {}: {} (max H1 growth {:.3e})",
            s.amplitude,
            s.outcome.abort_reason.as_deref().unwrap_or("completed"),
            s.outcome.max_h1_ratio
        ));
    }
    for o in &report.saturated_outcomes {
        ctx.say(format!(
            "{}: {} (max H1 growth {:.3})",
            o.scheme,
            o.abort_reason.as_deref().unwrap_or("completed"),
            o.max_h1_ratio
        ));
    }
    ctx.say(&report.message);
    ctx.say(format!("verdict: {}", report.verdict.name()));
    let verdict = report.verdict;
    ctx.write_json("blowup.json", &report)?;
    Ok(outcome_of(verdict))
}
