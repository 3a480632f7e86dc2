//! Model ingredients: the cut-off profile, frequency projection, dispersion
//! symbols, saturated potentials and the conserved quantities.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::spectral::{Complex, FftEngine, Field, SpectralGrid};

/// Absolute tolerance for `F_h` quadrature.
pub const ENERGY_QUADRATURE_TOL: f64 = 1e-10;

/// Decay rate of the Gaussian-tail cut-off beyond the unit ball.
pub const GAUSSIAN_TAIL_RATE: f64 = 4.0;

/// `exp(-1/t)` for `t > 0`, zero otherwise.
fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step from 0 (at `t <= 0`) to 1 (at `t >= 1`).
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = bump(t);
        a / (a + bump(1.0 - t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum CutoffProfile {
    /// Equal to one on `|ξ| <= 1`, zero on `|ξ| >= 2`, C^∞ in between.
    #[default]
    SmoothCompact,
    /// Equal to one on `|ξ| <= 1`, Gaussian tail `exp(-4(|ξ|-1)²)` beyond.
    Gaussian,
    /// Indicator of the unit ball. Not smooth; ablation only.
    Sharp,
}

impl CutoffProfile {
    pub fn name(self) -> &'static str {
        match self {
            CutoffProfile::SmoothCompact => "smooth-compact",
            CutoffProfile::Gaussian => "gaussian",
            CutoffProfile::Sharp => "sharp",
        }
    }

    pub fn is_smooth(self) -> bool {
        !matches!(self, CutoffProfile::Sharp)
    }

    /// Radial profile value at `r = |ξ|`.
    pub fn radial(self, r: f64) -> f64 {
        match self {
            CutoffProfile::SmoothCompact => 1.0 - smooth_step(r - 1.0),
            CutoffProfile::Gaussian => {
                if r <= 1.0 {
                    1.0
                } else {
                    (-(r - 1.0).powi(2) * GAUSSIAN_TAIL_RATE).exp()
                }
            }
            CutoffProfile::Sharp => {
                if r <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for CutoffProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CutoffProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth-compact" => Ok(CutoffProfile::SmoothCompact),
            "gaussian" => Ok(CutoffProfile::Gaussian),
            "sharp" => Ok(CutoffProfile::Sharp),
            other => Err(Error::InvalidParameter(format!(
                "unknown cut-off profile '{other}' (expected smooth-compact, gaussian or sharp)"
            ))),
        }
    }
}

/// `χ(ξ)`.
pub fn chi_eval(profile: CutoffProfile, xi: &[f64]) -> f64 {
    let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    profile.radial(r)
}

/// The replacement for `|u|^{2σ}` in the nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum SaturationScheme {
    #[default]
    None,
    /// `(Π_h |u|²)^σ` with `Π_h` the multiplier of symbol `χ(hξ)`.
    Cutoff { h: f64, profile: CutoffProfile },
    /// `f_h(|u|²)^σ` with the smooth plateau `f`.
    Plateau { h: f64 },
    /// `(|u|² / (1 + h|u|²))^σ`.
    Rational { h: f64 },
}

impl SaturationScheme {
    pub fn name(&self) -> &'static str {
        match self {
            SaturationScheme::None => "none",
            SaturationScheme::Cutoff { .. } => "cutoff",
            SaturationScheme::Plateau { .. } => "plateau",
            SaturationScheme::Rational { .. } => "rational-sat",
        }
    }

    pub fn h(&self) -> Option<f64> {
        match *self {
            SaturationScheme::None => None,
            SaturationScheme::Cutoff { h, .. }
            | SaturationScheme::Plateau { h }
            | SaturationScheme::Rational { h } => Some(h),
        }
    }

    pub fn with_h(self, h: f64) -> Self {
        match self {
            SaturationScheme::None => SaturationScheme::None,
            SaturationScheme::Cutoff { profile, .. } => SaturationScheme::Cutoff { h, profile },
            SaturationScheme::Plateau { .. } => SaturationScheme::Plateau { h },
            SaturationScheme::Rational { .. } => SaturationScheme::Rational { h },
        }
    }

    pub fn is_saturated(&self) -> bool {
        !matches!(self, SaturationScheme::None)
    }

    /// Builds a scheme from its config identifier.
    pub fn from_name(name: &str, h: f64, profile: CutoffProfile) -> Result<Self> {
        Ok(match name {
            "none" => SaturationScheme::None,
            "cutoff" => SaturationScheme::Cutoff { h, profile },
            "plateau" => SaturationScheme::Plateau { h },
            "rational-sat" => SaturationScheme::Rational { h },
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown saturation '{other}' (expected none, cutoff, plateau or rational-sat)"
                )))
            }
        })
    }

    fn validate(&self) -> Result<()> {
        if let Some(h) = self.h() {
            check_h(h, "saturation")?;
        }
        Ok(())
    }

    /// Saturated density `f_h(ρ)` for the physical schemes; `ρ` otherwise.
    pub fn saturate(&self, rho: f64) -> f64 {
        match *self {
            SaturationScheme::Plateau { h } => plateau(h * rho) / h,
            SaturationScheme::Rational { h } => rho / (1.0 + h * rho),
            _ => rho,
        }
    }
}

fn check_h(h: f64, what: &str) -> Result<()> {
    if h.is_finite() && h > 0.0 && h <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} parameter h must lie in (0, 1], got {h}"
        )))
    }
}

/// The plateau function: identity on `[0, 1]`, equal to 2 on `[2, ∞)`.
pub fn plateau(s: f64) -> f64 {
    if s <= 1.0 {
        s
    } else if s >= 2.0 {
        2.0
    } else {
        s + (2.0 - s) * smooth_step(s - 1.0)
    }
}

/// `P_h(ξ)`, the (possibly truncated) dispersion symbol.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum DispersionSymbol {
    /// `-|ξ|²`.
    #[default]
    Laplacian,
    /// `-|ξ|² / (1 + h|ξ|²)`.
    Rational { h: f64 },
    /// `-arctan(h|ξ|²) / h`.
    Arctan { h: f64 },
}

impl DispersionSymbol {
    pub fn name(&self) -> &'static str {
        match self {
            DispersionSymbol::Laplacian => "laplacian",
            DispersionSymbol::Rational { .. } => "rational",
            DispersionSymbol::Arctan { .. } => "arctan",
        }
    }

    pub fn from_name(name: &str, h: f64) -> Result<Self> {
        Ok(match name {
            "laplacian" => DispersionSymbol::Laplacian,
            "rational" => DispersionSymbol::Rational { h },
            "arctan" => DispersionSymbol::Arctan { h },
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown dispersion '{other}' (expected laplacian, rational or arctan)"
                )))
            }
        })
    }

    pub fn h(&self) -> Option<f64> {
        match *self {
            DispersionSymbol::Laplacian => None,
            DispersionSymbol::Rational { h } | DispersionSymbol::Arctan { h } => Some(h),
        }
    }

    pub fn with_h(self, h: f64) -> Self {
        match self {
            DispersionSymbol::Laplacian => DispersionSymbol::Laplacian,
            DispersionSymbol::Rational { .. } => DispersionSymbol::Rational { h },
            DispersionSymbol::Arctan { .. } => DispersionSymbol::Arctan { h },
        }
    }

    /// Value at `|ξ|² = xi_sq`.
    pub fn at_norm_sq(&self, xi_sq: f64) -> f64 {
        match *self {
            DispersionSymbol::Laplacian => -xi_sq,
            DispersionSymbol::Rational { h } => -xi_sq / (1.0 + h * xi_sq),
            DispersionSymbol::Arctan { h } => -(h * xi_sq).atan() / h,
        }
    }

    /// Claimed approximation orders `(α, β)` in `P_h = -|ξ|² + O(h^α ⟨ξ⟩^β)`.
    ///
    /// These are carried as stated for the truncated symbols and are not
    /// asserted anywhere; convergence studies measure the actual rate.
    pub fn claimed_orders(&self) -> Option<(f64, f64)> {
        match self {
            DispersionSymbol::Laplacian => None,
            DispersionSymbol::Rational { .. } | DispersionSymbol::Arctan { .. } => Some((1.0, 2.0)),
        }
    }
}

/// `P_h(ξ)`.
pub fn dispersion_eval(symbol: DispersionSymbol, xi: &[f64]) -> f64 {
    symbol.at_norm_sq(xi.iter().map(|v| v * v).sum())
}

/// Sign of the nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Sign {
    #[default]
    Defocusing,
    Focusing,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Defocusing => 1.0,
            Sign::Focusing => -1.0,
        }
    }

    pub fn from_value(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Sign::Defocusing),
            -1 => Ok(Sign::Focusing),
            other => Err(Error::InvalidParameter(format!(
                "epsilon must be +1 or -1, got {other}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub sigma: u32,
    pub sign: Sign,
    pub scheme: SaturationScheme,
    pub dispersion: DispersionSymbol,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            sigma: 1,
            sign: Sign::Defocusing,
            scheme: SaturationScheme::None,
            dispersion: DispersionSymbol::Laplacian,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.sigma < 1 {
            return Err(Error::InvalidParameter(
                "sigma must be an integer >= 1".to_string(),
            ));
        }
        self.scheme.validate()?;
        if let Some(h) = self.dispersion.h() {
            check_h(h, "dispersion")?;
        }
        Ok(())
    }

    /// Sets the saturation parameter, and the dispersion parameter when the
    /// symbol is truncated (the two are coupled in convergence sweeps).
    pub fn with_h(self, h: f64) -> Self {
        Self {
            scheme: self.scheme.with_h(h),
            dispersion: self.dispersion.with_h(h),
            ..self
        }
    }

    /// The unsaturated model with the exact Laplacian.
    pub fn unsaturated(self) -> Self {
        Self {
            scheme: SaturationScheme::None,
            dispersion: DispersionSymbol::Laplacian,
            ..self
        }
    }

    /// Critical Sobolev index `d/2 - 1/σ`.
    pub fn critical_index(&self, dim: usize) -> f64 {
        dim as f64 / 2.0 - 1.0 / self.sigma as f64
    }
}

/// Checks that the cut-off radius `2/h` stays below `(2/3)·ξ_max`.
pub fn check_resolution(scheme: &SaturationScheme, grid: &SpectralGrid) -> Result<()> {
    if let SaturationScheme::Cutoff { h, .. } = *scheme {
        let radius = 2.0 / h;
        let limit = 2.0 / 3.0 * grid.nyquist();
        if radius > limit {
            return Err(Error::Resolution {
                radius,
                nyquist: grid.nyquist(),
                required_n: grid.required_points_for(radius),
            });
        }
    }
    Ok(())
}

/// `Π_h f`: multiplies the spectrum by `χ(hξ)`.
pub fn project_low(field: &Field, h: f64, profile: CutoffProfile) -> Result<Field> {
    check_h(h, "cut-off")?;
    let grid = *field.grid();
    check_resolution(&SaturationScheme::Cutoff { h, profile }, &grid)?;
    let table = cutoff_table(&grid, h, profile);
    let mut values = field.values().to_vec();
    FftEngine::new(grid).apply_real_symbol(&mut values, &table);
    Field::new(grid, values)
}

pub(crate) fn cutoff_table(grid: &SpectralGrid, h: f64, profile: CutoffProfile) -> Vec<f64> {
    grid.frequency_norms_sq()
        .into_iter()
        .map(|k2| profile.radial(h * k2.sqrt()))
        .collect()
}

/// `Σ |u|² dx^d`.
pub fn mass(field: &Field) -> f64 {
    field.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * field.grid().cell_volume()
}

/// `F_h(s) = ∫_0^s f_h(y)^σ dy` for the physical saturations.
pub fn saturated_primitive(scheme: &SaturationScheme, sigma: u32, s: f64) -> f64 {
    let p = sigma as i32;
    let power = |y: f64| y.powi(p + 1) / (p + 1) as f64;
    match *scheme {
        SaturationScheme::Rational { h } if sigma == 1 => (s - (h * s).ln_1p() / h) / h,
        SaturationScheme::Rational { h } => adaptive_simpson(
            |y| (y / (1.0 + h * y)).powi(p),
            0.0,
            s,
            ENERGY_QUADRATURE_TOL,
        ),
        SaturationScheme::Plateau { h } => {
            // Identity below 1/h, constant 2/h above 2/h.
            let knee = 1.0 / h;
            if s <= knee {
                return power(s);
            }
            let top = s.min(2.0 * knee);
            let mut total = power(knee)
                + adaptive_simpson(
                    |y| (plateau(h * y) / h).powi(p),
                    knee,
                    top,
                    ENERGY_QUADRATURE_TOL,
                );
            if s > 2.0 * knee {
                total += (2.0 * knee).powi(p) * (s - 2.0 * knee);
            }
            total
        }
        SaturationScheme::None | SaturationScheme::Cutoff { .. } => power(s),
    }
}

/// Precomputed symbol tables and FFT plans for one model on one grid.
#[derive(Debug)]
pub struct Model {
    grid: SpectralGrid,
    params: ModelParams,
    engine: FftEngine,
    dispersion: Vec<f64>,
    cutoff: Option<Vec<f64>>,
    dealias: Option<Vec<f64>>,
    scratch: Vec<Complex>,
}

impl Model {
    pub fn new(grid: SpectralGrid, params: ModelParams) -> Result<Self> {
        params.validate()?;
        check_resolution(&params.scheme, &grid)?;
        let dispersion = grid
            .frequency_norms_sq()
            .into_iter()
            .map(|k2| params.dispersion.at_norm_sq(k2))
            .collect();
        let cutoff = match params.scheme {
            SaturationScheme::Cutoff { h, profile } => Some(cutoff_table(&grid, h, profile)),
            _ => None,
        };
        Ok(Self {
            grid,
            params,
            engine: FftEngine::new(grid),
            dispersion,
            cutoff,
            dealias: None,
            scratch: Vec::with_capacity(grid.len()),
        })
    }

    /// Filters the plain `|u|^{2σ}` potential with the 2/3 rule.
    ///
    /// Only meaningful without saturation; the filtered potential stays real,
    /// so the potential substep remains unitary.
    pub fn with_dealiasing(mut self, enabled: bool) -> Self {
        self.dealias = if enabled && !self.params.scheme.is_saturated() {
            let limit = 2.0 / 3.0 * self.grid.nyquist();
            Some(self.grid.symbol_table(|xi| {
                if xi.iter().all(|v| v.abs() < limit) {
                    1.0
                } else {
                    0.0
                }
            }))
        } else {
            None
        };
        self
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// `P(ξ_k)` in FFT order.
    pub fn dispersion_table(&self) -> &[f64] {
        &self.dispersion
    }

    pub fn engine_mut(&mut self) -> &mut FftEngine {
        &mut self.engine
    }

    /// Real potential `V` with the model right-hand side `ε V u`.
    pub fn potential(&mut self, u: &[Complex], out: &mut Vec<f64>) {
        self.potential_with_residue(u, out);
    }

    /// Like [`Model::potential`], also returning the largest discarded
    /// imaginary part of the projected density.
    pub fn potential_with_residue(&mut self, u: &[Complex], out: &mut Vec<f64>) -> f64 {
        let sigma = self.params.sigma as i32;
        out.clear();
        let filter = self.cutoff.as_ref().or(self.dealias.as_ref());
        let Some(table) = filter else {
            let scheme = self.params.scheme;
            out.extend(u.iter().map(|v| scheme.saturate(v.norm_sqr()).powi(sigma)));
            return 0.0;
        };
        let table = table.clone();
        let mut rho = std::mem::take(&mut self.scratch);
        rho.clear();
        if self.cutoff.is_some() {
            rho.extend(u.iter().map(|v| Complex::new(v.norm_sqr(), 0.0)));
        } else {
            rho.extend(
                u.iter()
                    .map(|v| Complex::new(v.norm_sqr().powi(sigma), 0.0)),
            );
        }
        self.engine.apply_real_symbol(&mut rho, &table);
        let mut residue = 0.0f64;
        let power = if self.cutoff.is_some() { sigma } else { 1 };
        out.extend(rho.iter().map(|v| {
            residue = residue.max(v.im.abs());
            v.re.powi(power)
        }));
        self.scratch = rho;
        residue
    }

    /// Kinetic energy `Σ (-P(ξ)) |û|² dξ^d`.
    pub fn kinetic_energy(&mut self, u: &[Complex]) -> f64 {
        let weights: Vec<f64> = self.dispersion.iter().map(|p| -p).collect();
        self.engine.weighted_spectral_sum(u, &weights)
    }

    /// The conserved energy of this model, when one is known.
    ///
    /// `None` for the frequency cut-off with `σ >= 2`, which has no
    /// Hamiltonian structure.
    pub fn energy(&mut self, u: &[Complex]) -> Option<f64> {
        let kinetic = self.kinetic_energy(u);
        let eps = self.params.sign.value();
        let dv = self.grid.cell_volume();
        let sigma = self.params.sigma;
        let potential = match self.params.scheme {
            SaturationScheme::Cutoff { .. } if sigma == 1 => {
                let table = self.cutoff.clone().expect("cut-off table");
                let rho: Vec<Complex> = u.iter().map(|v| Complex::new(v.norm_sqr(), 0.0)).collect();
                0.5 * self.engine.weighted_spectral_sum(&rho, &table)
            }
            SaturationScheme::Cutoff { .. } => return None,
            scheme => {
                u.iter()
                    .map(|v| saturated_primitive(&scheme, sigma, v.norm_sqr()))
                    .sum::<f64>()
                    * dv
            }
        };
        Some(kinetic + eps * potential)
    }
}

/// `V` such that the model right-hand side is `ε V u`.
pub fn nonlinear_potential(field: &Field, params: &ModelParams) -> Result<Vec<f64>> {
    let mut model = Model::new(*field.grid(), *params)?;
    let mut out = Vec::with_capacity(field.grid().len());
    model.potential(field.values(), &mut out);
    Ok(out)
}

/// Energy of the cubic frequency-saturated model,
/// `Σ (-P)|û|² dξ^d + (ε/2) Σ χ(hξ) |ρ̂|² dξ^d` with `ρ = |u|²`.
pub fn energy_cubic_cutoff(field: &Field, params: &ModelParams) -> Result<f64> {
    if params.sigma != 1 || !matches!(params.scheme, SaturationScheme::Cutoff { .. }) {
        return Err(Error::InvalidParameter(
            "cubic cut-off energy needs sigma = 1 and the cutoff scheme".to_string(),
        ));
    }
    let mut model = Model::new(*field.grid(), *params)?;
    Ok(model.energy(field.values()).expect("cubic cut-off energy"))
}

/// Energy of the physically saturated model,
/// `Σ (-P)|û|² dξ^d + ε Σ F_h(|u|²) dx^d`.
pub fn energy_saturated(field: &Field, params: &ModelParams) -> Result<f64> {
    if !matches!(
        params.scheme,
        SaturationScheme::Plateau { .. } | SaturationScheme::Rational { .. }
    ) {
        return Err(Error::InvalidParameter(
            "saturated energy needs the plateau or rational-sat scheme".to_string(),
        ));
    }
    let mut model = Model::new(*field.grid(), *params)?;
    Ok(model.energy(field.values()).expect("saturated energy"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{lp_norm, sobolev_norm};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(grid: SpectralGrid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_fn(grid, |_| {
            Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn gaussian(grid: SpectralGrid, amplitude: f64) -> Field {
        Field::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Complex::new(amplitude * (-0.5 * r2).exp(), 0.0)
        })
    }

    fn cutoff(h: f64) -> SaturationScheme {
        SaturationScheme::Cutoff {
            h,
            profile: CutoffProfile::SmoothCompact,
        }
    }

    #[test]
    fn chi_values() {
        for p in [CutoffProfile::SmoothCompact, CutoffProfile::Gaussian, CutoffProfile::Sharp] {
            assert_eq!(chi_eval(p, &[0.0]), 1.0);
            assert_eq!(chi_eval(p, &[0.6, 0.8]), 1.0);
        }
        assert_eq!(chi_eval(CutoffProfile::SmoothCompact, &[3.0]), 0.0);
        assert_eq!(chi_eval(CutoffProfile::SmoothCompact, &[2.0]), 0.0);
        assert_eq!(chi_eval(CutoffProfile::Sharp, &[1.01]), 0.0);
        assert_relative_eq!(chi_eval(CutoffProfile::SmoothCompact, &[1.5]), 0.5, epsilon = 1e-15);
        assert_relative_eq!(
            chi_eval(CutoffProfile::Gaussian, &[2.0]),
            (-4.0f64).exp(),
            max_relative = 1e-15
        );
        assert!(!CutoffProfile::Sharp.is_smooth());
    }

    #[test]
    fn chi_is_even_and_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let xi: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let neg: Vec<f64> = xi.iter().map(|v| -v).collect();
            for p in [CutoffProfile::SmoothCompact, CutoffProfile::Gaussian, CutoffProfile::Sharp] {
                let a = chi_eval(p, &xi);
                assert_eq!(a, chi_eval(p, &neg));
                assert!((0.0..=1.0).contains(&a));
            }
        }
    }

    #[test]
    fn smooth_profile_is_monotone() {
        let mut last = 1.0;
        for i in 0..=400 {
            let v = CutoffProfile::SmoothCompact.radial(1.0 + i as f64 / 400.0);
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn plateau_shape() {
        assert_eq!(plateau(0.5), 0.5);
        assert_eq!(plateau(1.0), 1.0);
        assert_eq!(plateau(2.0), 2.0);
        assert_eq!(plateau(7.0), 2.0);
        let mut last = 1.0;
        for i in 1..200 {
            let v = plateau(1.0 + i as f64 / 200.0);
            assert!(v >= last && v <= 2.0);
            last = v;
        }
        let scheme = SaturationScheme::Plateau { h: 0.1 };
        assert_eq!(scheme.saturate(5.0), 5.0);
        assert_relative_eq!(scheme.saturate(100.0), 20.0);
    }

    #[test]
    fn dispersion_values() {
        let r = DispersionSymbol::Rational { h: 1.0 };
        assert_relative_eq!(dispersion_eval(r, &[1.0]), -0.5);
        assert_eq!(dispersion_eval(DispersionSymbol::Arctan { h: 0.3 }, &[0.0]), 0.0);
        assert_eq!(dispersion_eval(DispersionSymbol::Laplacian, &[1.0, 2.0]), -5.0);

        let r = DispersionSymbol::Rational { h: 0.01 };
        let v = dispersion_eval(r, &[1.0]);
        assert_relative_eq!(v, -1.0 / 1.01, max_relative = 1e-15);
        let deviation = v + 1.0;
        assert_relative_eq!(deviation, 0.01 / 1.01, max_relative = 1e-12);
        assert!(deviation <= 0.01 * 2f64.powi(2));
        assert_eq!(r.claimed_orders(), Some((1.0, 2.0)));
    }

    #[test]
    fn truncated_symbols_sit_between_laplacian_and_zero() {
        let grid = SpectralGrid::new(2, 32, 3.0).unwrap();
        for h in [1.0, 0.3, 0.01] {
            for sym in [DispersionSymbol::Rational { h }, DispersionSymbol::Arctan { h }] {
                for k in 0..grid.len() {
                    let xi = grid.wavevector(k);
                    let p = dispersion_eval(sym, &xi[..2]);
                    let neg: Vec<f64> = xi[..2].iter().map(|v| -v).collect();
                    assert_eq!(p, dispersion_eval(sym, &neg));
                    assert!(p <= 0.0);
                    assert!(p >= dispersion_eval(DispersionSymbol::Laplacian, &xi[..2]));
                }
            }
        }
    }

    #[test]
    fn band_limited_fields_pass_through_projection() {
        let grid = SpectralGrid::new(1, 64, 2.0 * PI).unwrap();
        let h = 0.25;
        // Modes up to |ξ| = 4 = 1/h.
        let f = Field::from_fn(grid, |x| {
            Complex::from_polar(1.0, 4.0 * x[0]) + Complex::from_polar(0.5, -3.0 * x[0]) + 0.2
        });
        let p = project_low(&f, h, CutoffProfile::SmoothCompact).unwrap();
        assert!(lp_norm(&p.sub(&f).unwrap(), f64::INFINITY).unwrap() < 1e-13);

        let high = Field::from_fn(grid, |x| Complex::from_polar(1.0, 8.0 * x[0]));
        let p = project_low(&high, h, CutoffProfile::SmoothCompact).unwrap();
        assert!(lp_norm(&p, f64::INFINITY).unwrap() < 1e-14);
    }

    #[test]
    fn projection_reports_required_resolution() {
        let grid = SpectralGrid::new(1, 64, 2.0 * PI).unwrap();
        let f = Field::zeros(grid);
        match project_low(&f, 0.01, CutoffProfile::SmoothCompact) {
            Err(Error::Resolution { required_n, radius, .. }) => {
                assert_relative_eq!(radius, 200.0, max_relative = 1e-12);
                assert_eq!(required_n, 1024);
            }
            other => panic!("expected resolution error, got {other:?}"),
        }
        assert!(project_low(&f, 0.0, CutoffProfile::SmoothCompact).is_err());
    }

    #[test]
    fn projection_contracts_and_is_self_adjoint() {
        let grid = SpectralGrid::new(1, 128, 2.0 * PI).unwrap();
        for seed in 0..100 {
            let f = random_field(grid, seed);
            let g = random_field(grid, 1000 + seed);
            for profile in [CutoffProfile::SmoothCompact, CutoffProfile::Gaussian] {
                let pf = project_low(&f, 0.1, profile).unwrap();
                let pg = project_low(&g, 0.1, profile).unwrap();
                assert!(lp_norm(&pf, 2.0).unwrap() <= lp_norm(&f, 2.0).unwrap());
                let a = pf.inner(&g).unwrap();
                let b = f.inner(&pg).unwrap();
                assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300) + 1e-14);
            }
        }
    }

    #[test]
    fn double_projection_squares_the_symbol() {
        let grid = SpectralGrid::new(2, 32, 2.0 * PI).unwrap();
        let f = random_field(grid, 9);
        let h = 0.2;
        let profile = CutoffProfile::SmoothCompact;
        let twice = project_low(&project_low(&f, h, profile).unwrap(), h, profile).unwrap();
        let squared = crate::spectral::apply_multiplier(&f, |xi| {
            let c = chi_eval(profile, &[h * xi[0], h * xi[1]]);
            Complex::new(c * c, 0.0)
        });
        assert!(lp_norm(&twice.sub(&squared).unwrap(), 2.0).unwrap() < 1e-12);
    }

    #[test]
    fn potential_special_cases() {
        let grid = SpectralGrid::new(1, 32, 2.0 * PI).unwrap();
        let f = random_field(grid, 1);
        let v = nonlinear_potential(&f, &ModelParams::default()).unwrap();
        for (vi, ui) in v.iter().zip(f.values()) {
            assert_eq!(*vi, ui.norm_sqr());
        }

        let c = Field::from_fn(grid, |_| Complex::from_polar(1.0, 0.4));
        let params = ModelParams {
            scheme: SaturationScheme::Rational { h: 1.0 },
            ..Default::default()
        };
        for vi in nonlinear_potential(&c, &params).unwrap() {
            assert_relative_eq!(vi, 0.5, max_relative = 1e-15);
        }

        let c = Field::from_fn(grid, |_| Complex::new(1.2, -0.3));
        for sigma in 1..=3 {
            let params = ModelParams {
                sigma,
                scheme: cutoff(0.5),
                ..Default::default()
            };
            let expected = (1.2f64 * 1.2 + 0.09).powi(sigma as i32);
            for vi in nonlinear_potential(&c, &params).unwrap() {
                assert_relative_eq!(vi, expected, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn cutoff_potential_is_real() {
        let grid = SpectralGrid::new(2, 32, 2.0 * PI).unwrap();
        for seed in 0..10 {
            let f = random_field(grid, seed);
            for profile in [CutoffProfile::SmoothCompact, CutoffProfile::Gaussian, CutoffProfile::Sharp] {
                let params = ModelParams {
                    sigma: 2,
                    scheme: SaturationScheme::Cutoff { h: 0.5, profile },
                    ..Default::default()
                };
                let mut model = Model::new(grid, params).unwrap();
                let mut v = Vec::new();
                let residue = model.potential_with_residue(f.values(), &mut v);
                let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
                assert!(residue <= 1e-12 * scale.sqrt().max(1.0));
            }
        }
    }

    #[test]
    fn potential_converges_as_h_shrinks() {
        let grid = SpectralGrid::new(1, 1024, 16.0).unwrap();
        let f = gaussian(grid, 1.3);
        let exact: Vec<f64> = f.values().iter().map(|v| v.norm_sqr().powi(2)).collect();
        for scheme in [
            cutoff(1.0),
            SaturationScheme::Plateau { h: 1.0 },
            SaturationScheme::Rational { h: 1.0 },
        ] {
            let mut last = f64::INFINITY;
            let mut first = None;
            for j in 0..7 {
                let h = 0.5f64.powi(j);
                let params = ModelParams {
                    sigma: 2,
                    scheme: scheme.with_h(h),
                    ..Default::default()
                };
                let v = nonlinear_potential(&f, &params).unwrap();
                let err = v.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err <= last, "{scheme:?} h={h}: {err} > {last}");
                last = err;
                first.get_or_insert(err);
            }
            assert!(last <= first.unwrap() / 16.0, "{scheme:?}: {last}");
        }
    }

    #[test]
    fn plateau_agrees_with_plain_potential_below_the_knee() {
        let grid = SpectralGrid::new(1, 128, 16.0).unwrap();
        let f = gaussian(grid, 2.0);
        // sup |u|² = 4 <= 1/h.
        let params = ModelParams {
            sigma: 3,
            scheme: SaturationScheme::Plateau { h: 0.25 },
            ..Default::default()
        };
        let sat = nonlinear_potential(&f, &params).unwrap();
        let plain = nonlinear_potential(&f, &params.unsaturated()).unwrap();
        assert_eq!(sat, plain);
    }

    #[test]
    fn mass_values() {
        let grid = SpectralGrid::new(2, 16, 3.0).unwrap();
        assert_eq!(mass(&Field::zeros(grid)), 0.0);
        let c = Complex::new(0.3, 0.4);
        assert_relative_eq!(mass(&Field::from_fn(grid, |_| c)), 0.25 * 9.0, max_relative = 1e-14);
        let f = random_field(grid, 2);
        assert_relative_eq!(mass(&f), sobolev_norm(&f, 0.0, false).unwrap().powi(2), max_relative = 1e-13);
    }

    #[test]
    fn cubic_energy_of_simple_fields() {
        let grid = SpectralGrid::new(1, 32, 2.0 * PI).unwrap();
        let params = ModelParams {
            scheme: cutoff(0.5),
            ..Default::default()
        };
        assert_eq!(energy_cubic_cutoff(&Field::zeros(grid), &params).unwrap(), 0.0);

        // Plane wave: kinetic part is |P(ξ_j)| |A|² L, potential (ε/2)|A|⁴ L.
        let a = 0.7;
        let f = Field::from_fn(grid, |x| Complex::from_polar(a, 3.0 * x[0]));
        let e = energy_cubic_cutoff(&f, &params).unwrap();
        let kinetic = 9.0 * a * a * 2.0 * PI;
        let potential = 0.5 * a.powi(4) * 2.0 * PI;
        assert_relative_eq!(e, kinetic + potential, max_relative = 1e-12);
        let mut model = Model::new(grid, params).unwrap();
        assert_relative_eq!(model.kinetic_energy(f.values()), kinetic, max_relative = 1e-12);

        let bad = ModelParams { sigma: 2, ..params };
        assert!(energy_cubic_cutoff(&f, &bad).is_err());
        assert!(energy_cubic_cutoff(&f, &ModelParams::default()).is_err());
    }

    /// `Σ_x Σ_y K(x-y) ρ(y) ρ(x) dx²` with the periodic kernel
    /// `K(z) = L^{-d} Σ_k χ(hξ_k) e^{iξ_k z}` summed directly.
    fn double_sum_interaction(f: &Field, h: f64, profile: CutoffProfile) -> f64 {
        let grid = *f.grid();
        let n = grid.n();
        let dx = grid.dx();
        let modes = grid.axis_frequencies();
        let kernel: Vec<f64> = (0..n)
            .map(|j| {
                let z = j as f64 * dx;
                modes
                    .iter()
                    .map(|xi| profile.radial(h * xi.abs()) * (xi * z).cos())
                    .sum::<f64>()
                    / grid.length()
            })
            .collect();
        let rho: Vec<f64> = f.values().iter().map(|v| v.norm_sqr()).collect();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                total += kernel[(i + n - j) % n] * rho[i] * rho[j];
            }
        }
        total * dx * dx
    }

    #[test]
    fn cubic_energy_matches_double_sum() {
        let grid = SpectralGrid::new(1, 32, 2.0 * PI).unwrap();
        for seed in 0..5 {
            let f = random_field(grid, seed);
            for profile in [CutoffProfile::SmoothCompact, CutoffProfile::Gaussian] {
                for sign in [Sign::Defocusing, Sign::Focusing] {
                    let params = ModelParams {
                        sign,
                        scheme: SaturationScheme::Cutoff { h: 0.5, profile },
                        ..Default::default()
                    };
                    let mut model = Model::new(grid, params).unwrap();
                    let kinetic = model.kinetic_energy(f.values());
                    let interaction = double_sum_interaction(&f, 0.5, profile);
                    let direct = kinetic + 0.5 * sign.value() * interaction;
                    let spectral = energy_cubic_cutoff(&f, &params).unwrap();
                    assert_relative_eq!(spectral, direct, max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn saturated_primitive_values() {
        let r = SaturationScheme::Rational { h: 0.5 };
        for s in [0.0, 0.3, 2.0, 40.0] {
            let quad = adaptive_simpson(|y| y / (1.0 + 0.5 * y), 0.0, s, 1e-12);
            assert_relative_eq!(saturated_primitive(&r, 1, s), quad, max_relative = 1e-9, epsilon = 1e-14);
        }
        let p = SaturationScheme::Plateau { h: 0.5 };
        assert_relative_eq!(saturated_primitive(&p, 2, 1.5), 1.5f64.powi(3) / 3.0);
        // Beyond 2/h the integrand is the constant (2/h)^σ.
        let a = saturated_primitive(&p, 2, 5.0);
        let b = saturated_primitive(&p, 2, 6.0);
        assert_relative_eq!(b - a, 16.0, max_relative = 1e-10);
        let direct = adaptive_simpson(|y| (plateau(0.5 * y) / 0.5).powi(2), 0.0, 6.0, 1e-12);
        assert_relative_eq!(b, direct, max_relative = 1e-9);
    }

    #[test]
    fn saturated_energy_cases() {
        let grid = SpectralGrid::new(1, 64, 8.0).unwrap();
        for scheme in [SaturationScheme::Plateau { h: 0.1 }, SaturationScheme::Rational { h: 0.1 }] {
            let params = ModelParams { scheme, ..Default::default() };
            assert_eq!(energy_saturated(&Field::zeros(grid), &params).unwrap(), 0.0);
        }
        assert!(energy_saturated(&Field::zeros(grid), &ModelParams::default()).is_err());

        // Plateau in its identity regime: potential ε|c|^{2(σ+1)}/(σ+1) L^d.
        let c = Complex::new(1.0, 1.0);
        let f = Field::from_fn(grid, |_| c);
        for sigma in 1..=3u32 {
            let params = ModelParams {
                sigma,
                sign: Sign::Focusing,
                scheme: SaturationScheme::Plateau { h: 0.5 },
                ..Default::default()
            };
            let e = energy_saturated(&f, &params).unwrap();
            let expected = -(2f64.powi(sigma as i32 + 1)) / (sigma as f64 + 1.0) * 8.0;
            assert_relative_eq!(e, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn rational_energy_approaches_plain_energy() {
        let grid = SpectralGrid::new(1, 256, 24.0).unwrap();
        let f = gaussian(grid, 1.5);
        let plain = {
            let mut m = Model::new(grid, ModelParams::default()).unwrap();
            m.kinetic_energy(f.values())
                + 0.5 * f.values().iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() * grid.dx()
        };
        let mut last = f64::INFINITY;
        for j in 2..9 {
            let h = 0.5f64.powi(j);
            let params = ModelParams {
                scheme: SaturationScheme::Rational { h },
                ..Default::default()
            };
            let gap = (energy_saturated(&f, &params).unwrap() - plain).abs();
            assert!(gap < last);
            // O(h): the gap is bounded by h ∫|u|⁶/3.
            assert!(gap <= h * 1.5f64.powi(6) * 2.0);
            last = gap;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symbols_are_ordered(h in 1e-4f64..1.0, k2 in 0.0f64..1e6) {
            for sym in [DispersionSymbol::Rational { h }, DispersionSymbol::Arctan { h }] {
                let p = sym.at_norm_sq(k2);
                prop_assert!(p <= 0.0 && p >= -k2);
            }
        }

        #[test]
        fn saturations_are_bounded(h in 1e-3f64..1.0, rho in 0.0f64..1e8) {
            let r = SaturationScheme::Rational { h }.saturate(rho);
            prop_assert!(r >= 0.0 && r < 1.0 / h && r <= rho);
            let p = SaturationScheme::Plateau { h }.saturate(rho);
            prop_assert!(p >= 0.0 && p <= 2.0 / h + 1e-9);
        }
    }
}
