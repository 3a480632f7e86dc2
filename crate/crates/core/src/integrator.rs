//! Time stepping by operator splitting.
//!
//! The equation `i∂_t u + P(D)u = ε V(u) u` splits into the free flow,
//! which is the spectral multiplier `e^{iτP(ξ)}`, and the potential flow
//! `u ↦ e^{-iετV}u`. `V` is real, so `|u|` is pointwise invariant under the
//! potential flow and that substep is exact. Both substeps are unitary in
//! discrete `L²`.

use std::fmt;

use serde::Serialize;

use crate::datum::InitialDatum;
use crate::error::{Error, Result};
use crate::operators::{Model, ModelParams, SaturationScheme};
use crate::spectral::{sobolev_weights, Complex, Field, SpectralGrid};

/// Largest tolerated mass fraction near the boundary at `t = 0`.
pub const BOUNDARY_LEAK_START: f64 = 1e-8;
/// Largest tolerated mass fraction near the boundary during a run.
pub const BOUNDARY_LEAK_RUN: f64 = 1e-6;
/// Abort once `‖u‖_{H¹}` exceeds this multiple of its initial value.
pub const BLOWUP_FACTOR: f64 = 1e3;
/// Step ratio between a run and its reference solution.
pub const REFERENCE_REFINEMENT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Splitting {
    #[default]
    Strang,
    Lie,
}

impl Splitting {
    pub fn name(self) -> &'static str {
        match self {
            Splitting::Strang => "strang",
            Splitting::Lie => "lie",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationConfig {
    pub grid: SpectralGrid,
    pub params: ModelParams,
    pub dt: f64,
    pub t_final: f64,
    pub datum: InitialDatum,
    pub diagnostics_every: usize,
    pub splitting: Splitting,
    /// Extra Sobolev indices recorded as diagnostics.
    pub norms: Vec<f64>,
    /// 2/3-rule filtering of the unsaturated potential.
    pub dealias: bool,
}

impl SimulationConfig {
    pub fn new(grid: SpectralGrid, params: ModelParams, dt: f64, t_final: f64, datum: InitialDatum) -> Self {
        Self {
            grid,
            params,
            dt,
            t_final,
            datum,
            diagnostics_every: 1,
            splitting: Splitting::Strang,
            norms: Vec::new(),
            dealias: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "final time must be non-negative, got {}",
                self.t_final
            )));
        }
        let ratio = self.t_final / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "T/dt = {ratio} is not an integer step count"
            )));
        }
        if self.diagnostics_every == 0 {
            return Err(Error::InvalidParameter("diagnostics cadence must be >= 1".to_string()));
        }
        self.params.validate()
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Recommended step for accuracy: `0.5 / max_k |P(ξ_k)|`.
    pub fn recommended_dt(&self) -> f64 {
        let max = self
            .grid
            .frequency_norms_sq()
            .into_iter()
            .map(|k2| self.params.dispersion.at_norm_sq(k2).abs())
            .fold(0.0, f64::max);
        if max == 0.0 {
            f64::INFINITY
        } else {
            0.5 / max
        }
    }
}

/// Time series recorded during a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DiagnosticsSeries {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    /// Model-consistent energy; NaN where the model has none.
    pub energy: Vec<f64>,
    pub h1: Vec<f64>,
    /// `(s, ‖u(t)‖_{H^s})` for each requested index.
    pub sobolev: Vec<(f64, Vec<f64>)>,
    pub boundary_leak: Vec<f64>,
    /// Error against a reference at each row, when a study provides one.
    pub reference_error: Option<Vec<f64>>,
}

impl DiagnosticsSeries {
    pub fn with_norms(norms: &[f64]) -> Self {
        Self {
            sobolev: norms.iter().map(|&s| (s, Vec::new())).collect(),
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|m(t)/m(0) - 1|`.
    pub fn mass_drift(&self) -> f64 {
        relative_drift(&self.mass)
    }

    /// Largest `|E(t) - E(0)|`.
    pub fn energy_drift(&self) -> f64 {
        match self.energy.first() {
            Some(&e0) => self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max),
            None => 0.0,
        }
    }
}

fn relative_drift(series: &[f64]) -> f64 {
    match series.first() {
        Some(&v0) if v0 != 0.0 => series.iter().map(|v| (v / v0 - 1.0).abs()).fold(0.0, f64::max),
        _ => 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum AbortReason {
    BoundaryLeak { leak: f64 },
    BlowUp { h1_ratio: f64 },
    NonFinite,
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbortReason::BoundaryLeak { leak } => write!(f, "boundary leak {leak:.3e}"),
            AbortReason::BlowUp { h1_ratio } => {
                write!(f, "H1 norm grew by a factor {h1_ratio:.3e}")
            }
            AbortReason::NonFinite => f.write_str("non-finite values"),
        }
    }
}

/// A run stopped by a guard, with everything recorded up to that point.
#[derive(Clone, Debug)]
pub struct Abort {
    pub step: usize,
    pub time: f64,
    pub reason: AbortReason,
    pub diagnostics: DiagnosticsSeries,
}

impl fmt::Display for Abort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at step {} (t = {})", self.reason, self.step, self.time)
    }
}

/// Fraction of the mass within `L/8` of the box boundary.
pub fn boundary_leak(field: &Field) -> f64 {
    let grid = field.grid();
    let inner = 3.0 / 8.0 * grid.length();
    let mut edge = 0.0;
    let mut total = 0.0;
    for (k, v) in field.values().iter().enumerate() {
        let m = v.norm_sqr();
        total += m;
        let x = grid.position(k);
        if x[..grid.dim()].iter().any(|c| c.abs() > inner) {
            edge += m;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        edge / total
    }
}

fn dispersion_phases(table: &[f64], tau: f64) -> Vec<Complex> {
    table.iter().map(|p| Complex::from_polar(1.0, tau * p)).collect()
}

fn apply_potential(values: &mut [Complex], potential: &[f64], eps: f64, tau: f64) {
    for (u, v) in values.iter_mut().zip(potential) {
        *u *= Complex::from_polar(1.0, -eps * tau * v);
    }
}

/// Free flow `e^{iτP(D)}`.
pub fn dispersion_step(field: &Field, symbol: crate::operators::DispersionSymbol, tau: f64) -> Field {
    let grid = *field.grid();
    let table: Vec<f64> = grid
        .frequency_norms_sq()
        .into_iter()
        .map(|k2| symbol.at_norm_sq(k2))
        .collect();
    let phases = dispersion_phases(&table, tau);
    let mut values = field.values().to_vec();
    crate::spectral::FftEngine::new(grid).apply_symbol(&mut values, &phases);
    Field::new(grid, values).expect("grid size is preserved")
}

/// Exact potential flow `u ↦ e^{-iετV(u)} u`.
pub fn nonlinear_step(field: &Field, params: &ModelParams, tau: f64) -> Result<Field> {
    let mut model = Model::new(*field.grid(), *params)?;
    let mut potential = Vec::new();
    model.potential(field.values(), &mut potential);
    let mut values = field.values().to_vec();
    apply_potential(&mut values, &potential, params.sign.value(), tau);
    Field::new(*field.grid(), values)
}

/// One splitting step of length `dt` (which may be negative).
pub fn strang_step(field: &Field, config: &SimulationConfig, dt: f64) -> Result<Field> {
    let mut stepper = Stepper::new(config, dt)?;
    let mut values = field.values().to_vec();
    stepper.step(&mut values);
    Field::new(*field.grid(), values)
}

/// Stateful single-step propagator with cached tables.
#[derive(Debug)]
pub struct Stepper {
    model: Model,
    phases: Vec<Complex>,
    potential: Vec<f64>,
    splitting: Splitting,
    dt: f64,
}

impl Stepper {
    pub fn new(config: &SimulationConfig, dt: f64) -> Result<Self> {
        let model = Model::new(config.grid, config.params)?.with_dealiasing(config.dealias);
        let phases = dispersion_phases(model.dispersion_table(), dt);
        Ok(Self {
            model,
            phases,
            potential: Vec::with_capacity(config.grid.len()),
            splitting: config.splitting,
            dt,
        })
    }

    pub fn model_mut(&mut self) -> &mut Model {
        &mut self.model
    }

    fn potential_substep(&mut self, values: &mut [Complex], tau: f64) {
        let eps = self.model.params().sign.value();
        self.model.potential(values, &mut self.potential);
        apply_potential(values, &self.potential, eps, tau);
    }

    pub fn step(&mut self, values: &mut [Complex]) {
        match self.splitting {
            Splitting::Strang => {
                self.potential_substep(values, 0.5 * self.dt);
                self.model.engine_mut().apply_symbol(values, &self.phases);
                self.potential_substep(values, 0.5 * self.dt);
            }
            Splitting::Lie => {
                self.potential_substep(values, self.dt);
                self.model.engine_mut().apply_symbol(values, &self.phases);
            }
        }
    }
}

/// A running evolution with its guards.
#[derive(Debug)]
pub struct Simulation {
    config: SimulationConfig,
    stepper: Stepper,
    field: Field,
    step: usize,
    total_steps: usize,
    h1_weights: Vec<f64>,
    norm_weights: Vec<Vec<f64>>,
    initial_h1: f64,
    last_h1: f64,
    localized: bool,
}

impl Simulation {
    pub fn new(config: &SimulationConfig) -> Result<Self> {
        config.validate()?;
        let field = config.datum.realize(&config.grid)?;
        Self::from_field(config, field)
    }

    /// Starts from an explicit initial field instead of the config datum.
    pub fn from_field(config: &SimulationConfig, field: Field) -> Result<Self> {
        config.validate()?;
        if *field.grid() != config.grid {
            return Err(Error::InvalidParameter(format!(
                "initial field is on grid {} but the config asks for {}",
                field.grid(),
                config.grid
            )));
        }
        let mut stepper = Stepper::new(config, config.dt)?;
        let localized = config.datum.is_localized();
        if localized {
            let leak = boundary_leak(&field);
            if leak > BOUNDARY_LEAK_START {
                return Err(Error::BoundaryLeak {
                    leak,
                    limit: BOUNDARY_LEAK_START,
                    time: 0.0,
                });
            }
        }
        let h1_weights = sobolev_weights(&config.grid, 1.0, false)?;
        let norm_weights = config
            .norms
            .iter()
            .map(|&s| sobolev_weights(&config.grid, s, false))
            .collect::<Result<Vec<_>>>()?;
        let initial_h1 = stepper
            .model_mut()
            .engine_mut()
            .weighted_spectral_sum(field.values(), &h1_weights)
            .sqrt();
        Ok(Self {
            config: config.clone(),
            stepper,
            field,
            step: 0,
            total_steps: config.steps(),
            h1_weights,
            norm_weights,
            initial_h1,
            last_h1: initial_h1,
            localized,
        })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn into_field(self) -> Field {
        self.field
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.total_steps
    }

    pub fn initial_h1(&self) -> f64 {
        self.initial_h1
    }

    /// `H¹` norm computed by the last call to [`Simulation::advance`].
    pub fn last_h1(&self) -> f64 {
        self.last_h1
    }

    pub fn h1_norm(&mut self) -> f64 {
        self.stepper
            .model_mut()
            .engine_mut()
            .weighted_spectral_sum(self.field.values(), &self.h1_weights)
            .sqrt()
    }

    /// Appends one diagnostics row for the current state.
    pub fn record(&mut self, series: &mut DiagnosticsSeries) {
        let time = self.time();
        let h1 = self.h1_norm();
        let values = self.field.values();
        let model = self.stepper.model_mut();
        series.times.push(time);
        series.mass.push(crate::operators::mass(&self.field));
        series.energy.push(model.energy(values).unwrap_or(f64::NAN));
        series.h1.push(h1);
        for ((_, column), weights) in series.sobolev.iter_mut().zip(&self.norm_weights) {
            column.push(model.engine_mut().weighted_spectral_sum(values, weights).sqrt());
        }
        series.boundary_leak.push(if self.localized {
            boundary_leak(&self.field)
        } else {
            0.0
        });
    }

    /// Takes one step and runs the guards.
    pub fn advance(&mut self) -> std::result::Result<(), AbortReason> {
        self.stepper.step(self.field.values_mut());
        self.step += 1;
        if !self.field.is_finite() {
            return Err(AbortReason::NonFinite);
        }
        if self.localized {
            let leak = boundary_leak(&self.field);
            if leak > BOUNDARY_LEAK_RUN {
                return Err(AbortReason::BoundaryLeak { leak });
            }
        }
        let h1 = self.h1_norm();
        self.last_h1 = h1;
        if !h1.is_finite() {
            return Err(AbortReason::NonFinite);
        }
        if h1 > BLOWUP_FACTOR * self.initial_h1 {
            return Err(AbortReason::BlowUp {
                h1_ratio: h1 / self.initial_h1,
            });
        }
        Ok(())
    }

    /// Runs to the final time, calling `on_row` after each diagnostics row.
    pub fn run(
        &mut self,
        series: &mut DiagnosticsSeries,
        mut on_row: impl FnMut(&Simulation),
    ) -> Result<()> {
        if self.step == 0 {
            self.record(series);
            on_row(self);
        }
        while !self.is_done() {
            if let Err(reason) = self.advance() {
                self.record(series);
                return Err(Error::Aborted(Box::new(Abort {
                    step: self.step,
                    time: self.time(),
                    reason,
                    diagnostics: series.clone(),
                })));
            }
            if self.step.is_multiple_of(self.config.diagnostics_every) || self.is_done() {
                self.record(series);
                on_row(self);
            }
        }
        Ok(())
    }
}

/// Evolves the config datum to the final time.
pub fn evolve(config: &SimulationConfig) -> Result<(Field, DiagnosticsSeries)> {
    let mut sim = Simulation::new(config)?;
    let mut series = DiagnosticsSeries::with_norms(&config.norms);
    sim.run(&mut series, |_| {})?;
    Ok((sim.into_field(), series))
}

/// A field at a recorded time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: Field,
}

/// Runs `config` and keeps the field at every diagnostics row.
pub fn evolve_with_snapshots(config: &SimulationConfig) -> Result<(Vec<Snapshot>, DiagnosticsSeries)> {
    let mut sim = Simulation::new(config)?;
    let mut series = DiagnosticsSeries::with_norms(&config.norms);
    let mut snapshots = Vec::new();
    sim.run(&mut series, |s| {
        snapshots.push(Snapshot {
            time: s.time(),
            field: s.field().clone(),
        })
    })?;
    Ok((snapshots, series))
}

/// The refined configuration a reference run uses: step `dt/8`, diagnostics
/// cadence scaled so that rows land on the same times.
pub fn reference_config(config: &SimulationConfig) -> SimulationConfig {
    SimulationConfig {
        dt: config.dt / REFERENCE_REFINEMENT as f64,
        diagnostics_every: config.diagnostics_every * REFERENCE_REFINEMENT,
        ..config.clone()
    }
}

/// The unsaturated solution at `dt/8`, sampled at the snapshot times of
/// `config`.
pub fn reference_solution(config: &SimulationConfig) -> Result<Vec<Snapshot>> {
    if config.params.scheme != SaturationScheme::None {
        return Err(Error::Precondition(format!(
            "reference runs use no saturation, got '{}'",
            config.params.scheme.name()
        )));
    }
    evolve_with_snapshots(&reference_config(config)).map(|(snaps, _)| snaps)
}
