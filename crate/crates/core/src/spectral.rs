//! Periodic grids, the discrete Fourier transform and spectral norms.
//!
//! The computational domain is the box `[-L/2, L/2)^d` with periodic
//! boundary conditions. Fields are stored row-major, last axis fastest.
//! Spectral arrays use the FFT-standard mode order internally (index `i`
//! maps to the integer mode `i` for `i < n/2` and `i - n` otherwise); every
//! symbol is evaluated at the logical wave vector `ξ = (2π/L)·mode`, so the
//! lattice presented to callers is `[-n/2, n/2)` per axis.
//!
//! The transform is scaled so that
//!
//! ```text
//! û(ξ_k) = dx^d (2π)^{-d/2} Σ_x u(x) e^{-i ξ_k·x}
//! u(x)   = dξ^d (2π)^{-d/2} Σ_k û(ξ_k) e^{i ξ_k·x}
//! ```
//!
//! which makes `Σ |u|² dx^d = Σ |û|² dξ^d` and lets spectral norms quote
//! continuum values directly.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type Complex = Complex64;

/// Upper bound on the total number of grid points `n^d`.
pub const MAX_POINTS: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralGrid {
    dim: usize,
    n: usize,
    length: f64,
}

impl SpectralGrid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and at least 4, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive, got {length}"
            )));
        }
        let total = n
            .checked_pow(dim as u32)
            .filter(|&t| t <= MAX_POINTS)
            .ok_or_else(|| {
                Error::InvalidGrid(format!(
                    "{n}^{dim} points exceeds the cap of {MAX_POINTS}"
                ))
            })?;
        debug_assert!(total > 0);
        Ok(Self { dim, n, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Total number of points, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Largest resolved frequency `π n / L`.
    pub fn nyquist(&self) -> f64 {
        PI * self.n as f64 / self.length
    }

    /// Physical cell volume `dx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    /// Spectral cell volume `dξ^d`.
    pub fn spectral_cell_volume(&self) -> f64 {
        self.dk().powi(self.dim as i32)
    }

    /// Integer mode of FFT-order index `i` on one axis.
    pub fn mode(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// FFT-order index of integer mode `m`, if it is on the lattice.
    pub fn index_of_mode(&self, m: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if !(-half..half).contains(&m) {
            return None;
        }
        Some(if m >= 0 { m as usize } else { (m + self.n as i64) as usize })
    }

    /// Per-axis integer modes in logical order `[-n/2, n/2)`.
    pub fn axis_modes(&self) -> Vec<i64> {
        let half = (self.n / 2) as i64;
        (-half..half).collect()
    }

    /// Per-axis frequencies in logical order.
    pub fn axis_frequencies(&self) -> Vec<f64> {
        let dk = self.dk();
        self.axis_modes().into_iter().map(|m| m as f64 * dk).collect()
    }

    /// Per-axis coordinates `-L/2 + j dx`.
    pub fn axis_coordinates(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n)
            .map(|j| -0.5 * self.length + j as f64 * dx)
            .collect()
    }

    /// Splits a flat index into per-axis indices (unused axes are zero).
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rest % self.n;
            rest /= self.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().take(self.dim).fold(0, |acc, &i| acc * self.n + i)
    }

    /// Wave vector of the spectral slot `flat` (FFT order).
    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let dk = self.dk();
        let mut xi = [0.0; 3];
        for axis in 0..self.dim {
            xi[axis] = self.mode(idx[axis]) as f64 * dk;
        }
        xi
    }

    /// Physical position of the point `flat`.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let dx = self.dx();
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = -0.5 * self.length + idx[axis] as f64 * dx;
        }
        x
    }

    /// Evaluates `symbol(ξ)` on the whole lattice, in FFT order.
    pub fn symbol_table<T>(&self, mut symbol: impl FnMut(&[f64]) -> T) -> Vec<T> {
        (0..self.len())
            .map(|k| symbol(&self.wavevector(k)[..self.dim]))
            .collect()
    }

    /// `|ξ_k|²` in FFT order.
    pub fn frequency_norms_sq(&self) -> Vec<f64> {
        self.symbol_table(|xi| xi.iter().map(|v| v * v).sum())
    }

    /// Smallest power-of-two `n` with `(2/3)·π n / L >= radius`.
    pub fn required_points_for(&self, radius: f64) -> usize {
        let exact = 3.0 * radius * self.length / (2.0 * PI);
        let mut n = 4usize;
        while (n as f64) < exact {
            n *= 2;
        }
        n
    }
}

impl fmt::Display for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={} n={} L={}", self.dim, self.n, self.length)
    }
}

/// A complex field sampled on a grid (physical space).
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: SpectralGrid,
    values: Vec<Complex>,
}

impl Field {
    pub fn new(grid: SpectralGrid, values: Vec<Complex>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SpectralGrid) -> Self {
        Self {
            grid,
            values: vec![Complex::new(0.0, 0.0); grid.len()],
        }
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(grid: SpectralGrid, mut f: impl FnMut(&[f64]) -> Complex) -> Self {
        let values = (0..grid.len())
            .map(|k| f(&grid.position(k)[..grid.dim]))
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex> {
        self.values
    }

    pub fn scaled(&self, c: Complex) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Pointwise difference `self - other`.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Discrete `L²` inner product `Σ f ḡ dx^d`.
    pub fn inner(&self, other: &Field) -> Result<Complex> {
        self.check_same_grid(other)?;
        let sum: Complex = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(sum * self.grid.cell_volume())
    }

    /// Largest pointwise modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::InvalidParameter(format!(
                "fields live on different grids ({} vs {})",
                self.grid, other.grid
            )));
        }
        Ok(())
    }
}

/// Spectral coefficients in FFT order, continuum-normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: SpectralGrid,
    coeffs: Vec<Complex>,
}

impl Spectrum {
    pub fn new(grid: SpectralGrid, coeffs: Vec<Complex>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                actual: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex] {
        &self.coeffs
    }

    /// Coefficient at the integer modes `modes` (one per axis).
    pub fn at(&self, modes: &[i64]) -> Option<Complex> {
        if modes.len() != self.grid.dim() {
            return None;
        }
        let mut idx = [0usize; 3];
        for (axis, &m) in modes.iter().enumerate() {
            idx[axis] = self.grid.index_of_mode(m)?;
        }
        Some(self.coeffs[self.grid.flat_index(&idx)])
    }
}

/// FFT plans and scratch space for one grid.
///
/// Transforms here are unnormalized; [`FftEngine::apply_symbol`] and the
/// norm helpers take care of scaling.
pub struct FftEngine {
    grid: SpectralGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex>,
    line: Vec<Complex>,
    buffer: Vec<Complex>,
}

impl fmt::Debug for FftEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FftEngine").field("grid", &self.grid).finish()
    }
}

impl FftEngine {
    pub fn new(grid: SpectralGrid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n());
        let inverse = planner.plan_fft_inverse(grid.n());
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            grid,
            forward,
            inverse,
            scratch: vec![Complex::new(0.0, 0.0); scratch_len],
            line: vec![Complex::new(0.0, 0.0); grid.n()],
            buffer: Vec::with_capacity(grid.len()),
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    /// Unnormalized forward DFT over every axis, in place.
    pub fn forward_raw(&mut self, data: &mut [Complex]) {
        let fft = Arc::clone(&self.forward);
        self.transform(data, fft.as_ref());
    }

    /// Unnormalized inverse DFT over every axis, in place.
    pub fn inverse_raw(&mut self, data: &mut [Complex]) {
        let fft = Arc::clone(&self.inverse);
        self.transform(data, fft.as_ref());
    }

    fn transform(&mut self, data: &mut [Complex], fft: &dyn Fft<f64>) {
        assert_eq!(data.len(), self.grid.len(), "buffer does not match grid");
        let n = self.grid.n();
        let dim = self.grid.dim();
        // Last axis is contiguous: rustfft handles all rows in one call.
        fft.process_with_scratch(data, &mut self.scratch);
        for axis in 0..dim - 1 {
            let stride = n.pow((dim - 1 - axis) as u32);
            let outer = data.len() / (n * stride);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * n * stride + inner;
                    for (j, slot) in self.line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    fft.process_with_scratch(&mut self.line, &mut self.scratch);
                    for (j, value) in self.line.iter().enumerate() {
                        data[base + j * stride] = *value;
                    }
                }
            }
        }
    }

    /// Multiplies the spectrum of `data` by a real symbol table (FFT order).
    pub fn apply_real_symbol(&mut self, data: &mut [Complex], table: &[f64]) {
        assert_eq!(table.len(), data.len(), "symbol table does not match grid");
        self.forward_raw(data);
        let inv_n = 1.0 / data.len() as f64;
        for (v, m) in data.iter_mut().zip(table) {
            *v *= m * inv_n;
        }
        self.inverse_raw(data);
    }

    /// Multiplies the spectrum of `data` by a complex symbol table (FFT order).
    pub fn apply_symbol(&mut self, data: &mut [Complex], table: &[Complex]) {
        assert_eq!(table.len(), data.len(), "symbol table does not match grid");
        self.forward_raw(data);
        let inv_n = 1.0 / data.len() as f64;
        for (v, m) in data.iter_mut().zip(table) {
            *v *= m * inv_n;
        }
        self.inverse_raw(data);
    }

    /// `Σ_k w_k |û_k|² dξ^d` for a physical-space array and a weight table.
    pub fn weighted_spectral_sum(&mut self, data: &[Complex], weights: &[f64]) -> f64 {
        let mut buffer = std::mem::take(&mut self.buffer);
        buffer.clear();
        buffer.extend_from_slice(data);
        self.forward_raw(&mut buffer);
        let sum: f64 = buffer
            .iter()
            .zip(weights)
            .map(|(u, w)| w * u.norm_sqr())
            .sum();
        self.buffer = buffer;
        sum * raw_power_scale(&self.grid)
    }
}

/// Converts `Σ |DFT|²` into `Σ |û|² dξ^d`.
pub(crate) fn raw_power_scale(grid: &SpectralGrid) -> f64 {
    grid.cell_volume() / grid.len() as f64
}

/// Continuum-normalized coefficient factor `dx^d (2π)^{-d/2} (-1)^{Σ m}` for
/// the slot `flat`; the sign accounts for the box starting at `-L/2`.
fn coefficient_factor(grid: &SpectralGrid, flat: usize) -> f64 {
    let base = grid.cell_volume() / (2.0 * PI).powf(grid.dim() as f64 / 2.0);
    let idx = grid.multi_index(flat);
    let parity: i64 = (0..grid.dim()).map(|a| grid.mode(idx[a])).sum();
    if parity.rem_euclid(2) == 0 {
        base
    } else {
        -base
    }
}

pub fn forward_transform(field: &Field) -> Spectrum {
    let grid = *field.grid();
    let mut coeffs = field.values().to_vec();
    FftEngine::new(grid).forward_raw(&mut coeffs);
    for (k, c) in coeffs.iter_mut().enumerate() {
        *c *= coefficient_factor(&grid, k);
    }
    Spectrum { grid, coeffs }
}

pub fn inverse_transform(spectrum: &Spectrum) -> Field {
    let grid = *spectrum.grid();
    let mut values: Vec<Complex> = spectrum
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| c / coefficient_factor(&grid, k))
        .collect();
    FftEngine::new(grid).inverse_raw(&mut values);
    let inv_n = 1.0 / grid.len() as f64;
    for v in &mut values {
        *v *= inv_n;
    }
    Field { grid, values }
}

/// Applies the Fourier multiplier with symbol `symbol(ξ)`.
pub fn apply_multiplier(field: &Field, symbol: impl FnMut(&[f64]) -> Complex) -> Field {
    let grid = *field.grid();
    let table = grid.symbol_table(symbol);
    let mut values = field.values().to_vec();
    FftEngine::new(grid).apply_symbol(&mut values, &table);
    Field { grid, values }
}

/// Sobolev weight `w(ξ)^{2s}` with `w = ⟨ξ⟩` or `|ξ|`.
pub(crate) fn sobolev_weight(xi_sq: f64, s: f64, homogeneous: bool) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    if homogeneous {
        if xi_sq == 0.0 {
            0.0
        } else {
            xi_sq.powf(s)
        }
    } else {
        (1.0 + xi_sq).powf(s)
    }
}

/// Table of Sobolev weights in FFT order.
pub fn sobolev_weights(grid: &SpectralGrid, s: f64, homogeneous: bool) -> Result<Vec<f64>> {
    if homogeneous && s < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "homogeneous Sobolev norm needs s >= 0, got {s}"
        )));
    }
    if !s.is_finite() {
        return Err(Error::InvalidParameter(format!("Sobolev index {s}")));
    }
    Ok(grid
        .frequency_norms_sq()
        .into_iter()
        .map(|k2| sobolev_weight(k2, s, homogeneous))
        .collect())
}

/// `H^s` (or `Ḣ^s`) norm computed from the spectrum.
pub fn sobolev_norm(field: &Field, s: f64, homogeneous: bool) -> Result<f64> {
    let weights = sobolev_weights(field.grid(), s, homogeneous)?;
    let mut engine = FftEngine::new(*field.grid());
    Ok(engine.weighted_spectral_sum(field.values(), &weights).sqrt())
}

/// `L^p` norm with the `dx^d` quadrature; `p = ∞` gives the max modulus.
pub fn lp_norm(field: &Field, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "L^p norm needs p >= 1, got {p}"
        )));
    }
    if p.is_infinite() {
        return Ok(field.max_abs());
    }
    let sum: f64 = field.values().iter().map(|v| v.norm().powf(p)).sum();
    Ok((sum * field.grid().cell_volume()).powf(1.0 / p))
}

/// Squared `L²` mass of the spectrum strictly outside the ball `|ξ| <= radius`.
pub fn spectral_tail_mass(field: &Field, radius: f64) -> f64 {
    let r2 = radius * radius;
    let weights: Vec<f64> = field
        .grid()
        .frequency_norms_sq()
        .into_iter()
        .map(|k2| if k2 > r2 { 1.0 } else { 0.0 })
        .collect();
    FftEngine::new(*field.grid()).weighted_spectral_sum(field.values(), &weights)
}
