//! Initial data.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::{inverse_transform, lp_norm, Complex, Field, SpectralGrid, Spectrum};

/// Regularity margin of the prescribed-regularity generator: the field is in
/// `H^s` but not in `H^{s+2δ}`.
pub const REGULARITY_MARGIN: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialDatum {
    /// `A exp(-|x-c|²/(2w²)) e^{ik·x}`.
    Gaussian {
        amplitude: f64,
        width: f64,
        center: [f64; 3],
        wave_vector: [f64; 3],
    },
    /// `A sech(|x|/w)`.
    Sech { amplitude: f64, width: f64 },
    /// `λ^{s-d/2} a(x/λ)` with `a` the unit Gaussian and `λ` the scale.
    Concentrated { scale: f64, regularity: f64 },
    /// Random phases with spectral decay `⟨ξ⟩^{-s-d/2-δ}`, unit `L²` norm.
    PrescribedRegularity { regularity: f64, seed: u64 },
    /// `A e^{iξ_m·x}` for the integer mode vector `m`.
    PlaneWave { amplitude: f64, mode: [i64; 3] },
    /// A field dump written by [`crate::io::write_field`].
    File { path: PathBuf },
}

impl InitialDatum {
    pub fn kind(&self) -> &'static str {
        match self {
            InitialDatum::Gaussian { .. } => "gaussian",
            InitialDatum::Sech { .. } => "sech",
            InitialDatum::Concentrated { .. } => "concentrated",
            InitialDatum::PrescribedRegularity { .. } => "prescribed-regularity",
            InitialDatum::PlaneWave { .. } => "plane-wave",
            InitialDatum::File { .. } => "file",
        }
    }

    /// Whether the datum models a localized solution on `R^d`.
    ///
    /// Only localized data are subject to the boundary-leak guard; plane
    /// waves and random-phase data are periodic by construction.
    pub fn is_localized(&self) -> bool {
        matches!(
            self,
            InitialDatum::Gaussian { .. }
                | InitialDatum::Sech { .. }
                | InitialDatum::Concentrated { .. }
                | InitialDatum::File { .. }
        )
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            InitialDatum::PrescribedRegularity { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    pub fn with_seed(self, new_seed: u64) -> Self {
        match self {
            InitialDatum::PrescribedRegularity { regularity, .. } => {
                InitialDatum::PrescribedRegularity {
                    regularity,
                    seed: new_seed,
                }
            }
            other => other,
        }
    }

    /// Rescales the amplitude (Gaussian, sech and plane wave only).
    pub fn with_amplitude(self, a: f64) -> Self {
        match self {
            InitialDatum::Gaussian {
                width,
                center,
                wave_vector,
                ..
            } => InitialDatum::Gaussian {
                amplitude: a,
                width,
                center,
                wave_vector,
            },
            InitialDatum::Sech { width, .. } => InitialDatum::Sech { amplitude: a, width },
            InitialDatum::PlaneWave { mode, .. } => InitialDatum::PlaneWave { amplitude: a, mode },
            other => other,
        }
    }

    pub fn realize(&self, grid: &SpectralGrid) -> Result<Field> {
        let grid = *grid;
        let dim = grid.dim();
        match self {
            InitialDatum::Gaussian {
                amplitude,
                width,
                center,
                wave_vector,
            } => {
                positive(*width, "gaussian width")?;
                let inv = 1.0 / (2.0 * width * width);
                Ok(Field::from_fn(grid, |x| {
                    let mut r2 = 0.0;
                    let mut phase = 0.0;
                    for a in 0..dim {
                        r2 += (x[a] - center[a]).powi(2);
                        phase += wave_vector[a] * x[a];
                    }
                    Complex::from_polar(amplitude * (-r2 * inv).exp(), phase)
                }))
            }
            InitialDatum::Sech { amplitude, width } => {
                positive(*width, "sech width")?;
                Ok(Field::from_fn(grid, |x| {
                    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    Complex::new(amplitude / (r / width).cosh(), 0.0)
                }))
            }
            InitialDatum::Concentrated { scale, regularity } => {
                positive(*scale, "concentration scale")?;
                Ok(concentrated_profile(grid, *scale, *regularity))
            }
            InitialDatum::PrescribedRegularity { regularity, seed } => {
                generate_prescribed_regularity(&grid, *regularity, *seed)
            }
            InitialDatum::PlaneWave { amplitude, mode } => {
                let dk = grid.dk();
                Ok(Field::from_fn(grid, |x| {
                    let phase: f64 = (0..dim).map(|a| mode[a] as f64 * dk * x[a]).sum();
                    Complex::from_polar(*amplitude, phase)
                }))
            }
            InitialDatum::File { path } => {
                let (field, _time) = crate::io::read_field(path)?;
                if *field.grid() != grid {
                    return Err(Error::Format {
                        path: path.clone(),
                        message: format!(
                            "field dump is on grid {} but the config asks for {}",
                            field.grid(),
                            grid
                        ),
                    });
                }
                Ok(field)
            }
        }
    }
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")))
    }
}

/// `λ^{s-d/2} exp(-|x/λ|²/2)`.
pub fn concentrated_profile(grid: SpectralGrid, scale: f64, regularity: f64) -> Field {
    let d = grid.dim() as f64;
    let amp = scale.powf(regularity - d / 2.0);
    Field::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Complex::new(amp * (-0.5 * r2 / (scale * scale)).exp(), 0.0)
    })
}

/// Field with `û(ξ_k) ∝ ⟨ξ_k⟩^{-s-d/2-δ} e^{iθ_k}`, `θ_k` uniform from a
/// ChaCha8 stream seeded with `seed`, normalized to unit `L²` norm.
///
/// Phases are drawn in FFT slot order, so a seed reproduces the same field
/// bit-for-bit on a given grid.
pub fn generate_prescribed_regularity(grid: &SpectralGrid, s: f64, seed: u64) -> Result<Field> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "prescribed regularity needs s > 0, got {s}"
        )));
    }
    let exponent = -(s + grid.dim() as f64 / 2.0 + REGULARITY_MARGIN);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<Complex> = grid
        .frequency_norms_sq()
        .into_iter()
        .map(|k2| {
            let theta = rng.random_range(0.0..2.0 * PI);
            Complex::from_polar((1.0 + k2).powf(0.5 * exponent), theta)
        })
        .collect();
    let field = inverse_transform(&Spectrum::new(*grid, coeffs)?);
    let norm = lp_norm(&field, 2.0)?;
    Ok(field.scaled(Complex::new(1.0 / norm, 0.0)))
}
