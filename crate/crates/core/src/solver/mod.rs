//! Spectra from the G-function: real zeros between pole lines, complex zeros
//! by Newton iteration, exceptional points as simultaneous zeros of `G` and
//! `∂G/∂E`, and doubly degenerate crossings on pole lines.

mod complex;
mod degenerate;
mod exceptional;
mod real;
mod spectrum;

use num_complex::Complex64;

pub use complex::{find_complex_zero, grid_seeds, ComplexZeroPair, GridSeedOptions};
pub use degenerate::{locate_degenerate, DegeneratePoint, DEFAULT_DEGENERACY_RANGE};
pub use exceptional::{count_real_zeros, interval_bounds, locate_ep, ExceptionalPoint, EpOptions};
pub use real::{scan_real_zeros, scan_real_zeros_with, RealScanOptions, RealZero};
pub use spectrum::{assemble_spectrum, SeedSource, SpectrumOptions};

use crate::error::Result;
use crate::gfunction::{evaluate_g_extended, Derivatives, Parity, SeriesOptions};
use crate::model::ModelParams;

/// Target residual on `|G|` for a zero.
pub const ZERO_TOLERANCE: f64 = 1e-12;
/// Target bracket width in energy for real zeros.
pub const BRACKET_TOLERANCE: f64 = 1e-12;

/// `(G, ∂G/∂E)` for one parity, double-double path.
pub(crate) fn precise_g(
    params: &ModelParams,
    energy: Complex64,
    parity: Parity,
    series: &SeriesOptions,
) -> Result<(Complex64, Complex64)> {
    let v = evaluate_g_extended(params, energy, series, Derivatives::First)?.ensure_converged()?;
    Ok((v.value(parity), v.derivative(parity)))
}

/// Lower end of the first inter-pole interval. The real parts of the
/// spectrum stay above the decoupled ground state `-|Δ|/2`.
pub(crate) fn spectrum_floor(params: &ModelParams) -> f64 {
    -0.5 * params.delta().abs() - 1.0
}
