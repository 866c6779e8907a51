use num_complex::Complex64;

use super::{precise_g, ZERO_TOLERANCE};
use crate::error::{Error, Result};
use crate::gfunction::{evaluate_g_with, Derivatives, Parity, SeriesOptions};
use crate::model::ModelParams;

const MAX_ITERATIONS: usize = 100;
const REAL_COLLAPSE: f64 = 1e-10;

/// A complex zero of `G±`; its conjugate is a zero of the same function.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ComplexZeroPair {
    /// Representative with `Im E ≥ 0`.
    pub energy: Complex64,
    pub parity: Parity,
    pub residual: f64,
    pub iterations: usize,
    /// Newton settled on the real axis instead of a conjugate pair.
    pub collapsed_to_real: bool,
}

impl ComplexZeroPair {
    pub fn partner(&self) -> Complex64 {
        self.energy.conj()
    }
}

/// Damped Newton iteration `E ← E - G/G'` from `seed`, finished with a few
/// double-double steps so the residual is not limited by series cancellation.
pub fn find_complex_zero(params: &ModelParams, seed: Complex64, parity: Parity) -> Result<ComplexZeroPair> {
    find_complex_zero_with(params, seed, parity, &SeriesOptions::default())
}

pub fn find_complex_zero_with(
    params: &ModelParams,
    seed: Complex64,
    parity: Parity,
    series: &SeriesOptions,
) -> Result<ComplexZeroPair> {
    let eval = |e: Complex64| -> Result<(Complex64, Complex64)> {
        let v = evaluate_g_with(params, e, series, Derivatives::First)?.ensure_converged()?;
        Ok((v.value(parity), v.derivative(parity)))
    };

    let mut energy = seed;
    let mut trace = vec![seed];
    let (mut value, mut slope) = eval(energy)?;
    let mut iterations = 0;

    // f64 stage: stop once steps stagnate at rounding level
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if slope.norm() == 0.0 {
            break;
        }
        let step = value / slope;
        let mut damping = 1.0;
        let mut accepted = None;
        while damping > 1e-4 {
            let trial = energy - step * damping;
            match eval(trial) {
                Ok((v, s)) if v.norm() < value.norm() || damping < 2e-4 => {
                    accepted = Some((trial, v, s));
                    break;
                }
                Ok(_) | Err(Error::PoleProximity { .. }) => damping *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((trial, v, s)) = accepted else { break };
        let moved = (trial - energy).norm();
        energy = trial;
        value = v;
        slope = s;
        trace.push(energy);
        if moved <= 1e-13 * (1.0 + energy.norm()) {
            break;
        }
    }

    // extended-precision polish
    let mut residual = f64::INFINITY;
    while iterations < MAX_ITERATIONS {
        let (v, s) = precise_g(params, energy, parity, series)?;
        residual = v.norm();
        // a small residual is not enough where |∂G/∂E| is small; iterate to a rounding-level step
        if residual == 0.0 || s.norm() == 0.0 {
            break;
        }
        let next = energy - v / s;
        iterations += 1;
        trace.push(next);
        if (next - energy).norm() <= 4.0 * f64::EPSILON * (1.0 + energy.norm()) {
            energy = next;
            residual = precise_g(params, energy, parity, series)?.0.norm();
            break;
        }
        energy = next;
    }

    if !(residual < ZERO_TOLERANCE) {
        return Err(Error::NoConvergence { iterations, trace });
    }
    let collapsed_to_real = energy.im.abs() < REAL_COLLAPSE;
    if energy.im < 0.0 {
        energy = energy.conj();
    }
    Ok(ComplexZeroPair { energy, parity, residual, iterations, collapsed_to_real })
}

/// Rectangle of the upper half plane searched for seeds when no oracle
/// spectrum is available.
#[derive(Debug, Clone, Copy)]
pub struct GridSeedOptions {
    pub re_range: (f64, f64),
    pub im_max: f64,
    /// Cells per unit energy along each axis.
    pub density: f64,
}

/// Centres of cells where both `Re G` and `Im G` change sign across the
/// corners, a necessary condition for a zero inside the cell.
pub fn grid_seeds(params: &ModelParams, parity: Parity, options: &GridSeedOptions) -> Result<Vec<Complex64>> {
    let (re_lo, re_hi) = options.re_range;
    let nx = (((re_hi - re_lo) * options.density).ceil() as usize).max(1);
    let ny = ((options.im_max * options.density).ceil() as usize).max(1);
    let dx = (re_hi - re_lo) / nx as f64;
    let dy = options.im_max / ny as f64;
    let im0 = 0.5 * dy;
    let series = SeriesOptions::default();

    let mut nodes = vec![None; (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            let e = Complex64::new(re_lo + i as f64 * dx, im0 + j as f64 * dy);
            nodes[j * (nx + 1) + i] = match evaluate_g_with(params, e, &series, Derivatives::None) {
                Ok(v) if v.converged => Some(v.value(parity)),
                Ok(_) | Err(Error::PoleProximity { .. }) => None,
                Err(e) => return Err(e),
            };
        }
    }

    let mut seeds = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let corners = [
                nodes[j * (nx + 1) + i],
                nodes[j * (nx + 1) + i + 1],
                nodes[(j + 1) * (nx + 1) + i],
                nodes[(j + 1) * (nx + 1) + i + 1],
            ];
            if corners.iter().any(Option::is_none) {
                continue;
            }
            let values: Vec<Complex64> = corners.iter().flatten().copied().collect();
            let re_change = values.iter().any(|v| v.re > 0.0) && values.iter().any(|v| v.re < 0.0);
            let im_change = values.iter().any(|v| v.im > 0.0) && values.iter().any(|v| v.im < 0.0);
            if re_change && im_change {
                seeds.push(Complex64::new(re_lo + (i as f64 + 0.5) * dx, im0 + (j as f64 + 0.5) * dy));
            }
        }
    }
    Ok(seeds)
}
