use num_complex::Complex64;

use super::{precise_g, BRACKET_TOLERANCE};
use crate::error::{Error, Result};
use crate::gfunction::{evaluate_g_with, poles_between, Derivatives, Parity, SeriesOptions};
use crate::model::ModelParams;

/// A real eigenvalue found as a sign change of `G±` between two pole lines.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RealZero {
    pub energy: f64,
    pub parity: Parity,
    /// Sampling cell that contained the sign change; never straddles a pole.
    pub bracket: (f64, f64),
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RealScanOptions {
    /// Samples per inter-pole interval before adaptive refinement.
    pub samples: usize,
    pub bracket_tolerance: f64,
    pub series: SeriesOptions,
}

impl Default for RealScanOptions {
    fn default() -> Self {
        Self { samples: 200, bracket_tolerance: BRACKET_TOLERANCE, series: SeriesOptions::default() }
    }
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    energy: f64,
    value: [f64; 2],
    slope: [f64; 2],
}

fn parity_slot(parity: Parity) -> usize {
    match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    }
}

/// All real zeros of `G₊` and `G₋` in `[e_min, e_max]`, sorted by energy.
pub fn scan_real_zeros(params: &ModelParams, e_min: f64, e_max: f64) -> Result<Vec<RealZero>> {
    scan_real_zeros_with(params, e_min, e_max, &RealScanOptions::default())
}

pub fn scan_real_zeros_with(
    params: &ModelParams,
    e_min: f64,
    e_max: f64,
    options: &RealScanOptions,
) -> Result<Vec<RealZero>> {
    if !(e_min.is_finite() && e_max.is_finite()) || e_min > e_max {
        return Err(Error::Argument(format!("invalid energy range [{e_min}, {e_max}]")));
    }
    if params.g() <= 0.0 {
        return Err(Error::UnsupportedParameter("real-zero scan needs g > 0".into()));
    }
    let guard = options.series.pole_guard;
    let g = params.g();

    let mut cuts = vec![(e_min, false)];
    for pole in poles_between(g, e_min - 1e-12, e_max + 1e-12) {
        let p = pole.energy(g);
        if (p - e_min).abs() < 1e-12 {
            cuts[0].1 = true;
        } else if (p - e_max).abs() < 1e-12 {
            cuts.push((e_max, true));
        } else {
            cuts.push((p, true));
        }
    }
    if cuts.last().map(|c| c.0) != Some(e_max) {
        cuts.push((e_max, false));
    }

    let mut zeros = Vec::new();
    for w in cuts.windows(2) {
        let ((a, a_pole), (b, b_pole)) = (w[0], w[1]);
        if b - a <= 4.0 * guard {
            continue;
        }
        let energies = sample_points(a, a_pole, b, b_pole, options.samples, guard);
        let samples = energies
            .iter()
            .map(|&e| evaluate(params, e, &options.series))
            .collect::<Result<Vec<_>>>()?;
        for parity in Parity::BOTH {
            scan_interval(params, &samples, parity, options, &mut zeros)?;
        }
    }
    zeros.sort_by(|x, y| x.energy.total_cmp(&y.energy).then(x.parity.cmp(&y.parity)));
    Ok(zeros)
}

fn evaluate(params: &ModelParams, energy: f64, series: &SeriesOptions) -> Result<Sample> {
    let v = evaluate_g_with(params, Complex64::new(energy, 0.0), series, Derivatives::First)?.ensure_converged()?;
    Ok(Sample {
        energy,
        value: [v.g_plus.re, v.g_minus.re],
        slope: [v.dg_plus.re, v.dg_minus.re],
    })
}

/// Cosine-clustered samples, plus a geometric ladder towards pole ends where
/// zeros can sit arbitrarily close to the divergence.
fn sample_points(a: f64, a_pole: bool, b: f64, b_pole: bool, count: usize, guard: f64) -> Vec<f64> {
    let width = b - a;
    let margin = 10.0 * guard;
    let count = count.max(3);
    let mut pts: Vec<f64> = (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            a + width * 0.5 * (1.0 - (std::f64::consts::PI * t).cos())
        })
        .collect();
    for k in 2..=7 {
        let d = width * 10f64.powi(-k);
        if d <= margin {
            break;
        }
        if a_pole {
            pts.push(a + d);
        }
        if b_pole {
            pts.push(b - d);
        }
    }
    if a_pole {
        pts.push(a + margin);
    }
    if b_pole {
        pts.push(b - margin);
    }
    pts.retain(|&e| (!a_pole || e >= a + margin) && (!b_pole || e <= b - margin));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn scan_interval(
    params: &ModelParams,
    samples: &[Sample],
    parity: Parity,
    options: &RealScanOptions,
    out: &mut Vec<RealZero>,
) -> Result<()> {
    let slot = parity_slot(parity);
    let series = &options.series;
    let value_at = |e: f64| -> Result<f64> {
        let v = evaluate_g_with(params, Complex64::new(e, 0.0), series, Derivatives::None)?.ensure_converged()?;
        Ok(v.value(parity).re)
    };
    let slope_at = |e: f64| -> Result<f64> {
        let v = evaluate_g_with(params, Complex64::new(e, 0.0), series, Derivatives::First)?.ensure_converged()?;
        Ok(v.derivative(parity).re)
    };

    for w in samples.windows(2) {
        let (l, r) = (w[0], w[1]);
        let (vl, vr) = (l.value[slot], r.value[slot]);
        let mut brackets = Vec::new();
        if vl == 0.0 {
            out.push(RealZero { energy: l.energy, parity, bracket: (l.energy, r.energy), residual: 0.0 });
            continue;
        }
        if vl.signum() != vr.signum() && vr != 0.0 {
            brackets.push((l.energy, vl, r.energy, vr));
        } else if l.slope[slot].signum() != r.slope[slot].signum() {
            // one extremum inside the cell; two zeros hide here if it crosses zero
            let mut lo = l.energy;
            let mut hi = r.energy;
            let s_lo = l.slope[slot].signum();
            for _ in 0..200 {
                if hi - lo <= options.bracket_tolerance {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if slope_at(mid)?.signum() == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let xm = 0.5 * (lo + hi);
            let vm = value_at(xm)?;
            if vm.signum() != vl.signum() && vm.signum() != vr.signum() && vm != 0.0 {
                brackets.push((l.energy, vl, xm, vm));
                brackets.push((xm, vm, r.energy, vr));
            }
        }
        for (lo, vlo, hi, vhi) in brackets {
            if let Some(z) = refine(params, parity, (lo, vlo), (hi, vhi), options, &value_at)? {
                out.push(z);
            }
        }
    }
    Ok(())
}

fn refine(
    params: &ModelParams,
    parity: Parity,
    (mut lo, mut vlo): (f64, f64),
    (mut hi, _vhi): (f64, f64),
    options: &RealScanOptions,
    value_at: &dyn Fn(f64) -> Result<f64>,
) -> Result<Option<RealZero>> {
    let cell = (lo, hi);
    for _ in 0..200 {
        if hi - lo <= options.bracket_tolerance {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let vm = value_at(mid)?;
        if vm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if vm.signum() == vlo.signum() {
            lo = mid;
            vlo = vm;
        } else {
            hi = mid;
        }
    }
    let mut energy = 0.5 * (lo + hi);

    // Confirm the sign change survives in extended precision; near high-lying
    // levels the f64 series can flip sign on rounding noise alone.
    let series = &options.series;
    let probe = |e: f64| precise_g(params, Complex64::new(e, 0.0), parity, series);
    let (left, _) = probe(cell.0)?;
    let (right, _) = probe(cell.1)?;
    let (mid_value, _) = probe(energy)?;
    let straddles = left.re.signum() != right.re.signum()
        || (mid_value.re.signum() != left.re.signum() && mid_value.re.signum() != right.re.signum());
    if !straddles {
        return Ok(None);
    }

    let mut residual = mid_value.norm();
    for _ in 0..4 {
        let (value, slope) = probe(energy)?;
        residual = value.norm();
        if slope.re == 0.0 || residual == 0.0 {
            break;
        }
        let next = energy - value.re / slope.re;
        if !(next > cell.0 && next < cell.1) {
            break;
        }
        let (next_value, _) = probe(next)?;
        if next_value.norm() >= residual {
            break;
        }
        energy = next;
        residual = next_value.norm();
    }
    Ok(Some(RealZero { energy, parity, bracket: cell, residual }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weak_coupling_ground_state() {
        let p = ModelParams::new(2.5, 0.01).unwrap();
        let zeros = scan_real_zeros(&p, -1.5, 0.0).unwrap();
        // the decoupled levels in this window are -Δ/2 and 1 - Δ/2
        assert_eq!(zeros.len(), 2, "{zeros:?}");
        assert!((zeros[0].energy + 1.25).abs() < 1e-3);
        assert_eq!(zeros[0].parity, Parity::Even);
        assert!((zeros[1].energy + 0.25).abs() < 1e-3);
        assert_eq!(zeros[1].parity, Parity::Odd);
    }

    #[test]
    fn zeros_have_small_residual_and_clean_brackets() {
        let p = ModelParams::new(0.5, 0.25).unwrap();
        let zeros = scan_real_zeros(&p, -0.5, 3.5).unwrap();
        assert_eq!(zeros.len(), 3, "{zeros:?}");
        for z in &zeros {
            assert!(z.residual < 1e-12, "{z:?}");
            assert!(z.bracket.0 < z.energy && z.energy < z.bracket.1);
            let poles = poles_between(0.25, z.bracket.0, z.bracket.1);
            assert!(poles.is_empty());
        }
        let oracle = crate::oracle::sector_eigenvalues(&p, &crate::model::FockSpace::new(120).unwrap()).unwrap();
        for z in &zeros {
            assert!(oracle.iter().any(|(e, par)| (e.re - z.energy).abs() < 1e-8 && e.im.abs() < 1e-8 && *par == z.parity));
        }
    }

    #[test]
    fn empty_window_is_valid() {
        let p = ModelParams::new(0.5, 0.25).unwrap();
        assert!(scan_real_zeros(&p, 1.2, 1.9).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_range() {
        let p = ModelParams::new(0.5, 0.25).unwrap();
        assert!(scan_real_zeros(&p, 2.0, 1.0).is_err());
        assert!(scan_real_zeros(&ModelParams::new(0.5, 0.0).unwrap(), 0.0, 1.0).is_err());
    }
}
