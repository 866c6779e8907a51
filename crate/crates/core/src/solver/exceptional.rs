use num_complex::Complex64;

use super::{scan_real_zeros_with, spectrum_floor, RealScanOptions, RealZero};
use crate::error::{Error, Result};
use crate::gfunction::{evaluate_g_extended, Derivatives, Parity, PoleLine, SeriesOptions};
use crate::model::ModelParams;

/// Simultaneous zero of `G` and `∂G/∂E` in the `(E, g)` plane.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ExceptionalPoint {
    pub delta: f64,
    pub g_star: f64,
    pub e_star: f64,
    pub parity: Parity,
    /// Inter-pole interval `k` containing `E*`: between pole lines `k-1` and `k`.
    pub interval: usize,
    /// Indices of the coalescing levels in the sorted real spectrum at the
    /// lower end of the refined bracket.
    pub level_pair: (usize, usize),
    pub residual_g: f64,
    pub residual_dg: f64,
    pub second_derivative: f64,
    /// Coupling bracket left by the zero-count bisection.
    pub bracket: (f64, f64),
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct EpOptions {
    pub window: (f64, f64),
    pub parity: Option<Parity>,
    pub interval: Option<usize>,
    /// Highest interval examined when none is given.
    pub max_interval: usize,
    pub bisection_width: f64,
    pub tolerance: f64,
    /// Central-difference step for the `g` column of the Jacobian.
    pub g_step: f64,
    pub min_curvature: f64,
    pub max_iterations: usize,
}

impl EpOptions {
    pub fn new(window: (f64, f64)) -> Self {
        Self {
            window,
            parity: None,
            interval: None,
            max_interval: 12,
            bisection_width: 1e-4,
            tolerance: 1e-10,
            g_step: 1e-7,
            min_curvature: 1e-6,
            max_iterations: 60,
        }
    }
}

/// Energy bounds of inter-pole interval `k`; interval 0 starts at the
/// spectrum floor.
pub fn interval_bounds(params: &ModelParams, k: usize) -> (f64, f64) {
    let g = params.g();
    let upper = PoleLine { n: k }.energy(g);
    let lower = if k == 0 { spectrum_floor(params).min(upper - 1.0) } else { PoleLine { n: k - 1 }.energy(g) };
    (lower, upper)
}

fn zeros_in_interval(params: &ModelParams, k: usize) -> Result<Vec<RealZero>> {
    let (lo, hi) = interval_bounds(params, k);
    scan_real_zeros_with(params, lo, hi, &RealScanOptions::default())
}

/// Real zeros of one parity inside inter-pole interval `k`.
pub fn count_real_zeros(params: &ModelParams, k: usize, parity: Parity) -> Result<usize> {
    Ok(zeros_in_interval(params, k)?.iter().filter(|z| z.parity == parity).count())
}

/// Where the per-parity count of real zeros is taken.
#[derive(Debug, Clone, Copy)]
enum Region {
    /// One inter-pole interval.
    Interval(usize),
    /// Everything below pole line `k`; crossings of the lines inside leave
    /// this count unchanged.
    Below(usize),
}

impl Region {
    fn zeros(self, params: &ModelParams) -> Result<Vec<RealZero>> {
        match self {
            Region::Interval(k) => zeros_in_interval(params, k),
            Region::Below(k) => {
                let lo = interval_bounds(params, 0).0;
                let hi = interval_bounds(params, k).1;
                scan_real_zeros_with(params, lo, hi, &RealScanOptions::default())
            }
        }
    }

    fn counts(self, params: &ModelParams) -> Result<[usize; 2]> {
        let zeros = self.zeros(params)?;
        let even = zeros.iter().filter(|z| z.parity == Parity::Even).count();
        Ok([even, zeros.len() - even])
    }
}

/// Sub-windows are at most this wide, so that separate events in `g` are
/// seen one at a time.
const SUB_WINDOW: f64 = 5e-3;
const MAX_SUB_WINDOWS: usize = 400;

/// Finds an exceptional point at fixed `Δ` inside `options.window`; the one
/// with the smallest `g` when there are several.
///
/// Stage 1 walks the window in narrow sub-windows and looks for a drop by two
/// in the per-parity count of real zeros, either inside the requested
/// inter-pole interval or below the highest pole line considered. A
/// degenerate crossing moves one level of each parity across a pole line and
/// changes such a count by at most one. Stage 1 then bisects on `g` for the
/// drop. Stage 2 runs Newton on `(G, ∂G/∂E) = 0` in `(E, g)`, in
/// double-double arithmetic.
pub fn locate_ep(delta: f64, options: &EpOptions) -> Result<ExceptionalPoint> {
    let (g_lo, g_hi) = options.window;
    if !(g_lo > 0.0 && g_hi > g_lo && g_hi.is_finite()) {
        return Err(Error::Argument(format!("invalid coupling window [{g_lo}, {g_hi}]")));
    }
    let at = |g: f64| ModelParams::new(delta, g);
    let region = match options.interval {
        Some(k) => Region::Interval(k),
        None => Region::Below(options.max_interval),
    };
    let parities: Vec<Parity> = match options.parity {
        Some(p) => vec![p],
        None => Parity::BOTH.to_vec(),
    };

    let pieces = (((g_hi - g_lo) / SUB_WINDOW).ceil() as usize).clamp(1, MAX_SUB_WINDOWS);
    let edge = |i: usize| if i == pieces { g_hi } else { g_lo + (g_hi - g_lo) * i as f64 / pieces as f64 };
    let mut first_error = None;
    let mut left = region.counts(&at(g_lo)?)?;
    for i in 0..pieces {
        let (a, b) = (edge(i), edge(i + 1));
        let right = region.counts(&at(b)?)?;
        for &parity in &parities {
            let slot = parity as usize;
            if left[slot] >= right[slot] + 2 {
                match refine(delta, options, region, parity, left[slot], (a, b)) {
                    Ok(ep) => return Ok(ep),
                    Err(e) => {
                        first_error.get_or_insert(e);
                    }
                }
            }
        }
        left = right;
    }
    Err(first_error.unwrap_or(Error::NoExceptionalPoint { g_lo, g_hi }))
}

fn refine(
    delta: f64,
    options: &EpOptions,
    region: Region,
    parity: Parity,
    count_lo: usize,
    window: (f64, f64),
) -> Result<ExceptionalPoint> {
    let at = |g: f64| ModelParams::new(delta, g);
    let count = |g: f64| -> Result<usize> {
        Ok(region.zeros(&at(g)?)?.iter().filter(|z| z.parity == parity).count())
    };
    let (mut lo, mut hi) = window;
    while hi - lo > options.bisection_width {
        let mid = 0.5 * (lo + hi);
        // a single crossing costs one level; the coalescence costs two
        if count(mid)? + 1 >= count_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let bracket = (lo, hi);

    // the coalescing pair is the closest adjacent pair of this parity
    let params_lo = at(lo)?;
    let zeros = region.zeros(&params_lo)?;
    let same: Vec<&RealZero> = zeros.iter().filter(|z| z.parity == parity).collect();
    let pair = same
        .windows(2)
        .min_by(|a, b| (a[1].energy - a[0].energy).total_cmp(&(b[1].energy - b[0].energy)))
        .ok_or_else(|| Error::EpRefinement { bracket, reason: "no zero pair below the bracket".into() })?;
    let seed_e = 0.5 * (pair[0].energy + pair[1].energy);
    let k = interval_of(&params_lo, seed_e);
    let level_pair = level_indices(&params_lo, k, pair[0].energy, pair[1].energy)?;

    let (e_star, g_star, iterations) = newton(delta, parity, seed_e, k, options, bracket)?;
    let (v, dv, d2v) = derivatives(delta, e_star, g_star, parity)?;
    if v.abs() >= options.tolerance || dv.abs() >= options.tolerance {
        return Err(Error::EpRefinement { bracket, reason: format!("residuals |G|={:e}, |G_E|={:e}", v.abs(), dv.abs()) });
    }
    if d2v.abs() <= options.min_curvature {
        return Err(Error::EpRefinement { bracket, reason: format!("|G_EE|={:e}: not a simple branch point", d2v.abs()) });
    }
    Ok(ExceptionalPoint {
        delta,
        g_star,
        e_star,
        parity,
        interval: interval_of(&at(g_star)?, e_star),
        level_pair,
        residual_g: v.abs(),
        residual_dg: dv.abs(),
        second_derivative: d2v,
        bracket,
        iterations,
    })
}

/// Inter-pole interval containing a real energy.
fn interval_of(params: &ModelParams, e: f64) -> usize {
    let above = e - params.g() * params.g();
    if above < 0.0 {
        0
    } else {
        above.floor() as usize + 1
    }
}

/// Positions of two real levels in the sorted real spectrum up to interval `k`.
fn level_indices(params: &ModelParams, k: usize, a: f64, b: f64) -> Result<(usize, usize)> {
    let (_, top) = interval_bounds(params, k);
    let floor = interval_bounds(params, 0).0;
    let all = scan_real_zeros_with(params, floor, top, &RealScanOptions::default())?;
    let index = |e: f64| all.iter().position(|z| z.energy == e).unwrap_or_else(|| all.iter().filter(|z| z.energy < e).count());
    Ok((index(a), index(b)))
}

fn derivatives(delta: f64, e: f64, g: f64, parity: Parity) -> Result<(f64, f64, f64)> {
    let p = ModelParams::new(delta, g)?;
    let v = evaluate_g_extended(&p, Complex64::new(e, 0.0), &SeriesOptions::default(), Derivatives::Second)?.ensure_converged()?;
    Ok((v.value(parity).re, v.derivative(parity).re, v.second_derivative(parity).re))
}

fn newton(
    delta: f64,
    parity: Parity,
    mut e: f64,
    k: usize,
    options: &EpOptions,
    bracket: (f64, f64),
) -> Result<(f64, f64, usize)> {
    let h = options.g_step;
    let mut g = bracket.0;
    // trial points stay near the bracket and inside the interval of the seed
    let slack = 10.0 * (bracket.1 - bracket.0).max(options.bisection_width);
    let g_range = ((bracket.0 - slack).max(h), bracket.1 + slack);
    let inside = |te: f64, tg: f64| {
        tg >= g_range.0
            && tg <= g_range.1
            && ModelParams::new(delta, tg).is_ok_and(|p| {
                let (lo, hi) = interval_bounds(&p, k);
                te > lo && te < hi
            })
    };
    let stagnated = |reason: String| Error::EpRefinement { bracket, reason };
    let (mut v, mut dv, mut d2v) = derivatives(delta, e, g, parity)?;
    let mut norm = v.hypot(dv);
    for iteration in 0..options.max_iterations {
        if v.abs() < 0.1 * options.tolerance && dv.abs() < 0.1 * options.tolerance {
            return Ok((e, g, iteration));
        }
        let (vp, dvp, _) = derivatives(delta, e, g + h, parity)?;
        let (vm, dvm, _) = derivatives(delta, e, g - h, parity)?;
        let v_g = (vp - vm) / (2.0 * h);
        let dv_g = (dvp - dvm) / (2.0 * h);
        // J = [[G_E, G_g], [G_EE, G_Eg]]
        let det = dv * dv_g - v_g * d2v;
        if det == 0.0 || !det.is_finite() {
            return Err(stagnated("singular Jacobian".into()));
        }
        let step_e = (v * dv_g - v_g * dv) / det;
        let step_g = (dv * dv - d2v * v) / det;

        let mut damping = 1.0;
        loop {
            let (te, tg) = (e - damping * step_e, g - damping * step_g);
            let trial = if inside(te, tg) { derivatives(delta, te, tg, parity).ok() } else { None };
            if let Some((tv, tdv, td2v)) = trial {
                let tnorm = tv.hypot(tdv);
                if tnorm < norm || damping < 1e-6 {
                    e = te;
                    g = tg;
                    v = tv;
                    dv = tdv;
                    d2v = td2v;
                    norm = tnorm;
                    break;
                }
            }
            damping *= 0.5;
            if damping < 1e-6 {
                return Err(stagnated(format!("line search failed at E={e}, g={g}")));
            }
        }
    }
    if v.abs() < options.tolerance && dv.abs() < options.tolerance {
        return Ok((e, g, options.max_iterations));
    }
    Err(stagnated(format!("no convergence after {} iterations", options.max_iterations)))
}
