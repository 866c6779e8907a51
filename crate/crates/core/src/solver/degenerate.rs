use crate::error::{Error, Result};
use crate::gfunction::{f_n_on_pole, PoleLine};
use crate::model::ModelParams;

/// Default coupling range searched for a crossing on a pole line.
pub const DEFAULT_DEGENERACY_RANGE: (f64, f64) = (1e-3, 3.0);
const SAMPLES: usize = 3000;
const G_TOLERANCE: f64 = 1e-12;

/// Crossing of two opposite-parity levels on pole line `n`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DegeneratePoint {
    pub n: usize,
    pub g_n: f64,
    /// `n + g_n²`.
    pub e_n: f64,
    pub f_n_residual: f64,
}

/// Lowest root in `range` of `f_n(g)` evaluated on pole line `n`.
pub fn locate_degenerate(delta: f64, n: usize, range: (f64, f64)) -> Result<DegeneratePoint> {
    if n < 1 {
        return Err(Error::Argument("pole-line index must be >= 1".into()));
    }
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Argument(format!("invalid coupling range [{lo}, {hi}]")));
    }
    let f = |g: f64| -> Result<f64> { Ok(f_n_on_pole(&ModelParams::new(delta, g)?, n)?.re) };

    let mut prev_g = lo;
    let mut prev = f(lo)?;
    let mut bracket = None;
    if prev == 0.0 {
        bracket = Some((lo, lo));
    }
    for i in 1..=SAMPLES {
        if bracket.is_some() {
            break;
        }
        let g = lo + (hi - lo) * i as f64 / SAMPLES as f64;
        let v = f(g)?;
        if v == 0.0 {
            bracket = Some((g, g));
        } else if v.signum() != prev.signum() {
            bracket = Some((prev_g, g));
        }
        prev_g = g;
        prev = v;
    }
    let Some((mut a, mut b)) = bracket else {
        return Err(Error::NoDegeneracy { n, g_lo: lo, g_hi: hi });
    };

    let mut fa = f(a)?;
    while b - a > G_TOLERANCE {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    let g_n = 0.5 * (a + b);
    Ok(DegeneratePoint {
        n,
        g_n,
        e_n: PoleLine { n }.energy(g_n),
        f_n_residual: f(g_n)?.abs(),
    })
}
