//! Coefficient recursion and the G-functions `G±(E) = Σ (e_n ∓ f_n) gⁿ`.
//!
//! With `f_{-1} = 0` and `f_0 = 1`:
//!
//! ```text
//! e_n     = (Δ/2) f_n / (n + g² - E)
//! f_{n+1} = [-(Δ/2) e_n + (n - 3g² - E) f_n] / (2g(n+1)) + f_{n-1} / (n+1)
//! ```
//!
//! E-derivatives are obtained by differentiating both lines term by term, so
//! `∂G/∂E` and `∂²G/∂E²` carry the same precision as `G` itself. The series is
//! summed by carrying `gⁿ` as a running product; coefficients are never scaled.
//!
//! The recursion is generic over the real scalar so that the same code path
//! runs in plain `f64` and in double-double when a zero has to be
//! polished past the cancellation floor of the series.

use std::ops::Neg;

use num_complex::{Complex, Complex64};
use crate::dd::DoubleDouble;

use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const SERIES_TOLERANCE: f64 = 1e-14;
pub const TAIL_TERMS: usize = 5;
pub const DEFAULT_MAX_TERMS: usize = 2000;
pub const POLE_GUARD: f64 = 1e-8;

/// Real scalar the recursion can run in.
pub trait RealScalar: Copy + num_traits::Num + Neg<Output = Self> + From<f64> {
    fn to_f64(self) -> f64;
}

impl RealScalar for f64 {
    fn to_f64(self) -> f64 {
        self
    }
}

impl RealScalar for DoubleDouble {
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

fn lift<T: RealScalar>(z: Complex64) -> Complex<T> {
    Complex::new(T::from(z.re), T::from(z.im))
}

fn lower<T: RealScalar>(z: Complex<T>) -> Complex64 {
    Complex64::new(z.re.to_f64(), z.im.to_f64())
}

fn magnitude<T: RealScalar>(z: Complex<T>) -> f64 {
    lower(z).norm()
}

/// How many E-derivatives to carry alongside the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Derivatives {
    None,
    First,
    Second,
}

impl Derivatives {
    fn order(self) -> usize {
        match self {
            Derivatives::None => 0,
            Derivatives::First => 1,
            Derivatives::Second => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    pub tolerance: f64,
    pub tail_terms: usize,
    pub max_terms: usize,
    pub pole_guard: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            tolerance: SERIES_TOLERANCE,
            tail_terms: TAIL_TERMS,
            max_terms: DEFAULT_MAX_TERMS,
            pole_guard: POLE_GUARD,
        }
    }
}

impl SeriesOptions {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self { tolerance, ..Self::default() }
    }
}

/// One step of the recursion: coefficient values and their E-derivatives,
/// indexed by derivative order.
#[derive(Debug, Clone, Copy)]
struct Step<T> {
    e: [Complex<T>; 3],
    f: [Complex<T>; 3],
}

struct Recurrence<T> {
    half_delta: T,
    two_g: T,
    g2: T,
    energy: Complex<T>,
    order: usize,
    n: usize,
    f_prev: [Complex<T>; 3],
    f: [Complex<T>; 3],
}

impl<T: RealScalar> Recurrence<T> {
    fn new(params: &ModelParams, energy: Complex64, order: usize) -> Self {
        let g = T::from(params.g());
        let zero = Complex::new(T::zero(), T::zero());
        Self {
            half_delta: T::from(0.5 * params.delta()),
            two_g: T::from(2.0) * g,
            g2: g * g,
            energy: lift(energy),
            order,
            n: 0,
            f_prev: [zero; 3],
            f: [Complex::new(T::one(), T::zero()), zero, zero],
        }
    }

    /// Coefficients at the current index, then advance to the next one.
    fn step(&mut self) -> Step<T> {
        let zero = Complex::new(T::zero(), T::zero());
        let n = T::from(self.n as f64);
        let np1 = T::from((self.n + 1) as f64);
        let h = Complex::new(self.half_delta, T::zero());
        let pole_gap = Complex::new(n + self.g2, T::zero()) - self.energy;
        let inv = pole_gap.inv();

        let f = self.f;
        let mut e = [zero; 3];
        e[0] = h * f[0] * inv;
        if self.order >= 1 {
            e[1] = h * (f[1] + f[0] * inv) * inv;
        }
        if self.order >= 2 {
            let two = Complex::new(T::from(2.0), T::zero());
            e[2] = h * (f[2] + two * (f[1] + f[0] * inv) * inv) * inv;
        }

        let c = Complex::new(n - T::from(3.0) * self.g2, T::zero()) - self.energy;
        let den = Complex::new(self.two_g * np1, T::zero());
        let back = Complex::new(np1, T::zero());
        let mut next = [zero; 3];
        next[0] = (c * f[0] - h * e[0]) / den + self.f_prev[0] / back;
        if self.order >= 1 {
            next[1] = (c * f[1] - h * e[1] - f[0]) / den + self.f_prev[1] / back;
        }
        if self.order >= 2 {
            let two = Complex::new(T::from(2.0), T::zero());
            next[2] = (c * f[2] - h * e[2] - two * f[1]) / den + self.f_prev[2] / back;
        }

        self.f_prev = self.f;
        self.f = next;
        self.n += 1;
        Step { e, f }
    }
}

fn require_coupling(params: &ModelParams) -> Result<()> {
    if params.g() <= 0.0 {
        return Err(Error::UnsupportedParameter(
            "the coefficient recursion divides by 2g; g = 0 is handled in closed form".into(),
        ));
    }
    Ok(())
}

/// Errors when `energy` lies within `guard` of a pole line `n + g²`, `n ≤ max_n`.
pub fn check_pole_guard(params: &ModelParams, energy: Complex64, max_n: usize, guard: f64) -> Result<()> {
    let g2 = params.g() * params.g();
    let nearest = (energy.re - g2).round();
    let candidates = [nearest - 1.0, nearest, nearest + 1.0];
    for c in candidates {
        if c < 0.0 || c > max_n as f64 {
            continue;
        }
        let distance = (energy - Complex64::new(c + g2, 0.0)).norm();
        if distance < guard {
            return Err(Error::PoleProximity { n: c as usize, energy, distance });
        }
    }
    Ok(())
}

/// The sequences `e_n`, `f_n` and optionally `∂e_n/∂E`, `∂f_n/∂E` at one energy.
#[derive(Debug, Clone)]
pub struct RecursionTable {
    pub energy: Complex64,
    pub e: Vec<Complex64>,
    pub f: Vec<Complex64>,
    pub de: Vec<Complex64>,
    pub df: Vec<Complex64>,
    pub n_used: usize,
}

/// Runs the recursion for `n = 0..=max_n`.
pub fn compute_recursion(
    params: &ModelParams,
    energy: Complex64,
    max_n: usize,
    with_derivatives: bool,
) -> Result<RecursionTable> {
    require_coupling(params)?;
    check_pole_guard(params, energy, max_n, POLE_GUARD)?;
    let order = if with_derivatives { 1 } else { 0 };
    let mut rec = Recurrence::<f64>::new(params, energy, order);
    let mut table = RecursionTable {
        energy,
        e: Vec::with_capacity(max_n + 1),
        f: Vec::with_capacity(max_n + 1),
        de: Vec::new(),
        df: Vec::new(),
        n_used: max_n + 1,
    };
    for _ in 0..=max_n {
        let step = rec.step();
        table.e.push(step.e[0]);
        table.f.push(step.f[0]);
        if with_derivatives {
            table.de.push(step.e[1]);
            table.df.push(step.f[1]);
        }
    }
    Ok(table)
}

/// Same as [`compute_recursion`] but evaluated in double-double arithmetic and
/// rounded back; used for state reconstruction where the forward recursion
/// has to follow the decaying solution for as long as possible.
pub fn compute_recursion_extended(params: &ModelParams, energy: Complex64, max_n: usize) -> Result<RecursionTable> {
    require_coupling(params)?;
    check_pole_guard(params, energy, max_n, POLE_GUARD)?;
    let mut rec = Recurrence::<DoubleDouble>::new(params, energy, 0);
    let mut e = Vec::with_capacity(max_n + 1);
    let mut f = Vec::with_capacity(max_n + 1);
    for _ in 0..=max_n {
        let step = rec.step();
        e.push(lower(step.e[0]));
        f.push(lower(step.f[0]));
    }
    Ok(RecursionTable { energy, e, f, de: Vec::new(), df: Vec::new(), n_used: max_n + 1 })
}

/// `G₊`, `G₋` and their E-derivatives at one energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GValue {
    pub energy: Complex64,
    pub g_plus: Complex64,
    pub g_minus: Complex64,
    pub dg_plus: Complex64,
    pub dg_minus: Complex64,
    pub d2g_plus: Complex64,
    pub d2g_minus: Complex64,
    pub converged: bool,
    pub n_used: usize,
    /// Size of the last summed terms relative to `1 + |G|`.
    pub tail_estimate: f64,
    /// Largest term magnitude encountered; bounds the cancellation error.
    pub max_term: f64,
}

impl GValue {
    pub fn value(&self, parity: Parity) -> Complex64 {
        match parity {
            Parity::Even => self.g_plus,
            Parity::Odd => self.g_minus,
        }
    }

    pub fn derivative(&self, parity: Parity) -> Complex64 {
        match parity {
            Parity::Even => self.dg_plus,
            Parity::Odd => self.dg_minus,
        }
    }

    pub fn second_derivative(&self, parity: Parity) -> Complex64 {
        match parity {
            Parity::Even => self.d2g_plus,
            Parity::Odd => self.d2g_minus,
        }
    }

    /// Rough absolute rounding floor of the summed series.
    pub fn noise_floor(&self) -> f64 {
        f64::EPSILON * self.max_term * (self.n_used as f64).sqrt()
    }

    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::SeriesNotConverged { n_used: self.n_used, tail: self.tail_estimate })
        }
    }
}

/// Π parity; `Even` pairs with `G₊`, `Odd` with `G₋`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub const BOTH: [Parity; 2] = [Parity::Even, Parity::Odd];

    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Parity::Even => "+",
            Parity::Odd => "-",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "+" | "even" | "plus" => Some(Parity::Even),
            "-" | "odd" | "minus" => Some(Parity::Odd),
            _ => None,
        }
    }
}

fn sum_series<T: RealScalar>(
    params: &ModelParams,
    energy: Complex64,
    options: &SeriesOptions,
    derivatives: Derivatives,
) -> Result<GValue> {
    require_coupling(params)?;
    check_pole_guard(params, energy, options.max_terms, options.pole_guard)?;

    let order = derivatives.order();
    let zero = Complex::new(T::zero(), T::zero());
    let g = T::from(params.g());
    let mut rec = Recurrence::<T>::new(params, energy, order);
    let mut plus = [zero; 3];
    let mut minus = [zero; 3];
    let mut power = T::one();
    let mut small_run = 0usize;
    let mut max_term = 0.0f64;
    let mut tail = f64::INFINITY;
    let mut converged = false;
    let mut n_used = 0;
    // the terms only settle into geometric decay once n exceeds |E|
    let transient = energy.norm().ceil() as usize + 2;

    for n in 0..options.max_terms {
        let step = rec.step();
        let weight = Complex::new(power, T::zero());
        let mut largest_rel = 0.0f64;
        for k in 0..=order {
            let tp = (step.e[k] - step.f[k]) * weight;
            let tm = (step.e[k] + step.f[k]) * weight;
            plus[k] = plus[k] + tp;
            minus[k] = minus[k] + tm;
            let (mp, mm) = (magnitude(tp), magnitude(tm));
            if k == 0 {
                max_term = max_term.max(mp).max(mm);
            }
            largest_rel = largest_rel
                .max(mp / (1.0 + magnitude(plus[k])))
                .max(mm / (1.0 + magnitude(minus[k])));
        }
        power = power * g;
        n_used = n + 1;
        tail = largest_rel;
        if largest_rel < options.tolerance {
            small_run += 1;
        } else {
            small_run = 0;
        }
        if small_run >= options.tail_terms && n >= transient {
            converged = true;
            break;
        }
    }

    Ok(GValue {
        energy,
        g_plus: lower(plus[0]),
        g_minus: lower(minus[0]),
        dg_plus: lower(plus[1]),
        dg_minus: lower(minus[1]),
        d2g_plus: lower(plus[2]),
        d2g_minus: lower(minus[2]),
        converged,
        n_used,
        tail_estimate: tail,
        max_term,
    })
}

/// `G±(E)` with first derivatives, default series options.
pub fn evaluate_g(params: &ModelParams, energy: Complex64) -> Result<GValue> {
    sum_series::<f64>(params, energy, &SeriesOptions::default(), Derivatives::First)
}

pub fn evaluate_g_with(
    params: &ModelParams,
    energy: Complex64,
    options: &SeriesOptions,
    derivatives: Derivatives,
) -> Result<GValue> {
    sum_series::<f64>(params, energy, options, derivatives)
}

/// Double-double evaluation, rounded to `f64` at the end.
///
/// Near high-lying zeros the series cancels by several orders of magnitude;
/// this path keeps about 30 significant digits through the cancellation.
pub fn evaluate_g_extended(
    params: &ModelParams,
    energy: Complex64,
    options: &SeriesOptions,
    derivatives: Derivatives,
) -> Result<GValue> {
    let extended = SeriesOptions { tolerance: options.tolerance.min(1e-28), ..*options };
    sum_series::<DoubleDouble>(params, energy, &extended, derivatives)
}

/// Pole line `E = n + g²` on which `e_n` diverges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoleLine {
    pub n: usize,
}

impl PoleLine {
    pub fn energy(&self, g: f64) -> f64 {
        self.n as f64 + g * g
    }
}

/// `n + g²`.
pub fn pole_energy(n: i64, params: &ModelParams) -> Result<f64> {
    if n < 0 {
        return Err(Error::Argument(format!("pole index must be non-negative, got {n}")));
    }
    Ok(PoleLine { n: n as usize }.energy(params.g()))
}

/// Pole lines with energies inside `[lo, hi]`.
pub fn poles_between(g: f64, lo: f64, hi: f64) -> Vec<PoleLine> {
    let g2 = g * g;
    let first = (lo - g2).ceil().max(0.0) as usize;
    let mut out = Vec::new();
    let mut n = first;
    while (n as f64) + g2 <= hi {
        out.push(PoleLine { n });
        n += 1;
    }
    out
}

/// `f_n` with `E` pinned to pole line `n`; vanishes where two opposite-parity
/// levels cross on that line.
pub fn f_n_on_pole(params: &ModelParams, n: usize) -> Result<Complex64> {
    require_coupling(params)?;
    if n < 1 {
        return Err(Error::Argument("pole-line index must be >= 1".into()));
    }
    let energy = Complex64::new(PoleLine { n }.energy(params.g()), 0.0);
    let mut rec = Recurrence::<f64>::new(params, energy, 0);
    // steps 0..n-1 produce f_1..f_n; none of them touches pole n
    for _ in 0..n {
        rec.step();
    }
    Ok(rec.f[0])
}
