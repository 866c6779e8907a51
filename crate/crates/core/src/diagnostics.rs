//! Biorthogonal diagnostics: generalized fidelity, fidelity susceptibility
//! and the c-product `⟨L|R⟩`.
//!
//! The fidelity is taken in quotient form,
//!
//! ```text
//! F = ⟨L(g), R(g+ε)⟩ ⟨L(g+ε), R(g)⟩ / (⟨L(g), R(g)⟩ ⟨L(g+ε), R(g+ε)⟩)
//! ```
//!
//! which equals the biorthogonally normalized overlap product and does not
//! depend on how either eigenvector is scaled or rephased.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{FockSpace, ModelParams};
use crate::oracle::{assign_branches, diagonalize_with, inner, DiagOptions, EigenPair, Provenance, SpectrumLevel, SpectrumRecord};

/// Below this `|⟨L, R⟩|` the pair counts as self-orthogonal.
pub const SELF_ORTHOGONAL: f64 = 1e-12;
pub const DEFAULT_EPSILON: f64 = 1e-5;
/// Largest relative change of `Re χ` between `ε` and `ε/10` accepted by the audit.
pub const RICHARDSON_TOLERANCE: f64 = 0.05;

/// `F` from the four vectors.
pub fn fidelity_from_vectors(
    left0: &[Complex64],
    right0: &[Complex64],
    left1: &[Complex64],
    right1: &[Complex64],
    g: f64,
) -> Result<Complex64> {
    let n0 = inner(left0, right0);
    let n1 = inner(left1, right1);
    for n in [n0, n1] {
        if n.norm() < SELF_ORTHOGONAL {
            return Err(Error::SelfOrthogonal { g, overlap: n.norm() });
        }
    }
    Ok(inner(left0, right1) * inner(left1, right0) / (n0 * n1))
}

/// `χ = (1 - F) / ε²`.
pub fn susceptibility(fidelity: Complex64, epsilon: f64) -> Complex64 {
    (Complex64::new(1.0, 0.0) - fidelity) / (epsilon * epsilon)
}

/// How the level at `g + ε` is identified with the level at `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Tracking {
    /// Same position in the `(Re, Im)`-sorted spectrum.
    Sorted,
    /// Nearest eigenvalue of the same parity, gated so that the match is unique.
    Branch,
}

fn pairs_at(delta: f64, g: f64, space: &FockSpace, keep: usize) -> Result<Vec<EigenPair>> {
    let params = ModelParams::new(delta, g)?;
    let mut pairs = diagonalize_with(&params, space, &DiagOptions { vectors: true, audit: false })?;
    pairs.truncate(keep);
    Ok(pairs)
}

/// Index in `candidates` of the level continuing `from`. Nearest same-parity
/// eigenvalue; rejected when the runner-up is not at least twice as far.
fn continue_level(from: &EigenPair, candidates: &[EigenPair], g: f64) -> Result<usize> {
    let mut dist: Vec<(f64, usize)> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.parity == from.parity)
        .map(|(k, c)| ((c.value - from.value).norm(), k))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    match dist.as_slice() {
        [] => Err(Error::BranchMismatch(format!("no level of matching parity at g={g}"))),
        [only] => Ok(only.1),
        [best, second, ..] if second.0 > 2.0 * best.0 => Ok(best.1),
        [best, second, ..] => Err(Error::BranchMismatch(format!(
            "level at {} has two continuations at g={g} (distances {:e}, {:e})",
            from.value, best.0, second.0
        ))),
    }
}

fn pick(pairs: &[EigenPair], level: usize, g: f64) -> Result<&EigenPair> {
    pairs.get(level).ok_or_else(|| Error::Argument(format!("level {level} not available at g={g}")))
}

fn partner<'a>(from: &EigenPair, level: usize, next: &'a [EigenPair], g: f64, tracking: Tracking) -> Result<&'a EigenPair> {
    match tracking {
        Tracking::Sorted => pick(next, level, g),
        Tracking::Branch => Ok(&next[continue_level(from, next, g)?]),
    }
}

/// `F` for sorted level `level` between `g` and `g + ε`.
pub fn fidelity(params: &ModelParams, level: usize, epsilon: f64, space: &FockSpace, tracking: Tracking) -> Result<Complex64> {
    if !(epsilon > 0.0) {
        return Err(Error::Argument(format!("epsilon must be positive, got {epsilon}")));
    }
    let keep = level + 8;
    let here = pairs_at(params.delta(), params.g(), space, keep)?;
    let there = pairs_at(params.delta(), params.g() + epsilon, space, keep)?;
    let a = pick(&here, level, params.g())?;
    let b = partner(a, level, &there, params.g() + epsilon, tracking)?;
    fidelity_from_vectors(&a.left, &a.right, &b.left, &b.right, params.g())
}

/// `χ` for sorted level `level`, with the `ε` actually used.
pub fn fidelity_susceptibility(
    params: &ModelParams,
    level: usize,
    epsilon: f64,
    space: &FockSpace,
    tracking: Tracking,
) -> Result<(Complex64, f64)> {
    let f = fidelity(params, level, epsilon, space, tracking)?;
    Ok((susceptibility(f, epsilon), epsilon))
}

/// `⟨L, R⟩` of sorted level `level` with unit-norm vectors; its magnitude is
/// phase-free, its phase follows the oracle convention (real and non-negative).
pub fn c_product(params: &ModelParams, level: usize, space: &FockSpace) -> Result<Complex64> {
    let pairs = pairs_at(params.delta(), params.g(), space, level + 1)?;
    Ok(pick(&pairs, level, params.g())?.c_product())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum EpsilonMode {
    Fixed(f64),
    /// `ε` is the distance to the next grid point, whose eigenpairs are reused.
    GridStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ScanFlag {
    SelfOrthogonal,
    BranchMismatch,
    /// `Re χ` moved by more than 5% when `ε` was divided by ten.
    Richardson,
}

impl ScanFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            ScanFlag::SelfOrthogonal => "self-orthogonal",
            ScanFlag::BranchMismatch => "branch-mismatch",
            ScanFlag::Richardson => "richardson",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    pub epsilon: EpsilonMode,
    pub tracking: Tracking,
    pub richardson: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { epsilon: EpsilonMode::Fixed(DEFAULT_EPSILON), tracking: Tracking::Branch, richardson: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FidelityScanPoint {
    pub g: f64,
    /// Requested level: sorted index under [`Tracking::Sorted`], branch id otherwise.
    pub branch_id: usize,
    /// Position of the level in the sorted spectrum at `g`.
    pub sorted_index: usize,
    pub fidelity: Complex64,
    pub chi: Complex64,
    pub epsilon_used: f64,
    pub c_product: Complex64,
    pub flag: Option<ScanFlag>,
}

struct GridPoint {
    here: Vec<EigenPair>,
    shifted: Option<Vec<EigenPair>>,
    refined: Option<Vec<EigenPair>>,
}

/// Fidelity susceptibility and c-product along `grid` for each requested level.
///
/// With [`Tracking::Branch`], levels are branch ids from the oracle trace;
/// ids at the first grid point equal sorted positions there. The c-product
/// phase is fixed real and non-negative at the first point of each branch and
/// then carried along by parallel transport of `L` and `R` separately.
/// With [`EpsilonMode::GridStep`] the last grid point has no partner and is
/// not emitted.
pub fn fidelity_scan(delta: f64, grid: &[f64], levels: &[usize], space: &FockSpace, options: &ScanOptions) -> Result<Vec<FidelityScanPoint>> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Argument("coupling grid must be strictly increasing".into()));
    }
    if let EpsilonMode::Fixed(e) = options.epsilon {
        if !(e > 0.0) {
            return Err(Error::Argument(format!("epsilon must be positive, got {e}")));
        }
    }
    let keep = levels.iter().copied().max().unwrap_or(0) + 9;
    let points = grid
        .par_iter()
        .map(|&g| {
            let here = pairs_at(delta, g, space, keep)?;
            let (shifted, refined) = match options.epsilon {
                EpsilonMode::Fixed(e) => {
                    let refined = if options.richardson { Some(pairs_at(delta, g + 0.1 * e, space, keep)?) } else { None };
                    (Some(pairs_at(delta, g + e, space, keep)?), refined)
                }
                EpsilonMode::GridStep => (None, None),
            };
            Ok(GridPoint { here, shifted, refined })
        })
        .collect::<Result<Vec<_>>>()?;

    let branch_index = match options.tracking {
        Tracking::Sorted => None,
        Tracking::Branch => Some(branch_positions(grid, &points)),
    };

    let mut out = Vec::new();
    for &level in levels {
        let mut transport: Option<(Vec<Complex64>, Vec<Complex64>)> = None;
        let count = match options.epsilon {
            EpsilonMode::GridStep => grid.len().saturating_sub(1),
            EpsilonMode::Fixed(_) => grid.len(),
        };
        for i in 0..count {
            let g = grid[i];
            let position = |k: usize| -> Option<usize> {
                match &branch_index {
                    None => Some(level),
                    Some(ids) => ids[k].iter().position(|&b| b == level),
                }
            };
            let Some(pos) = position(i).filter(|&p| p < points[i].here.len()) else { continue };
            let a = &points[i].here[pos];

            let (mut left, mut right) = (a.left.clone(), a.right.clone());
            if let Some((l_prev, r_prev)) = &transport {
                rephase(&mut right, r_prev);
                rephase(&mut left, l_prev);
            }
            let c = inner(&left, &right);
            transport = Some((left, right));

            let (epsilon, next, partner_pos) = match options.epsilon {
                EpsilonMode::Fixed(e) => (e, points[i].shifted.as_deref().unwrap_or(&[]), None),
                EpsilonMode::GridStep => (grid[i + 1] - g, points[i + 1].here.as_slice(), position(i + 1)),
            };
            let mut point = FidelityScanPoint {
                g,
                branch_id: level,
                sorted_index: pos,
                fidelity: Complex64::new(f64::NAN, f64::NAN),
                chi: Complex64::new(f64::NAN, f64::NAN),
                epsilon_used: epsilon,
                c_product: c,
                flag: None,
            };
            let b = match (options.tracking, partner_pos) {
                (Tracking::Branch, Some(p)) => next.get(p).ok_or_else(|| Error::BranchMismatch(format!("branch {level} lost at g={g}"))),
                (Tracking::Branch, None) if options.epsilon == EpsilonMode::GridStep => {
                    Err(Error::BranchMismatch(format!("branch {level} lost after g={g}")))
                }
                _ => partner(a, pos, next, g + epsilon, options.tracking),
            };
            let f = b.and_then(|b| fidelity_from_vectors(&a.left, &a.right, &b.left, &b.right, g));
            match f {
                Ok(f) => {
                    point.fidelity = f;
                    point.chi = susceptibility(f, epsilon);
                    if let (Some(refined), EpsilonMode::Fixed(e)) = (&points[i].refined, options.epsilon) {
                        let check = partner(a, pos, refined, g + 0.1 * e, options.tracking)
                            .and_then(|b| fidelity_from_vectors(&a.left, &a.right, &b.left, &b.right, g));
                        let stable = match check {
                            Ok(f2) => {
                                let (x, y) = (point.chi.re, susceptibility(f2, 0.1 * e).re);
                                (x - y).abs() <= RICHARDSON_TOLERANCE * x.abs().max(y.abs()) || (x - y).abs() < 1e-6
                            }
                            Err(_) => false,
                        };
                        if !stable {
                            point.flag = Some(ScanFlag::Richardson);
                        }
                    }
                }
                Err(Error::SelfOrthogonal { .. }) => point.flag = Some(ScanFlag::SelfOrthogonal),
                Err(Error::BranchMismatch(_)) => point.flag = Some(ScanFlag::BranchMismatch),
                Err(e) => return Err(e),
            }
            out.push(point);
        }
    }
    Ok(out)
}

/// Multiplies `v` by the phase that makes `⟨previous, v⟩` real and positive.
fn rephase(v: &mut [Complex64], previous: &[Complex64]) {
    let o = inner(previous, v);
    if o.norm() > 0.0 {
        let phase = o.conj() / o.norm();
        v.iter_mut().for_each(|z| *z *= phase);
    }
}

/// Branch id of every kept level at every grid point, from the oracle assignment.
fn branch_positions(grid: &[f64], points: &[GridPoint]) -> Vec<Vec<usize>> {
    let mut records: Vec<SpectrumRecord> = grid
        .iter()
        .zip(points)
        .map(|(&g, p)| SpectrumRecord {
            g,
            levels: p.here.iter().map(|e| SpectrumLevel::new(e.value, e.parity, Provenance::Oracle)).collect(),
            failures: Vec::new(),
        })
        .collect();
    assign_branches(&mut records);
    records.into_iter().map(|r| r.levels.into_iter().map(|l| l.branch_id).collect()).collect()
}
