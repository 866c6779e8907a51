//! Dense-diagonalization oracle: eigenpairs with right and left vectors,
//! parity labels, branch tracing over a coupling grid and reconstruction of
//! eigenstates from the coefficient recursion.
//!
//! Π commutes with `H` exactly under photon-number truncation, so each parity
//! sector is diagonalized on its own. This keeps the labels pure and separates
//! opposite-parity levels that cross on a pole line.

use std::collections::BTreeMap;

use faer::Mat;
use num_complex::Complex64;
use pathfinding::kuhn_munkres::kuhn_munkres_min;
use pathfinding::matrix::Matrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gfunction::{Parity, PoleLine, RecursionTable};
use crate::model::{build_displacement, build_hamiltonian, build_sector_hamiltonian, sector_to_bare, FockSpace, ModelParams, OperatorMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Extra photons used by the cutoff audit.
pub const AUDIT_EXTRA: usize = 20;
/// Largest eigenvalue shift under the audit for a value to count as converged.
pub const AUDIT_TOLERANCE: f64 = 1e-10;
/// Optimal assignment is used up to this many branches, greedy beyond.
pub const OPTIMAL_ASSIGNMENT_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum ParityLabel {
    Even,
    Odd,
    Mixed,
}

impl ParityLabel {
    pub fn symbol(self) -> &'static str {
        match self {
            ParityLabel::Even => "+",
            ParityLabel::Odd => "-",
            ParityLabel::Mixed => "mixed",
        }
    }

    pub fn parity(self) -> Option<Parity> {
        match self {
            ParityLabel::Even => Some(Parity::Even),
            ParityLabel::Odd => Some(Parity::Odd),
            ParityLabel::Mixed => None,
        }
    }
}

/// Where a spectrum entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Provenance {
    Oracle,
    GZero,
    InjectedDegeneracy,
    ExceptionalPoint,
    ClosedForm,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Oracle => "oracle",
            Provenance::GZero => "g-zero",
            Provenance::InjectedDegeneracy => "injected-degeneracy",
            Provenance::ExceptionalPoint => "exceptional-point",
            Provenance::ClosedForm => "closed-form",
        }
    }
}

/// Eigenvalue with unit-norm right and left eigenvectors in the bare basis.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: Complex64,
    pub right: Vec<Complex64>,
    pub left: Vec<Complex64>,
    pub parity: ParityLabel,
    pub cutoff_converged: bool,
    /// Two left candidates were equally close when pairing with the right vector.
    pub ambiguous: bool,
}

impl EigenPair {
    /// `⟨L, R⟩` for the stored unit-norm vectors.
    pub fn c_product(&self) -> Complex64 {
        inner(&self.left, &self.right)
    }
}

/// `⟨a, b⟩ = Σ conj(a_i) b_i`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut [Complex64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z /= n);
    }
}

/// Rotates `v` so that its largest component is real and positive.
fn fix_phase(v: &mut [Complex64]) {
    let Some(big) = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) else { return };
    if big.norm() > 0.0 {
        let phase = big.conj() / big.norm();
        v.iter_mut().for_each(|z| *z *= phase);
    }
}

/// `|⟨a, b⟩| / (‖a‖‖b‖)`.
pub fn cosine_similarity(a: &[Complex64], b: &[Complex64]) -> f64 {
    inner(a, b).norm() / (norm(a) * norm(b))
}

/// Sorts by real part, then imaginary part. Values whose real parts agree to
/// `1e-9 (1 + |Re|)` count as equal in `Re`, so conjugate pairs, whose real
/// parts differ only by rounding, always come out as `(Re - i Im, Re + i Im)`.
pub fn sort_spectrum<T>(items: &mut [T], key: impl Fn(&T) -> Complex64) {
    items.sort_by(|a, b| key(a).re.total_cmp(&key(b).re));
    let mut start = 0;
    while start < items.len() {
        let anchor = key(&items[start]).re;
        let mut end = start + 1;
        while end < items.len() && (key(&items[end]).re - anchor).abs() <= 1e-9 * (1.0 + anchor.abs()) {
            end += 1;
        }
        items[start..end].sort_by(|a, b| key(a).im.total_cmp(&key(b).im));
        start = end;
    }
}

/// Keeps the first `keep` items of a sorted spectrum, plus one more when the
/// cut would separate a conjugate pair.
pub fn truncate_spectrum<T>(items: &mut Vec<T>, keep: usize, key: impl Fn(&T) -> Complex64) {
    if keep == 0 || items.len() <= keep {
        items.truncate(keep);
        return;
    }
    let (last, next) = (key(&items[keep - 1]), key(&items[keep]));
    let split = last.im < -REAL_IM && (next - last.conj()).norm() <= 1e-8 * (1.0 + last.norm());
    items.truncate(if split { keep + 1 } else { keep });
}

/// Controls the cost of [`diagonalize_with`].
#[derive(Debug, Clone, Copy)]
pub struct DiagOptions {
    pub vectors: bool,
    pub audit: bool,
}

impl Default for DiagOptions {
    fn default() -> Self {
        Self { vectors: true, audit: true }
    }
}

fn sector_sign(parity: Parity) -> f64 {
    parity.sign()
}

fn eigen(m: &Mat<Complex64>) -> Result<(Vec<Complex64>, Mat<Complex64>)> {
    let e = m.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let values = (0..m.nrows()).map(|k| e.S().column_vector()[k]).collect();
    Ok((values, e.U().to_owned()))
}

fn eigenvalues_of(m: &Mat<Complex64>) -> Result<Vec<Complex64>> {
    m.eigenvalues().map_err(|e| Error::Eigensolver(format!("{e:?}")))
}

/// Eigenvalues of both parity sectors, sorted, without left vectors or audit.
pub fn sector_eigenvalues(params: &ModelParams, space: &FockSpace) -> Result<Vec<(Complex64, Parity)>> {
    let mut out = Vec::with_capacity(space.dim());
    for parity in Parity::BOTH {
        let h = build_sector_hamiltonian(params, space, sector_sign(parity));
        // same decomposition as `diagonalize`, so both report identical bits
        out.extend(eigen(h.entries())?.0.into_iter().map(|v| (v, parity)));
    }
    sort_spectrum(&mut out, |x| x.0);
    Ok(out)
}

/// Eigenvalues of the full bare-basis matrix, sorted; no use of parity.
pub fn full_eigenvalues(params: &ModelParams, space: &FockSpace) -> Result<Vec<Complex64>> {
    let mut values = eigenvalues_of(build_hamiltonian(params, space).entries())?;
    sort_spectrum(&mut values, |v| *v);
    Ok(values)
}

/// Full eigendecomposition with left vectors, parity labels and cutoff audit.
pub fn diagonalize(params: &ModelParams, space: &FockSpace) -> Result<Vec<EigenPair>> {
    diagonalize_with(params, space, &DiagOptions::default())
}

pub fn diagonalize_with(params: &ModelParams, space: &FockSpace, options: &DiagOptions) -> Result<Vec<EigenPair>> {
    let mut pairs = Vec::with_capacity(space.dim());
    for parity in Parity::BOTH {
        let sign = sector_sign(parity);
        let h = build_sector_hamiltonian(params, space, sign);
        let audit = if options.audit {
            let big = build_sector_hamiltonian(params, &space.enlarged(AUDIT_EXTRA), sign);
            Some(eigenvalues_of(big.entries())?)
        } else {
            None
        };
        let converged = |v: Complex64| match &audit {
            Some(vals) => vals.iter().any(|w| (w - v).norm() < AUDIT_TOLERANCE),
            None => true,
        };

        if !options.vectors {
            for v in eigen(h.entries())?.0 {
                pairs.push(EigenPair {
                    value: v,
                    right: Vec::new(),
                    left: Vec::new(),
                    parity: parity.into(),
                    cutoff_converged: converged(v),
                    ambiguous: false,
                });
            }
            continue;
        }

        let (values, right) = eigen(h.entries())?;
        let adjoint = h.entries().adjoint().to_owned();
        let (left_values, left) = eigen(&adjoint)?;
        let matches = match_left(&values, &left_values);
        for (k, &value) in values.iter().enumerate() {
            let col = |m: &Mat<Complex64>, j: usize| (0..m.nrows()).map(|i| m[(i, j)]).collect::<Vec<_>>();
            let mut r = sector_to_bare(space, sign, &col(&right, k));
            normalize(&mut r);
            fix_phase(&mut r);
            let (j, ambiguous) = matches[k];
            let mut l = sector_to_bare(space, sign, &col(&left, j));
            normalize(&mut l);
            let c = inner(&l, &r);
            if c.norm() > 0.0 {
                // make ⟨L, R⟩ real and non-negative
                let phase = c / c.norm();
                l.iter_mut().for_each(|z| *z *= phase);
            }
            pairs.push(EigenPair {
                value,
                right: r,
                left: l,
                parity: parity.into(),
                cutoff_converged: converged(value),
                ambiguous,
            });
        }
    }
    let pi = crate::model::build_parity(space);
    if options.vectors {
        for p in &mut pairs {
            p.parity = parity_label(p, &pi);
        }
    }
    sort_spectrum(&mut pairs, |p| p.value);
    Ok(pairs)
}

/// Pairs each right eigenvalue `λ` with the left eigenproblem value `μ` for
/// which `conj(μ)` is closest, greedily in order of closeness.
fn match_left(values: &[Complex64], left_values: &[Complex64]) -> Vec<(usize, bool)> {
    let n = values.len();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, v) in values.iter().enumerate() {
        for (j, w) in left_values.iter().enumerate() {
            candidates.push(((v - w.conj()).norm(), i, j));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![(usize::MAX, false); n];
    let mut used = vec![false; left_values.len()];
    for &(d, i, j) in &candidates {
        if out[i].0 != usize::MAX || used[j] {
            continue;
        }
        let rivals = left_values
            .iter()
            .enumerate()
            .filter(|&(k, w)| k != j && (values[i] - w.conj()).norm() <= d + 1e-12)
            .count();
        out[i] = (j, rivals > 0);
        used[j] = true;
    }
    out
}

/// `+` if `⟨R, Π R⟩ > 0.99`, `-` if below `-0.99`, otherwise mixed.
pub fn parity_label(pair: &EigenPair, pi: &OperatorMatrix) -> ParityLabel {
    let r = inner(&pair.right, &pi.apply(&pair.right)).re / norm(&pair.right).powi(2);
    if r > 0.99 {
        ParityLabel::Even
    } else if r < -0.99 {
        ParityLabel::Odd
    } else {
        ParityLabel::Mixed
    }
}

/// Largest distance from a value's conjugate to the nearest value in the set.
pub fn conjugate_closure_residual(values: &[Complex64]) -> f64 {
    values
        .iter()
        .map(|v| values.iter().map(|w| (w - v.conj()).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// One entry of a traced or assembled spectrum.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SpectrumLevel {
    pub value: Complex64,
    pub parity: ParityLabel,
    pub branch_id: usize,
    pub provenance: Provenance,
    /// Branch assignment at this point was ambiguous; the id was kept.
    pub ambiguous: bool,
}

impl SpectrumLevel {
    pub fn new(value: Complex64, parity: ParityLabel, provenance: Provenance) -> Self {
        Self { value, parity, branch_id: usize::MAX, provenance, ambiguous: false }
    }
}

/// Spectrum at one coupling, sorted by `(Re, Im)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SpectrumRecord {
    pub g: f64,
    pub levels: Vec<SpectrumLevel>,
    pub failures: Vec<String>,
}

const PARITY_PENALTY: f64 = 1e3;
const COST_CAP: f64 = 1e6;
const COST_SCALE: f64 = 1e9;

fn prediction(records: &[SpectrumRecord], i: usize) -> BTreeMap<usize, Complex64> {
    let mut pred: BTreeMap<usize, Complex64> = records[i - 1].levels.iter().map(|l| (l.branch_id, l.value)).collect();
    if i >= 2 {
        let (g0, g1, g2) = (records[i - 2].g, records[i - 1].g, records[i].g);
        let ratio = (g2 - g1) / (g1 - g0);
        for l in &records[i - 2].levels {
            if let Some(v) = pred.get_mut(&l.branch_id) {
                // skip the secant across a real/complex transition, where it overshoots
                if is_real(l.value) == is_real(*v) {
                    *v = *v + (*v - l.value) * ratio;
                }
            }
        }
    }
    pred
}

fn cost(pred: Complex64, from: ParityLabel, to: &SpectrumLevel) -> f64 {
    let mut c = (pred - to.value).norm();
    if from != to.parity && from != ParityLabel::Mixed && to.parity != ParityLabel::Mixed {
        c += PARITY_PENALTY;
    }
    c.min(COST_CAP)
}

/// Assigns `branch_id`s along the grid by matching each point to the one
/// before it: secant-predicted distance plus a large penalty for a parity
/// change. Optimal assignment up to [`OPTIMAL_ASSIGNMENT_LIMIT`] branches,
/// greedy beyond. Unmatched levels open new branches.
pub fn assign_branches(records: &mut [SpectrumRecord]) {
    let mut next_id = 0;
    for i in 0..records.len() {
        let prev_live = (0..i).rev().find(|&k| !records[k].levels.is_empty());
        let Some(p) = prev_live.filter(|&p| p + 1 == i || records[p + 1..i].iter().all(|r| r.levels.is_empty())) else {
            for l in &mut records[i].levels {
                l.branch_id = next_id;
                next_id += 1;
            }
            continue;
        };
        let pred = if p + 1 == i { prediction(records, i) } else { records[p].levels.iter().map(|l| (l.branch_id, l.value)).collect() };
        let rows: Vec<(usize, Complex64, ParityLabel)> =
            records[p].levels.iter().map(|l| (l.branch_id, pred[&l.branch_id], l.parity)).collect();
        let cols = records[i].levels.clone();
        let costs: Vec<Vec<f64>> = rows.iter().map(|(_, v, par)| cols.iter().map(|c| cost(*v, *par, c)).collect()).collect();
        let assignment = assign(&costs, rows.len(), cols.len());

        let mut taken = vec![None; cols.len()];
        for (r, c) in assignment.iter().enumerate() {
            if let Some(c) = *c {
                taken[c] = Some(r);
            }
        }
        for (c, level) in records[i].levels.iter_mut().enumerate() {
            match taken[c] {
                Some(r) => {
                    level.branch_id = rows[r].0;
                    let best = costs[r][c];
                    let second = costs[r].iter().enumerate().filter(|&(k, _)| k != c).map(|(_, &v)| v).fold(f64::INFINITY, f64::min);
                    level.ambiguous = best > 1e-12 && second < 2.0 * best;
                }
                None => {
                    level.branch_id = next_id;
                    next_id += 1;
                }
            }
        }
        next_id = next_id.max(records[i].levels.iter().map(|l| l.branch_id + 1).max().unwrap_or(0));
    }
}

/// Row-to-column assignment minimizing total cost.
fn assign(costs: &[Vec<f64>], rows: usize, cols: usize) -> Vec<Option<usize>> {
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows.max(cols) > OPTIMAL_ASSIGNMENT_LIMIT {
        return assign_greedy(costs, rows, cols);
    }
    let scaled = |c: f64| (c * COST_SCALE).round() as i64;
    if rows <= cols {
        let m = Matrix::from_fn(rows, cols, |(r, c)| scaled(costs[r][c]));
        let (_, a) = kuhn_munkres_min(&m);
        a.into_iter().map(Some).collect()
    } else {
        let m = Matrix::from_fn(cols, rows, |(c, r)| scaled(costs[r][c]));
        let (_, a) = kuhn_munkres_min(&m);
        let mut out = vec![None; rows];
        for (c, r) in a.into_iter().enumerate() {
            out[r] = Some(c);
        }
        out
    }
}

fn assign_greedy(costs: &[Vec<f64>], rows: usize, cols: usize) -> Vec<Option<usize>> {
    let mut all: Vec<(f64, usize, usize)> = (0..rows).flat_map(|r| (0..cols).map(move |c| (costs[r][c], r, c))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; rows];
    let mut used = vec![false; cols];
    for (_, r, c) in all {
        if out[r].is_none() && !used[c] {
            out[r] = Some(c);
            used[c] = true;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CandidateKind {
    /// Two same-parity real branches turn into a conjugate pair.
    Coalescence,
    /// Two opposite-parity real branches swap order next to a pole line.
    Crossing,
}

/// A grid interval where the solver should look for an intersection.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Candidate {
    pub kind: CandidateKind,
    pub g_lo: f64,
    pub g_hi: f64,
    pub branches: (usize, usize),
    pub energy: f64,
    pub parity: Option<Parity>,
    pub pole: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    pub levels: usize,
    /// Extra levels carried through branch assignment, then dropped.
    pub margin: usize,
}

impl TraceOptions {
    pub fn new(levels: usize) -> Self {
        Self { levels, margin: 8 }
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<SpectrumRecord>,
    pub candidates: Vec<Candidate>,
}

const REAL_IM: f64 = 1e-8;

/// Oracle spectrum over a coupling grid with branch ids and intersection candidates.
pub fn trace_spectrum(delta: f64, grid: &[f64], space: &FockSpace, options: &TraceOptions) -> Result<Trace> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Argument("coupling grid must be strictly increasing".into()));
    }
    let keep = (options.levels + options.margin).min(space.dim());
    let mut records = grid
        .par_iter()
        .map(|&g| {
            let params = ModelParams::new(delta, g)?;
            let mut levels: Vec<SpectrumLevel> = sector_eigenvalues(&params, space)?
                .into_iter()
                .map(|(v, p)| SpectrumLevel::new(v, p.into(), Provenance::Oracle))
                .collect();
            truncate_spectrum(&mut levels, keep, |l| l.value);
            Ok(SpectrumRecord { g, levels, failures: Vec::new() })
        })
        .collect::<Result<Vec<_>>>()?;
    assign_branches(&mut records);
    for r in &mut records {
        truncate_spectrum(&mut r.levels, options.levels, |l| l.value);
    }
    let candidates = find_candidates(&records);
    Ok(Trace { records, candidates })
}

fn is_real(v: Complex64) -> bool {
    v.im.abs() < REAL_IM
}

fn find_candidates(records: &[SpectrumRecord]) -> Vec<Candidate> {
    let mut out = Vec::new();
    for w in records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let find = |r: &SpectrumRecord, id: usize| r.levels.iter().find(|l| l.branch_id == id).copied();
        for (i, x) in a.levels.iter().enumerate() {
            for y in &a.levels[i + 1..] {
                let (Some(x1), Some(y1)) = (find(b, x.branch_id), find(b, y.branch_id)) else { continue };
                let ids = (x.branch_id.min(y.branch_id), x.branch_id.max(y.branch_id));
                let both_real = is_real(x.value) && is_real(y.value);
                if x.parity == y.parity && both_real && !is_real(x1.value) && (x1.value - y1.value.conj()).norm() < 1e-6 {
                    out.push(Candidate {
                        kind: CandidateKind::Coalescence,
                        g_lo: a.g,
                        g_hi: b.g,
                        branches: ids,
                        energy: 0.5 * (x1.value.re + y1.value.re),
                        parity: x.parity.parity(),
                        pole: None,
                    });
                }
                let swapped = (x.value.re - y.value.re).signum() != (x1.value.re - y1.value.re).signum();
                if x.parity != y.parity && both_real && is_real(x1.value) && is_real(y1.value) && swapped {
                    let energy = 0.5 * (x.value.re + y.value.re + x1.value.re + y1.value.re) * 0.5;
                    let g_mid = 0.5 * (a.g + b.g);
                    let n = (energy - g_mid * g_mid).round();
                    let spread = (x.value.re - y.value.re).abs() + (x1.value.re - y1.value.re).abs() + (b.g * b.g - a.g * a.g);
                    if n >= 1.0 && (energy - PoleLine { n: n as usize }.energy(g_mid)).abs() <= spread + 1e-9 {
                        out.push(Candidate {
                            kind: CandidateKind::Crossing,
                            g_lo: a.g,
                            g_hi: b.g,
                            branches: ids,
                            energy,
                            parity: None,
                            pole: Some(n as usize),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Rebuilds `|Ψ⟩ = D(-ig)|ψ⟩` from a recursion table, where `|ψ⟩` has Fock
/// amplitudes `i^{-n} √(n!) e_n` (spin up) and `i^{-n} √(n!) f_n` (spin down).
///
/// The expansion is cut at the first `n` whose weighted amplitude drops below
/// `1e-14` of the largest so far. If roundoff in the forward recursion starts
/// to grow before that, the cut falls on the smallest amplitude relative to
/// the peak preceding it, provided that ratio is below `1e-6`. The result has unit norm, with its largest
/// component real and positive.
pub fn reconstruct_state(params: &ModelParams, table: &RecursionTable, space: &FockSpace) -> Result<Vec<Complex64>> {
    let limit = table.e.len().min(table.f.len()).min(space.photons());
    let mut weight = Complex64::new(1.0, 0.0);
    let minus_i = Complex64::new(0.0, -1.0);
    let mut amps = Vec::with_capacity(limit);
    let mut peak = 0.0f64;
    let mut cut = None;
    for n in 0..limit {
        if n > 0 {
            weight = weight * minus_i * (n as f64).sqrt();
        }
        let (up, down) = (weight * table.e[n], weight * table.f[n]);
        let size = up.norm().max(down.norm());
        if n > 0 && size < 1e-14 * peak {
            cut = Some(n);
            break;
        }
        peak = peak.max(size);
        amps.push((up, down, size));
    }
    let cut = match cut {
        Some(n) => n,
        None => {
            // smallest amplitude relative to the peak reached before it
            let mut running = 0.0f64;
            let (k, ratio) = amps
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    running = running.max(a.2);
                    (k, a.2 / running)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap_or((0, f64::INFINITY));
            if !(ratio < 1e-6) {
                return Err(Error::ReconstructionOutOfRange { n: limit });
            }
            k + 1
        }
    };

    let mut psi = vec![ZERO; space.dim()];
    for (n, &(up, down, _)) in amps.iter().take(cut).enumerate() {
        psi[space.index(crate::model::Spin::Up, n)] = up;
        psi[space.index(crate::model::Spin::Down, n)] = down;
    }
    let d = build_displacement(params, space, -1.0);
    let mut state = d.apply(&psi);
    normalize(&mut state);
    fix_phase(&mut state);
    Ok(state)
}
