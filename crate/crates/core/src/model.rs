//! Model parameters and truncated Fock-space operators.
//!
//! The bare basis is ordered as two blocks, `(↑, n = 0..=N)` followed by
//! `(↓, n = 0..=N)`, so that `σ_z = diag(+1, -1)` blockwise. Every matrix in
//! this crate uses that ordering.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// One instance of the non-Hermitian Rabi model `H = -Δ/2 σ_x + a†a + i g (a + a†) σ_z`.
///
/// The cavity frequency is fixed to one; all energies are in units of it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ModelParams {
    delta: f64,
    g: f64,
}

impl ModelParams {
    pub const OMEGA: f64 = 1.0;

    pub fn new(delta: f64, g: f64) -> Result<Self> {
        if !delta.is_finite() || !g.is_finite() {
            return Err(Error::Config(format!("non-finite parameters delta={delta}, g={g}")));
        }
        if g < 0.0 {
            return Err(Error::Config(format!("coupling magnitude must be non-negative, got g={g}")));
        }
        Ok(Self { delta, g })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn omega(&self) -> f64 {
        Self::OMEGA
    }

    pub fn with_g(&self, g: f64) -> Result<Self> {
        Self::new(self.delta, g)
    }
}

/// Photon-number truncation `|0⟩ … |N⟩` tensored with the qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub struct FockSpace {
    cutoff: usize,
}

impl FockSpace {
    pub const DEFAULT_CUTOFF: usize = 120;

    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::Config(format!("photon cutoff must be >= 1, got {cutoff}")));
        }
        Ok(Self { cutoff })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Number of retained photon states, `N + 1`.
    pub fn photons(&self) -> usize {
        self.cutoff + 1
    }

    pub fn dim(&self) -> usize {
        2 * self.photons()
    }

    pub fn index(&self, spin: Spin, n: usize) -> usize {
        debug_assert!(n <= self.cutoff);
        match spin {
            Spin::Up => n,
            Spin::Down => self.photons() + n,
        }
    }

    pub fn enlarged(&self, extra: usize) -> Self {
        Self { cutoff: self.cutoff + extra }
    }
}

impl Default for FockSpace {
    fn default() -> Self {
        Self { cutoff: Self::DEFAULT_CUTOFF }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// σ_z ⊗ Fock ordering described in the module docs.
    Bare,
    /// One Π-parity sector, indexed by photon number only.
    ParitySector,
}

/// Dense complex operator together with the basis it is written in.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    entries: Mat<Complex64>,
    basis: Basis,
}

impl OperatorMatrix {
    pub fn new(entries: Mat<Complex64>, basis: Basis) -> Self {
        assert_eq!(entries.nrows(), entries.ncols(), "operator matrix must be square");
        Self { entries, basis }
    }

    pub fn entries(&self) -> &Mat<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> Mat<Complex64> {
        self.entries
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn matmul(&self, other: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix::new(&self.entries * &other.entries, self.basis)
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(v.len(), n);
        (0..n)
            .map(|i| (0..n).fold(ZERO, |acc, j| acc + self.entries[(i, j)] * v[j]))
            .collect()
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix::new(self.entries.adjoint().to_owned(), self.basis)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        frobenius(&self.entries)
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &OperatorMatrix) -> f64 {
        frobenius(&(&self.entries - &other.entries))
    }

    pub fn is_identity_within(&self, tol: f64) -> bool {
        let n = self.dim();
        let eye = Mat::<Complex64>::identity(n, n);
        frobenius(&(&self.entries - &eye)) < tol
    }
}

pub(crate) fn frobenius(m: &Mat<Complex64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Photon block `(a + a†)` with `⟨n+1|a†|n⟩ = √(n+1)`.
#[cfg(test)]
fn quadrature(photons: usize) -> Mat<Complex64> {
    Mat::from_fn(photons, photons, |i, j| {
        if i == j + 1 {
            Complex64::new((i as f64).sqrt(), 0.0)
        } else if j == i + 1 {
            Complex64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

/// `H = -Δ/2 σ_x + a†a + i g (a + a†) σ_z` in the bare basis.
pub fn build_hamiltonian(params: &ModelParams, space: &FockSpace) -> OperatorMatrix {
    let dim = space.dim();
    let half_delta = 0.5 * params.delta();
    let g = params.g();
    let mut h = Mat::<Complex64>::zeros(dim, dim);
    for n in 0..space.photons() {
        let up = space.index(Spin::Up, n);
        let down = space.index(Spin::Down, n);
        h[(up, up)] = Complex64::new(n as f64, 0.0);
        h[(down, down)] = Complex64::new(n as f64, 0.0);
        h[(up, down)] = Complex64::new(-half_delta, 0.0);
        h[(down, up)] = Complex64::new(-half_delta, 0.0);
        if n + 1 < space.photons() {
            let amp = g * ((n + 1) as f64).sqrt();
            for (spin, sign) in [(Spin::Up, 1.0), (Spin::Down, -1.0)] {
                let lo = space.index(spin, n);
                let hi = space.index(spin, n + 1);
                h[(lo, hi)] = Complex64::new(0.0, sign * amp);
                h[(hi, lo)] = Complex64::new(0.0, sign * amp);
            }
        }
    }
    OperatorMatrix::new(h, Basis::Bare)
}

/// Similarity-transformed `H_s = D(ig) H D(-ig)`, written directly as the
/// 2×2 block form: `a†a + g²` on ↑, `a†a - 2ig(a + a†) - 3g²` on ↓ and
/// `-Δ/2` off the diagonal.
pub fn build_transformed_hamiltonian(params: &ModelParams, space: &FockSpace) -> OperatorMatrix {
    let dim = space.dim();
    let half_delta = 0.5 * params.delta();
    let g = params.g();
    let g2 = g * g;
    let mut h = Mat::<Complex64>::zeros(dim, dim);
    for n in 0..space.photons() {
        let up = space.index(Spin::Up, n);
        let down = space.index(Spin::Down, n);
        h[(up, up)] = Complex64::new(n as f64 + g2, 0.0);
        h[(down, down)] = Complex64::new(n as f64 - 3.0 * g2, 0.0);
        h[(up, down)] = Complex64::new(-half_delta, 0.0);
        h[(down, up)] = Complex64::new(-half_delta, 0.0);
        if n + 1 < space.photons() {
            let amp = -2.0 * g * ((n + 1) as f64).sqrt();
            let lo = space.index(Spin::Down, n);
            let hi = space.index(Spin::Down, n + 1);
            h[(lo, hi)] = Complex64::new(0.0, amp);
            h[(hi, lo)] = Complex64::new(0.0, amp);
        }
    }
    OperatorMatrix::new(h, Basis::Bare)
}

/// `Π = σ_x ⊗ exp(iπ a†a)`: swaps `(↑, n) ↔ (↓, n)` with sign `(-1)^n`.
pub fn build_parity(space: &FockSpace) -> OperatorMatrix {
    let dim = space.dim();
    let mut p = Mat::<Complex64>::zeros(dim, dim);
    for n in 0..space.photons() {
        let sign = if n % 2 == 0 { ONE } else { -ONE };
        let up = space.index(Spin::Up, n);
        let down = space.index(Spin::Down, n);
        p[(up, down)] = sign;
        p[(down, up)] = sign;
    }
    OperatorMatrix::new(p, Basis::Bare)
}

/// `P = σ_x ⊗ 1` in the bare basis.
pub fn build_spin_flip(space: &FockSpace) -> OperatorMatrix {
    let dim = space.dim();
    let mut p = Mat::<Complex64>::zeros(dim, dim);
    for n in 0..space.photons() {
        let up = space.index(Spin::Up, n);
        let down = space.index(Spin::Down, n);
        p[(up, down)] = ONE;
        p[(down, up)] = ONE;
    }
    OperatorMatrix::new(p, Basis::Bare)
}

/// Residual `‖P conj(H) P - H‖` with `P = σ_x ⊗ 1`.
///
/// Time reversal fixes `a` and `a†`, so in the Fock basis it acts as entrywise
/// complex conjugation of the matrix.
pub fn check_pt_symmetry(h: &OperatorMatrix) -> f64 {
    let dim = h.dim();
    assert_eq!(dim % 2, 0, "bare-basis operator must have even dimension");
    let photons = dim / 2;
    let flip = |i: usize| if i < photons { i + photons } else { i - photons };
    let mut acc = 0.0;
    for j in 0..dim {
        for i in 0..dim {
            let transformed = h.get(flip(i), flip(j)).conj();
            acc += (transformed - h.get(i, j)).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Commutator norm `‖A B - B A‖`.
pub fn commutator_norm(a: &OperatorMatrix, b: &OperatorMatrix) -> f64 {
    let ab = &a.entries * &b.entries;
    let ba = &b.entries * &a.entries;
    frobenius(&(&ab - &ba))
}

/// `D(±ig) = exp[±ig (a† - a)]` on the truncated photon space, acting
/// identically on both qubit components.
///
/// Exponentiates the truncated generator by scaling and squaring. Only the
/// low photon-number block approximates the untruncated operator; entries
/// near the cutoff carry truncation error.
pub fn build_displacement(params: &ModelParams, space: &FockSpace, sign: f64) -> OperatorMatrix {
    assert!(sign == 1.0 || sign == -1.0, "displacement sign must be ±1");
    let photons = space.photons();
    let scale = I * (sign * params.g());
    let generator = Mat::from_fn(photons, photons, |i, j| {
        // (a† - a): ⟨n+1|a†|n⟩ = √(n+1), ⟨n-1|a|n⟩ = √n
        if i == j + 1 {
            scale * (i as f64).sqrt()
        } else if j == i + 1 {
            -scale * (j as f64).sqrt()
        } else {
            ZERO
        }
    });
    let block = expm(&generator);
    let dim = space.dim();
    let mut d = Mat::<Complex64>::zeros(dim, dim);
    for i in 0..photons {
        for j in 0..photons {
            d[(i, j)] = block[(i, j)];
            d[(photons + i, photons + j)] = block[(i, j)];
        }
    }
    OperatorMatrix::new(d, Basis::Bare)
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub(crate) fn expm(a: &Mat<Complex64>) -> Mat<Complex64> {
    let n = a.nrows();
    let norm = frobenius(a);
    let mut squarings = 0u32;
    if norm > 0.25 {
        squarings = (norm / 0.25).log2().ceil() as u32;
    }
    let factor = 0.5f64.powi(squarings as i32);
    let scaled = Mat::from_fn(n, n, |i, j| a[(i, j)] * factor);

    let mut result = Mat::<Complex64>::identity(n, n);
    let mut term = Mat::<Complex64>::identity(n, n);
    // ‖A/2^s‖ ≤ 1/4, so 0.25^k / k! is below 1e-17 by k = 18
    for k in 1..=18 {
        term = &term * &scaled;
        let inv = 1.0 / k as f64;
        term = Mat::from_fn(n, n, |i, j| term[(i, j)] * inv);
        result = &result + &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Hamiltonian restricted to the Π = `parity` sector, in the photon-number basis
/// of the sector states `(|↑,n⟩ + p(-1)^n |↓,n⟩)/√2`.
///
/// Within a sector `H_p = a†a - (Δ/2) p (-1)^{a†a} + i g (a + a†)`, which is
/// complex symmetric and tridiagonal.
pub fn build_sector_hamiltonian(params: &ModelParams, space: &FockSpace, parity: f64) -> OperatorMatrix {
    let photons = space.photons();
    let half_delta = 0.5 * params.delta();
    let g = params.g();
    let mut h = Mat::<Complex64>::zeros(photons, photons);
    for n in 0..photons {
        let alternating = if n % 2 == 0 { 1.0 } else { -1.0 };
        h[(n, n)] = Complex64::new(n as f64 - half_delta * parity * alternating, 0.0);
        if n + 1 < photons {
            let amp = g * ((n + 1) as f64).sqrt();
            h[(n, n + 1)] = Complex64::new(0.0, amp);
            h[(n + 1, n)] = Complex64::new(0.0, amp);
        }
    }
    OperatorMatrix::new(h, Basis::ParitySector)
}

/// Maps a sector vector to the bare basis.
pub fn sector_to_bare(space: &FockSpace, parity: f64, v: &[Complex64]) -> Vec<Complex64> {
    let photons = space.photons();
    assert_eq!(v.len(), photons);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = vec![ZERO; space.dim()];
    for (n, &amp) in v.iter().enumerate() {
        let alternating = if n % 2 == 0 { 1.0 } else { -1.0 };
        out[space.index(Spin::Up, n)] = amp * s;
        out[space.index(Spin::Down, n)] = amp * (s * parity * alternating);
    }
    out
}
