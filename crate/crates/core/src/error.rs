use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported parameter: {0}")]
    UnsupportedParameter(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The trial energy sits inside the guard band around a pole line `n + g²`.
    #[error("energy {energy} is within {distance:e} of pole line n = {n}")]
    PoleProximity {
        n: usize,
        energy: Complex64,
        distance: f64,
    },

    #[error("G-function series did not converge after {n_used} terms (tail {tail:e})")]
    SeriesNotConverged { n_used: usize, tail: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        trace: Vec<Complex64>,
    },

    #[error("no exceptional point in g window [{g_lo}, {g_hi}]")]
    NoExceptionalPoint { g_lo: f64, g_hi: f64 },

    /// Newton polishing stalled; the bracket from the bisection stage is kept.
    #[error("exceptional point refinement failed in bracket [{}, {}]: {reason}", bracket.0, bracket.1)]
    EpRefinement { bracket: (f64, f64), reason: String },

    #[error("no doubly degenerate point on pole line {n} for g in [{g_lo}, {g_hi}]")]
    NoDegeneracy { n: usize, g_lo: f64, g_hi: f64 },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("left and right eigenvectors are self-orthogonal at g = {g} (|<L|R>| = {overlap:e})")]
    SelfOrthogonal { g: f64, overlap: f64 },

    #[error("branch matching failed: {0}")]
    BranchMismatch(String),

    #[error("state reconstruction out of range: weighted coefficients do not decay before n = {n}")]
    ReconstructionOutOfRange { n: usize },
}
