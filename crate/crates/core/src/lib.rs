//! Exact spectrum of the PT-symmetric quantum Rabi model with imaginary coupling,
//!
//! `H = -Δ/2 σ_x + a†a + i g (a + a†) σ_z`,
//!
//! from the zeros of its G-function, together with the two kinds of spectral
//! intersections (doubly degenerate crossings on pole lines and exceptional
//! points) and an independent dense-diagonalization oracle.

mod dd;
pub mod diagnostics;
pub mod error;
pub mod gfunction;
pub mod model;
pub mod oracle;
pub mod output;
pub mod solver;

pub use error::{Error, Result};
pub use gfunction::{evaluate_g, GValue, Parity};
pub use model::{FockSpace, ModelParams};
