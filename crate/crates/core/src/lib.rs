//! Refocusing (dynamical decoupling) of a qubit coupled to a quantum
//! oscillator, driven by shaped one-dimensional π-pulses.
//!
//! The crate provides:
//!
//! - [`pulse`]: shaped π-pulse envelopes, the accumulated phase φ(t), and the
//!   dimensionless defect parameters (s, α, ζ) that control the pulse error
//!   operator at second order;
//! - [`model`]: generic qubit couplings H = σ_x A_x + σ_y A_y + σ_z A_z + A_0
//!   on a finite auxiliary space, and the qubit-in-a-cavity realization;
//! - [`propagator`]: numerically exact time-ordered evolution, matrix
//!   exponentials/logarithms of unitaries, effective-Hamiltonian extraction;
//! - [`sequence`]: pulse-sequence parsing, a catalog of refocusing sequences
//!   with their predicted effective Hamiltonians, and scaling scans that
//!   measure the refocusing order;
//! - [`search`]: derivative-free synthesis of self-refocusing pulse shapes
//!   (s = 0, or s = α = 0) in an even Hermite-function basis;
//! - [`noise`]: Monte-Carlo coherence decay under a classical correlated
//!   (Ornstein-Uhlenbeck) random field.
//!
//! Tensor ordering is qubit ⊗ auxiliary everywhere; see [`model::QUBIT_FIRST`].

// negated float comparisons below are deliberate NaN guards on user inputs
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod propagator;
pub mod pulse;
pub mod quad;
pub mod search;
pub mod sequence;

pub use error::{Error, Result};
