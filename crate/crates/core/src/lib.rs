//! Quantum Rabi model with two-photon relaxation, worked in the number–parity
//! basis.
//!
//! The crate covers three routes to the same physics and checks them against
//! each other:
//!
//! * [`spectrum`]: closed and phenomenological (non-Hermitian) eigenfrequencies
//!   from the three-term determinant recursion, verified by dense eigensolves.
//! * [`lindblad`]: the full master equation in the number–parity basis, time
//!   integration, steady states and the mapping of bare states onto open modes.
//! * [`vectorized`]: the full effective Hamiltonian over system ⊗ auxiliary
//!   space, whose action must reproduce the Lindblad generator exactly.
//!
//! [`jc_analytic`] holds the Jaynes–Cummings closed forms used as a baseline,
//! and [`cli`] drives the sweep pipelines behind the `openrabi` binary.

pub mod assignment;
pub mod cli;
pub mod error;
pub mod jc_analytic;
pub mod linalg;
pub mod lindblad;
pub mod model;
pub mod ode;
pub mod spectrum;
pub mod vectorized;

pub use error::{Error, Result};
pub use model::{BareStateLabel, ModelParams, ParitySector, Qubit, TruncationConfig};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Crate version embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
