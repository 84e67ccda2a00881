//! Effective-mode decomposition of Gaussian bosonic baths and a family of
//! formally equivalent propagation backends for the reduced system dynamics.

pub mod bath;
pub mod decomposition;
pub mod deterministic;
pub mod error;
pub mod io;
pub mod linalg;
pub mod ode;
pub mod oracle;
pub mod quad;
pub mod sparse;
pub mod state_space;
pub mod stochastic;
pub mod suite;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Dense complex matrix used throughout.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVec = nalgebra::DVector<C64>;
