//! Non-zero-mean quantum Wishart states and their use as rejection-sampling
//! proposals for qubit state-estimation posteriors.

pub mod blr;
pub mod density;
pub mod error;
pub mod estimation;
pub mod gaussian;
pub mod io;
pub mod peak;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod special;
pub mod state;

pub use error::{Error, Result};
