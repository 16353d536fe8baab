//! Weingarten calculus, non-crossing partitions and free probability for
//! out-of-time-ordered correlators and frame potentials of Haar and random
//! matrix product unitary ensembles.

pub mod error;
pub mod fit;
pub mod freeprob;
pub mod io;
#[cfg(feature = "mc")]
pub mod mcsim;
pub mod ncposet;
pub mod observable;
pub mod predict;
pub mod scalar;
pub mod symgroup;
pub mod weingarten;

pub use error::{Error, Result};
pub use scalar::{Rational, Scalar};
