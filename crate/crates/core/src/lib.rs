//! Pseudo-polar computed tomography.
//!
//! Parallel-beam sinograms are expanded over a shift-invariant subspace,
//! resampled onto the pseudo-polar grid and inverted with a preconditioned,
//! statistically weighted FISTA-TV solver built on fast pseudo-polar Radon
//! operators. A simulator and FBP / interpolation baselines are included.

pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod pp;
pub mod recon;
pub mod simulator;
pub mod subspace;

pub use error::{Error, Result};
