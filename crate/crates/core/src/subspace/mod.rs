//! Shift-invariant subspace model of parallel-beam sinograms: kernel,
//! denoising, coefficient recovery and resampling onto the pseudo-polar grid.

mod filter;
mod kernel;
mod resample;

pub use filter::{
    convolve_table, deconvolve_table, denoise, denoise_with, recover_coefficients,
    recover_coefficients_with, ThetaBoundary,
};
pub use kernel::{
    kernel_a, kernel_a_general, spectral_confinement, window_radius, window_w, KernelSpec,
    KernelTable, ANGULAR_STRETCH, LINE_TOLERANCE, THETA_TOLERANCE,
};
pub use resample::{
    pprt_unit_scale, resample_baseline, resample_to_pp, resample_to_pp_with, subspace_resample,
    to_pprt_units, Interpolation,
};
