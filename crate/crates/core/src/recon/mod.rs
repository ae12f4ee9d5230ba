//! Preconditioned, statistically weighted reconstruction on the pseudo-polar grid.

mod fbp;
mod fista;
mod ops;
mod system;
mod tv;
mod validation;

pub use fbp::{fbp_baseline, fbp_tv_baseline, ramp_filter};
pub use fista::{
    fista_tv, fista_tv_operator, FistaOptions, IterationRecord, SolveReport, TV_INNER_ITERS,
};
pub use ops::{
    decimate_d, precondition_m, precondition_multiplier, precondition_pb, weight_from_counts,
    weights_w, Power,
};
pub use system::{
    adjointness_error, estimate_lipschitz, power_method, surrogate_weights, LinearOperator,
    MatrixOperator, ModifiedSystem,
};
pub use tv::{tv_iso, tv_prox, tv_prox_warm, TvDual};
pub use validation::{
    lag_correlation, preconditioner_validation, PreconditionerReport, VALIDATION_LIMIT,
};
