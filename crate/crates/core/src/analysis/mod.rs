//! Memory-kernel analysis of the warped slow trace, bound checks, gradient
//! flow and streaming cost probes.

mod bounds;
mod diagnostics;
mod kernel;
mod probes;
mod retention;

pub use bounds::{check_bounds, BoundsReport};
pub use diagnostics::{diagnostics_dump, fixed_decay_reference};
pub use kernel::{
    check_nonstationarity, effective_time, kernel_matrix, verify_trace_expansion, KernelMatrix,
    NonstationarityWitness, WarpSchedule,
};
pub use probes::{gradient_flow_profile, scaling_probe, write_scaling_csv, ScalePoint, ScalingRow};
pub use retention::{construct_retention_schedule, verify_retention, RetentionReport, RetentionSchedule};
