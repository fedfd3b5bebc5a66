//! Surrogate-gradient BPTT, optimisation and the training loop.

mod backward;
pub mod gradcheck;
mod optim;
mod surrogate;
mod trainer;

pub use backward::{backward_sequence, backward_with_adjoints, cross_entropy, AdjointTrace, Backward};
pub(crate) use backward::{l2, readout_backward, spike_reset_backward};
pub use optim::{adam_step, clip_gradients, AdamState, TrainingConfig};
pub use surrogate::surrogate_derivative;
pub use trainer::{
    evaluate, evaluate_any, fit, save_metrics, train_model, write_metrics_csv, write_profile_csv, EpochMetrics,
    EvalReport, TrainingHistory,
};
