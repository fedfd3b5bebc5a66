//! ChronoPlastic spiking neural networks.
//!
//! A layer of leaky integrate-and-fire neurons driven by two synaptic traces
//! per input channel: a fast one with fixed decay and a slow one whose decay
//! exponent is modulated at every step by a learned warp controller. The
//! crate also holds two LIF baselines, surrogate-gradient BPTT training, the
//! temporal XOR benchmark and tools that analyse the induced memory kernel.

pub mod analysis;
pub mod baselines;
pub mod dynamics;
mod error;
pub mod linalg;
pub mod network;
pub mod rng;
pub mod sequence;
pub mod tasks;
pub mod train;

pub use baselines::{AdaptiveSnnParams, FixedSnnParams};
pub use dynamics::{forward_sequence, Ablation, LayerParams, ModelHyperparams, ResetGrad, SpikeMode};
pub use error::{Error, Result};
pub use network::{AnyModel, ModelKind, Network, ParamSet};
pub use sequence::{CueMeta, SpikeSequence};
pub use tasks::TaskConfig;
pub use train::{train_model, TrainingConfig};
