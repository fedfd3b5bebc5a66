//! Forward dynamics of a ChronoPlastic layer: fast and warped slow synaptic
//! traces feeding a population of leaky integrate-and-fire neurons.

mod forward;
mod hyper;
mod ops;
mod params;

pub use forward::{forward_sequence, streaming_step, ForwardOutput, LayerState, Rows, Streamer, Tape};
pub(crate) use forward::{check_sequence, readout};
pub use hyper::{Ablation, ModelHyperparams, ResetGrad, SpikeMode};
pub use ops::{fast_trace_update, membrane_step, slow_trace_update, synaptic_current, warp_factor};
pub(crate) use ops::spike_value;
pub use params::LayerParams;
