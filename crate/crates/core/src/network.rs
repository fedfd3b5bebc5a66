//! The common surface of every trainable model: parameter access for the
//! optimiser and a recorded forward pass with its exact reverse.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{AdaptiveSnnParams, FixedSnnParams};
use crate::dynamics::{forward_sequence, LayerParams, ModelHyperparams, Tape};
use crate::error::Result;
use crate::sequence::SpikeSequence;
use crate::train::{backward_sequence, cross_entropy, Backward};

/// Named flat tensors of a model. Gradients use the same type as parameters.
pub trait ParamSet: Clone + Send + Sync {
    fn tensors(&self) -> Vec<(&'static str, &[f64])>;
    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])>;

    /// Tensors that stay constant unless training explicitly unfreezes them.
    fn frozen(&self) -> &'static [&'static str] {
        &[]
    }

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Number of trainable scalars, excluding frozen tensors.
    fn param_count(&self) -> usize {
        let frozen = self.frozen();
        self.tensors()
            .iter()
            .filter(|(n, _)| !frozen.contains(n))
            .map(|(_, t)| t.len())
            .sum()
    }

    fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    fn scale(&mut self, k: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= k);
        }
    }

    fn add_assign(&mut self, other: &Self) {
        let src = other.tensors();
        for ((_, dst), (_, s)) in self.tensors_mut().into_iter().zip(src) {
            for (d, x) in dst.iter_mut().zip(s) {
                *d += x;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// ChronoPlastic network with fast and warped slow synaptic traces.
    Cpsnn,
    /// LIF network with fixed membrane decay and no synaptic traces.
    #[serde(rename = "snn")]
    SnnFixed,
    /// LIF network with an input-conditioned per-neuron membrane decay.
    #[serde(rename = "adaptive")]
    SnnAdaptive,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Cpsnn, ModelKind::SnnFixed, ModelKind::SnnAdaptive];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cpsnn => "cpsnn",
            ModelKind::SnnFixed => "snn",
            ModelKind::SnnAdaptive => "adaptive",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cpsnn" => Ok(ModelKind::Cpsnn),
            "snn" => Ok(ModelKind::SnnFixed),
            "adaptive" => Ok(ModelKind::SnnAdaptive),
            other => Err(format!("unknown model kind `{other}` (expected cpsnn, snn or adaptive)")),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A model that can be run over a sequence and differentiated through time.
pub trait Network: ParamSet {
    type Tape: Send;
    const KIND: ModelKind;

    fn init<R: Rng + ?Sized>(hp: &ModelHyperparams, rng: &mut R) -> Self;

    fn check_shapes(&self, hp: &ModelHyperparams) -> Result<()>;

    /// Rates and logits, plus the tape when `record` is set.
    fn run(&self, seq: &SpikeSequence, hp: &ModelHyperparams, record: bool) -> Result<Output<Self::Tape>>;

    fn backward(&self, tape: &Self::Tape, label: usize, hp: &ModelHyperparams) -> Result<Backward<Self>>;

    /// Sum and count of warp factors on the tape, if the model has a warp.
    fn omega_stats(_tape: &Self::Tape) -> Option<(f64, usize)> {
        None
    }

    /// Cross-entropy of the forward logits. No tape is kept.
    fn loss(&self, seq: &SpikeSequence, hp: &ModelHyperparams) -> Result<f64> {
        let out = self.run(seq, hp, false)?;
        Ok(cross_entropy(&out.logits, seq.label).0)
    }
}

pub type Output<T> = crate::dynamics::ForwardOutput<T>;

impl Network for LayerParams {
    type Tape = Tape;
    const KIND: ModelKind = ModelKind::Cpsnn;

    fn init<R: Rng + ?Sized>(hp: &ModelHyperparams, rng: &mut R) -> Self {
        LayerParams::init(hp, rng)
    }

    fn check_shapes(&self, hp: &ModelHyperparams) -> Result<()> {
        LayerParams::check_shapes(self, hp)
    }

    fn run(&self, seq: &SpikeSequence, hp: &ModelHyperparams, record: bool) -> Result<Output<Tape>> {
        forward_sequence(seq, self, hp, record)
    }

    fn backward(&self, tape: &Tape, label: usize, hp: &ModelHyperparams) -> Result<Backward<Self>> {
        backward_sequence(tape, label, self, hp)
    }

    fn omega_stats(tape: &Tape) -> Option<(f64, usize)> {
        let sum = tape.omega.iter().flat_map(|r| r.iter()).sum::<f64>();
        Some((sum, tape.omega.len() * tape.omega.width()))
    }
}

/// A model of any kind, as stored in snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum AnyModel {
    Cpsnn(LayerParams),
    #[serde(rename = "snn")]
    SnnFixed(FixedSnnParams),
    #[serde(rename = "adaptive")]
    SnnAdaptive(AdaptiveSnnParams),
}

impl AnyModel {
    pub fn init<R: Rng + ?Sized>(kind: ModelKind, hp: &ModelHyperparams, rng: &mut R) -> Self {
        match kind {
            ModelKind::Cpsnn => AnyModel::Cpsnn(LayerParams::init(hp, rng)),
            ModelKind::SnnFixed => AnyModel::SnnFixed(FixedSnnParams::init(hp, rng)),
            ModelKind::SnnAdaptive => AnyModel::SnnAdaptive(AdaptiveSnnParams::init(hp, rng)),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Cpsnn(_) => ModelKind::Cpsnn,
            AnyModel::SnnFixed(_) => ModelKind::SnnFixed,
            AnyModel::SnnAdaptive(_) => ModelKind::SnnAdaptive,
        }
    }

    pub fn check_shapes(&self, hp: &ModelHyperparams) -> Result<()> {
        match self {
            AnyModel::Cpsnn(p) => Network::check_shapes(p, hp),
            AnyModel::SnnFixed(p) => p.check_shapes(hp),
            AnyModel::SnnAdaptive(p) => p.check_shapes(hp),
        }
    }

    /// Rates and logits without a tape.
    pub fn infer(&self, seq: &SpikeSequence, hp: &ModelHyperparams) -> Result<(Vec<f64>, Vec<f64>)> {
        let out = match self {
            AnyModel::Cpsnn(p) => {
                let o = p.run(seq, hp, false)?;
                (o.rates, o.logits)
            }
            AnyModel::SnnFixed(p) => {
                let o = p.run(seq, hp, false)?;
                (o.rates, o.logits)
            }
            AnyModel::SnnAdaptive(p) => {
                let o = p.run(seq, hp, false)?;
                (o.rates, o.logits)
            }
        };
        Ok(out)
    }

    pub fn param_count(&self) -> usize {
        match self {
            AnyModel::Cpsnn(p) => p.param_count(),
            AnyModel::SnnFixed(p) => p.param_count(),
            AnyModel::SnnAdaptive(p) => p.param_count(),
        }
    }
}
