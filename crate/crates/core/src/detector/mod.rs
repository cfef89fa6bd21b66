//! Heterogeneous attention detector, its training loop and evaluation metrics.

mod checkpoint;
mod metrics;
mod model;
mod params;
mod train;

pub use checkpoint::{ModelCheckpoint, CHECKPOINT_MAGIC};
pub use metrics::{average_precision, roc_auc, Metrics};
pub use model::{forward, Batch, Forward, Instance, Masks, Message};
pub use params::{DetectorParams, ParamLayout};
pub use train::{evaluate, predict, predict_instances, score_targets, stratified_split, train, train_with_report, RiskScore, TrainReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AdError;
use crate::graph::{GraphError, SamplerConfig, INPUT_DIM};

/// Architecture and training settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub layers: usize,
    pub heads: usize,
    pub width: usize,
    pub hidden: [usize; 2],
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Exponent on inverse class frequency; 0 disables class weighting.
    pub class_weight_factor: f64,
    pub seed: u64,
    /// Drop the raw score factor inside Message, keeping only the normalized weight.
    /// With the literal double weighting and zero-initialized W_att every message is
    /// exactly zero at initialization and the convolution never receives a gradient.
    pub single_weighting: bool,
    /// Feed the engineered d_amount / d_time features to the model.
    pub use_deltas: bool,
    pub validation_fraction: f64,
    pub sampler: SamplerConfig,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            layers: 3,
            heads: 4,
            width: 32,
            hidden: [64, 32],
            dropout: 0.1,
            epochs: 20,
            batch_size: 64,
            learning_rate: 3e-3,
            class_weight_factor: 0.5,
            seed: 7,
            single_weighting: true,
            use_deltas: true,
            validation_fraction: 0.2,
            sampler: SamplerConfig::default(),
        }
    }
}

impl Hyper {
    pub fn head_dim(&self) -> usize {
        self.width / self.heads
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        let bad = |m: String| Err(DetectorError::Config(m));
        if self.layers == 0 || self.heads == 0 || self.width == 0 || self.hidden.contains(&0) {
            return bad("layers, heads, width and hidden sizes must be at least 1".into());
        }
        if !self.width.is_multiple_of(self.heads) {
            return bad(format!("width {} is not divisible by heads {}", self.width, self.heads));
        }
        if self.width < INPUT_DIM {
            return bad(format!("width {} is below the input width {INPUT_DIM}", self.width));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!("validation_fraction {} outside [0, 1)", self.validation_fraction));
        }
        if self.sampler.cap == 0 {
            return bad("sampler cap must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training targets contain a single class ({0}); both labels are required")]
    SingleClass(u8),
    #[error("{0} needs both classes among the targets")]
    Metric(&'static str),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("numeric failure: {0}")]
    Numeric(#[from] AdError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
