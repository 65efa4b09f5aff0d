//! Token-level error-type tagger: word and character embeddings, spatial
//! dropout, stacked bidirectional LSTM and a per-token softmax, with
//! hand-written gradients and an Adam trainer.

mod adam;
mod artifact;
mod batch;
mod config;
mod network;
mod params;
mod train;
mod vocab;

use thiserror::Error;

pub use adam::{adam_step, AdamState};
pub use artifact::{ARTIFACT_MAGIC, ARTIFACT_VERSION};
pub use batch::{encode_batch, Batch, TaggedSentence, IGNORE_LABEL};
pub use config::{apply_config_text, ModelConfig, TrainConfig};
pub use network::{
    forward, forward_cached, loss_and_gradients, masked_cross_entropy, token_features, DropoutMask,
    ForwardCache, Mode,
};
pub use params::{LayerParams, LstmParams, ModelParams};
pub use train::{evaluate_batches, predict, train, windows, EpochRecord, TrainedModel};
pub use vocab::{Vocab, PAD, UNK};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("label `{0}` is not in the class registry")]
    UnknownLabel(String),
    #[error("non-finite value in {layer}")]
    NonFinite { layer: String },
    #[error("mask selects no token")]
    ZeroMask,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("model artifact: {0}")]
    Artifact(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
