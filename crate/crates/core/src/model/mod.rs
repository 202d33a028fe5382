//! From-scratch recurrent encoder-decoder with Luong attention.

mod cell;
mod checkpoint;
mod config;
mod embed;
mod network;
mod params;
pub mod tensor;

use thiserror::Error;

pub use checkpoint::{
    read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{AttentionKind, ModelConfig, RnnType};
pub use embed::{load_embedding_file, read_embedding_file};
pub use network::{
    gradient_check, random_frames, relative_error, AttentionMap, DecodeOutput, DecoderState,
    EncoderOutput, Tape,
};
pub use params::{
    AttentionParams, BiProjection, CellParams, EncoderLayer, ModelParams, FORGET_BIAS, INIT_BOUND,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("feature sequence of {len} frames exceeds the encoder limit of {max}")]
    LengthExceeded { len: usize, max: usize },
    #[error("empty feature sequence")]
    EmptySequence,
    #[error("gold sequence must start with <s> and end with </s>")]
    BadGold,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
