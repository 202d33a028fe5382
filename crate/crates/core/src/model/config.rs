use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RnnType {
    #[serde(rename = "LSTM", alias = "lstm")]
    Lstm,
    #[serde(rename = "GRU", alias = "gru")]
    Gru,
}

impl RnnType {
    /// Number of stacked gate blocks in the cell's weight matrices.
    pub fn gates(self) -> usize {
        match self {
            RnnType::Lstm => 4,
            RnnType::Gru => 3,
        }
    }
}

impl fmt::Display for RnnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RnnType::Lstm => "LSTM",
            RnnType::Gru => "GRU",
        })
    }
}

impl FromStr for RnnType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "LSTM" => Ok(RnnType::Lstm),
            "GRU" => Ok(RnnType::Gru),
            _ => Err(format!("unknown RNN type {s:?}")),
        }
    }
}

/// Luong attention scorer, or no attention at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    None,
    General,
    Dot,
    Concat,
}

impl AttentionKind {
    pub const ALL: [AttentionKind; 4] = [
        AttentionKind::None,
        AttentionKind::General,
        AttentionKind::Dot,
        AttentionKind::Concat,
    ];
}

impl fmt::Display for AttentionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttentionKind::None => "none",
            AttentionKind::General => "general",
            AttentionKind::Dot => "dot",
            AttentionKind::Concat => "concat",
        })
    }
}

impl FromStr for AttentionKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(AttentionKind::None),
            "general" => Ok(AttentionKind::General),
            "dot" => Ok(AttentionKind::Dot),
            "concat" => Ok(AttentionKind::Concat),
            _ => Err(format!("unknown attention type {s:?}")),
        }
    }
}

/// Architecture hyperparameters. `feature_dim` and `vocab_size` are
/// normally filled in from the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub rnn_type: RnnType,
    pub hidden_units: usize,
    pub bidirectional: bool,
    pub encoder_layers: usize,
    pub attention: AttentionKind,
    pub embed_dim: usize,
    pub feature_dim: usize,
    pub vocab_size: usize,
    pub dropout_rate: f64,
    pub max_decode_len: usize,
    /// Longer feature sequences are truncated (tail dropped) before encoding.
    pub max_encoder_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            rnn_type: RnnType::Lstm,
            hidden_units: 512,
            bidirectional: false,
            encoder_layers: 1,
            attention: AttentionKind::General,
            embed_dim: 64,
            feature_dim: 0,
            vocab_size: 0,
            dropout_rate: 0.5,
            max_decode_len: 64,
            max_encoder_len: 128,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidConfig(msg.to_string()));
        if self.hidden_units == 0 || self.embed_dim == 0 || self.feature_dim == 0 {
            return bad("hidden_units, embed_dim and feature_dim must be positive");
        }
        if self.vocab_size < 4 {
            return bad("vocab_size must cover the reserved tokens");
        }
        if self.encoder_layers == 0 {
            return bad("encoder_layers must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if self.max_encoder_len == 0 {
            return bad("max_encoder_len must be positive");
        }
        // encoder outputs are projected back to hidden_units, so dot
        // attention always sees matching dimensions
        if self.attention == AttentionKind::Dot && self.encoder_output_dim() != self.hidden_units {
            return bad("dot attention needs encoder output dim == decoder hidden dim");
        }
        Ok(())
    }

    pub fn encoder_output_dim(&self) -> usize {
        self.hidden_units
    }
}
