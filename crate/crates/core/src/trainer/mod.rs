//! Loss, Adam, the early-stopping training loop, and configuration sweeps.

mod data;
mod sweep;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Split;
use crate::metrics::MetricsError;
use crate::model::{ModelError, ModelParams};
use crate::vocab::PAD_ID;

pub use data::{predict, score_split, Dataset, EncodedExample, Prediction};
pub use sweep::{builtin_grid, sweep, sweep_table, GridRow, SweepGrid, SweepRowResult};
pub use train::{train, train_with, val_evaluator, EpochLog, Evaluator, TrainOutcome};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{0} split is empty")]
    EmptySplit(Split),
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    DivergedLoss { epoch: usize, batch: usize },
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("{steps} log-prob rows for {targets} targets")]
    LengthMismatch { steps: usize, targets: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("unknown grid {0:?}")]
    UnknownGrid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation Relations+Edges improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Global gradient-norm cap; 0 disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 8,
            max_epochs: 50,
            patience: 10,
            seed: 42,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch_size, max_epochs and patience must be at least 1");
        }
        if !(self.clip_norm.is_finite() && self.clip_norm >= 0.0) {
            return bad("clip_norm must be >= 0");
        }
        Ok(())
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| TrainError::InvalidConfig(e.to_string()))
    }
}

/// Mean over non-pad steps of −log p(y_t). Zero when every target is pad.
pub fn nll_loss(log_probs: &[Vec<f64>], gold: &[usize]) -> Result<f64, TrainError> {
    if log_probs.len() != gold.len() {
        return Err(TrainError::LengthMismatch {
            steps: log_probs.len(),
            targets: gold.len(),
        });
    }
    let (sum, n) = log_probs
        .iter()
        .zip(gold)
        .filter(|(_, &y)| y != PAD_ID)
        .fold((0.0, 0usize), |(s, n), (lp, &y)| (s - lp[y], n + 1));
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// One Adam update of a flat parameter slice. `t` is the 1-based step.
pub fn adam_update(
    theta: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    cfg: &TrainConfig,
) {
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// First and second moment estimates, shaped like the model.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// Applies one Adam step. A non-finite gradient aborts before anything is
/// modified.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<(), TrainError> {
    if !grads.all_finite() {
        return Err(TrainError::NonFiniteGradient);
    }
    state.t += 1;
    let t = state.t;
    let grads = grads.named();
    for (((_, p), (_, g)), ((_, m), (_, v))) in params
        .named_mut()
        .into_iter()
        .zip(grads)
        .zip(state.m.named_mut().into_iter().zip(state.v.named_mut()))
    {
        adam_update(&mut p.data, &g.data, &mut m.data, &mut v.data, t, cfg);
    }
    Ok(())
}

/// Scales `grads` down to `max_norm` if its global L2 norm exceeds it.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut ModelParams, max_norm: f64) -> f64 {
    let norm = grads.l2_norm();
    if max_norm > 0.0 && norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn tiny() -> ModelParams {
        let cfg = ModelConfig {
            hidden_units: 4,
            embed_dim: 3,
            feature_dim: 2,
            vocab_size: 9,
            ..ModelConfig::default()
        };
        ModelParams::zeros(&cfg)
    }

    #[test]
    fn nll_cases() {
        let v = 7usize;
        let uniform = vec![vec![-(v as f64).ln(); v]; 5];
        assert!((nll_loss(&uniform, &[4, 5, 6, 4, 5]).unwrap() - (v as f64).ln()).abs() < 1e-15);
        let perfect = vec![
            vec![
                0.0,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY
            ];
            3
        ];
        let perfect: Vec<Vec<f64>> = perfect
            .into_iter()
            .map(|mut r| {
                r.rotate_right(4);
                r
            })
            .collect();
        assert_eq!(nll_loss(&perfect, &[4, 4, 4]).unwrap(), 0.0);
        // 3-step toy over ids 1..=3 (id 0 is pad): p(y) = 0.5, 0.25, 0.8
        let lp: Vec<Vec<f64>> = [
            [0.0, 0.5, 0.3, 0.2],
            [0.0, 0.25, 0.05, 0.7],
            [0.0, 0.1, 0.1, 0.8],
        ]
        .iter()
        .map(|r| r.iter().map(|p: &f64| p.ln()).collect())
        .collect();
        let expected = -(0.5f64.ln() + 0.25f64.ln() + 0.8f64.ln()) / 3.0;
        assert!((nll_loss(&lp, &[1, 1, 3]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn nll_skips_pad() {
        let lp = vec![vec![-1.0, -2.0, -3.0, -4.0, -5.0]; 3];
        assert_eq!(nll_loss(&lp, &[4, PAD_ID, 4]).unwrap(), 5.0);
        assert_eq!(nll_loss(&lp, &[PAD_ID; 3]).unwrap(), 0.0);
        assert!(matches!(
            nll_loss(&lp, &[4]),
            Err(TrainError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = tiny();
        let mut g = p.zeros_like();
        for (_, m) in g.named_mut() {
            m.data.iter_mut().for_each(|x| *x = 1.0);
        }
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &g, &mut state, &TrainConfig::default()).unwrap();
        for (_, m) in p.named() {
            for &x in &m.data {
                assert!((x + 1e-3).abs() < 1e-10, "{x}");
            }
        }
    }

    #[test]
    fn adam_zero_gradient() {
        let cfg = ModelConfig {
            hidden_units: 4,
            embed_dim: 3,
            feature_dim: 2,
            vocab_size: 9,
            ..ModelConfig::default()
        };
        let mut p = ModelParams::init(&cfg, &mut rand::rng()).unwrap();
        let before = p.clone();
        let mut state = AdamState::new(&p);
        let zero = p.zeros_like();
        adam_step(&mut p, &zero, &mut state, &TrainConfig::default()).unwrap();
        assert_eq!(p.named()[0].1.data, before.named()[0].1.data);
        assert_eq!(p.l2_norm(), before.l2_norm());

        for (_, m) in state.m.named_mut().into_iter().chain(state.v.named_mut()) {
            m.data.iter_mut().for_each(|x| *x = 0.5);
        }
        let zero = p.zeros_like();
        adam_step(&mut p, &zero, &mut state, &TrainConfig::default()).unwrap();
        assert_eq!(state.m.named()[0].1.data[0], 0.9 * 0.5);
        assert_eq!(state.v.named()[0].1.data[0], 0.999 * 0.5);
    }

    #[test]
    fn adam_matches_reference_over_three_steps() {
        // textbook Adam, written out per coordinate
        fn reference(theta0: f64, g: f64, steps: u32) -> f64 {
            let (lr, b1, b2, eps) = (1e-3f64, 0.9f64, 0.999f64, 1e-8f64);
            let (mut theta, mut m, mut v) = (theta0, 0.0f64, 0.0f64);
            for t in 1..=steps {
                m = b1 * m + (1.0 - b1) * g;
                v = b2 * v + (1.0 - b2) * g * g;
                let mh = m / (1.0 - b1.powf(t as f64));
                let vh = v / (1.0 - b2.powf(t as f64));
                theta -= lr * mh / (vh.sqrt() + eps);
            }
            theta
        }
        let cfg = TrainConfig::default();
        let grads = [0.3, -2.0, 1e-6, 7.5];
        let mut theta = vec![0.1, -0.2, 0.0, 1.0];
        let start = theta.clone();
        let (mut m, mut v) = (vec![0.0; 4], vec![0.0; 4]);
        for t in 1..=3 {
            adam_update(&mut theta, &grads, &mut m, &mut v, t, &cfg);
        }
        for i in 0..4 {
            assert!((theta[i] - reference(start[i], grads[i], 3)).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut p = tiny();
        let mut g = p.zeros_like();
        g.named_mut()[0].1.data[0] = f64::NAN;
        let mut state = AdamState::new(&p);
        assert!(matches!(
            adam_step(&mut p, &g, &mut state, &TrainConfig::default()),
            Err(TrainError::NonFiniteGradient)
        ));
        assert_eq!(state.t, 0);
    }

    #[test]
    fn clipping() {
        let mut g = tiny();
        g.named_mut()[0].1.data[0] = 3.0;
        g.named_mut()[1].1.data[0] = 4.0;
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g.l2_norm() - 1.0).abs() < 1e-12);
        assert_eq!(clip_global_norm(&mut g, 0.0), g.l2_norm());
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = TrainConfig {
            max_epochs: 7,
            ..TrainConfig::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<TrainConfig>(&text).unwrap(), cfg);
        let partial: TrainConfig = toml::from_str("patience = 3").unwrap();
        assert_eq!(partial.patience, 3);
        assert_eq!(partial.learning_rate, 1e-3);
        assert!(toml::from_str::<TrainConfig>("bogus = 1").is_err());
        assert!(TrainConfig {
            patience: 0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
    }
}
