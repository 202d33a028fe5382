use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    adam_step, clip_global_norm, AdamState, Dataset, EncodedExample, TrainConfig, TrainError,
};
use crate::corpus::Split;
use crate::metrics::{score_all, Scores};
use crate::model::{Checkpoint, ModelConfig, ModelParams, Tape};
use crate::rst::RelationVocab;

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_relations: f64,
    pub val_edges: f64,
    pub val_relations_edges: f64,
    pub val_bleu4: f64,
}

impl EpochLog {
    pub fn val_scores(&self) -> Scores {
        Scores {
            relations: self.val_relations,
            edges: self.val_edges,
            relations_edges: self.val_relations_edges,
            bleu4: self.val_bleu4,
        }
    }
}

/// Scores a candidate model on validation data after each epoch.
pub type Evaluator<'a> = dyn FnMut(usize, &ModelParams) -> Result<Scores, TrainError> + 'a;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn best(&self) -> &EpochLog {
        &self.log[self.best_epoch - 1]
    }

    pub fn log_jsonl(&self) -> String {
        self.log
            .iter()
            .map(|e| serde_json::to_string(e).expect("log serializes") + "\n")
            .collect()
    }
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fills in the data-dependent dimensions of `model`.
pub(crate) fn resolve_config(
    data: &Dataset,
    model: &ModelConfig,
) -> Result<ModelConfig, TrainError> {
    let config = ModelConfig {
        feature_dim: data.feature_dim,
        vocab_size: data.vocab.len(),
        ..model.clone()
    };
    config.validate()?;
    Ok(config)
}

/// Trains on `data.train`, early-stopping on validation Relations+Edges.
pub fn train(
    data: &Dataset,
    model: &ModelConfig,
    cfg: &TrainConfig,
    relations: &RelationVocab,
) -> Result<TrainOutcome, TrainError> {
    train_with(
        data,
        model,
        cfg,
        &mut val_evaluator(data, relations),
        &mut |_| {},
    )
}

/// Greedy-decodes the validation split and scores it.
pub fn val_evaluator<'a>(
    data: &'a Dataset,
    relations: &'a RelationVocab,
) -> impl FnMut(usize, &ModelParams) -> Result<Scores, TrainError> + 'a {
    move |_, params| {
        let pairs = super::score_split(params, &data.vocab, data.split(Split::Val), relations)?;
        Ok(score_all(&pairs)?)
    }
}

/// [`train`] with a custom validation scorer and a per-epoch callback.
///
/// Every epoch shuffles the training set, takes Adam steps on mini-batches of
/// mean token NLL, then scores the f32-rounded parameters (exactly what a
/// checkpoint stores). The best epoch wins ties against later ones; training
/// stops once `patience` epochs pass without improvement.
pub fn train_with(
    data: &Dataset,
    model: &ModelConfig,
    cfg: &TrainConfig,
    evaluate: &mut Evaluator<'_>,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(TrainError::EmptySplit(Split::Train));
    }
    if data.val.is_empty() {
        return Err(TrainError::EmptySplit(Split::Val));
    }
    let config = resolve_config(data, model)?;
    let mut params = ModelParams::init(&config, &mut stream(cfg.seed, 0))?;
    let mut shuffle_rng = stream(cfg.seed, 1);
    let mut dropout_rng = stream(cfg.seed, 2);
    let mut adam = AdamState::new(&params);
    let mut grads = params.zeros_like();
    let lanes = rayon::current_num_threads().clamp(1, cfg.batch_size);
    let mut scratch = vec![params.zeros_like(); lanes];

    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut log = Vec::new();
    let mut best: Option<(usize, f64, ModelParams)> = None;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut nll, mut tokens) = (0.0, 0usize);
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<(&EncodedExample, u64)> = idx
                .iter()
                .map(|&i| (&data.train[i], dropout_rng.next_u64()))
                .collect();
            let (batch_nll, batch_tokens) =
                batch_gradient(&params, &batch, &mut grads, &mut scratch)?;
            if !batch_nll.is_finite() {
                return Err(TrainError::DivergedLoss { epoch, batch: b });
            }
            nll += batch_nll;
            tokens += batch_tokens;
            clip_global_norm(&mut grads, cfg.clip_norm);
            adam_step(&mut params, &grads, &mut adam, cfg).map_err(|e| match e {
                TrainError::NonFiniteGradient => TrainError::DivergedLoss { epoch, batch: b },
                e => e,
            })?;
        }

        let mut candidate = params.clone();
        candidate.round_to_f32();
        let scores = evaluate(epoch, &candidate)?;
        let entry = EpochLog {
            epoch,
            train_loss: nll / tokens.max(1) as f64,
            val_relations: scores.relations,
            val_edges: scores.edges,
            val_relations_edges: scores.relations_edges,
            val_bleu4: scores.bleu4,
        };
        on_epoch(&entry);
        log.push(entry);

        match &best {
            Some((_, score, _)) if scores.relations_edges <= *score => {}
            _ => best = Some((epoch, scores.relations_edges, candidate)),
        }
        let best_epoch = best.as_ref().unwrap().0;
        if epoch - best_epoch >= cfg.patience {
            break;
        }
    }

    let (best_epoch, _, params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            params,
            vocab: data.vocab.clone(),
        },
        log,
        best_epoch,
    })
}

/// Accumulates the gradient of the batch's mean token NLL into `grads`.
/// Each example's gradient is computed separately and summed in batch
/// order, so the result does not depend on the thread count. Returns the
/// summed NLL and the number of target tokens.
fn batch_gradient(
    params: &ModelParams,
    batch: &[(&EncodedExample, u64)],
    grads: &mut ModelParams,
    scratch: &mut [ModelParams],
) -> Result<(f64, usize), TrainError> {
    let tapes: Vec<Tape> = batch
        .par_iter()
        .map(|(ex, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            params.forward_train(&ex.frames, &ex.ids, Some(&mut rng))
        })
        .collect::<Result<_, _>>()?;
    let nll: f64 = tapes.iter().map(Tape::nll_sum).sum();
    let tokens: usize = tapes.iter().map(Tape::num_targets).sum();
    let scale = 1.0 / tokens.max(1) as f64;

    for (_, m) in grads.named_mut() {
        m.fill(0.0);
    }
    for chunk in tapes.chunks(scratch.len()) {
        chunk
            .par_iter()
            .zip(scratch.par_iter_mut())
            .for_each(|(tape, g)| {
                for (_, m) in g.named_mut() {
                    m.fill(0.0);
                }
                tape.backward_into(params, scale, g);
            });
        for g in &scratch[..chunk.len()] {
            grads.add_scaled(g, 1.0);
        }
    }
    Ok((nll, tokens))
}
