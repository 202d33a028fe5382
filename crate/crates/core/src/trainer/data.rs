use rayon::prelude::*;

use crate::corpus::{Corpus, Example, Split};
use crate::metrics::ScoredPair;
use crate::model::{AttentionMap, ModelError, ModelParams};
use crate::rst::{RelationVocab, RstTree, TokenSequence};
use crate::vocab::TokenVocab;

/// A video ready for the network: truncated f64 frames and target ids
/// wrapped in `<s>` … `</s>`.
#[derive(Debug, Clone)]
pub struct EncodedExample {
    pub video_id: String,
    pub frames: Vec<Vec<f64>>,
    pub ids: Vec<usize>,
    pub gold: RstTree,
}

impl EncodedExample {
    pub fn new(example: &Example, vocab: &TokenVocab, max_encoder_len: usize) -> Self {
        EncodedExample {
            video_id: example.video_id.clone(),
            frames: example.features.to_f64_rows(max_encoder_len),
            ids: vocab.encode(&example.gold_tokens),
            gold: example.gold.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub vocab: TokenVocab,
    pub feature_dim: usize,
    pub train: Vec<EncodedExample>,
    pub val: Vec<EncodedExample>,
    pub test: Vec<EncodedExample>,
}

impl Dataset {
    /// Builds the token vocabulary from the training split.
    pub fn from_corpus(corpus: &Corpus, relations: &RelationVocab, max_encoder_len: usize) -> Self {
        let vocab = TokenVocab::build(relations, corpus.train.iter().map(|e| &e.gold_tokens));
        Self::with_vocab(corpus, vocab, max_encoder_len)
    }

    pub fn with_vocab(corpus: &Corpus, vocab: TokenVocab, max_encoder_len: usize) -> Self {
        let enc = |xs: &[Example]| {
            xs.iter()
                .map(|e| EncodedExample::new(e, &vocab, max_encoder_len))
                .collect()
        };
        Dataset {
            feature_dim: corpus.feature_dim().unwrap_or(0),
            train: enc(&corpus.train),
            val: enc(&corpus.val),
            test: enc(&corpus.test),
            vocab,
        }
    }

    pub fn split(&self, split: Split) -> &[EncodedExample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Greedy output: one token per attention row. Reserved tokens the model
/// happens to emit are kept so rows and tokens stay aligned.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub tokens: TokenSequence,
    pub attention: Option<AttentionMap>,
}

pub fn predict(
    params: &ModelParams,
    vocab: &TokenVocab,
    frames: &[Vec<f64>],
) -> Result<Prediction, ModelError> {
    let enc = params.encode(frames)?;
    let (ids, attention) = params.greedy_decode(&enc);
    Ok(Prediction {
        tokens: ids.iter().map(|&i| vocab.token(i)).collect(),
        attention,
    })
}

/// Greedy-decodes every example (in parallel, results in input order) and
/// pairs each prediction with its gold tree.
pub fn score_split(
    params: &ModelParams,
    vocab: &TokenVocab,
    examples: &[EncodedExample],
    relations: &RelationVocab,
) -> Result<Vec<ScoredPair>, ModelError> {
    examples
        .par_iter()
        .map(|ex| {
            let pred = predict(params, vocab, &ex.frames)?;
            Ok(ScoredPair::new(ex.gold.clone(), pred.tokens, relations))
        })
        .collect()
}
