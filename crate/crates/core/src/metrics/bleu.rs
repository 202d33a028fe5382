use std::collections::HashMap;

use super::MetricsError;
use crate::rst::TokenSequence;
use crate::vocab::{BOS, EOS, PAD};

pub const MAX_ORDER: usize = 4;

fn content(seq: &TokenSequence) -> Vec<&str> {
    seq.tokens()
        .iter()
        .map(String::as_str)
        .filter(|t| !matches!(*t, BOS | EOS | PAD))
        .collect()
}

fn ngram_counts<'t, 'a>(tokens: &'t [&'a str], n: usize) -> HashMap<&'t [&'a str], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Integer sufficient statistics for corpus BLEU. Adding stats of two
/// sub-corpora gives the stats of their union, so reduction order never
/// matters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub candidates: [u64; MAX_ORDER],
    pub references: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn of_pair(predicted: &TokenSequence, gold: &TokenSequence) -> Result<Self, MetricsError> {
        let hyp = content(predicted);
        let reference = content(gold);
        if reference.is_empty() {
            return Err(MetricsError::EmptyReference);
        }
        let mut stats = BleuStats {
            hyp_len: hyp.len() as u64,
            ref_len: reference.len() as u64,
            ..Default::default()
        };
        for n in 1..=MAX_ORDER {
            let hyp_counts = ngram_counts(&hyp, n);
            let ref_counts = ngram_counts(&reference, n);
            stats.candidates[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
            stats.references[n - 1] = reference.len().saturating_sub(n - 1) as u64;
            stats.matches[n - 1] = hyp_counts
                .iter()
                .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)) as u64)
                .sum();
        }
        Ok(stats)
    }

    pub fn merge(mut self, other: &BleuStats) -> Self {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.candidates[n] += other.candidates[n];
            self.references[n] += other.references[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
        self
    }

    /// BLEU in [0, 100]. Orders for which neither hypotheses nor references
    /// contain any n-gram (every sentence shorter than n) drop out of the
    /// geometric mean; any other order with zero matches zeroes the score.
    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0usize;
        for n in 0..MAX_ORDER {
            if self.candidates[n] == 0 && self.references[n] == 0 {
                continue;
            }
            if self.matches[n] == 0 {
                return 0.0;
            }
            log_sum += (self.matches[n] as f64 / self.candidates[n] as f64).ln();
            orders += 1;
        }
        if orders == 0 {
            return 0.0;
        }
        let bp = if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        };
        100.0 * bp * (log_sum / orders as f64).exp()
    }
}

/// Corpus-level BLEU-4 over (prediction, gold) pairs: uniform weights,
/// clipped n-gram precision, brevity penalty, no smoothing. Structural
/// tokens count as ordinary tokens.
pub fn bleu4(pairs: &[(TokenSequence, TokenSequence)]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut total = BleuStats::default();
    for (pred, gold) in pairs {
        total = total.merge(&BleuStats::of_pair(pred, gold)?);
    }
    Ok(total.score())
}
