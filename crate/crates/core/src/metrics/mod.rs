//! Evaluation metrics: corpus BLEU-4 plus relation, edge (nuclearity) and
//! whole-structure accuracy over predicted discourse trees.

mod bleu;
mod report;

use thiserror::Error;

pub use bleu::{bleu4, BleuStats, MAX_ORDER};
pub use report::{build_report, EvalReport, ReportTable, Schema, TABLE1_HEADER, TABLE2_HEADER};

use crate::rst::{
    edge_list, parse, relation_list, ParseError, RelationVocab, RstTree, TokenSequence,
};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("reference sequence is empty")]
    EmptyReference,
}

/// A gold tree with a raw model prediction and its parse result.
#[derive(Debug, Clone)]
pub struct ScoredPair {
    pub gold: RstTree,
    pub predicted: TokenSequence,
    pub predicted_tree: Result<RstTree, ParseError>,
}

impl ScoredPair {
    pub fn new(gold: RstTree, predicted: TokenSequence, vocab: &RelationVocab) -> Self {
        let predicted_tree = parse(&predicted, vocab);
        ScoredPair {
            gold,
            predicted,
            predicted_tree,
        }
    }
}

fn positional_matches<T: PartialEq>(gold: &[T], pred: &[T]) -> usize {
    gold.iter().zip(pred).filter(|(g, p)| g == p).count()
}

fn positional_accuracy<T: PartialEq>(
    pairs: &[ScoredPair],
    extract: impl Fn(&RstTree) -> Vec<T>,
) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut matched = 0usize;
    let mut total = 0usize;
    for pair in pairs {
        let gold = extract(&pair.gold);
        total += gold.len();
        if let Ok(pred) = &pair.predicted_tree {
            matched += positional_matches(&gold, &extract(pred));
        }
    }
    // a corpus of single-EDU trees has nothing to get wrong
    Ok(if total == 0 {
        1.0
    } else {
        matched as f64 / total as f64
    })
}

/// Micro-averaged fraction of gold relations matched position-by-position
/// in pre-order. Unparseable predictions match nothing.
pub fn relations_accuracy(pairs: &[ScoredPair]) -> Result<f64, MetricsError> {
    positional_accuracy(pairs, relation_list)
}

/// Same scheme as [`relations_accuracy`] over nuclearity directions.
pub fn edges_accuracy(pairs: &[ScoredPair]) -> Result<f64, MetricsError> {
    positional_accuracy(pairs, edge_list)
}

/// Fraction of pairs whose prediction parses and matches gold in shape,
/// every relation and every nuclearity. EDU words are ignored.
pub fn relations_edges_accuracy(pairs: &[ScoredPair]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let correct = pairs
        .iter()
        .filter(|p| {
            p.predicted_tree
                .as_ref()
                .is_ok_and(|t| t.same_structure(&p.gold))
        })
        .count();
    Ok(correct as f64 / pairs.len() as f64)
}

/// BLEU-4 of the raw predictions against linearized gold trees.
pub fn corpus_bleu(pairs: &[ScoredPair]) -> Result<f64, MetricsError> {
    let seqs: Vec<(TokenSequence, TokenSequence)> = pairs
        .iter()
        .map(|p| (p.predicted.clone(), crate::rst::linearize(&p.gold)))
        .collect();
    bleu4(&seqs)
}

/// All four metrics at full precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub relations: f64,
    pub edges: f64,
    pub relations_edges: f64,
    pub bleu4: f64,
}

pub fn score_all(pairs: &[ScoredPair]) -> Result<Scores, MetricsError> {
    Ok(Scores {
        relations: relations_accuracy(pairs)?,
        edges: edges_accuracy(pairs)?,
        relations_edges: relations_edges_accuracy(pairs)?,
        bleu4: corpus_bleu(pairs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rst::{linearize, Edu, Nuclearity};

    fn tree(r1: &str, n1: Nuclearity, r2: &str, n2: Nuclearity, words: &str) -> RstTree {
        let leaf = |i| RstTree::leaf(Edu::new(i, [words]).unwrap());
        RstTree::node(r1, n1, leaf(0), RstTree::node(r2, n2, leaf(1), leaf(2)))
    }

    fn pair(gold: RstTree, pred: &RstTree) -> ScoredPair {
        ScoredPair::new(gold, linearize(pred), &RelationVocab::default())
    }

    fn broken(gold: RstTree) -> ScoredPair {
        ScoredPair::new(
            gold,
            TokenSequence::from_line("( REL:Cause NUC:LEFT"),
            &RelationVocab::default(),
        )
    }

    use Nuclearity::{Left as L, Right as R};

    #[test]
    fn relations_hand_cases() {
        let gold = tree("Cause", R, "Elaboration", L, "a");
        assert_eq!(
            relations_accuracy(&[pair(gold.clone(), &gold)]).unwrap(),
            1.0
        );
        let wrong = tree("Cause", R, "Contrast", L, "a");
        assert_eq!(
            relations_accuracy(&[pair(gold.clone(), &wrong)]).unwrap(),
            0.5
        );

        let g2 = tree("Joint", R, "Temporal", L, "a");
        let pairs = [broken(gold), pair(g2.clone(), &g2)];
        assert_eq!(relations_accuracy(&pairs).unwrap(), 0.5);
    }

    #[test]
    fn edges_hand_cases() {
        let gold = tree("Cause", R, "Elaboration", L, "a");
        assert_eq!(edges_accuracy(&[pair(gold.clone(), &gold)]).unwrap(), 1.0);
        let wrong = tree("Cause", L, "Elaboration", L, "a");
        assert_eq!(edges_accuracy(&[pair(gold.clone(), &wrong)]).unwrap(), 0.5);
        assert_eq!(edges_accuracy(&[broken(gold)]).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch_scores_overlapping_positions() {
        let gold = tree("Cause", R, "Elaboration", L, "a");
        let two_leaf = RstTree::node(
            "Cause",
            R,
            RstTree::leaf(Edu::new(0, ["a"]).unwrap()),
            RstTree::leaf(Edu::new(1, ["b"]).unwrap()),
        );
        let p = [pair(gold, &two_leaf)];
        assert_eq!(relations_accuracy(&p).unwrap(), 0.5);
        assert_eq!(edges_accuracy(&p).unwrap(), 0.5);
        assert_eq!(relations_edges_accuracy(&p).unwrap(), 0.0);
    }

    #[test]
    fn relations_edges_hand_cases() {
        let gold = tree("Cause", R, "Elaboration", L, "a");
        let reworded = tree("Cause", R, "Elaboration", L, "zzz");
        assert_eq!(
            relations_edges_accuracy(&[pair(gold.clone(), &reworded)]).unwrap(),
            1.0
        );

        let one_wrong = tree("Cause", R, "Contrast", L, "a");
        let pairs = [pair(gold.clone(), &one_wrong), pair(gold.clone(), &gold)];
        assert_eq!(relations_edges_accuracy(&pairs).unwrap(), 0.5);
        assert_eq!(
            relations_edges_accuracy(&[pair(gold.clone(), &gold), pair(gold.clone(), &gold)])
                .unwrap(),
            1.0
        );
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(
            relations_accuracy(&[]),
            Err(MetricsError::EmptyCorpus)
        ));
        assert!(matches!(
            edges_accuracy(&[]),
            Err(MetricsError::EmptyCorpus)
        ));
        assert!(matches!(
            relations_edges_accuracy(&[]),
            Err(MetricsError::EmptyCorpus)
        ));
    }
}
