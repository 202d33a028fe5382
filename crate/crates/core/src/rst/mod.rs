//! Binary RST discourse trees.
//!
//! A tree is either a single elementary discourse unit (EDU) or a relation
//! node joining two subtrees, with a nuclearity marker saying which child is
//! the nucleus. Trees serialize to a flat bracketed token sequence
//! (see [`linearize`]) that a sequence decoder can emit, and parse back with
//! [`parse`].

mod grammar;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grammar::{linearize, parse, ParseError, ParseErrorKind, TokenSequence};

pub const OPEN: &str = "(";
pub const CLOSE: &str = ")";
pub const EDU_OPEN: &str = "<edu>";
pub const EDU_CLOSE: &str = "</edu>";
pub const REL_PREFIX: &str = "REL:";
pub const NUC_LEFT: &str = "NUC:LEFT";
pub const NUC_RIGHT: &str = "NUC:RIGHT";

/// The 18 coarse RST-DT relation classes.
pub const DEFAULT_RELATIONS: [&str; 18] = [
    "Attribution",
    "Background",
    "Cause",
    "Comparison",
    "Condition",
    "Contrast",
    "Elaboration",
    "Enablement",
    "Evaluation",
    "Explanation",
    "Joint",
    "Manner-Means",
    "Same-Unit",
    "Summary",
    "Temporal",
    "Textual-Organization",
    "Topic-Change",
    "Topic-Comment",
];

#[derive(Debug, Error)]
pub enum RstError {
    #[error("EDU {index} has no words")]
    EmptyEdu { index: usize },
    #[error("invalid word {0:?}")]
    BadWord(String),
    #[error("relation vocabulary: {0}")]
    Vocab(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Returns true if `word` matches `[a-z0-9'][a-z0-9'.,-]*`.
pub fn is_valid_word(word: &str) -> bool {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '\'' => {}
        _ => return false,
    }
    chars.all(|c| {
        c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, '\'' | '.' | ',' | '-')
    })
}

/// Lowercases free text and strips punctuation, keeping intra-word
/// apostrophes, hyphens, periods and commas (so `3.5` and `well-lit` survive).
pub fn normalize_words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let kept: String = raw
                .to_lowercase()
                .chars()
                .filter(|c| {
                    c.is_ascii_lowercase()
                        || c.is_ascii_digit()
                        || matches!(c, '\'' | '.' | ',' | '-')
                })
                .collect();
            let trimmed = kept
                .trim_start_matches(['.', ',', '-'])
                .trim_end_matches(['.', ',', '-', '\'']);
            (!trimmed.is_empty()).then(|| trimmed.to_string())
        })
        .collect()
}

/// An elementary discourse unit: a non-empty span of normalized words.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edu {
    index: usize,
    words: Vec<String>,
}

impl Edu {
    pub fn new<S: Into<String>>(
        index: usize,
        words: impl IntoIterator<Item = S>,
    ) -> Result<Self, RstError> {
        let words: Vec<String> = words.into_iter().map(Into::into).collect();
        if words.is_empty() {
            return Err(RstError::EmptyEdu { index });
        }
        if let Some(bad) = words.iter().find(|w| !is_valid_word(w)) {
            return Err(RstError::BadWord(bad.clone()));
        }
        Ok(Edu { index, words })
    }

    /// Builds an EDU from free text, normalizing it first.
    pub fn from_text(index: usize, text: &str) -> Result<Self, RstError> {
        Edu::new(index, normalize_words(text))
    }

    /// Constructs an EDU without checking word validity. Used by `validate`
    /// tests and by callers that want to report violations rather than fail.
    pub fn new_unchecked(index: usize, words: Vec<String>) -> Self {
        Edu { index, words }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationLabel(String);

impl RelationLabel {
    pub fn new(name: impl Into<String>) -> Self {
        RelationLabel(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Which child of a relation node holds the nucleus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Nuclearity {
    Left,
    Right,
}

impl Nuclearity {
    pub fn token(self) -> &'static str {
        match self {
            Nuclearity::Left => NUC_LEFT,
            Nuclearity::Right => NUC_RIGHT,
        }
    }
}

impl fmt::Display for Nuclearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Nuclearity::Left => "LEFT",
            Nuclearity::Right => "RIGHT",
        })
    }
}

/// The closed set of relation labels a parser accepts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationVocab {
    labels: BTreeSet<String>,
}

impl Default for RelationVocab {
    fn default() -> Self {
        RelationVocab::new(DEFAULT_RELATIONS).expect("default labels are valid")
    }
}

impl RelationVocab {
    pub fn new<S: AsRef<str>>(labels: impl IntoIterator<Item = S>) -> Result<Self, RstError> {
        let mut set = BTreeSet::new();
        for label in labels {
            let label = label.as_ref();
            if label.is_empty() || label.chars().any(char::is_whitespace) {
                return Err(RstError::Vocab(format!("bad label {label:?}")));
            }
            set.insert(label.to_string());
        }
        if set.is_empty() {
            return Err(RstError::Vocab("no labels".into()));
        }
        Ok(RelationVocab { labels: set })
    }

    /// Parses the vocabulary file format: one label per line, `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self, RstError> {
        RelationVocab::new(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty()),
        )
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, RstError> {
        RelationVocab::parse_str(&std::fs::read_to_string(path)?)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.contains(label)
    }

    /// Labels in sorted order.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RstTree {
    Leaf(Edu),
    Node {
        label: RelationLabel,
        nuclearity: Nuclearity,
        left: Box<RstTree>,
        right: Box<RstTree>,
    },
}

/// Invariant violations reported by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownRelation(String),
    NonMonotoneEduOrder,
    NonContiguousEduIndices,
    EmptyEdu(usize),
    BadWord(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownRelation(l) => write!(f, "unknown relation {l:?}"),
            Violation::NonMonotoneEduOrder => {
                f.write_str("EDU indices are not increasing left to right")
            }
            Violation::NonContiguousEduIndices => f.write_str("EDU indices are not 0..k-1"),
            Violation::EmptyEdu(i) => write!(f, "EDU {i} is empty"),
            Violation::BadWord(w) => write!(f, "invalid word {w:?}"),
        }
    }
}

impl RstTree {
    pub fn leaf(edu: Edu) -> Self {
        RstTree::Leaf(edu)
    }

    pub fn node(
        label: impl Into<String>,
        nuclearity: Nuclearity,
        left: RstTree,
        right: RstTree,
    ) -> Self {
        RstTree::Node {
            label: RelationLabel::new(label),
            nuclearity,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, RstTree::Leaf(_))
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            RstTree::Leaf(_) => 1,
            RstTree::Node { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// EDUs in reading order.
    pub fn edus(&self) -> Vec<&Edu> {
        let mut out = Vec::new();
        self.collect_edus(&mut out);
        out
    }

    fn collect_edus<'a>(&'a self, out: &mut Vec<&'a Edu>) {
        match self {
            RstTree::Leaf(edu) => out.push(edu),
            RstTree::Node { left, right, .. } => {
                left.collect_edus(out);
                right.collect_edus(out);
            }
        }
    }

    /// True when both trees have the same shape, labels and nuclearities,
    /// regardless of EDU words.
    pub fn same_structure(&self, other: &RstTree) -> bool {
        match (self, other) {
            (RstTree::Leaf(_), RstTree::Leaf(_)) => true,
            (
                RstTree::Node {
                    label: la,
                    nuclearity: na,
                    left: l1,
                    right: r1,
                },
                RstTree::Node {
                    label: lb,
                    nuclearity: nb,
                    left: l2,
                    right: r2,
                },
            ) => la == lb && na == nb && l1.same_structure(l2) && r1.same_structure(r2),
            _ => false,
        }
    }
}

/// Relation labels in pre-order.
pub fn relation_list(tree: &RstTree) -> Vec<RelationLabel> {
    let mut out = Vec::new();
    preorder(tree, &mut |label, _| out.push(label.clone()));
    out
}

/// Nuclearity markers ("edges") in pre-order.
pub fn edge_list(tree: &RstTree) -> Vec<Nuclearity> {
    let mut out = Vec::new();
    preorder(tree, &mut |_, nuc| out.push(nuc));
    out
}

fn preorder(tree: &RstTree, visit: &mut impl FnMut(&RelationLabel, Nuclearity)) {
    if let RstTree::Node {
        label,
        nuclearity,
        left,
        right,
    } = tree
    {
        visit(label, *nuclearity);
        preorder(left, visit);
        preorder(right, visit);
    }
}

/// Lists every invariant the tree breaks. An empty list means the tree is valid.
pub fn validate(tree: &RstTree, vocab: &RelationVocab) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut unknown = Vec::new();
    preorder(tree, &mut |label, _| {
        if !vocab.contains(label.as_str()) {
            unknown.push(label.as_str().to_string());
        }
    });
    violations.extend(unknown.into_iter().map(Violation::UnknownRelation));

    let edus = tree.edus();
    for edu in &edus {
        if edu.words.is_empty() {
            violations.push(Violation::EmptyEdu(edu.index));
        }
        for w in edu.words.iter().filter(|w| !is_valid_word(w)) {
            violations.push(Violation::BadWord(w.clone()));
        }
    }
    let indices: Vec<usize> = edus.iter().map(|e| e.index).collect();
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        violations.push(Violation::NonMonotoneEduOrder);
    } else if indices.iter().enumerate().any(|(i, &idx)| i != idx) {
        violations.push(Violation::NonContiguousEduIndices);
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(i: usize, text: &str) -> RstTree {
        RstTree::leaf(Edu::from_text(i, text).unwrap())
    }

    #[test]
    fn word_pattern() {
        assert!(is_valid_word("don't"));
        assert!(is_valid_word("3.5"));
        assert!(is_valid_word("'tis"));
        assert!(!is_valid_word("Cat"));
        assert!(!is_valid_word("-x"));
        assert!(!is_valid_word(""));
        assert!(!is_valid_word("<edu>"));
    }

    #[test]
    fn normalization_lowercases_and_strips() {
        assert_eq!(
            normalize_words("The person's shirt, well-lit. (Again!)"),
            vec!["the", "person's", "shirt", "well-lit", "again"]
        );
        assert!(normalize_words("?! ...").is_empty());
    }

    #[test]
    fn edu_rejects_empty_and_bad_words() {
        assert!(matches!(
            Edu::new::<&str>(0, []),
            Err(RstError::EmptyEdu { index: 0 })
        ));
        assert!(matches!(
            Edu::new(0, ["ok", "NO"]),
            Err(RstError::BadWord(_))
        ));
    }

    #[test]
    fn vocab_file_format() {
        let v = RelationVocab::parse_str("# header\nCause\n\nElaboration  # trailing\n").unwrap();
        assert_eq!(v.labels().collect::<Vec<_>>(), vec!["Cause", "Elaboration"]);
        assert!(RelationVocab::parse_str("# nothing\n").is_err());
        assert_eq!(RelationVocab::default().len(), 18);
    }

    #[test]
    fn extractors_preorder() {
        let t = RstTree::node(
            "A",
            Nuclearity::Left,
            RstTree::node("B", Nuclearity::Right, leaf(0, "x"), leaf(1, "y")),
            leaf(2, "z"),
        );
        assert_eq!(
            relation_list(&t),
            vec![RelationLabel::new("A"), RelationLabel::new("B")]
        );
        assert_eq!(edge_list(&t), vec![Nuclearity::Left, Nuclearity::Right]);
        let l = leaf(0, "a");
        assert!(relation_list(&l).is_empty());
        assert!(edge_list(&l).is_empty());
    }

    #[test]
    fn validate_reports_violations() {
        let vocab = RelationVocab::default();
        let good = RstTree::node("Cause", Nuclearity::Right, leaf(0, "a"), leaf(1, "b"));
        assert!(validate(&good, &vocab).is_empty());

        let foo = RstTree::node("Foo", Nuclearity::Right, leaf(0, "a"), leaf(1, "b"));
        assert_eq!(
            validate(&foo, &vocab),
            vec![Violation::UnknownRelation("Foo".into())]
        );

        let shuffled = RstTree::node(
            "Joint",
            Nuclearity::Left,
            leaf(0, "a"),
            RstTree::node("Joint", Nuclearity::Left, leaf(2, "b"), leaf(1, "c")),
        );
        assert_eq!(
            validate(&shuffled, &vocab),
            vec![Violation::NonMonotoneEduOrder]
        );

        let gap = RstTree::node("Joint", Nuclearity::Left, leaf(0, "a"), leaf(2, "b"));
        assert_eq!(
            validate(&gap, &vocab),
            vec![Violation::NonContiguousEduIndices]
        );

        let empty = RstTree::Leaf(Edu::new_unchecked(0, vec![]));
        assert_eq!(validate(&empty, &vocab), vec![Violation::EmptyEdu(0)]);
    }

    #[test]
    fn structure_ignores_words() {
        let a = RstTree::node("Cause", Nuclearity::Left, leaf(0, "a"), leaf(1, "b"));
        let b = RstTree::node("Cause", Nuclearity::Left, leaf(0, "c d"), leaf(1, "e"));
        let c = RstTree::node("Cause", Nuclearity::Right, leaf(0, "a"), leaf(1, "b"));
        assert!(a.same_structure(&b));
        assert!(!a.same_structure(&c));
        assert_eq!(a.leaf_count(), 2);
    }
}
