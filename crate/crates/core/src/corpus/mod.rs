//! Dataset ingestion: feature files, frame sampling, manifests, and the
//! synthetic planted-code corpus.

mod features;
mod sampling;
mod synth;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rst::{parse, ParseError, RelationVocab, RstTree, TokenSequence};

pub use features::{
    read_features, write_features, FeatureSequence, FEATURE_MAGIC, FEATURE_VERSION,
};
pub use sampling::{sample_frames, toy_extract, TOY_DIM, TOY_SIDE};
pub use synth::{
    generate_synthetic, NearestCodeDecoder, Role, SynthCorpus, SynthSpec, SyntheticVideo,
};

/// Frame rate assumed for feature files, which do not record one.
pub const DEFAULT_FPS: f64 = 5.0;
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("file is shorter than its header declares")]
    TruncatedFile,
    #[error("file has bytes past the declared data")]
    TrailingBytes,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("non-finite feature value")]
    NonFiniteValue,
    #[error("video has no frames")]
    EmptyVideo,
    #[error("bad shape: expected {expected}, found {found}")]
    BadShape { expected: usize, found: usize },
    #[error("frame rate must be positive, got {0}")]
    BadRate(f64),
    #[error("timestamps are not strictly increasing")]
    NonIncreasingTimestamps,
    #[error("pixel value {0} outside [0, 1]")]
    PixelOutOfRange(f32),
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// One manifest line. `feature_path` is resolved against the manifest's
/// directory unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub video_id: String,
    pub feature_path: String,
    pub split: Split,
    pub gold_structure: TokenSequence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

pub fn manifest_to_string(records: &[ManifestRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

/// A validated, loaded video.
#[derive(Debug, Clone)]
pub struct Example {
    pub video_id: String,
    pub split: Split,
    pub features: FeatureSequence,
    pub gold: RstTree,
    pub gold_tokens: TokenSequence,
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    Malformed(String),
    UnparseableStructure(ParseError),
    Features(String),
    DimensionMismatch { expected: usize, found: usize },
    DuplicateId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordViolation {
    /// 1-based manifest line.
    pub line: usize,
    pub video_id: Option<String>,
    pub kind: ViolationKind,
}

impl fmt::Display for RecordViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}", self.line)?;
        if let Some(id) = &self.video_id {
            write!(f, " ({id})")?;
        }
        match &self.kind {
            ViolationKind::Malformed(m) => write!(f, ": malformed record: {m}"),
            ViolationKind::UnparseableStructure(e) => {
                write!(f, ": gold_structure does not parse: {e}")
            }
            ViolationKind::Features(m) => write!(f, ": features: {m}"),
            ViolationKind::DimensionMismatch { expected, found } => {
                write!(f, ": feature dimension {found}, expected {expected}")
            }
            ViolationKind::DuplicateId => f.write_str(": duplicate video_id"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
    pub violations: Vec<RecordViolation>,
    /// Number of non-blank manifest lines.
    pub records: usize,
}

impl Corpus {
    pub fn split(&self, split: Split) -> &[Example] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.train
            .iter()
            .chain(&self.val)
            .chain(&self.test)
            .map(|e| e.features.dim())
            .next()
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn examples(&self) -> impl Iterator<Item = &Example> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }
}

fn resolve(base: &Path, feature_path: &str) -> PathBuf {
    let p = Path::new(feature_path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_record(
    line: &str,
    base: &Path,
    relations: &RelationVocab,
) -> Result<Example, (Option<String>, ViolationKind)> {
    let record: ManifestRecord =
        serde_json::from_str(line).map_err(|e| (None, ViolationKind::Malformed(e.to_string())))?;
    let id = Some(record.video_id.clone());
    let gold = parse(&record.gold_structure, relations)
        .map_err(|e| (id.clone(), ViolationKind::UnparseableStructure(e)))?;
    let mut features = read_features(resolve(base, &record.feature_path))
        .map_err(|e| (id.clone(), ViolationKind::Features(e.to_string())))?;
    features.set_video_id(&record.video_id);
    Ok(Example {
        video_id: record.video_id,
        split: record.split,
        features,
        gold,
        gold_tokens: record.gold_structure,
        description: record.description,
    })
}

/// Loads and validates every manifest record. Bad records are reported and
/// excluded; only an unreadable manifest is a hard error. Records load in
/// parallel and are merged in manifest order. The first valid record fixes
/// the feature dimension; a repeated `video_id` is rejected on every
/// occurrence after the first.
pub fn load_corpus(
    manifest: impl AsRef<Path>,
    relations: &RelationVocab,
) -> Result<Corpus, CorpusError> {
    let manifest = manifest.as_ref();
    let text = fs::read_to_string(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    let loaded: Vec<_> = lines
        .par_iter()
        .map(|&(n, l)| (n, load_record(l, base, relations)))
        .collect();

    let mut corpus = Corpus {
        records: lines.len(),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    let mut dim = None;
    for (line, result) in loaded {
        let example = match result {
            Ok(e) => e,
            Err((video_id, kind)) => {
                if let Some(id) = &video_id {
                    if !seen.insert(id.clone()) {
                        corpus.violations.push(RecordViolation {
                            line,
                            video_id,
                            kind: ViolationKind::DuplicateId,
                        });
                        continue;
                    }
                }
                corpus.violations.push(RecordViolation {
                    line,
                    video_id,
                    kind,
                });
                continue;
            }
        };
        let video_id = Some(example.video_id.clone());
        if !seen.insert(example.video_id.clone()) {
            corpus.violations.push(RecordViolation {
                line,
                video_id,
                kind: ViolationKind::DuplicateId,
            });
            continue;
        }
        let d = example.features.dim();
        match dim {
            Some(expected) if expected != d => {
                corpus.violations.push(RecordViolation {
                    line,
                    video_id,
                    kind: ViolationKind::DimensionMismatch { expected, found: d },
                });
                continue;
            }
            _ => dim = Some(d),
        }
        match example.split {
            Split::Train => corpus.train.push(example),
            Split::Val => corpus.val.push(example),
            Split::Test => corpus.test.push(example),
        }
    }
    Ok(corpus)
}
