//! Maps each predicted EDU to a representative frame by averaging the
//! decoder attention over the steps that emitted the EDU's words.
//!
//! Structural steps (brackets, relation and nuclearity tokens, EDU
//! markers) are ignored. Ties go to the lowest frame index.
//!
//! ```
//! use vdp::align::{assign_scenes, EduScene};
//! use vdp::model::AttentionMap;
//! use vdp::rst::{RelationVocab, TokenSequence};
//!
//! let pred = TokenSequence::from_line("( REL:Cause NUC:LEFT <edu> a b </edu> <edu> c </edu> )");
//! let at = |mass: &[(usize, f64)]| {
//!     let mut row = vec![0.0; 4];
//!     mass.iter().for_each(|&(k, m)| row[k] = m);
//!     row
//! };
//! let filler = at(&[(0, 1.0)]);
//! let mut rows = vec![filler.clone(); 11];
//! rows[4] = at(&[(2, 0.5), (3, 0.5)]); // a
//! rows[5] = at(&[(2, 0.75), (1, 0.25)]); // b
//! rows[8] = at(&[(1, 0.5), (3, 0.5)]); // c: tie
//! let got = assign_scenes(&pred, &AttentionMap { rows }, &RelationVocab::default()).unwrap();
//! assert_eq!(
//!     got.scenes,
//!     vec![
//!         EduScene { edu_index: 0, frame_index: 2, confidence: 0.625, frames: vec![2] },
//!         EduScene { edu_index: 1, frame_index: 1, confidence: 0.5, frames: vec![1] },
//!     ]
//! );
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::tensor::argmax;
use crate::model::{AttentionMap, ModelError, ModelParams};
use crate::rst::{
    parse, ParseError, RelationVocab, RstTree, TokenSequence, CLOSE, EDU_CLOSE, EDU_OPEN, OPEN,
    REL_PREFIX,
};
use crate::trainer::predict;
use crate::vocab::TokenVocab;

pub const FRAME_PREFIX: &str = "FRAME:";

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("prediction does not parse: {0}")]
    UnparseablePrediction(ParseError),
    #[error("{rows} attention rows for {tokens} predicted tokens")]
    RowCountMismatch { rows: usize, tokens: usize },
    #[error("model has no attention to align with")]
    NoAttention,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EduScene {
    pub edu_index: usize,
    /// Argmax of the EDU's averaged attention.
    pub frame_index: usize,
    /// Averaged attention mass on `frame_index`.
    pub confidence: f64,
    /// Frames covering the mass threshold, ascending; just `frame_index`
    /// when no threshold is set.
    pub frames: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneAssignment {
    pub scenes: Vec<EduScene>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    /// When set, each EDU also gets the smallest set of highest-mass frames
    /// whose cumulative mass reaches this fraction.
    pub mass_threshold: Option<f64>,
}

/// One line of alignment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub video_id: String,
    pub edu_index: usize,
    pub frame_index: usize,
    pub confidence: f64,
}

impl SceneAssignment {
    pub fn records(&self, video_id: &str) -> Vec<AssignmentRecord> {
        self.scenes
            .iter()
            .map(|s| AssignmentRecord {
                video_id: video_id.to_string(),
                edu_index: s.edu_index,
                frame_index: s.frame_index,
                confidence: s.confidence,
            })
            .collect()
    }

    pub fn to_jsonl(&self, video_id: &str) -> String {
        self.records(video_id)
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}

pub fn assign_scenes(
    prediction: &TokenSequence,
    attn: &AttentionMap,
    relations: &RelationVocab,
) -> Result<SceneAssignment, AlignError> {
    assign_scenes_with(prediction, attn, relations, &AlignConfig::default())
}

pub fn assign_scenes_with(
    prediction: &TokenSequence,
    attn: &AttentionMap,
    relations: &RelationVocab,
    config: &AlignConfig,
) -> Result<SceneAssignment, AlignError> {
    parse(prediction, relations).map_err(AlignError::UnparseablePrediction)?;
    if attn.steps() != prediction.len() {
        return Err(AlignError::RowCountMismatch {
            rows: attn.steps(),
            tokens: prediction.len(),
        });
    }
    let frames = attn.frames();
    let mut scenes = Vec::new();
    let mut span_start = None;
    for (i, tok) in prediction.tokens().iter().enumerate() {
        match tok.as_str() {
            EDU_OPEN => span_start = Some(i + 1),
            EDU_CLOSE => {
                let rows = &attn.rows[span_start.take().expect("parsed")..i];
                let mut mean = vec![0.0; frames];
                for row in rows {
                    for (m, &a) in mean.iter_mut().zip(row) {
                        *m += a;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
                let frame_index = argmax(&mean);
                scenes.push(EduScene {
                    edu_index: scenes.len(),
                    frame_index,
                    confidence: mean[frame_index],
                    frames: match config.mass_threshold {
                        Some(tau) => covering_frames(&mean, tau),
                        None => vec![frame_index],
                    },
                });
            }
            _ => {}
        }
    }
    Ok(SceneAssignment { scenes })
}

fn covering_frames(mass: &[f64], tau: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..mass.len()).collect();
    order.sort_by(|&a, &b| mass[b].total_cmp(&mass[a]).then(a.cmp(&b)));
    let mut picked = Vec::new();
    let mut total = 0.0;
    for i in order {
        picked.push(i);
        total += mass[i];
        if total >= tau {
            break;
        }
    }
    picked.sort_unstable();
    picked
}

/// The tree in the bracketed grammar with every EDU replaced by
/// `FRAME:<k>`. EDUs without a scene keep their words.
pub fn render_discourse(tree: &RstTree, scenes: &SceneAssignment) -> TokenSequence {
    let mut out = Vec::new();
    render(tree, scenes, &mut out);
    TokenSequence::new(out)
}

fn render(tree: &RstTree, scenes: &SceneAssignment, out: &mut Vec<String>) {
    match tree {
        RstTree::Leaf(edu) => match scenes.scenes.iter().find(|s| s.edu_index == edu.index()) {
            Some(s) => out.push(format!("{FRAME_PREFIX}{}", s.frame_index)),
            None => {
                out.push(EDU_OPEN.into());
                out.extend(edu.words().iter().cloned());
                out.push(EDU_CLOSE.into());
            }
        },
        RstTree::Node {
            label,
            nuclearity,
            left,
            right,
        } => {
            out.push(OPEN.into());
            out.push(format!("{REL_PREFIX}{label}"));
            out.push(nuclearity.token().into());
            render(left, scenes, out);
            render(right, scenes, out);
            out.push(CLOSE.into());
        }
    }
}

/// Everything the align step produces for one video.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub prediction: TokenSequence,
    pub tree: RstTree,
    pub scenes: SceneAssignment,
}

/// Predicts a structure for `frames` and aligns its EDUs.
pub fn align_frames(
    params: &ModelParams,
    vocab: &TokenVocab,
    frames: &[Vec<f64>],
    relations: &RelationVocab,
    config: &AlignConfig,
) -> Result<Alignment, AlignError> {
    let pred = predict(params, vocab, frames)?;
    let attn = pred.attention.ok_or(AlignError::NoAttention)?;
    let tree = parse(&pred.tokens, relations).map_err(AlignError::UnparseablePrediction)?;
    let scenes = assign_scenes_with(&pred.tokens, &attn, relations, config)?;
    Ok(Alignment {
        prediction: pred.tokens,
        tree,
        scenes,
    })
}
