//! Planted-code synthetic corpus.
//!
//! Every video has three EDUs arranged as a left- or right-branching binary
//! tree. Each EDU owns a contiguous run of frames; every frame in the run is
//!
//! ```text
//! e(role) + e(relation of the node governing the EDU) + N(0, sigma^2 I)
//! ```
//!
//! where `e` maps to standard basis vectors: roles use dimensions 0..4,
//! relations use 4..4+R. The role says whether the EDU hangs off the root or
//! off the inner node and whether it is that node's nucleus, which together
//! with the relation codes pins down the whole gold structure.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    manifest_to_string, Corpus, CorpusError, Example, FeatureSequence, ManifestRecord, Split,
    DEFAULT_FPS, MANIFEST_FILE,
};
use crate::rst::{linearize, Edu, Nuclearity, RelationVocab, RstTree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_videos: usize,
    pub relation_subset: Vec<String>,
    /// Inclusive range of frames per EDU segment.
    pub frames_per_segment: [usize; 2],
    pub noise_sigma: f64,
    pub feature_dim: usize,
    pub seed: u64,
    /// Leading videos assigned to train, then val; the rest are test.
    pub train: usize,
    pub val: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_videos: 310,
            relation_subset: vec!["Cause".into(), "Elaboration".into(), "Contrast".into()],
            frames_per_segment: [3, 6],
            noise_sigma: 0.0,
            feature_dim: 16,
            seed: 42,
            train: 210,
            val: 30,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self, relations: &RelationVocab) -> Result<(), CorpusError> {
        let fail = |m: String| Err(CorpusError::Spec(m));
        if self.n_videos == 0 {
            return fail("n_videos must be at least 1".into());
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return fail(format!(
                "noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            ));
        }
        if self.relation_subset.is_empty() {
            return fail("relation_subset is empty".into());
        }
        for (i, r) in self.relation_subset.iter().enumerate() {
            if !relations.contains(r) {
                return fail(format!("relation {r:?} is not in the vocabulary"));
            }
            if self.relation_subset[..i].contains(r) {
                return fail(format!("relation {r:?} listed twice"));
            }
        }
        let [lo, hi] = self.frames_per_segment;
        if lo == 0 || lo > hi {
            return fail(format!(
                "frames_per_segment [{lo}, {hi}] must satisfy 1 <= min <= max"
            ));
        }
        let needed = Role::ALL.len() + self.relation_subset.len();
        if self.feature_dim < needed {
            return fail(format!(
                "feature_dim {} is below the {needed} planted code dimensions",
                self.feature_dim
            ));
        }
        Ok(())
    }

    pub fn split_of(&self, index: usize) -> Split {
        let train = self.train.min(self.n_videos);
        let val = self.val.min(self.n_videos - train);
        if index < train {
            Split::Train
        } else if index < train + val {
            Split::Val
        } else {
            Split::Test
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    OuterNucleus,
    OuterSatellite,
    InnerNucleus,
    InnerSatellite,
}

impl Role {
    pub const ALL: [Role; 4] = [
        Role::OuterNucleus,
        Role::OuterSatellite,
        Role::InnerNucleus,
        Role::InnerSatellite,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    fn is_outer(self) -> bool {
        matches!(self, Role::OuterNucleus | Role::OuterSatellite)
    }

    fn phrase(self) -> [&'static str; 3] {
        match self {
            Role::OuterNucleus => ["a", "man", "enters"],
            Role::OuterSatellite => ["the", "dog", "barks"],
            Role::InnerNucleus => ["a", "woman", "cooks"],
            Role::InnerSatellite => ["the", "child", "laughs"],
        }
    }
}

const CUES: [&str; 2] = ["with", "amid"];

fn edu_words(role: Role, relation: &str, cue: usize) -> Vec<String> {
    let mut words: Vec<String> = role.phrase().iter().map(|w| w.to_string()).collect();
    words.push(CUES[cue].to_string());
    words.push(relation.to_lowercase());
    words
}

/// Roles and governing relations of the three EDUs, left to right.
fn build_tree(
    right_branching: bool,
    rel: [&str; 2],
    nuc: [Nuclearity; 2],
    cues: [usize; 3],
) -> (RstTree, [(Role, usize); 3]) {
    let [root_nuc, inner_nuc] = nuc;
    let outer_role = |outer_is_left: bool| {
        let nucleus = (root_nuc == Nuclearity::Left) == outer_is_left;
        if nucleus {
            Role::OuterNucleus
        } else {
            Role::OuterSatellite
        }
    };
    let inner_roles = if inner_nuc == Nuclearity::Left {
        [Role::InnerNucleus, Role::InnerSatellite]
    } else {
        [Role::InnerSatellite, Role::InnerNucleus]
    };
    let roles = if right_branching {
        [
            (outer_role(true), 0),
            (inner_roles[0], 1),
            (inner_roles[1], 1),
        ]
    } else {
        [
            (inner_roles[0], 1),
            (inner_roles[1], 1),
            (outer_role(false), 0),
        ]
    };
    let leaf = |i: usize| {
        RstTree::leaf(Edu::new_unchecked(
            i,
            edu_words(roles[i].0, rel[roles[i].1], cues[i]),
        ))
    };
    let tree = if right_branching {
        RstTree::node(
            rel[0],
            root_nuc,
            leaf(0),
            RstTree::node(rel[1], inner_nuc, leaf(1), leaf(2)),
        )
    } else {
        RstTree::node(
            rel[0],
            root_nuc,
            RstTree::node(rel[1], inner_nuc, leaf(0), leaf(1)),
            leaf(2),
        )
    };
    (tree, roles)
}

fn nuclearity(left: bool) -> Nuclearity {
    if left {
        Nuclearity::Left
    } else {
        Nuclearity::Right
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticVideo {
    pub record: ManifestRecord,
    pub features: FeatureSequence,
    pub tree: RstTree,
    /// Frame range of each EDU.
    pub segments: [Range<usize>; 3],
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    pub videos: Vec<SyntheticVideo>,
}

impl SynthCorpus {
    pub fn records(&self) -> Vec<ManifestRecord> {
        self.videos.iter().map(|v| v.record.clone()).collect()
    }

    /// The same videos as [`super::load_corpus`] would return after
    /// [`SynthCorpus::write`], without touching disk.
    pub fn to_corpus(&self) -> Corpus {
        let mut corpus = Corpus {
            records: self.videos.len(),
            ..Default::default()
        };
        for v in &self.videos {
            let example = Example {
                video_id: v.record.video_id.clone(),
                split: v.record.split,
                features: v.features.clone(),
                gold: v.tree.clone(),
                gold_tokens: v.record.gold_structure.clone(),
                description: v.record.description.clone(),
            };
            match example.split {
                Split::Train => corpus.train.push(example),
                Split::Val => corpus.val.push(example),
                Split::Test => corpus.test.push(example),
            }
        }
        corpus
    }

    /// Writes `manifest.jsonl` and `features/<id>.vdpf` under `dir` and
    /// returns the manifest path.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf, CorpusError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("features"))?;
        for v in &self.videos {
            super::write_features(&v.features, dir.join(&v.record.feature_path))?;
        }
        let manifest = dir.join(MANIFEST_FILE);
        fs::write(&manifest, manifest_to_string(&self.records()))?;
        Ok(manifest)
    }
}

/// Generates a corpus as a pure function of `spec`. Structure draws and noise
/// draws come from separate streams, so the same seed yields the same trees
/// at every noise level.
pub fn generate_synthetic(
    spec: &SynthSpec,
    relations: &RelationVocab,
) -> Result<SynthCorpus, CorpusError> {
    spec.validate(relations)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut noise = ChaCha8Rng::seed_from_u64(spec.seed);
    noise.set_stream(1);
    let r = spec.relation_subset.len();
    let d = spec.feature_dim;
    let [lo, hi] = spec.frames_per_segment;

    let mut videos = Vec::with_capacity(spec.n_videos);
    for i in 0..spec.n_videos {
        let right_branching = rng.random_bool(0.5);
        let rel_idx = [rng.random_range(0..r), rng.random_range(0..r)];
        let nuc = [
            nuclearity(rng.random_bool(0.5)),
            nuclearity(rng.random_bool(0.5)),
        ];
        let lens = [
            rng.random_range(lo..=hi),
            rng.random_range(lo..=hi),
            rng.random_range(lo..=hi),
        ];
        let cues = [
            rng.random_range(0..CUES.len()),
            rng.random_range(0..CUES.len()),
            rng.random_range(0..CUES.len()),
        ];
        let rel = [
            spec.relation_subset[rel_idx[0]].as_str(),
            spec.relation_subset[rel_idx[1]].as_str(),
        ];
        let (tree, roles) = build_tree(right_branching, rel, nuc, cues);

        let p: usize = lens.iter().sum();
        let mut data = Vec::with_capacity(p * d);
        let mut segments = [0..0, 0..0, 0..0];
        let mut start = 0;
        for (s, &(role, governing)) in roles.iter().enumerate() {
            segments[s] = start..start + lens[s];
            start += lens[s];
            for _ in 0..lens[s] {
                let mut frame = vec![0.0f64; d];
                frame[role.code()] += 1.0;
                frame[Role::ALL.len() + rel_idx[governing]] += 1.0;
                for v in frame.iter_mut() {
                    let z: f64 = noise.sample(StandardNormal);
                    *v += spec.noise_sigma * z;
                }
                data.extend(frame.into_iter().map(|v| v as f32));
            }
        }

        let video_id = format!("synth-{i:04}");
        let features = FeatureSequence::new(&video_id, p, d, data, DEFAULT_FPS)?;
        let description = tree
            .edus()
            .iter()
            .map(|e| e.words().join(" "))
            .collect::<Vec<_>>()
            .join(". ");
        let record = ManifestRecord {
            feature_path: format!("features/{video_id}.vdpf"),
            video_id,
            split: spec.split_of(i),
            gold_structure: linearize(&tree),
            description: Some(description),
        };
        videos.push(SyntheticVideo {
            record,
            features,
            tree,
            segments,
        });
    }
    Ok(SynthCorpus {
        spec: spec.clone(),
        videos,
    })
}

/// Brute-force decoder that reads the planted codes straight off the
/// features: try every split of the frames into three runs, score each run
/// by its best role code plus its best relation code, keep the best split,
/// and rebuild the tree those codes imply.
#[derive(Debug, Clone)]
pub struct NearestCodeDecoder {
    relations: Vec<String>,
}

impl NearestCodeDecoder {
    pub fn new(spec: &SynthSpec) -> Self {
        NearestCodeDecoder {
            relations: spec.relation_subset.clone(),
        }
    }

    /// Returns `None` when the codes do not describe a well-formed tree.
    pub fn decode(&self, features: &FeatureSequence) -> Option<RstTree> {
        let p = features.len();
        let codes = Role::ALL.len() + self.relations.len();
        if p < 3 || features.dim() < codes {
            return None;
        }
        let mut prefix = vec![vec![0.0f64; codes]; p + 1];
        for t in 0..p {
            let row = features.row(t);
            for k in 0..codes {
                prefix[t + 1][k] = prefix[t][k] + row[k] as f64;
            }
        }
        let sums = |r: Range<usize>| -> Vec<f64> {
            (0..codes)
                .map(|k| prefix[r.end][k] - prefix[r.start][k])
                .collect()
        };
        let best = |v: &[f64]| -> (usize, f64) {
            v.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc },
            )
        };
        let run_score = |r: Range<usize>| {
            let s = sums(r);
            best(&s[..4]).1 + best(&s[4..]).1
        };

        let mut top = (f64::NEG_INFINITY, 0, 0);
        for b1 in 1..p - 1 {
            for b2 in b1 + 1..p {
                let score = run_score(0..b1) + run_score(b1..b2) + run_score(b2..p);
                if score > top.0 {
                    top = (score, b1, b2);
                }
            }
        }
        let (_, b1, b2) = top;
        let runs = [sums(0..b1), sums(b1..b2), sums(b2..p)];
        let roles: Vec<Role> = runs.iter().map(|s| Role::ALL[best(&s[..4]).0]).collect();

        let right_branching = match roles.iter().map(|r| r.is_outer()).collect::<Vec<_>>()[..] {
            [true, false, false] => true,
            [false, false, true] => false,
            _ => return None,
        };
        let (outer, inner) = if right_branching {
            (0, [1, 2])
        } else {
            (2, [0, 1])
        };
        let inner_nuc = match (roles[inner[0]], roles[inner[1]]) {
            (Role::InnerNucleus, Role::InnerSatellite) => Nuclearity::Left,
            (Role::InnerSatellite, Role::InnerNucleus) => Nuclearity::Right,
            _ => return None,
        };
        let outer_is_nucleus = roles[outer] == Role::OuterNucleus;
        let root_nuc = nuclearity(outer_is_nucleus == right_branching);
        let inner_rel: Vec<f64> = (4..codes)
            .map(|k| runs[inner[0]][k] + runs[inner[1]][k])
            .collect();
        let rel = [
            self.relations[best(&runs[outer][4..]).0].as_str(),
            self.relations[best(&inner_rel).0].as_str(),
        ];
        Some(build_tree(right_branching, rel, [root_nuc, inner_nuc], [0; 3]).0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rst::{edge_list, relation_list};

    fn spec(n: usize, sigma: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            n_videos: n,
            noise_sigma: sigma,
            seed,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn split_counts() {
        let count =
            |s: &SynthSpec, split| (0..s.n_videos).filter(|&i| s.split_of(i) == split).count();
        let s = spec(300, 0.0, 1);
        assert_eq!(
            (
                count(&s, Split::Train),
                count(&s, Split::Val),
                count(&s, Split::Test)
            ),
            (210, 30, 60)
        );
        let s = spec(310, 0.0, 1);
        assert_eq!(
            (
                count(&s, Split::Train),
                count(&s, Split::Val),
                count(&s, Split::Test)
            ),
            (210, 30, 70)
        );
        let s = spec(220, 0.0, 1);
        assert_eq!(
            (
                count(&s, Split::Train),
                count(&s, Split::Val),
                count(&s, Split::Test)
            ),
            (210, 10, 0)
        );
    }

    #[test]
    fn generated_trees_match_their_codes() {
        let c = generate_synthetic(&spec(50, 0.0, 3), &RelationVocab::default()).unwrap();
        for v in &c.videos {
            assert_eq!(v.tree.leaf_count(), 3);
            let rels = relation_list(&v.tree);
            for (s, seg) in v.segments.iter().enumerate() {
                let row = v.features.row(seg.start);
                assert_eq!(row.iter().sum::<f32>(), 2.0);
                let rel_code = row[4..].iter().position(|&x| x == 1.0).unwrap();
                let outer = if matches!(&v.tree, RstTree::Node { left, .. } if left.is_leaf()) {
                    0
                } else {
                    2
                };
                let governing = if s == outer { 0 } else { 1 };
                assert_eq!(c.spec.relation_subset[rel_code], rels[governing].as_str());
            }
            assert_eq!(v.segments[2].end, v.features.len());
        }
    }

    #[test]
    fn oracle_is_exact_without_noise() {
        let s = SynthSpec {
            relation_subset: vec![
                "Cause".into(),
                "Joint".into(),
                "Temporal".into(),
                "Summary".into(),
            ],
            ..spec(200, 0.0, 9)
        };
        let c = generate_synthetic(&s, &RelationVocab::default()).unwrap();
        let oracle = NearestCodeDecoder::new(&s);
        for v in &c.videos {
            let t = oracle.decode(&v.features).unwrap();
            assert!(t.same_structure(&v.tree));
            assert_eq!(relation_list(&t), relation_list(&v.tree));
            assert_eq!(edge_list(&t), edge_list(&v.tree));
        }
    }

    #[test]
    fn spec_errors() {
        let v = RelationVocab::default();
        let bad = [
            SynthSpec {
                n_videos: 0,
                ..SynthSpec::default()
            },
            SynthSpec {
                noise_sigma: -1.0,
                ..SynthSpec::default()
            },
            SynthSpec {
                relation_subset: vec!["Nope".into()],
                ..SynthSpec::default()
            },
            SynthSpec {
                relation_subset: vec![],
                ..SynthSpec::default()
            },
            SynthSpec {
                relation_subset: vec!["Cause".into(), "Cause".into()],
                ..SynthSpec::default()
            },
            SynthSpec {
                frames_per_segment: [0, 2],
                ..SynthSpec::default()
            },
            SynthSpec {
                frames_per_segment: [4, 2],
                ..SynthSpec::default()
            },
            SynthSpec {
                feature_dim: 6,
                ..SynthSpec::default()
            },
        ];
        for s in bad {
            assert!(
                matches!(generate_synthetic(&s, &v), Err(CorpusError::Spec(_))),
                "{s:?}"
            );
        }
    }

    #[test]
    fn noise_does_not_change_structure_draws() {
        let v = RelationVocab::default();
        let a = generate_synthetic(&spec(20, 0.0, 5), &v).unwrap();
        let b = generate_synthetic(&spec(20, 0.7, 5), &v).unwrap();
        for (x, y) in a.videos.iter().zip(&b.videos) {
            assert_eq!(x.record.gold_structure, y.record.gold_structure);
            assert_ne!(x.features, y.features);
        }
    }
}
