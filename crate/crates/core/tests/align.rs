use proptest::prelude::*;
use vdp::align::*;
use vdp::model::AttentionMap;
use vdp::rst::{parse, RelationVocab, TokenSequence};

const TWO: &str = "( REL:Cause NUC:LEFT <edu> a b </edu> <edu> c </edu> )";
const COFFEE_SPILL: &str = "( REL:Cause NUC:RIGHT <edu> person spills coffee on shirt </edu> \
    ( REL:Elaboration NUC:LEFT <edu> person goes to bathroom and cleans stains </edu> \
    <edu> person dries shirt with handkerchief </edu> ) )";

fn row(p: usize, mass: &[(usize, f64)]) -> Vec<f64> {
    let mut r = vec![0.0; p];
    for &(k, m) in mass {
        r[k] += m;
    }
    r
}

#[test]
fn hand_constructed_two_edu_case() {
    let p = 10;
    let filler = row(p, &[(0, 1.0)]);
    // token order: ( REL NUC <edu> a b </edu> <edu> c </edu> )
    let rows = vec![
        filler.clone(),
        filler.clone(),
        filler.clone(),
        filler.clone(),
        row(p, &[(2, 0.6), (5, 0.4)]),
        row(p, &[(2, 0.8), (7, 0.2)]),
        filler.clone(),
        filler.clone(),
        row(p, &[(9, 0.8), (1, 0.2)]),
        filler.clone(),
        filler,
    ];
    let got = assign_scenes(
        &TokenSequence::from_line(TWO),
        &AttentionMap { rows },
        &RelationVocab::default(),
    )
    .unwrap();
    let summary: Vec<(usize, usize, f64)> = got
        .scenes
        .iter()
        .map(|s| (s.edu_index, s.frame_index, s.confidence))
        .collect();
    // EDU 0 averages (0.6 + 0.8) / 2 on frame 2; EDU 1 is a single row
    assert_eq!(summary.len(), 2);
    assert_eq!((summary[0].0, summary[0].1), (0, 2));
    assert!((summary[0].2 - 0.7).abs() < 1e-15);
    assert_eq!(summary[1], (1, 9, 0.8));
}

#[test]
fn coffee_spill_render() {
    let tree = parse(
        &TokenSequence::from_line(COFFEE_SPILL),
        &RelationVocab::default(),
    )
    .unwrap();
    let scenes = SceneAssignment {
        scenes: [(0, 1), (1, 2), (2, 3)]
            .iter()
            .map(|&(e, f)| EduScene {
                edu_index: e,
                frame_index: f,
                confidence: 1.0,
                frames: vec![f],
            })
            .collect(),
    };
    assert_eq!(
        render_discourse(&tree, &scenes).to_string(),
        "( REL:Cause NUC:RIGHT FRAME:1 ( REL:Elaboration NUC:LEFT FRAME:2 FRAME:3 ) )"
    );
    assert_eq!(
        render_discourse(&tree, &scenes),
        render_discourse(&tree, &scenes)
    );
}

#[test]
fn threshold_mode_keeps_argmax_and_adds_frames() {
    let p = 4;
    let rows: Vec<Vec<f64>> = (0..11)
        .map(|_| row(p, &[(1, 0.5), (3, 0.3), (0, 0.2)]))
        .collect();
    let cfg = AlignConfig {
        mass_threshold: Some(0.75),
    };
    let got = assign_scenes_with(
        &TokenSequence::from_line(TWO),
        &AttentionMap { rows },
        &RelationVocab::default(),
        &cfg,
    )
    .unwrap();
    for s in &got.scenes {
        assert_eq!(s.frame_index, 1);
        assert_eq!(s.frames, vec![1, 3]);
    }
}

fn normalized(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn attention(p: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec(0.01f64..1.0, p).prop_map(normalized),
        11,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn confidence_is_a_valid_mass(rows in attention(7)) {
        let got = assign_scenes(&TokenSequence::from_line(TWO), &AttentionMap { rows: rows.clone() }, &RelationVocab::default()).unwrap();
        let spans = [&rows[4..6], &rows[8..9]];
        for (s, span) in got.scenes.iter().zip(spans) {
            let mean: Vec<f64> = (0..7).map(|j| span.iter().map(|r| r[j]).sum::<f64>() / span.len() as f64).collect();
            prop_assert!((mean.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(mean.iter().all(|&m| m >= 0.0));
            let max = mean.iter().cloned().fold(f64::MIN, f64::max);
            prop_assert_eq!(s.confidence, max);
            prop_assert!(s.confidence > 0.0 && s.confidence <= 1.0);
        }
    }

    #[test]
    fn permuting_frames_permutes_assignments(rows in attention(6), perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let v = RelationVocab::default();
        let seq = TokenSequence::from_line(TWO);
        let before = assign_scenes(&seq, &AttentionMap { rows: rows.clone() }, &v).unwrap();
        // column j moves to position perm[j]
        let permuted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let mut out = vec![0.0; 6];
                for (j, &x) in r.iter().enumerate() {
                    out[perm[j]] = x;
                }
                out
            })
            .collect();
        let after = assign_scenes(&seq, &AttentionMap { rows: permuted }, &v).unwrap();
        for (a, b) in before.scenes.iter().zip(&after.scenes) {
            prop_assert_eq!(perm[a.frame_index], b.frame_index);
            prop_assert_eq!(a.confidence, b.confidence);
        }
    }
}
