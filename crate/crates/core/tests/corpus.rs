use std::fs;

use proptest::prelude::*;
use vdp::corpus::*;
use vdp::metrics::{relations_edges_accuracy, ScoredPair};
use vdp::rst::{linearize, RelationVocab, TokenSequence};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feature_round_trip(rows in 1usize..40, cols in 1usize..70, seed in any::<u64>()) {
        let data: Vec<f32> = (0..rows * cols)
            .map(|i| f32::from_bits((seed.wrapping_mul(i as u64 + 1) >> 7) as u32 & 0x3f7f_ffff))
            .collect();
        let seq = FeatureSequence::new("x", rows, cols, data, DEFAULT_FPS).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.vdpf");
        write_features(&seq, &path).unwrap();
        let back = read_features(&path).unwrap();
        prop_assert_eq!(back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        seq.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!((back.len(), back.dim()), (rows, cols));
    }

    #[test]
    fn sampled_count_tracks_duration(seconds in 1u32..60, source_fps in 6u32..60, target in 1u32..6) {
        let n = seconds * source_fps;
        let ts: Vec<f64> = (0..n).map(|i| i as f64 / source_fps as f64).collect();
        let picked = sample_frames(&ts, target as f64).unwrap();
        let expected = (seconds * target) as i64;
        prop_assert!((picked.len() as i64 - expected).abs() <= 1);
        prop_assert!(picked.len() <= ts.len());
        prop_assert!(picked.windows(2).all(|w| w[0] < w[1]));
    }
}

fn oracle_accuracy(spec: &SynthSpec) -> f64 {
    let vocab = RelationVocab::default();
    let corpus = generate_synthetic(spec, &vocab).unwrap();
    let oracle = NearestCodeDecoder::new(spec);
    let pairs: Vec<ScoredPair> = corpus
        .videos
        .iter()
        .map(|v| {
            let pred = oracle
                .decode(&v.features)
                .map(|t| linearize(&t))
                .unwrap_or_else(|| TokenSequence::new(vec![]));
            ScoredPair::new(v.tree.clone(), pred, &vocab)
        })
        .collect();
    relations_edges_accuracy(&pairs).unwrap()
}

#[test]
fn oracle_is_perfect_at_zero_noise_for_any_seed() {
    for seed in 0..10 {
        let spec = SynthSpec {
            n_videos: 80,
            seed,
            ..SynthSpec::default()
        };
        assert_eq!(oracle_accuracy(&spec), 1.0, "seed {seed}");
    }
}

#[test]
fn oracle_accuracy_degrades_with_noise() {
    let sigmas = [0.0, 0.5, 1.0, 1.5, 2.5];
    let means: Vec<f64> = sigmas
        .iter()
        .map(|&s| {
            (0..5)
                .map(|seed| {
                    oracle_accuracy(&SynthSpec {
                        n_videos: 60,
                        noise_sigma: s,
                        seed,
                        ..SynthSpec::default()
                    })
                })
                .sum::<f64>()
                / 5.0
        })
        .collect();
    assert!(means.windows(2).all(|w| w[0] >= w[1]), "{means:?}");
    assert!(means[4] < means[0]);
}

#[test]
fn generation_is_byte_reproducible() {
    let vocab = RelationVocab::default();
    let spec = SynthSpec {
        n_videos: 12,
        noise_sigma: 0.3,
        seed: 17,
        ..SynthSpec::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate_synthetic(&spec, &vocab)
        .unwrap()
        .write(a.path())
        .unwrap();
    generate_synthetic(&spec, &vocab)
        .unwrap()
        .write(b.path())
        .unwrap();
    assert_eq!(
        fs::read(a.path().join(MANIFEST_FILE)).unwrap(),
        fs::read(b.path().join(MANIFEST_FILE)).unwrap()
    );
    for i in 0..12 {
        let f = format!("features/synth-{i:04}.vdpf");
        assert_eq!(
            fs::read(a.path().join(&f)).unwrap(),
            fs::read(b.path().join(&f)).unwrap()
        );
    }
    let other = SynthSpec { seed: 18, ..spec };
    let c = generate_synthetic(&other, &vocab).unwrap();
    assert_ne!(
        manifest_to_string(&c.records()),
        fs::read_to_string(a.path().join(MANIFEST_FILE)).unwrap()
    );
}

#[test]
fn written_corpus_loads_cleanly() {
    let vocab = RelationVocab::default();
    let spec = SynthSpec {
        n_videos: 280,
        train: 200,
        val: 40,
        ..SynthSpec::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let synth = generate_synthetic(&spec, &vocab).unwrap();
    let manifest = synth.write(dir.path()).unwrap();
    let corpus = load_corpus(&manifest, &vocab).unwrap();
    assert!(corpus.is_clean(), "{:?}", corpus.violations);
    assert_eq!(
        (corpus.train.len(), corpus.val.len(), corpus.test.len()),
        (200, 40, 40)
    );
    assert_eq!(corpus.feature_dim(), Some(spec.feature_dim));
    assert_eq!(corpus.train[0].video_id, "synth-0000");
    assert_eq!(corpus.test[39].video_id, "synth-0279");

    for (disk, memory) in corpus.examples().zip(synth.to_corpus().examples()) {
        assert_eq!(disk.video_id, memory.video_id);
        assert_eq!(disk.split, memory.split);
        assert_eq!(disk.gold, memory.gold);
        assert_eq!(disk.gold_tokens, memory.gold_tokens);
        assert_eq!(disk.description, memory.description);
        assert_eq!(disk.features.data(), memory.features.data());
    }
}
