//! Trains a small attention model, then maps each predicted EDU of a test
//! video to the frame its words attended to most.
//!
//! cargo run --example align_scenes

use vdp::align::{align_frames, render_discourse, AlignConfig};
use vdp::corpus::{generate_synthetic, SynthSpec};
use vdp::model::{AttentionKind, ModelConfig};
use vdp::rst::RelationVocab;
use vdp::trainer::{train, Dataset, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let relations = RelationVocab::default();
    let spec = SynthSpec {
        n_videos: 280,
        train: 200,
        val: 40,
        ..SynthSpec::default()
    };
    let synth = generate_synthetic(&spec, &relations)?;
    let corpus = synth.to_corpus();
    let model = ModelConfig {
        hidden_units: 64,
        embed_dim: 32,
        attention: AttentionKind::General,
        dropout_rate: 0.0,
        ..ModelConfig::default()
    };
    let data = Dataset::from_corpus(&corpus, &relations, model.max_encoder_len);
    let cfg = TrainConfig {
        max_epochs: 60,
        patience: 60,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let ckpt = train(&data, &model, &cfg, &relations)?.checkpoint;

    let cfg = AlignConfig {
        mass_threshold: Some(0.8),
    };
    for video in synth.videos.iter().rev().take(3) {
        let frames = video.features.to_f64_rows(model.max_encoder_len);
        println!(
            "{}  planted segments {:?}",
            video.record.video_id, video.segments
        );
        match align_frames(&ckpt.params, &ckpt.vocab, &frames, &relations, &cfg) {
            Ok(a) => {
                println!("  {}", render_discourse(&a.tree, &a.scenes));
                for s in &a.scenes.scenes {
                    println!(
                        "  edu {} -> frame {} ({:.2}), frames {:?}",
                        s.edu_index, s.frame_index, s.confidence, s.frames
                    );
                }
            }
            Err(e) => println!("  {e}"),
        }
    }
    Ok(())
}
