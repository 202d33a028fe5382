//! Trains an attention model on a planted-code corpus, saves the best
//! checkpoint, reloads it and decodes a test video.
//!
//! cargo run --example train_synthetic -- [sigma] [hidden] [attention] [epochs]

use std::time::Instant;

use vdp::corpus::{generate_synthetic, SynthSpec};
use vdp::metrics::score_all;
use vdp::model::{read_checkpoint, write_checkpoint, AttentionKind, ModelConfig};
use vdp::rst::RelationVocab;
use vdp::trainer::{predict, score_split, train_with, val_evaluator, Dataset, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let sigma: f64 = args.first().map_or(Ok(0.0), |s| s.parse())?;
    let hidden: usize = args.get(1).map_or(Ok(64), |s| s.parse())?;
    let attention: AttentionKind = args
        .get(2)
        .map_or(Ok(AttentionKind::General), |s| s.parse())?;
    let epochs: usize = args.get(3).map_or(Ok(60), |s| s.parse())?;

    let relations = RelationVocab::default();
    let spec = SynthSpec {
        n_videos: 280,
        train: 200,
        val: 40,
        noise_sigma: sigma,
        ..SynthSpec::default()
    };
    let corpus = generate_synthetic(&spec, &relations)?.to_corpus();

    let model = ModelConfig {
        hidden_units: hidden,
        embed_dim: 32,
        attention,
        dropout_rate: 0.0,
        ..ModelConfig::default()
    };
    let data = Dataset::from_corpus(&corpus, &relations, model.max_encoder_len);
    let cfg = TrainConfig {
        max_epochs: epochs,
        patience: epochs,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };

    let start = Instant::now();
    let outcome = train_with(
        &data,
        &model,
        &cfg,
        &mut val_evaluator(&data, &relations),
        &mut |e| {
            eprintln!(
                "epoch {:3}  loss {:.4}  val R+E {:.3}  bleu {:.1}  [{:.0}s]",
                e.epoch,
                e.train_loss,
                e.val_relations_edges,
                e.val_bleu4,
                start.elapsed().as_secs_f64()
            )
        },
    )?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.vdpm");
    write_checkpoint(&path, &outcome.checkpoint)?;
    let ckpt = read_checkpoint(&path)?;

    let test = score_all(&score_split(
        &ckpt.params,
        &ckpt.vocab,
        &data.test,
        &relations,
    )?)?;
    println!("best epoch {}: test {test:?}", outcome.best_epoch);
    let video = &data.test[0];
    println!("gold      {}", vdp::rst::linearize(&video.gold));
    println!(
        "predicted {}",
        predict(&ckpt.params, &ckpt.vocab, &video.frames)?.tokens
    );
    Ok(())
}
