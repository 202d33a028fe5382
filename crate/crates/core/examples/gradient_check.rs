//! Compares backpropagated gradients with central differences for every
//! encoder, attention and depth variant of a tiny model.
//!
//! cargo run --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vdp::model::{gradient_check, random_frames, AttentionKind, ModelConfig, ModelParams, RnnType};
use vdp::vocab::{BOS_ID, EOS_ID};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for rnn_type in [RnnType::Lstm, RnnType::Gru] {
        for attention in AttentionKind::ALL {
            for encoder_layers in [1, 2] {
                let cfg = ModelConfig {
                    rnn_type,
                    hidden_units: 8,
                    encoder_layers,
                    attention,
                    embed_dim: 6,
                    feature_dim: 5,
                    vocab_size: 12,
                    dropout_rate: 0.0,
                    ..ModelConfig::default()
                };
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let params = ModelParams::init(&cfg, &mut rng)?;
                let frames = random_frames(5, 5, &mut rng);
                let mut ids = vec![BOS_ID];
                ids.extend((0..5).map(|_| rng.random_range(4..12)));
                ids.push(EOS_ID);
                let report = gradient_check(&params, &frames, &ids, 1e-4)?;
                let (name, worst) = report.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
                println!(
                    "{:4} {:8} layers {encoder_layers}: worst {worst:.1e} ({name})",
                    rnn_type.to_string(),
                    attention.to_string()
                );
            }
        }
    }
    Ok(())
}
