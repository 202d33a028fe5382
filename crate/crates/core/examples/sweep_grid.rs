//! Runs a small custom configuration grid and prints the results table.
//!
//! cargo run --example sweep_grid

use vdp::corpus::{generate_synthetic, SynthSpec};
use vdp::model::ModelConfig;
use vdp::rst::RelationVocab;
use vdp::trainer::{sweep, sweep_table, Dataset, SweepGrid, TrainConfig};

const GRID: &str = r#"
[[rows]]
rnn_type = "LSTM"
hidden_units = 32
encoder_layers = 1

[[rows]]
rnn_type = "GRU"
hidden_units = 32
encoder_layers = 1

[[rows]]
rnn_type = "LSTM"
hidden_units = 32
encoder_layers = 1
attention = "dot"
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let relations = RelationVocab::default();
    let spec = SynthSpec {
        n_videos: 280,
        train: 200,
        val: 40,
        ..SynthSpec::default()
    };
    let corpus = generate_synthetic(&spec, &relations)?.to_corpus();
    let base = ModelConfig {
        embed_dim: 16,
        dropout_rate: 0.0,
        ..ModelConfig::default()
    };
    let data = Dataset::from_corpus(&corpus, &relations, base.max_encoder_len);
    let cfg = TrainConfig {
        max_epochs: 40,
        patience: 40,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };

    let grid = SweepGrid::from_toml(GRID)?;
    let results = sweep(&grid, &data, &base, &cfg, &relations, &mut |i, r| {
        eprintln!(
            "row {i} ({} {}) done: {}",
            r.row.rnn_type,
            r.row.attention,
            if r.report.is_ok() { "ok" } else { "failed" }
        );
    });
    print!("{}", sweep_table(&grid, &results).to_pretty());
    Ok(())
}
