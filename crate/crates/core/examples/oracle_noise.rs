//! Accuracy of the brute-force nearest-code decoder as noise grows.
//!
//! cargo run --example oracle_noise

use vdp::corpus::{generate_synthetic, NearestCodeDecoder, SynthSpec};
use vdp::metrics::{relations_edges_accuracy, ScoredPair};
use vdp::rst::{linearize, RelationVocab, TokenSequence};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let relations = RelationVocab::default();
    println!("sigma\trelations+edges");
    for sigma in [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0] {
        let spec = SynthSpec {
            n_videos: 300,
            noise_sigma: sigma,
            ..SynthSpec::default()
        };
        let corpus = generate_synthetic(&spec, &relations)?;
        let oracle = NearestCodeDecoder::new(&spec);
        let pairs: Vec<ScoredPair> = corpus
            .videos
            .iter()
            .map(|v| {
                let pred = oracle
                    .decode(&v.features)
                    .map_or_else(|| TokenSequence::new(vec![]), |t| linearize(&t));
                ScoredPair::new(v.tree.clone(), pred, &relations)
            })
            .collect();
        println!("{sigma}\t{:.3}", relations_edges_accuracy(&pairs)?);
    }
    Ok(())
}
