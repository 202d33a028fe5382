//! Generates a planted-code corpus, writes it to disk, loads it back and
//! checks it with the nearest-code decoder.
//!
//! cargo run --example synthetic_corpus -- [sigma]

use vdp::corpus::{generate_synthetic, load_corpus, NearestCodeDecoder, Split, SynthSpec};
use vdp::metrics::{relations_edges_accuracy, ScoredPair};
use vdp::rst::{linearize, RelationVocab};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sigma: f64 = std::env::args().nth(1).map_or(Ok(0.5), |s| s.parse())?;
    let relations = RelationVocab::default();
    let spec = SynthSpec {
        noise_sigma: sigma,
        ..SynthSpec::default()
    };
    let synth = generate_synthetic(&spec, &relations)?;

    let first = &synth.videos[0];
    println!("{}: {} frames", first.record.video_id, first.features.len());
    println!("  {}", first.record.gold_structure);
    println!("  segments {:?}", first.segments);

    let dir = tempfile::tempdir()?;
    let manifest = synth.write(dir.path())?;
    let corpus = load_corpus(&manifest, &relations)?;
    for split in [Split::Train, Split::Val, Split::Test] {
        println!("{split:?}: {}", corpus.split(split).len());
    }
    assert!(corpus.is_clean());

    let oracle = NearestCodeDecoder::new(&spec);
    let pairs: Vec<ScoredPair> = corpus
        .examples()
        .map(|e| {
            let pred = oracle
                .decode(&e.features)
                .map(|t| linearize(&t))
                .unwrap_or_default();
            ScoredPair::new(e.gold.clone(), pred, &relations)
        })
        .collect();
    println!(
        "oracle relations+edges at sigma {sigma}: {:.3}",
        relations_edges_accuracy(&pairs)?
    );
    Ok(())
}
