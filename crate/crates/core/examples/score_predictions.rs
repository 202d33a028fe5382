//! Scores a handful of predictions, including one that does not parse, and
//! prints them as a results table.
//!
//! cargo run --example score_predictions

use vdp::metrics::{build_report, score_all, ReportTable, ScoredPair};
use vdp::model::ModelConfig;
use vdp::rst::{parse, RelationVocab, TokenSequence};

const GOLD: [&str; 3] = [
    "( REL:Cause NUC:RIGHT <edu> a man enters </edu> ( REL:Elaboration NUC:LEFT <edu> the dog barks </edu> <edu> a woman cooks </edu> ) )",
    "( REL:Contrast NUC:LEFT <edu> the child laughs </edu> <edu> a man enters </edu> )",
    "( REL:Elaboration NUC:LEFT <edu> a woman cooks </edu> <edu> the dog barks </edu> )",
];

const PREDICTED: [&str; 3] = [
    // right structure, different words
    "( REL:Cause NUC:RIGHT <edu> a man enters </edu> ( REL:Elaboration NUC:LEFT <edu> the dog barks </edu> <edu> a man cooks </edu> ) )",
    // wrong nuclearity
    "( REL:Contrast NUC:RIGHT <edu> the child laughs </edu> <edu> a man enters </edu> )",
    // truncated
    "( REL:Elaboration NUC:LEFT <edu> a woman cooks </edu>",
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let relations = RelationVocab::default();
    let pairs: Vec<ScoredPair> = GOLD
        .iter()
        .zip(PREDICTED)
        .map(|(g, p)| {
            let gold = parse(&TokenSequence::from_line(g), &relations).expect("gold parses");
            ScoredPair::new(gold, TokenSequence::from_line(p), &relations)
        })
        .collect();

    let scores = score_all(&pairs)?;
    println!("{scores:#?}\n");
    let report = build_report(&ModelConfig::default(), &pairs)?;
    print!("{}", ReportTable::new(vec![report]).to_pretty());
    Ok(())
}
