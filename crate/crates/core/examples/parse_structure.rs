//! Builds a discourse tree, linearizes it, parses it back and shows what
//! the parser rejects.
//!
//! cargo run --example parse_structure

use vdp::rst::{
    edge_list, linearize, parse, relation_list, validate, Edu, Nuclearity, RelationVocab, RstTree,
    TokenSequence,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let relations = RelationVocab::default();
    let tree = RstTree::node(
        "Cause",
        Nuclearity::Right,
        RstTree::leaf(Edu::from_text(0, "Person spills coffee on shirt.")?),
        RstTree::node(
            "Elaboration",
            Nuclearity::Left,
            RstTree::leaf(Edu::from_text(
                1,
                "Person goes to bathroom and cleans stains.",
            )?),
            RstTree::leaf(Edu::from_text(2, "Person dries shirt with handkerchief.")?),
        ),
    );
    assert!(validate(&tree, &relations).is_empty());

    let tokens = linearize(&tree);
    println!("{tokens}");
    let back = parse(&tokens, &relations)?;
    assert_eq!(back, tree);

    let labels: Vec<String> = relation_list(&back).iter().map(|r| r.to_string()).collect();
    println!("relations {labels:?}");
    println!("edges     {:?}", edge_list(&back));

    for bad in [
        "( REL:Cause NUC:LEFT <edu> a </edu>",
        "( REL:Cause NUC:LEFT <edu> a </edu> )",
        "( REL:Gossip NUC:LEFT <edu> a </edu> <edu> b </edu> )",
        "<edu> </edu>",
    ] {
        let err = parse(&TokenSequence::from_line(bad), &relations).unwrap_err();
        println!("{bad:58} -> {:?} at token {}", err.kind, err.position);
    }
    Ok(())
}
