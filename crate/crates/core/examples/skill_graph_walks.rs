//! Builds a skill gap graph from head-to-head records and samples walks.

use gelo::graph::SkillGapGraph;
use gelo::matches::{Dataset, MatchRecord};
use gelo::PlayerId;

fn main() -> gelo::Result<()> {
    let results = [
        // a and b trade wins: an even pairing
        ("a", "b"),
        ("b", "a"),
        ("a", "b"),
        ("b", "a"),
        // a always beats c: a lopsided pairing
        ("a", "c"),
        ("a", "c"),
        ("a", "c"),
        // d met b once
        ("d", "b"),
    ];
    let matches = results
        .iter()
        .enumerate()
        .map(|(t, (w, l))| MatchRecord::duel(t as u64, w, l))
        .collect::<gelo::Result<Vec<_>>>()?;
    let graph = SkillGapGraph::build(&Dataset::from_matches(matches));

    println!("a\tb\tmatches\toutcome_sum\tweight");
    graph.write_tsv(std::io::stdout().lock())?;

    let a = PlayerId::new("a")?;
    for (to, p) in graph.transition_distribution(&a)? {
        println!("P(a -> {to}) = {p:.4}");
    }

    let corpus = graph.generate_walks(2, 8, 42)?;
    println!("{} walks", corpus.len());
    corpus.write_text(std::io::stdout().lock())
}
