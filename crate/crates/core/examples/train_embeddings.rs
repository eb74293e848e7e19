//! Trains skip-gram embeddings on walks over two loosely bridged cliques and
//! compares similarities within and across them.

use gelo::embedding::{cosm, train, EmbeddingConfig};
use gelo::graph::{WeightedGraph, DEFAULT_WALKS_PER_NODE, DEFAULT_WALK_LENGTH};
use gelo::PlayerId;

fn main() -> gelo::Result<()> {
    let ids: Vec<PlayerId> = (0..20)
        .map(|i| PlayerId::new(format!("n{i:02}")))
        .collect::<gelo::Result<_>>()?;
    let mut edges = Vec::new();
    for c in [0, 10] {
        for i in c..c + 10 {
            for j in i + 1..c + 10 {
                edges.push((ids[i].clone(), ids[j].clone(), 1.0));
            }
        }
    }
    edges.push((ids[9].clone(), ids[10].clone(), 0.01));
    let graph = WeightedGraph::from_weighted_edges(ids.clone(), edges)?;

    let corpus = graph.generate_walks(DEFAULT_WALKS_PER_NODE, DEFAULT_WALK_LENGTH, 1)?;
    let cfg = EmbeddingConfig {
        dim: 32,
        ..Default::default()
    };
    let emb = train::<f32>(&corpus, &cfg)?;

    let (mut intra, mut inter) = (Vec::new(), Vec::new());
    for i in 0..20 {
        for j in i + 1..20 {
            let s = cosm(emb.row(&ids[i]).unwrap(), emb.row(&ids[j]).unwrap())?;
            if (i < 10) == (j < 10) {
                intra.push(s)
            } else {
                inter.push(s)
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("mean cosm within cliques: {:.3}", mean(&intra));
    println!("mean cosm across cliques: {:.3}", mean(&inter));

    let mut head = Vec::new();
    emb.write_word2vec(&mut head)?;
    let text = String::from_utf8_lossy(&head);
    for line in text.lines().take(3) {
        println!("{}...", &line[..line.len().min(72)]);
    }
    Ok(())
}
