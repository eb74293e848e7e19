//! Runs the full GElo training pipeline on synthetic data and shows who
//! received bonus points.

use gelo::embedding::EmbeddingConfig;
use gelo::pipeline::{run_gelo, GeloParams};
use gelo::synthetic::{generate_synthetic, SyntheticSpec};

fn main() -> gelo::Result<()> {
    let spec = SyntheticSpec {
        match_count: 3000,
        ..Default::default()
    };
    let data = generate_synthetic(&spec)?;
    let params = GeloParams {
        embedding: EmbeddingConfig {
            dim: 64,
            ..Default::default()
        },
        ..Default::default()
    };
    let run = run_gelo(&data.dataset, &params, 11)?;

    println!(
        "{} players, {} edges, {} walks, elbow at {} matches{}",
        run.graph.nodes().len(),
        run.graph.edge_count(),
        run.corpus.len(),
        run.elbow.threshold,
        if run.elbow.fallback { " (fallback)" } else { "" }
    );
    if let Some(active) = &run.active {
        println!(
            "{} active, top {}, bottom {}",
            active.members.len(),
            active.top,
            active.btm
        );
    }
    println!("re-centering shift {:.4}", run.report.recenter_shift);

    let mut entries = run.report.entries.clone();
    entries.sort_by(|a, b| b.post_score.total_cmp(&a.post_score));
    println!("player\tpre\tsim_top\tbonus\tpost\tlatent");
    for e in entries.iter().take(10) {
        println!(
            "{}\t{:.1}\t{}\t{:.1}\t{:.1}\t{:.1}",
            e.player,
            e.pre_score,
            e.sim_top.map_or("-".into(), |s| format!("{s:.3}")),
            e.bonus,
            e.post_score,
            data.skills[&e.player]
        );
    }
    Ok(())
}
