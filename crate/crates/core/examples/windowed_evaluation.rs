//! Elo versus GElo over 10 sliding windows, with the summary statistics.
//!
//! Matchups are skill based here, which gives the skill gap graph repeated
//! meetings to learn from. Embeddings are kept small so this finishes
//! quickly.

use gelo::eval::{evaluate, EvalParams};
use gelo::synthetic::{generate_synthetic, Matchmaking, SyntheticSpec};

fn main() -> gelo::Result<()> {
    let spec = SyntheticSpec {
        match_count: 5000,
        matchmaking: Matchmaking::Skill { scale: 100.0 },
        ..Default::default()
    };
    let ds = generate_synthetic(&spec)?.dataset;

    let mut params = EvalParams {
        seeds: 2,
        ..Default::default()
    };
    params.gelo.embedding.dim = 32;
    let report = evaluate(&ds, &params)?;

    report.write_tsv(std::io::stdout().lock())?;
    println!(
        "per-window rank variation: elo {:.2}, gelo {:.2}",
        report.elo.rank_variation.per_window_avg, report.gelo.rank_variation.per_window_avg
    );
    Ok(())
}
