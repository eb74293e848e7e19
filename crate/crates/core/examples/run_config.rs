//! Parses a run configuration and drives the `rate` and `gelo` commands
//! into a temporary directory.

use gelo::cli::{cmd_gelo, cmd_rate, RunConfig};
use gelo::matches::write_matches;
use gelo::synthetic::{generate_synthetic, SyntheticSpec};

const CONFIG: &str = "
# small and quick
dim = 16
epochs = 2
walks_per_node = 4
walk_length = 20
seed = 5
";

fn main() -> gelo::Result<()> {
    let cfg = RunConfig::parse(CONFIG)?;
    cfg.validate()?;
    println!("{cfg:?}");

    let dir = std::env::temp_dir().join(format!("gelo-run-config-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let matches = dir.join("matches.csv");
    let spec = SyntheticSpec {
        player_count: 50,
        match_count: 400,
        ..Default::default()
    };
    write_matches(&generate_synthetic(&spec)?.dataset, std::fs::File::create(&matches)?)?;

    let rate = cmd_rate(&matches, &cfg, &dir)?;
    let (gelo, run) = cmd_gelo(&matches, &cfg, &dir)?;
    for f in rate.files.iter().chain(&gelo.files) {
        println!("wrote {}", f.display());
    }
    println!(
        "{} players adjusted",
        run.report.entries.iter().filter(|e| e.bonus > 0.0).count()
    );
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
