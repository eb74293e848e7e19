//! Splits a match history into 13 time units and sliding evaluation windows.

use gelo::matches::{new_players, split_windows, time_units};
use gelo::synthetic::{generate_synthetic, SyntheticSpec};

fn main() -> gelo::Result<()> {
    let spec = SyntheticSpec {
        match_count: 2600,
        ..Default::default()
    };
    let ds = generate_synthetic(&spec)?.dataset;

    let units = time_units(&ds, 13)?;
    let sizes: Vec<usize> = units.iter().map(|u| u.len()).collect();
    println!("matches per unit: {sizes:?}");

    for w in split_windows(&ds, 13, 4)? {
        println!(
            "window {:2}: train {:4} matches / {:3} players, test {:4} matches, {:3} new players",
            w.window_index,
            w.train.len(),
            w.train.players().len(),
            w.test.len(),
            new_players(&w).len()
        );
    }
    Ok(())
}
