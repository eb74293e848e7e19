//! Replays a small match file with Elo and prints the leaderboard.

use gelo::elo::{expected_win_rate, replay, write_ratings, KFactor, DEFAULT_RATING};
use gelo::matches::parse_matches;

const MATCHES: &str = "\
timestamp,side_a,side_b,winner
1,alice,bob,A
2,bob,carol,A
3,alice,carol,B
4,alice;bob,carol;dave,A
5,dave,dave,A
6,erin,alice,B
";

fn main() -> gelo::Result<()> {
    let parsed = parse_matches(MATCHES.as_bytes())?;
    println!(
        "{} matches, {} players, {} skipped",
        parsed.dataset.len(),
        parsed.dataset.players().len(),
        parsed.skipped
    );
    for w in &parsed.warnings {
        println!("  {w}");
    }

    let table = replay(&parsed.dataset, KFactor::default(), DEFAULT_RATING);
    write_ratings(&table, std::io::stdout().lock())?;

    let board = table.leaderboard();
    let (first, last) = (board[0], board[board.len() - 1]);
    println!(
        "{} beats {} with probability {:.3}",
        first.0,
        last.0,
        expected_win_rate(first.1, last.1)?
    );
    Ok(())
}
