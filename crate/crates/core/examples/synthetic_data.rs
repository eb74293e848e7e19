//! Generates a synthetic match history and checks that Elo recovers the
//! latent skill order of the regular players.

use gelo::elo::{replay, KFactor, DEFAULT_RATING};
use gelo::matches::write_matches;
use gelo::synthetic::{generate_synthetic, SyntheticSpec};

fn main() -> gelo::Result<()> {
    let spec = SyntheticSpec::default();
    let data = generate_synthetic(&spec)?;
    let mut csv = Vec::new();
    write_matches(&data.dataset, &mut csv)?;
    let csv = String::from_utf8(csv).expect("utf-8");
    println!(
        "{} matches, {} low-activity players",
        data.dataset.len(),
        data.low_activity.len()
    );
    for line in csv.lines().take(5) {
        println!("{line}");
    }

    let table = replay(&data.dataset, KFactor::default(), DEFAULT_RATING);
    let regular: Vec<_> = data.skills.keys().filter(|p| !data.low_activity.contains(p)).collect();
    let (mut agree, mut total) = (0, 0);
    for (i, a) in regular.iter().enumerate() {
        for b in &regular[i + 1..] {
            total += 1;
            if (data.skills[*a] > data.skills[*b]) == (table.get(a) > table.get(b)) {
                agree += 1;
            }
        }
    }
    println!("Elo orders {agree} of {total} regular pairs like the latent skills");
    Ok(())
}
