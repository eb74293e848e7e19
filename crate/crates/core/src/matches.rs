//! Match histories: player ids, dated match records, the text file format and
//! the sliding time-unit windows used for evaluation.
//!
//! The on-disk format is one match per line:
//!
//! ```text
//! timestamp,side_a,side_b,winner
//! 1,alice,bob,A
//! 2,carol;dave,erin;frank,B
//! ```
//!
//! Sides are `;`-joined player ids, the winner is `A` or `B`. A header line is
//! detected by a non-numeric first field. Draws (`D`) and rows that put the
//! same player on both sides are skipped and counted rather than rejected.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const FIELD_DELIMITER: char = ',';
pub const TEAM_DELIMITER: char = ';';

/// Opaque, case-sensitive player identifier.
///
/// Ids may not be empty and may not contain the field or team delimiters or
/// whitespace, since every export format is delimiter- or space-separated.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlayerId(String);

impl PlayerId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let bad = id.is_empty()
            || id
                .chars()
                .any(|c| c == FIELD_DELIMITER || c == TEAM_DELIMITER || c.is_whitespace());
        if bad {
            return Err(Error::InvalidPlayerId(id));
        }
        Ok(PlayerId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for PlayerId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlayerId::new(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Winner {
    SideA,
    SideB,
}

/// One dated match between two disjoint, non-empty sides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchRecord {
    timestamp: u64,
    side_a: Vec<PlayerId>,
    side_b: Vec<PlayerId>,
    winner: Winner,
}

impl MatchRecord {
    pub fn new(timestamp: u64, side_a: Vec<PlayerId>, side_b: Vec<PlayerId>, winner: Winner) -> Result<Self> {
        if side_a.is_empty() || side_b.is_empty() {
            return Err(Error::InvalidMatch("empty side".into()));
        }
        for side in [&side_a, &side_b] {
            let unique: BTreeSet<_> = side.iter().collect();
            if unique.len() != side.len() {
                return Err(Error::InvalidMatch("duplicate player within a side".into()));
            }
        }
        if let Some(p) = side_a.iter().find(|p| side_b.contains(p)) {
            return Err(Error::InvalidMatch(format!("player {p} on both sides")));
        }
        Ok(MatchRecord {
            timestamp,
            side_a,
            side_b,
            winner,
        })
    }

    /// Convenience constructor for a 1v1 match won by `winner`.
    pub fn duel(timestamp: u64, winner: &str, loser: &str) -> Result<Self> {
        MatchRecord::new(
            timestamp,
            vec![PlayerId::new(winner)?],
            vec![PlayerId::new(loser)?],
            Winner::SideA,
        )
    }

    pub fn timestamp(&self) -> u64 {
        self.timestamp
    }

    pub fn side_a(&self) -> &[PlayerId] {
        &self.side_a
    }

    pub fn side_b(&self) -> &[PlayerId] {
        &self.side_b
    }

    pub fn winner(&self) -> Winner {
        self.winner
    }

    pub fn winners(&self) -> &[PlayerId] {
        match self.winner {
            Winner::SideA => &self.side_a,
            Winner::SideB => &self.side_b,
        }
    }

    pub fn losers(&self) -> &[PlayerId] {
        match self.winner {
            Winner::SideA => &self.side_b,
            Winner::SideB => &self.side_a,
        }
    }

    pub fn participants(&self) -> impl Iterator<Item = &PlayerId> {
        self.side_a.iter().chain(self.side_b.iter())
    }
}

/// An immutable, timestamp-ordered match history.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    matches: Vec<MatchRecord>,
    players: BTreeSet<PlayerId>,
}

impl Dataset {
    /// Builds a dataset, stably sorting matches by timestamp.
    pub fn from_matches(mut matches: Vec<MatchRecord>) -> Self {
        matches.sort_by_key(|m| m.timestamp);
        let players = matches.iter().flat_map(|m| m.participants().cloned()).collect();
        Dataset { matches, players }
    }

    pub fn matches(&self) -> &[MatchRecord] {
        &self.matches
    }

    pub fn players(&self) -> &BTreeSet<PlayerId> {
        &self.players
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }
}

/// Result of reading a match file.
#[derive(Clone, Debug, Default)]
pub struct ParsedMatches {
    pub dataset: Dataset,
    /// Rows dropped because they describe a draw or violate the side invariants.
    pub skipped: usize,
    pub warnings: Vec<String>,
}

/// Reads a match file.
pub fn parse_matches<R: BufRead>(reader: R) -> Result<ParsedMatches> {
    let mut matches = Vec::new();
    let mut skipped = 0;
    let mut warnings = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(FIELD_DELIMITER).map(str::trim).collect();
        if idx == 0 && fields[0].parse::<u64>().is_err() {
            // header
            continue;
        }
        let err = |message: String| Error::Parse { line: lineno, message };
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        }
        let timestamp: u64 = fields[0]
            .parse()
            .map_err(|_| err(format!("invalid timestamp {:?}", fields[0])))?;
        let side_a = parse_side(fields[1]).map_err(|m| err(format!("side A: {m}")))?;
        let side_b = parse_side(fields[2]).map_err(|m| err(format!("side B: {m}")))?;
        let winner = match fields[3] {
            "A" | "a" => Winner::SideA,
            "B" | "b" => Winner::SideB,
            "D" | "d" => {
                skipped += 1;
                warnings.push(format!("line {lineno}: draw skipped"));
                continue;
            }
            other => return Err(err(format!("invalid winner {other:?}"))),
        };
        match MatchRecord::new(timestamp, side_a, side_b, winner) {
            Ok(m) => matches.push(m),
            Err(e) => {
                skipped += 1;
                warnings.push(format!("line {lineno}: {e}; skipped"));
            }
        }
    }

    Ok(ParsedMatches {
        dataset: Dataset::from_matches(matches),
        skipped,
        warnings,
    })
}

fn parse_side(field: &str) -> std::result::Result<Vec<PlayerId>, String> {
    if field.is_empty() {
        return Err("empty side".into());
    }
    field
        .split(TEAM_DELIMITER)
        .map(|p| PlayerId::new(p.trim()).map_err(|e| e.to_string()))
        .collect()
}

/// Writes a dataset in the match file format, with a header line.
pub fn write_matches<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    writeln!(out, "timestamp,side_a,side_b,winner")?;
    for m in ds.matches() {
        writeln!(
            out,
            "{},{},{},{}",
            m.timestamp,
            join_side(&m.side_a),
            join_side(&m.side_b),
            match m.winner {
                Winner::SideA => "A",
                Winner::SideB => "B",
            }
        )?;
    }
    Ok(())
}

fn join_side(side: &[PlayerId]) -> String {
    side.iter().map(PlayerId::as_str).collect::<Vec<_>>().join(";")
}

/// One evaluation window: rate on `train`, predict `test`.
#[derive(Clone, Debug)]
pub struct WindowSplit {
    /// 1-based window number.
    pub window_index: usize,
    pub train: Dataset,
    pub test: Dataset,
}

/// Partitions the inclusive timestamp range into `units` equal-width bins.
///
/// Every bin must be non-empty.
pub fn time_units(ds: &Dataset, units: usize) -> Result<Vec<Dataset>> {
    let split_err = |reason: String| Error::Split { units, reason };
    if units == 0 {
        return Err(split_err("unit count must be positive".into()));
    }
    let (first, last) = match (ds.matches.first(), ds.matches.last()) {
        (Some(f), Some(l)) => (f.timestamp, l.timestamp),
        _ => return Err(split_err("dataset is empty".into())),
    };
    let span = u128::from(last - first) + 1;
    let mut bins: Vec<Vec<MatchRecord>> = vec![Vec::new(); units];
    for m in &ds.matches {
        let offset = u128::from(m.timestamp - first);
        let unit = (offset * units as u128 / span) as usize;
        bins[unit].push(m.clone());
    }
    if let Some(empty) = bins.iter().position(Vec::is_empty) {
        return Err(split_err(format!(
            "time unit {} of the range {first}..={last} has no matches",
            empty + 1
        )));
    }
    Ok(bins.into_iter().map(Dataset::from_matches).collect())
}

/// Builds the sliding windows `[t_k .. t_{k+window_len-1}]`; the first half of
/// each window trains, the second half tests.
pub fn split_windows(ds: &Dataset, units: usize, window_len: usize) -> Result<Vec<WindowSplit>> {
    if window_len < 2 || window_len > units {
        return Err(Error::Split {
            units,
            reason: format!("window length {window_len} must be in 2..={units}"),
        });
    }
    let bins = time_units(ds, units)?;
    let train_len = window_len / 2;
    let concat =
        |parts: &[Dataset]| Dataset::from_matches(parts.iter().flat_map(|d| d.matches.iter().cloned()).collect());
    Ok((0..=units - window_len)
        .map(|start| WindowSplit {
            window_index: start + 1,
            train: concat(&bins[start..start + train_len]),
            test: concat(&bins[start + train_len..start + window_len]),
        })
        .collect())
}

/// Test-period players with no match in the training period.
pub fn new_players(w: &WindowSplit) -> BTreeSet<PlayerId> {
    w.test.players().difference(w.train.players()).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ParsedMatches> {
        parse_matches(text.as_bytes())
    }

    fn one_per_unit(n: u64) -> Dataset {
        Dataset::from_matches(
            (0..n)
                .map(|t| MatchRecord::duel(t, &format!("p{t}"), &format!("q{t}")).unwrap())
                .collect(),
        )
    }

    #[test]
    fn parses_duels_and_teams() {
        let parsed = parse("1,a,b,A\n2,c;d,e;f,B\n").unwrap();
        assert_eq!(parsed.dataset.len(), 2);
        assert_eq!(parsed.dataset.players().len(), 6);
        assert_eq!(parsed.skipped, 0);
        let m = &parsed.dataset.matches()[1];
        assert_eq!(m.winner(), Winner::SideB);
        assert_eq!(m.winners()[0].as_str(), "e");
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let parsed = parse("").unwrap();
        assert!(parsed.dataset.is_empty());
        assert!(parsed.dataset.players().is_empty());
    }

    #[test]
    fn self_play_and_draws_are_skipped() {
        let parsed = parse("1,a,a,A\n").unwrap();
        assert_eq!(parsed.skipped, 1);
        assert!(parsed.dataset.is_empty());

        let parsed = parse("1,a,b,D\n2,a,b,A\n").unwrap();
        assert_eq!(parsed.skipped, 1);
        assert_eq!(parsed.dataset.len(), 1);
    }

    #[test]
    fn header_and_crlf() {
        let parsed = parse("timestamp,side_a,side_b,winner\r\n5,x,y,B\r\n").unwrap();
        assert_eq!(parsed.dataset.len(), 1);
        assert_eq!(parsed.dataset.matches()[0].timestamp(), 5);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let err = parse("1,a,b,A\n2,a,b\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("1,a,,A\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = parse("1,a,b,A\n2,a,b,X\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn equal_timestamps_keep_file_order() {
        let parsed = parse("3,a,b,A\n1,c,d,A\n3,e,f,A\n1,g,h,A\n").unwrap();
        let order: Vec<_> = parsed
            .dataset
            .matches()
            .iter()
            .map(|m| m.side_a()[0].as_str().to_owned())
            .collect();
        assert_eq!(order, ["c", "g", "a", "e"]);
    }

    #[test]
    fn rejects_invalid_ids() {
        assert!(PlayerId::new("").is_err());
        assert!(PlayerId::new("a b").is_err());
        assert!(PlayerId::new("a;b").is_err());
        assert_ne!(PlayerId::new("A").unwrap(), PlayerId::new("a").unwrap());
    }

    #[test]
    fn thirteen_units_give_ten_windows() {
        let ds = one_per_unit(13);
        let windows = split_windows(&ds, 13, 4).unwrap();
        assert_eq!(windows.len(), 10);
        let stamps = |d: &Dataset| d.matches().iter().map(|m| m.timestamp()).collect::<Vec<_>>();
        assert_eq!(stamps(&windows[0].train), [0, 1]);
        assert_eq!(stamps(&windows[0].test), [2, 3]);
        assert_eq!(stamps(&windows[9].train), [9, 10]);
        assert_eq!(stamps(&windows[9].test), [11, 12]);
    }

    #[test]
    fn single_window_covers_everything() {
        let ds = one_per_unit(8);
        let windows = split_windows(&ds, 4, 4).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].train.len() + windows[0].test.len(), 8);
    }

    #[test]
    fn too_few_timestamps_is_an_error() {
        let ds = one_per_unit(5);
        let err = split_windows(&ds, 13, 4).unwrap_err();
        assert!(matches!(err, Error::Split { .. }));
        assert!(split_windows(&Dataset::default(), 13, 4).is_err());
    }

    #[test]
    fn new_players_is_set_difference() {
        let train = Dataset::from_matches(vec![MatchRecord::duel(0, "a", "b").unwrap()]);
        let test = Dataset::from_matches(vec![MatchRecord::duel(1, "a", "c").unwrap()]);
        let w = WindowSplit {
            window_index: 1,
            train: train.clone(),
            test,
        };
        let fresh: Vec<_> = new_players(&w).into_iter().map(|p| p.0).collect();
        assert_eq!(fresh, ["c"]);

        let w = WindowSplit {
            window_index: 1,
            train: train.clone(),
            test: train,
        };
        assert!(new_players(&w).is_empty());

        let w = WindowSplit {
            window_index: 1,
            train: Dataset::default(),
            test: Dataset::from_matches(vec![MatchRecord::duel(1, "x", "y").unwrap()]),
        };
        assert_eq!(new_players(&w).len(), 2);
    }
}
