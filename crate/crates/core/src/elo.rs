//! Classic Elo ratings for 1v1 and team-vs-team matches.
//!
//! A team is treated as a single opponent whose rating is the mean of its
//! members. Each player is then updated individually against the opposing
//! team's mean, with all expectations taken from pre-match ratings.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::matches::{Dataset, MatchRecord, PlayerId, Winner};

pub const DEFAULT_RATING: f64 = 1500.0;
pub const DEFAULT_K: f64 = 50.0;

/// Scale of rating updates (and of GElo bonus points).
///
/// Zero is accepted and freezes all ratings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KFactor(f64);

impl KFactor {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Config(format!("K-factor must be finite and >= 0, got {value}")));
        }
        Ok(KFactor(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for KFactor {
    fn default() -> Self {
        KFactor(DEFAULT_K)
    }
}

/// Expected score of a player rated `r_a` against one rated `r_b`.
pub fn expected_win_rate(r_a: f64, r_b: f64) -> Result<f64> {
    if !r_a.is_finite() || !r_b.is_finite() {
        return Err(Error::NonFinite("expected_win_rate"));
    }
    Ok(logistic(r_a - r_b))
}

#[inline]
pub(crate) fn logistic(diff: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf(-diff / 400.0))
}

/// Player ratings, with a default score for players not yet seen.
#[derive(Clone, Debug, PartialEq)]
pub struct RatingTable {
    ratings: BTreeMap<PlayerId, f64>,
    default_score: f64,
}

impl Default for RatingTable {
    fn default() -> Self {
        RatingTable::new(DEFAULT_RATING)
    }
}

impl RatingTable {
    pub fn new(default_score: f64) -> Self {
        RatingTable {
            ratings: BTreeMap::new(),
            default_score,
        }
    }

    pub fn default_score(&self) -> f64 {
        self.default_score
    }

    pub fn set_default_score(&mut self, score: f64) {
        self.default_score = score;
    }

    /// Rating of `id`, or the default if the player is unknown.
    pub fn get(&self, id: &PlayerId) -> f64 {
        self.ratings.get(id).copied().unwrap_or(self.default_score)
    }

    /// Rating of `id`, registering the player at the default score if unseen.
    pub fn lookup(&mut self, id: &PlayerId) -> f64 {
        *self.ratings.entry(id.clone()).or_insert(self.default_score)
    }

    pub fn contains(&self, id: &PlayerId) -> bool {
        self.ratings.contains_key(id)
    }

    pub fn set(&mut self, id: PlayerId, score: f64) -> Result<()> {
        if !score.is_finite() {
            return Err(Error::NonFinite("rating"));
        }
        self.ratings.insert(id, score);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    /// Players in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&PlayerId, f64)> {
        self.ratings.iter().map(|(p, r)| (p, *r))
    }

    /// Mean rating of registered players, `None` when empty.
    pub fn mean(&self) -> Option<f64> {
        if self.ratings.is_empty() {
            return None;
        }
        Some(self.ratings.values().sum::<f64>() / self.ratings.len() as f64)
    }

    /// Players sorted by descending score, ties by id.
    pub fn leaderboard(&self) -> Vec<(&PlayerId, f64)> {
        let mut rows: Vec<_> = self.iter().collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        rows
    }

    /// Mean rating of a side, registering unseen members.
    pub fn side_average(&mut self, side: &[PlayerId]) -> f64 {
        side.iter().map(|p| self.lookup(p)).sum::<f64>() / side.len() as f64
    }

    /// Mean rating of a side without registering anyone.
    pub fn peek_side_average(&self, side: &[PlayerId]) -> f64 {
        side.iter().map(|p| self.get(p)).sum::<f64>() / side.len() as f64
    }
}

/// Applies one match. Every player is updated against the opposing side's
/// pre-match mean rating.
pub fn update_match(table: &mut RatingTable, m: &MatchRecord, k: KFactor) {
    let avg_a = table.side_average(m.side_a());
    let avg_b = table.side_average(m.side_b());
    let winners_are_a = m.winner() == Winner::SideA;

    let mut deltas = Vec::with_capacity(m.side_a().len() + m.side_b().len());
    for (side, opp_avg, won) in [(m.side_a(), avg_b, winners_are_a), (m.side_b(), avg_a, !winners_are_a)] {
        let actual = if won { 1.0 } else { 0.0 };
        for p in side {
            let r = table.get(p);
            deltas.push((p, r + k.value() * (actual - logistic(r - opp_avg))));
        }
    }
    for (p, r) in deltas {
        table.ratings.insert(p.clone(), r);
    }
}

/// Folds [`update_match`] over the dataset in order.
pub fn replay(ds: &Dataset, k: KFactor, default_score: f64) -> RatingTable {
    let mut table = RatingTable::new(default_score);
    replay_into(&mut table, ds, k);
    table
}

pub fn replay_into(table: &mut RatingTable, ds: &Dataset, k: KFactor) {
    for m in ds.matches() {
        update_match(table, m, k);
    }
}

/// Writes `player_id<TAB>score` lines, best first, 4 decimals.
pub fn write_ratings<W: Write>(table: &RatingTable, mut out: W) -> Result<()> {
    for (p, r) in table.leaderboard() {
        writeln!(out, "{p}\t{r:.4}")?;
    }
    Ok(())
}
