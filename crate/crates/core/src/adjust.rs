//! Post-adjustment of Elo ratings using embedding similarity.
//!
//! Players whose match count reaches the elbow of the activity histogram are
//! active. Among them the highest and lowest rated act as benchmarks, and
//! every active player gains `k * sim_top(i)` where
//!
//! ```text
//! sim_top(i) = ((cosm(i, top) + 1 - cosm(i, btm)) / 2) / cosm(btm, top)
//! ```
//!
//! Optionally all scores are then shifted so the population mean is unchanged.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::elo::{KFactor, RatingTable};
use crate::embedding::{cosm, EmbeddingMatrix, Real};
use crate::error::{Error, Result};
use crate::matches::{Dataset, PlayerId};

/// Matches played per player; each match counts once per participant.
pub fn match_counts(ds: &Dataset) -> BTreeMap<PlayerId, u64> {
    let mut counts = BTreeMap::new();
    for m in ds.matches() {
        for p in m.participants() {
            *counts.entry(p.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// Number of players who played exactly `i` matches, keyed by `i`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ActivityHistogram {
    counts: BTreeMap<u64, u64>,
}

impl ActivityHistogram {
    pub fn from_dataset(ds: &Dataset) -> Self {
        Self::from_match_counts(&match_counts(ds))
    }

    pub fn from_match_counts(per_player: &BTreeMap<PlayerId, u64>) -> Self {
        let mut counts = BTreeMap::new();
        for &c in per_player.values() {
            *counts.entry(c).or_insert(0) += 1;
        }
        ActivityHistogram { counts }
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (u64, u64)>) -> Self {
        ActivityHistogram {
            counts: counts.into_iter().filter(|&(_, n)| n > 0).collect(),
        }
    }

    /// Players with exactly `i` matches; zero for missing keys.
    pub fn get(&self, i: u64) -> u64 {
        self.counts.get(&i).copied().unwrap_or(0)
    }

    pub fn max_matches(&self) -> u64 {
        self.counts.keys().next_back().copied().unwrap_or(0)
    }

    pub fn total_players(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&i, &n)| (i, n))
    }

    /// Counts for `i = 1..=max`, with zeros filling gaps.
    pub fn densified(&self) -> Vec<u64> {
        (1..=self.max_matches()).map(|i| self.get(i)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Elbow {
    /// Minimum match count for a player to count as active.
    pub threshold: u64,
    /// Set when the histogram was too short and the threshold defaulted to 1.
    pub fallback: bool,
}

/// Match count maximizing `M(i+1) + M(i-1) - 2 M(i)` over interior points of
/// the densified histogram; ties go to the smaller count. Histograms with
/// fewer than three points fall back to a threshold of 1.
pub fn elbow_threshold(h: &ActivityHistogram) -> Elbow {
    let dense = h.densified();
    if dense.len() < 3 {
        return Elbow {
            threshold: 1,
            fallback: true,
        };
    }
    let mut best: Option<(i128, u64)> = None;
    for i in 1..dense.len() - 1 {
        let d2 = dense[i + 1] as i128 + dense[i - 1] as i128 - 2 * dense[i] as i128;
        if best.is_none_or(|(v, _)| d2 > v) {
            best = Some((d2, i as u64 + 1));
        }
    }
    Elbow {
        threshold: best.expect("interior point").1,
        fallback: false,
    }
}

/// Active players and the two rating benchmarks among them.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSet {
    pub threshold: u64,
    pub members: BTreeSet<PlayerId>,
    pub top: PlayerId,
    pub btm: PlayerId,
}

impl ActiveSet {
    /// Players with at least `threshold` matches. `None` when nobody qualifies.
    ///
    /// Members are ordered by rating (descending) then id; `top` is the first
    /// and `btm` the last, so they differ whenever there are two members.
    pub fn select(counts: &BTreeMap<PlayerId, u64>, table: &RatingTable, threshold: u64) -> Option<Self> {
        let members: BTreeSet<PlayerId> = counts
            .iter()
            .filter(|&(_, &c)| c >= threshold)
            .map(|(p, _)| p.clone())
            .collect();
        let mut ranked: Vec<(&PlayerId, f64)> = members.iter().map(|p| (p, table.get(p))).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let top = ranked.first()?.0.clone();
        let btm = ranked.last()?.0.clone();
        Some(ActiveSet {
            threshold,
            members,
            top,
            btm,
        })
    }
}

/// Normalized averaged similarity of `x_i` to the top benchmark.
pub fn sim_top<F: Real>(x_i: &[F], x_top: &[F], x_btm: &[F]) -> Result<f64> {
    sim_top_from_cosm(cosm(x_i, x_top)?, cosm(x_i, x_btm)?, cosm(x_btm, x_top)?)
}

/// [`sim_top`] given the three similarities directly.
pub fn sim_top_from_cosm(i_top: f64, i_btm: f64, btm_top: f64) -> Result<f64> {
    if btm_top == 0.0 {
        return Err(Error::OrthogonalBenchmarks);
    }
    Ok((i_top + (1.0 - i_btm)) / 2.0 / btm_top)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdjustmentEntry {
    pub player: PlayerId,
    pub pre_score: f64,
    /// `None` for inactive players.
    pub sim_top: Option<f64>,
    pub bonus: f64,
    pub post_score: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdjustmentReport {
    /// One entry per rated player, in id order.
    pub entries: Vec<AdjustmentEntry>,
    pub recenter_shift: f64,
}

impl AdjustmentReport {
    /// Writes `player_id<TAB>pre<TAB>sim_top<TAB>bonus<TAB>post`, best first.
    /// Inactive players show `-` for sim_top.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut rows: Vec<&AdjustmentEntry> = self.entries.iter().collect();
        rows.sort_by(|a, b| {
            b.post_score
                .total_cmp(&a.post_score)
                .then_with(|| a.player.cmp(&b.player))
        });
        for e in rows {
            let sim = e.sim_top.map_or_else(|| "-".to_owned(), |s| format!("{s:.4}"));
            writeln!(
                out,
                "{}\t{:.4}\t{}\t{:.4}\t{:.4}",
                e.player, e.pre_score, sim, e.bonus, e.post_score
            )?;
        }
        Ok(())
    }
}

/// Grants every active member `k * sim_top` bonus points, then optionally
/// shifts everyone so the mean rating is unchanged.
pub fn apply_adjustment<F: Real>(
    table: &RatingTable,
    emb: &EmbeddingMatrix<F>,
    active: &ActiveSet,
    k: KFactor,
    recenter: bool,
) -> Result<(RatingTable, AdjustmentReport)> {
    let row = |p: &PlayerId| emb.row(p).ok_or_else(|| Error::MissingEmbedding(p.clone()));
    let (x_top, x_btm) = (row(&active.top)?, row(&active.btm)?);

    let mut sims = BTreeMap::new();
    for p in &active.members {
        sims.insert(p, sim_top(row(p)?, x_top, x_btm)?);
    }

    let mut entries: Vec<AdjustmentEntry> = table
        .iter()
        .map(|(p, pre)| {
            let sim = sims.get(p).copied();
            let bonus = sim.map_or(0.0, |s| k.value() * s);
            AdjustmentEntry {
                player: p.clone(),
                pre_score: pre,
                sim_top: sim,
                bonus,
                post_score: pre + bonus,
            }
        })
        .collect();
    for p in sims.keys() {
        if !table.contains(p) {
            return Err(Error::UnknownPlayer((*p).clone()));
        }
    }

    let shift = if recenter && !entries.is_empty() {
        entries.iter().map(|e| e.bonus).sum::<f64>() / entries.len() as f64
    } else {
        0.0
    };
    let mut adjusted = RatingTable::new(table.default_score());
    for e in &mut entries {
        e.post_score -= shift;
        adjusted.set(e.player.clone(), e.post_score)?;
    }
    Ok((
        adjusted,
        AdjustmentReport {
            entries,
            recenter_shift: shift,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matches::MatchRecord;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pid(s: &str) -> PlayerId {
        PlayerId::new(s).unwrap()
    }

    #[test]
    fn histogram_examples() {
        let mut matches = Vec::new();
        for t in 0..5 {
            matches.push(MatchRecord::duel(t, "a", "b").unwrap());
        }
        let counts = BTreeMap::from([(pid("a"), 5), (pid("b"), 5), (pid("c"), 2)]);
        let h = ActivityHistogram::from_match_counts(&counts);
        assert_eq!(h.iter().collect::<Vec<_>>(), [(2, 1), (5, 2)]);
        assert_eq!(h.get(3), 0);
        assert_eq!(h.total_players(), 3);

        assert_eq!(
            ActivityHistogram::from_dataset(&Dataset::default()),
            ActivityHistogram::default()
        );

        let ds = Dataset::from_matches(vec![MatchRecord::new(
            0,
            vec![pid("a"), pid("b")],
            vec![pid("c"), pid("d")],
            crate::matches::Winner::SideA,
        )
        .unwrap()]);
        let h = ActivityHistogram::from_dataset(&ds);
        assert_eq!(h.iter().collect::<Vec<_>>(), [(1, 4)]);
    }

    #[test]
    fn elbow_examples() {
        let h = ActivityHistogram::from_counts([(1, 100), (2, 40), (3, 10), (4, 8), (5, 7)]);
        assert_eq!(
            elbow_threshold(&h),
            Elbow {
                threshold: 2,
                fallback: false
            }
        );

        let h = ActivityHistogram::from_counts([(1, 30), (2, 20), (3, 10)]);
        assert_eq!(elbow_threshold(&h).threshold, 2);

        let h = ActivityHistogram::from_counts([(1, 64), (2, 32), (3, 16), (4, 8), (5, 4)]);
        assert_eq!(elbow_threshold(&h).threshold, 2);

        let h = ActivityHistogram::from_counts([(1, 5), (2, 3)]);
        assert_eq!(
            elbow_threshold(&h),
            Elbow {
                threshold: 1,
                fallback: true
            }
        );
        assert!(elbow_threshold(&ActivityHistogram::default()).fallback);
    }

    #[test]
    fn elbow_densifies_gaps() {
        // M = [10, 0, 0, 4]: d2(2) = 10, d2(3) = 4
        let h = ActivityHistogram::from_counts([(1, 10), (4, 4)]);
        assert_eq!(elbow_threshold(&h).threshold, 2);
    }

    #[test]
    fn sim_top_examples() {
        let top = [1.0, 0.0];
        let btm = [0.5, 0.75f64.sqrt()];
        assert_abs_diff_eq!(cosm(&btm, &top).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(sim_top(&btm, &top, &btm).unwrap(), 0.5);
        assert_abs_diff_eq!(sim_top(&top, &top, &btm).unwrap(), 1.5, epsilon = 1e-12);

        let orth = [0.0, 1.0];
        assert!(matches!(sim_top(&top, &top, &orth), Err(Error::OrthogonalBenchmarks)));
    }

    #[test]
    fn sim_top_arithmetic() {
        // cosm(i,top)=0.6, cosm(i,btm)=0.9, cosm(btm,top)=0.8 in 3-d
        let top = [1.0, 0.0, 0.0];
        let btm = [0.8, 0.6, 0.0];
        let a = 0.6f64;
        let b = (0.9 - 0.8 * a) / 0.6;
        let c = (1.0 - a * a - b * b).sqrt();
        let x = [a, b, c];
        assert_abs_diff_eq!(
            sim_top(&x, &top, &btm).unwrap(),
            (0.6 + 0.1) / 2.0 / 0.8,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(sim_top_from_cosm(0.9, 0.3, 0.8).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sim_top_from_cosm(1.0, 0.5, 0.5).unwrap(), 1.5, epsilon = 1e-15);
    }

    fn fixture() -> (RatingTable, EmbeddingMatrix<f64>, BTreeMap<PlayerId, u64>) {
        let mut table = RatingTable::default();
        for (p, r) in [("a", 1600.0), ("b", 1500.0), ("c", 1400.0), ("d", 1550.0)] {
            table.set(pid(p), r).unwrap();
        }
        let emb = EmbeddingMatrix::from_rows(vec![
            (pid("a"), vec![1.0, 0.1]),
            (pid("b"), vec![0.7, 0.6]),
            (pid("c"), vec![0.3, 1.0]),
            (pid("d"), vec![0.2, 0.9]),
        ])
        .unwrap();
        let counts = BTreeMap::from([(pid("a"), 9), (pid("b"), 7), (pid("c"), 8), (pid("d"), 1)]);
        (table, emb, counts)
    }

    #[test]
    fn adjustment_rewards_active_players() {
        let (table, emb, counts) = fixture();
        let active = ActiveSet::select(&counts, &table, 2).unwrap();
        assert_eq!(active.top, pid("a"));
        assert_eq!(active.btm, pid("c"));
        assert!(!active.members.contains(&pid("d")));

        let (adjusted, report) = apply_adjustment(&table, &emb, &active, KFactor::default(), false).unwrap();
        assert_eq!(report.recenter_shift, 0.0);
        assert_eq!(adjusted.get(&pid("d")), 1550.0);
        let c = report.entries.iter().find(|e| e.player == pid("c")).unwrap();
        assert_abs_diff_eq!(c.bonus, 25.0, epsilon = 1e-12);
        for e in &report.entries {
            assert_abs_diff_eq!(e.post_score, e.pre_score + e.bonus, epsilon = 1e-12);
        }
    }

    #[test]
    fn recentering_preserves_mean() {
        let (table, emb, counts) = fixture();
        let active = ActiveSet::select(&counts, &table, 2).unwrap();
        let (adjusted, report) = apply_adjustment(&table, &emb, &active, KFactor::default(), true).unwrap();
        assert_abs_diff_eq!(adjusted.mean().unwrap(), table.mean().unwrap(), epsilon = 1e-9);
        assert!(report.recenter_shift > 0.0);
    }

    #[test]
    fn two_player_recentering() {
        let mut table = RatingTable::default();
        table.set(pid("a"), 1500.0).unwrap();
        table.set(pid("b"), 1500.0).unwrap();
        let emb = EmbeddingMatrix::from_rows(vec![(pid("a"), vec![1.0f64, 0.0]), (pid("b"), vec![0.0, 1.0])]).unwrap();
        // a alone is active: top == btm, so sim_top = 0.5 and the bonus is k / 2
        let counts = BTreeMap::from([(pid("a"), 3), (pid("b"), 1)]);
        let active = ActiveSet::select(&counts, &table, 3).unwrap();
        let k = KFactor::new(100.0).unwrap();
        let (adjusted, report) = apply_adjustment(&table, &emb, &active, k, true).unwrap();
        assert_eq!(report.recenter_shift, 25.0);
        assert_eq!(adjusted.get(&pid("a")), 1525.0);
        assert_eq!(adjusted.get(&pid("b")), 1475.0);
    }

    #[test]
    fn missing_embedding_names_the_player() {
        let (table, _, counts) = fixture();
        let emb = EmbeddingMatrix::from_rows(vec![(pid("a"), vec![1.0f64, 0.0]), (pid("c"), vec![0.5, 0.5])]).unwrap();
        let active = ActiveSet::select(&counts, &table, 2).unwrap();
        let err = apply_adjustment(&table, &emb, &active, KFactor::default(), true).unwrap_err();
        assert!(matches!(err, Error::MissingEmbedding(p) if p == pid("b")));
    }

    #[test]
    fn no_active_players() {
        let (table, _, counts) = fixture();
        assert!(ActiveSet::select(&counts, &table, 100).is_none());
    }

    #[test]
    fn report_export() {
        let (table, emb, counts) = fixture();
        let active = ActiveSet::select(&counts, &table, 2).unwrap();
        let (_, report) = apply_adjustment(&table, &emb, &active, KFactor::default(), false).unwrap();
        let mut buf = Vec::new();
        report.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("a\t1600.0000\t"));
        assert!(lines
            .iter()
            .any(|l| l.starts_with("d\t1550.0000\t-\t0.0000\t1550.0000")));
    }

    proptest! {
        #[test]
        fn elbow_matches_brute_force(counts in proptest::collection::btree_map(1u64..40, 0u64..500, 0..25)) {
            let h = ActivityHistogram::from_counts(counts.clone());
            let max = counts.iter().filter(|(_, &n)| n > 0).map(|(&i, _)| i).max().unwrap_or(0);
            let m = |i: u64| -> i128 { counts.get(&i).copied().unwrap_or(0) as i128 };
            let elbow = elbow_threshold(&h);
            if max < 3 {
                prop_assert!(elbow.fallback);
            } else {
                let brute = (2..max)
                    .map(|i| (m(i + 1) + m(i - 1) - 2 * m(i), i))
                    .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
                    .unwrap().1;
                prop_assert_eq!(elbow.threshold, brute);
            }
        }

        #[test]
        fn bonus_order_follows_sim_top(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut table = RatingTable::default();
            let mut rows = Vec::new();
            let mut counts = BTreeMap::new();
            for i in 0..12 {
                let p = pid(&format!("p{i}"));
                table.set(p.clone(), rng.gen_range(1200.0..1800.0)).unwrap();
                rows.push((p.clone(), (0..5).map(|_| rng.gen_range(0.1..1.0)).collect::<Vec<f64>>()));
                counts.insert(p, rng.gen_range(1..6u64));
            }
            let emb = EmbeddingMatrix::from_rows(rows).unwrap();
            let Some(active) = ActiveSet::select(&counts, &table, 3) else { return Ok(()); };
            let (adjusted, report) = apply_adjustment(&table, &emb, &active, KFactor::default(), true).unwrap();
            let members: Vec<_> = report.entries.iter().filter(|e| e.sim_top.is_some()).collect();
            for a in &members {
                for b in &members {
                    if a.sim_top > b.sim_top {
                        prop_assert!(a.bonus >= b.bonus);
                    }
                }
            }
            let btm = report.entries.iter().find(|e| e.player == active.btm).unwrap();
            if active.top != active.btm {
                prop_assert_eq!(btm.sim_top, Some(0.5));
            }
            // recentering is a uniform shift; inactive order is preserved
            let inactive: Vec<_> = report.entries.iter().filter(|e| e.sim_top.is_none()).collect();
            for a in &inactive {
                for b in &inactive {
                    prop_assert_eq!(a.pre_score < b.pre_score, a.post_score < b.post_score);
                }
            }
            prop_assert!((adjusted.mean().unwrap() - table.mean().unwrap()).abs() <= 1e-9);
        }
    }
}
