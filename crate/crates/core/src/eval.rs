//! Sliding-window evaluation of Elo against GElo.
//!
//! Each window trains on its first half and predicts the second half. Test
//! matches are scored with the higher-rated side as the predicted winner and,
//! in live mode, Elo keeps updating as the test period is replayed.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::elo::{update_match, KFactor, RatingTable};
use crate::error::{Error, Result};
use crate::graph::mix;
use crate::matches::{new_players, split_windows, Dataset, PlayerId, WindowSplit, Winner};
use crate::pipeline::{prepare, run_seeded, GeloParams};
use crate::stats::{mean, mean_confidence_interval, paired_t_test, PairedTest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum System {
    Elo,
    GElo,
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            System::Elo => "elo",
            System::GElo => "gelo",
        })
    }
}

/// Whether ratings keep moving while the test period is scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ScoringMode {
    #[default]
    Live,
    Frozen,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PredictionOutcome {
    pub total: usize,
    /// Wrong predictions; a tie between side ratings counts half.
    pub wrong: f64,
}

impl PredictionOutcome {
    pub fn error_rate(&self) -> f64 {
        self.wrong / self.total as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RankVariationStat {
    pub per_match_avg: f64,
    pub per_window_avg: f64,
}

/// 1 plus the number of players with a strictly higher score.
pub fn rank_of(table: &RatingTable, player: &PlayerId) -> Option<usize> {
    table.contains(player).then(|| {
        let s = table.get(player);
        1 + table.iter().filter(|&(_, v)| v > s).count()
    })
}

/// A rating table together with the players whose match produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct RatingSnapshot {
    pub table: RatingTable,
    pub participants: Vec<PlayerId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankVariationMode {
    PerMatch,
    PerWindow,
}

/// Mean absolute rank change.
///
/// `PerMatch` compares consecutive snapshots over the participants of the
/// later one. `PerWindow` compares the first and last snapshots over everyone
/// rated in both. Returns 0 when nobody qualifies.
pub fn rank_variation(history: &[RatingSnapshot], mode: RankVariationMode) -> Result<f64> {
    if history.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "rank variation needs at least 2 snapshots, got {}",
            history.len()
        )));
    }
    let mut total = 0usize;
    let mut count = 0usize;
    let mut add = |before: &RatingTable, after: &RatingTable, p: &PlayerId| {
        if let (Some(a), Some(b)) = (rank_of(before, p), rank_of(after, p)) {
            total += a.abs_diff(b);
            count += 1;
        }
    };
    match mode {
        RankVariationMode::PerMatch => {
            for pair in history.windows(2) {
                for p in &pair[1].participants {
                    add(&pair[0].table, &pair[1].table, p);
                }
            }
        }
        RankVariationMode::PerWindow => {
            let (first, last) = (&history[0].table, &history[history.len() - 1].table);
            for (p, _) in first.iter() {
                add(first, last, p);
            }
        }
    }
    Ok(if count == 0 { 0.0 } else { total as f64 / count as f64 })
}

/// Result of scoring one test period.
#[derive(Clone, Debug, PartialEq)]
pub struct TestRun {
    pub outcome: PredictionOutcome,
    pub rank_variation: RankVariationStat,
    pub final_table: RatingTable,
}

/// Scores `test` against `table`. Players missing from the table enter at
/// `new_player_score`.
pub fn score_test(
    table: &RatingTable,
    test: &Dataset,
    k: KFactor,
    mode: ScoringMode,
    new_player_score: f64,
) -> Result<TestRun> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let start = table.clone();
    let mut live = table.clone();
    live.set_default_score(new_player_score);
    let mut wrong = 0.0;
    let (mut rv_total, mut rv_count) = (0usize, 0usize);
    for m in test.matches() {
        for p in m.participants() {
            live.lookup(p);
        }
        let (a, b) = (live.peek_side_average(m.side_a()), live.peek_side_average(m.side_b()));
        let (w, l) = if m.winner() == Winner::SideA { (a, b) } else { (b, a) };
        if w < l {
            wrong += 1.0;
        } else if w == l {
            wrong += 0.5;
        }
        if mode == ScoringMode::Live {
            let before: Vec<usize> = m.participants().map(|p| rank_of(&live, p).unwrap_or(0)).collect();
            update_match(&mut live, m, k);
            for (p, r) in m.participants().zip(before) {
                rv_total += r.abs_diff(rank_of(&live, p).unwrap_or(0));
                rv_count += 1;
            }
        }
    }
    let per_window = rank_variation(
        &[
            RatingSnapshot {
                table: start,
                participants: Vec::new(),
            },
            RatingSnapshot {
                table: live.clone(),
                participants: Vec::new(),
            },
        ],
        RankVariationMode::PerWindow,
    )?;
    Ok(TestRun {
        outcome: PredictionOutcome {
            total: test.len(),
            wrong,
        },
        rank_variation: RankVariationStat {
            per_match_avg: if rv_count == 0 {
                0.0
            } else {
                rv_total as f64 / rv_count as f64
            },
            per_window_avg: per_window,
        },
        final_table: live,
    })
}

/// Live scoring with new players entering at the table mean.
pub fn prediction_error(table: &RatingTable, test: &Dataset, k: KFactor) -> Result<PredictionOutcome> {
    let entry = table.mean().unwrap_or(table.default_score());
    Ok(score_test(table, test, k, ScoringMode::Live, entry)?.outcome)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalParams {
    pub gelo: GeloParams,
    pub scoring: ScoringMode,
    pub units: usize,
    pub window_len: usize,
    /// GElo runs per window, each with its own walk and embedding seed.
    pub seeds: usize,
    pub seed: u64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            gelo: GeloParams::default(),
            scoring: ScoringMode::Live,
            units: 13,
            window_len: 4,
            seeds: 5,
            seed: 0,
        }
    }
}

impl EvalParams {
    pub fn run_seed(&self, i: usize) -> u64 {
        mix(self.seed, i as u64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowResult {
    pub outcome: PredictionOutcome,
    pub rank_variation: RankVariationStat,
    pub new_players: usize,
    pub active_players: usize,
}

impl WindowResult {
    pub fn error_rate(&self) -> f64 {
        self.outcome.error_rate()
    }
}

/// Trains one system on the window's first half and scores the second.
pub fn run_window(w: &WindowSplit, system: System, params: &EvalParams, seed: u64) -> Result<WindowResult> {
    let prep = prepare(&w.train, &params.gelo);
    let (table, active) = match system {
        System::Elo => (prep.elo.clone(), 0),
        System::GElo => {
            let run = run_seeded(&prep, &params.gelo, seed)?;
            let active = run.active.as_ref().map_or(0, |a| a.members.len());
            (run.adjusted, active)
        }
    };
    score_window(w, &table, params, active)
}

fn score_window(
    w: &WindowSplit,
    table: &RatingTable,
    params: &EvalParams,
    active_players: usize,
) -> Result<WindowResult> {
    let entry = table.mean().unwrap_or(params.gelo.default_score);
    let run = score_test(table, &w.test, params.gelo.k, params.scoring, entry)?;
    Ok(WindowResult {
        outcome: run.outcome,
        rank_variation: run.rank_variation,
        new_players: new_players(w).len(),
        active_players,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowReport {
    pub window_index: usize,
    pub elo: WindowResult,
    /// One entry per seed.
    pub gelo: Vec<WindowResult>,
}

impl WindowReport {
    pub fn gelo_error_rate(&self) -> f64 {
        mean(&self.gelo.iter().map(WindowResult::error_rate).collect::<Vec<_>>())
    }

    pub fn gelo_rank_variation(&self) -> RankVariationStat {
        let n = self.gelo.len() as f64;
        RankVariationStat {
            per_match_avg: self.gelo.iter().map(|r| r.rank_variation.per_match_avg).sum::<f64>() / n,
            per_window_avg: self.gelo.iter().map(|r| r.rank_variation.per_window_avg).sum::<f64>() / n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemSummary {
    pub mean_error: f64,
    /// 95% interval of the per-window error rates; `None` with one window.
    pub ci: Option<(f64, f64)>,
    pub rank_variation: RankVariationStat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub windows: Vec<WindowReport>,
    pub elo: SystemSummary,
    pub gelo: SystemSummary,
    /// Paired test on per-window errors, Elo minus GElo; `None` with one window.
    pub paired: Option<PairedTest>,
}

/// Runs every window for both systems. Windows and seeds run in parallel;
/// results are merged in window order.
pub fn evaluate(ds: &Dataset, params: &EvalParams) -> Result<EvalReport> {
    if params.seeds == 0 {
        return Err(Error::Config("at least one evaluation seed is required".into()));
    }
    params.gelo.embedding.validate()?;
    let windows = split_windows(ds, params.units, params.window_len)?;
    let prepared: Vec<_> = windows.par_iter().map(|w| prepare(&w.train, &params.gelo)).collect();

    let elo: Vec<WindowResult> = windows
        .par_iter()
        .zip(&prepared)
        .map(|(w, prep)| score_window(w, &prep.elo, params, 0))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..windows.len())
        .flat_map(|w| (0..params.seeds).map(move |s| (w, s)))
        .collect();
    let gelo: Vec<WindowResult> = jobs
        .par_iter()
        .map(|&(wi, si)| {
            let run = run_seeded(&prepared[wi], &params.gelo, params.run_seed(si))?;
            let active = run.active.as_ref().map_or(0, |a| a.members.len());
            score_window(&windows[wi], &run.adjusted, params, active)
        })
        .collect::<Result<_>>()?;

    let mut gelo = gelo.into_iter();
    let reports: Vec<WindowReport> = windows
        .iter()
        .zip(elo)
        .map(|(w, elo)| WindowReport {
            window_index: w.window_index,
            elo,
            gelo: gelo.by_ref().take(params.seeds).collect(),
        })
        .collect();
    summarize(reports)
}

fn summarize(windows: Vec<WindowReport>) -> Result<EvalReport> {
    let elo_err: Vec<f64> = windows.iter().map(|w| w.elo.error_rate()).collect();
    let gelo_err: Vec<f64> = windows.iter().map(WindowReport::gelo_error_rate).collect();
    let summary = |errors: &[f64], rvs: Vec<RankVariationStat>| -> Result<SystemSummary> {
        let n = rvs.len() as f64;
        Ok(SystemSummary {
            mean_error: mean(errors),
            ci: if errors.len() >= 2 {
                Some(mean_confidence_interval(errors, 0.95)?)
            } else {
                None
            },
            rank_variation: RankVariationStat {
                per_match_avg: rvs.iter().map(|r| r.per_match_avg).sum::<f64>() / n,
                per_window_avg: rvs.iter().map(|r| r.per_window_avg).sum::<f64>() / n,
            },
        })
    };
    let elo = summary(&elo_err, windows.iter().map(|w| w.elo.rank_variation).collect())?;
    let gelo = summary(
        &gelo_err,
        windows.iter().map(WindowReport::gelo_rank_variation).collect(),
    )?;
    let paired = if windows.len() >= 2 {
        Some(paired_t_test(&elo_err, &gelo_err)?)
    } else {
        None
    };
    Ok(EvalReport {
        windows,
        elo,
        gelo,
        paired,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |v| format!("{v:.6}"))
}

impl EvalReport {
    /// Per-window rows `window<TAB>system<TAB>error_rate`, then the
    /// `avg`, `ci_low`, `ci_high`, `t` and `p` summary rows. Undefined
    /// statistics print as `NA`.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for w in &self.windows {
            writeln!(out, "{}\t{}\t{:.6}", w.window_index, System::Elo, w.elo.error_rate())?;
            writeln!(out, "{}\t{}\t{:.6}", w.window_index, System::GElo, w.gelo_error_rate())?;
        }
        let (e, g) = (&self.elo, &self.gelo);
        writeln!(out, "avg\t{:.6}\t{:.6}", e.mean_error, g.mean_error)?;
        writeln!(
            out,
            "ci_low\t{}\t{}",
            fmt_opt(e.ci.map(|c| c.0)),
            fmt_opt(g.ci.map(|c| c.0))
        )?;
        writeln!(
            out,
            "ci_high\t{}\t{}",
            fmt_opt(e.ci.map(|c| c.1)),
            fmt_opt(g.ci.map(|c| c.1))
        )?;
        let reg = self.paired.as_ref().and_then(PairedTest::regular);
        writeln!(out, "t\t{}", fmt_opt(reg.map(|r| r.t_statistic)))?;
        writeln!(out, "p\t{}", fmt_opt(reg.map(|r| r.p_value)))?;
        Ok(())
    }

    /// Flat `key = value` lines with full precision.
    pub fn write_kv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "windows = {}", self.windows.len())?;
        writeln!(out, "seeds = {}", self.windows.first().map_or(0, |w| w.gelo.len()))?;
        writeln!(out, "tie_convention = half_wrong")?;
        for w in &self.windows {
            let i = w.window_index;
            writeln!(out, "window.{i}.elo.error_rate = {}", w.elo.error_rate())?;
            writeln!(out, "window.{i}.gelo.error_rate = {}", w.gelo_error_rate())?;
            writeln!(out, "window.{i}.test_matches = {}", w.elo.outcome.total)?;
            writeln!(out, "window.{i}.new_players = {}", w.elo.new_players)?;
            let rv = w.gelo_rank_variation();
            writeln!(
                out,
                "window.{i}.elo.rv_per_match = {}",
                w.elo.rank_variation.per_match_avg
            )?;
            writeln!(out, "window.{i}.gelo.rv_per_match = {}", rv.per_match_avg)?;
            writeln!(
                out,
                "window.{i}.elo.rv_per_window = {}",
                w.elo.rank_variation.per_window_avg
            )?;
            writeln!(out, "window.{i}.gelo.rv_per_window = {}", rv.per_window_avg)?;
        }
        for (name, s) in [("elo", &self.elo), ("gelo", &self.gelo)] {
            writeln!(out, "{name}.avg = {}", s.mean_error)?;
            writeln!(out, "{name}.ci_low = {}", s.ci.map_or("NA".into(), |c| c.0.to_string()))?;
            writeln!(
                out,
                "{name}.ci_high = {}",
                s.ci.map_or("NA".into(), |c| c.1.to_string())
            )?;
            writeln!(out, "{name}.rv_per_match = {}", s.rank_variation.per_match_avg)?;
            writeln!(out, "{name}.rv_per_window = {}", s.rank_variation.per_window_avg)?;
        }
        match &self.paired {
            Some(PairedTest::Regular(r)) => {
                writeln!(out, "paired.mean_diff = {}", r.mean_diff)?;
                writeln!(out, "paired.t = {}", r.t_statistic)?;
                writeln!(out, "paired.p = {}", r.p_value)?;
                writeln!(out, "paired.ci_low = {}", r.ci_low)?;
                writeln!(out, "paired.ci_high = {}", r.ci_high)?;
            }
            Some(PairedTest::Degenerate { mean_diff, .. }) => {
                writeln!(out, "paired.mean_diff = {mean_diff}")?;
                writeln!(out, "paired.status = degenerate")?;
            }
            None => writeln!(out, "paired.status = too_few_windows")?,
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elo::DEFAULT_RATING;
    use crate::matches::MatchRecord;

    fn pid(s: &str) -> PlayerId {
        PlayerId::new(s).unwrap()
    }

    fn table(entries: &[(&str, f64)]) -> RatingTable {
        let mut t = RatingTable::new(DEFAULT_RATING);
        for &(p, s) in entries {
            t.set(pid(p), s).unwrap();
        }
        t
    }

    fn duels(pairs: &[(&str, &str)]) -> Dataset {
        Dataset::from_matches(
            pairs
                .iter()
                .enumerate()
                .map(|(i, (w, l))| MatchRecord::duel(i as u64, w, l).unwrap())
                .collect(),
        )
    }

    #[test]
    fn three_of_four_correct() {
        let t = table(&[("a", 1600.0), ("b", 1500.0), ("c", 1400.0)]);
        let test = duels(&[("a", "b"), ("b", "c"), ("a", "c"), ("c", "a")]);
        let o = score_test(&t, &test, KFactor::new(0.0).unwrap(), ScoringMode::Frozen, 1500.0).unwrap();
        assert_eq!(o.outcome.error_rate(), 0.25);
        let test = duels(&[("a", "b"), ("b", "c")]);
        assert_eq!(
            prediction_error(&t, &test, KFactor::default()).unwrap().error_rate(),
            0.0
        );
    }

    #[test]
    fn ties_count_half() {
        let t = table(&[("a", 1500.0), ("b", 1500.0)]);
        let test = duels(&[("a", "b"), ("b", "a")]);
        let o = score_test(&t, &test, KFactor::new(0.0).unwrap(), ScoringMode::Live, 1500.0).unwrap();
        assert_eq!(o.outcome.error_rate(), 0.5);
        assert!(prediction_error(&t, &Dataset::default(), KFactor::default()).is_err());
    }

    #[test]
    fn new_players_enter_at_given_score() {
        let t = table(&[("a", 1600.0), ("b", 1400.0)]);
        let test = duels(&[("z", "b")]);
        let run = score_test(&t, &test, KFactor::new(0.0).unwrap(), ScoringMode::Live, 1450.0).unwrap();
        assert_eq!(run.final_table.get(&pid("z")), 1450.0);
        assert_eq!(run.outcome.error_rate(), 0.0);
    }

    #[test]
    fn shift_invariant_error() {
        let t = table(&[("a", 1600.0), ("b", 1520.0), ("c", 1400.0)]);
        let shifted = table(&[("a", 1900.0), ("b", 1820.0), ("c", 1700.0)]);
        let test = duels(&[("c", "a"), ("b", "c"), ("a", "b"), ("c", "b")]);
        let k = KFactor::default();
        assert_eq!(
            prediction_error(&t, &test, k).unwrap(),
            prediction_error(&shifted, &test, k).unwrap()
        );
    }

    #[test]
    fn rank_variation_examples() {
        // 15th to 10th
        let mut before = RatingTable::new(DEFAULT_RATING);
        let mut after = RatingTable::new(DEFAULT_RATING);
        for i in 0..20 {
            before.set(pid(&format!("q{i:02}")), 2000.0 - 10.0 * i as f64).unwrap();
            after.set(pid(&format!("q{i:02}")), 2000.0 - 10.0 * i as f64).unwrap();
        }
        after.set(pid("q14"), 1915.0).unwrap();
        assert_eq!(rank_of(&before, &pid("q14")), Some(15));
        assert_eq!(rank_of(&after, &pid("q14")), Some(10));
        let history = [
            RatingSnapshot {
                table: before.clone(),
                participants: vec![],
            },
            RatingSnapshot {
                table: after,
                participants: vec![pid("q14")],
            },
        ];
        assert_eq!(rank_variation(&history, RankVariationMode::PerMatch).unwrap(), 5.0);

        let still = [
            RatingSnapshot {
                table: before.clone(),
                participants: vec![],
            },
            RatingSnapshot {
                table: before,
                participants: vec![pid("q01"), pid("q02")],
            },
        ];
        assert_eq!(rank_variation(&still, RankVariationMode::PerMatch).unwrap(), 0.0);
        assert_eq!(rank_variation(&still, RankVariationMode::PerWindow).unwrap(), 0.0);
        assert!(rank_variation(&still[..1], RankVariationMode::PerWindow).is_err());
    }

    #[test]
    fn adjacent_swap() {
        let before = table(&[("a", 1600.0), ("b", 1500.0), ("c", 1400.0)]);
        let after = table(&[("a", 1600.0), ("b", 1380.0), ("c", 1420.0)]);
        let history = [
            RatingSnapshot {
                table: before.clone(),
                participants: vec![],
            },
            RatingSnapshot {
                table: after,
                participants: vec![pid("b"), pid("c")],
            },
        ];
        assert_eq!(rank_variation(&history, RankVariationMode::PerMatch).unwrap(), 1.0);
        // per-window averages over all three players
        assert!((rank_variation(&history, RankVariationMode::PerWindow).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ties_share_rank() {
        let t = table(&[("a", 1500.0), ("b", 1500.0), ("c", 1400.0)]);
        assert_eq!(rank_of(&t, &pid("a")), Some(1));
        assert_eq!(rank_of(&t, &pid("b")), Some(1));
        assert_eq!(rank_of(&t, &pid("c")), Some(3));
        assert_eq!(rank_of(&t, &pid("zz")), None);
    }

    #[test]
    fn live_per_match_agrees_with_snapshots() {
        let t = table(&[("a", 1560.0), ("b", 1500.0), ("c", 1450.0), ("d", 1400.0)]);
        let test = duels(&[("d", "a"), ("c", "b"), ("e", "a"), ("b", "d"), ("c", "e")]);
        let k = KFactor::default();
        let run = score_test(&t, &test, k, ScoringMode::Live, 1477.5).unwrap();

        let mut live = t.clone();
        live.set_default_score(1477.5);
        let mut history = Vec::new();
        for m in test.matches() {
            for p in m.participants() {
                live.lookup(p);
            }
            history.push(RatingSnapshot {
                table: live.clone(),
                participants: vec![],
            });
            update_match(&mut live, m, k);
            history.push(RatingSnapshot {
                table: live.clone(),
                participants: m.participants().cloned().collect(),
            });
        }
        // every other pair of snapshots is a registration step with no participants
        let per_match: Vec<f64> = history
            .chunks(2)
            .map(|c| rank_variation(c, RankVariationMode::PerMatch).unwrap())
            .collect();
        let expected = per_match.iter().sum::<f64>() / per_match.len() as f64;
        assert!((run.rank_variation.per_match_avg - expected).abs() < 1e-12);
        assert_eq!(run.final_table, live);
    }
}
