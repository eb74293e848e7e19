//! Synthetic match histories with known latent skills.
//!
//! Outcomes follow the Elo logistic curve on latent skill differences, so Elo
//! is well specified on the generated data. A fraction of players is
//! low-activity: each arrives at a random point of the timeline and leaves
//! after a small match budget. Everyone else plays throughout. Matchups are
//! drawn uniformly among the players eligible at each step.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::elo::logistic;
use crate::error::{Error, Result};
use crate::matches::{Dataset, MatchRecord, PlayerId, Winner};

#[derive(Clone, Debug, PartialEq)]
pub enum SkillModel {
    /// Normal skills; low-activity players are offset by `low_activity_shift`.
    Normal {
        mean: f64,
        sd: f64,
        low_activity_shift: f64,
    },
    /// One skill per player, in player order.
    Explicit(Vec<f64>),
}

/// Skill gap scale used when skill matchmaking is requested without one.
pub const DEFAULT_MATCHMAKING_SCALE: f64 = 100.0;

/// How the players of each match are drawn from the eligible pool.
#[derive(Clone, Debug, PartialEq)]
pub enum Matchmaking {
    /// Uniformly at random.
    Uniform,
    /// An anchor is drawn uniformly; the others are drawn with weight
    /// `exp(-d^2 / (2 scale^2))`, where `d` is their latent skill gap to
    /// the anchor.
    Skill { scale: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub player_count: usize,
    pub skills: SkillModel,
    /// Share of players with a limited match budget.
    pub low_activity_fraction: f64,
    pub low_activity_budget: u32,
    /// Total matches. The default puts about 5,000 in every two-unit
    /// training window.
    pub match_count: usize,
    pub team_size: usize,
    pub matchmaking: Matchmaking,
    /// Timestamps run over `0..units`, matches spread evenly.
    pub units: u64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            player_count: 200,
            skills: SkillModel::Normal {
                mean: 1500.0,
                sd: 200.0,
                low_activity_shift: 0.0,
            },
            low_activity_fraction: 0.8,
            low_activity_budget: 5,
            match_count: 32_500,
            team_size: 1,
            matchmaking: Matchmaking::Uniform,
            units: 13,
            seed: 7,
        }
    }
}

/// Generated data together with the latent skills that produced it.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub skills: BTreeMap<PlayerId, f64>,
    pub low_activity: Vec<PlayerId>,
}

pub fn player_name(i: usize) -> String {
    format!("p{i:04}")
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Infeasible(m));
        if !(0.0..=1.0).contains(&self.low_activity_fraction) {
            return bad(format!(
                "low_activity_fraction {} not in [0, 1]",
                self.low_activity_fraction
            ));
        }
        if self.team_size == 0 {
            return bad("team_size must be at least 1".into());
        }
        if self.units == 0 {
            return bad("units must be at least 1".into());
        }
        match &self.skills {
            SkillModel::Normal {
                mean,
                sd,
                low_activity_shift,
            } => {
                if !(mean.is_finite() && sd.is_finite() && *sd >= 0.0 && low_activity_shift.is_finite()) {
                    return bad("skill distribution parameters must be finite with sd >= 0".into());
                }
            }
            SkillModel::Explicit(skills) => {
                if skills.len() != self.player_count {
                    return bad(format!(
                        "{} explicit skills for {} players",
                        skills.len(),
                        self.player_count
                    ));
                }
                if skills.iter().any(|s| !s.is_finite()) {
                    return bad("explicit skills must be finite".into());
                }
            }
        }
        if let Matchmaking::Skill { scale } = self.matchmaking {
            if !(scale.is_finite() && scale > 0.0) {
                return bad(format!("matchmaking scale {scale} must be positive"));
            }
        }
        if self.match_count > 0 && self.player_count < 2 * self.team_size {
            return bad(format!(
                "{} players cannot field two teams of {}",
                self.player_count, self.team_size
            ));
        }
        Ok(())
    }

    /// Number of players with a match budget.
    pub fn low_activity_count(&self) -> usize {
        (self.low_activity_fraction * self.player_count as f64).round() as usize
    }
}

/// Generates a dataset from the spec; deterministic per seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.player_count;
    let low = spec.low_activity_count();
    // the last `low` players are low-activity
    let is_low = |i: usize| i >= n - low;

    let skills: Vec<f64> = match &spec.skills {
        SkillModel::Explicit(s) => s.clone(),
        SkillModel::Normal {
            mean,
            sd,
            low_activity_shift,
        } => {
            let normal = Normal::new(*mean, *sd).map_err(|e| Error::Infeasible(e.to_string()))?;
            (0..n)
                .map(|i| normal.sample(&mut rng) + if is_low(i) { *low_activity_shift } else { 0.0 })
                .collect()
        }
    };
    let ids: Vec<PlayerId> = (0..n).map(|i| PlayerId::new(player_name(i))).collect::<Result<_>>()?;

    let arrival: Vec<usize> = (0..n)
        .map(|i| {
            if is_low(i) {
                rng.gen_range(0..spec.match_count.max(1))
            } else {
                0
            }
        })
        .collect();
    let mut budget: Vec<Option<u32>> = (0..n).map(|i| is_low(i).then_some(spec.low_activity_budget)).collect();

    let per_match = 2 * spec.team_size;
    let mut matches = Vec::with_capacity(spec.match_count);
    let mut eligible = Vec::with_capacity(n);
    for step in 0..spec.match_count {
        eligible.clear();
        eligible.extend((0..n).filter(|&i| arrival[i] <= step && budget[i] != Some(0)));
        if eligible.len() < per_match {
            return Err(Error::Infeasible(format!(
                "only {} players eligible at match {step}, need {per_match}",
                eligible.len()
            )));
        }
        let picked = pick_players(&mut rng, &eligible, &skills, per_match, &spec.matchmaking)?;
        for &p in &picked {
            if let Some(b) = budget[p].as_mut() {
                *b -= 1;
            }
        }
        let (side_a, side_b) = picked.split_at(spec.team_size);
        let team_skill = |side: &[usize]| side.iter().map(|&p| skills[p]).sum::<f64>() / side.len() as f64;
        let p_a = logistic(team_skill(side_a) - team_skill(side_b));
        let winner = if rng.gen::<f64>() < p_a {
            Winner::SideA
        } else {
            Winner::SideB
        };
        let timestamp = (step as u128 * spec.units as u128 / spec.match_count as u128) as u64;
        matches.push(MatchRecord::new(
            timestamp,
            side_a.iter().map(|&p| ids[p].clone()).collect(),
            side_b.iter().map(|&p| ids[p].clone()).collect(),
            winner,
        )?);
    }

    Ok(SyntheticData {
        dataset: Dataset::from_matches(matches),
        skills: ids.iter().cloned().zip(skills).collect(),
        low_activity: ids[n - low..].to_vec(),
    })
}

fn pick_players<R: Rng>(
    rng: &mut R,
    eligible: &[usize],
    skills: &[f64],
    count: usize,
    mm: &Matchmaking,
) -> Result<Vec<usize>> {
    match *mm {
        Matchmaking::Uniform => Ok(sample(rng, eligible.len(), count)
            .into_iter()
            .map(|k| eligible[k])
            .collect()),
        Matchmaking::Skill { scale } => {
            let anchor = eligible[rng.gen_range(0..eligible.len())];
            let rest: Vec<usize> = eligible.iter().copied().filter(|&p| p != anchor).collect();
            let weight = |&p: &usize| {
                let z = (skills[p] - skills[anchor]) / scale;
                // floor keeps far-off players drawable when the pool is thin
                (-0.5 * z * z).exp().max(1e-12)
            };
            let mut picked: Vec<usize> = rest
                .choose_multiple_weighted(rng, count - 1, weight)
                .map_err(|e| Error::Infeasible(e.to_string()))?
                .copied()
                .collect();
            picked.push(anchor);
            picked.shuffle(rng);
            Ok(picked)
        }
    }
}
