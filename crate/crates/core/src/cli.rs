//! Configuration files and the `rate`, `gelo`, `eval` and `simulate` commands.
//!
//! Configuration uses `key = value` lines with `#` comments. Keys match the
//! [`RunConfig`] field names.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::elo::{replay, write_ratings, KFactor, DEFAULT_K, DEFAULT_RATING};
use crate::embedding::{EmbeddingConfig, TrainingMode};
use crate::error::{Error, Result, StageExt};
use crate::eval::{evaluate, EvalParams, EvalReport, ScoringMode};
use crate::graph::{DEFAULT_WALKS_PER_NODE, DEFAULT_WALK_LENGTH};
use crate::matches::{parse_matches, write_matches, ParsedMatches};
use crate::pipeline::{run_gelo, GeloParams, GeloRun};
use crate::synthetic::{generate_synthetic, Matchmaking, SkillModel, SyntheticSpec, DEFAULT_MATCHMAKING_SCALE};

pub const DEFAULT_SEED: u64 = 20_240_101;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub k_factor: f64,
    pub default_score: f64,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub dim: usize,
    pub context: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub units: usize,
    pub window_len: usize,
    pub seed: u64,
    pub recenter: bool,
    /// Single-threaded, reproducible embedding training. Off means
    /// lock-free parallel training on `threads` workers.
    pub deterministic: bool,
    pub threads: usize,
    pub eval_seeds: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub noise_exponent: f64,
    pub subsample: Option<f64>,
    pub elbow_fallback: bool,
    pub scoring: ScoringMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        let emb = EmbeddingConfig::default();
        RunConfig {
            k_factor: DEFAULT_K,
            default_score: DEFAULT_RATING,
            walks_per_node: DEFAULT_WALKS_PER_NODE,
            walk_length: DEFAULT_WALK_LENGTH,
            dim: emb.dim,
            context: emb.context,
            epochs: emb.epochs,
            negatives: emb.negatives,
            units: 13,
            window_len: 4,
            seed: DEFAULT_SEED,
            recenter: true,
            deterministic: true,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            eval_seeds: 5,
            lr_start: emb.lr_start,
            lr_end: emb.lr_end,
            noise_exponent: emb.noise_exponent,
            subsample: None,
            elbow_fallback: true,
            scoring: ScoringMode::Live,
        }
    }
}

/// Splits `key = value` lines, skipping blanks and `#` comments.
pub fn parse_kv(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected key = value, found {line:?}"),
        })?;
        out.push((i + 1, k.trim().to_owned(), v.trim().to_owned()));
    }
    Ok(out)
}

fn value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid value {v:?} for {key}"),
    })
}

fn flag(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Parse {
            line,
            message: format!("invalid flag {v:?} for {key}"),
        }),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (line, key, v) in parse_kv(text)? {
            let v = v.as_str();
            match key.as_str() {
                "k_factor" => c.k_factor = value(line, &key, v)?,
                "default_score" => c.default_score = value(line, &key, v)?,
                "walks_per_node" => c.walks_per_node = value(line, &key, v)?,
                "walk_length" => c.walk_length = value(line, &key, v)?,
                "dim" => c.dim = value(line, &key, v)?,
                "context" => c.context = value(line, &key, v)?,
                "epochs" => c.epochs = value(line, &key, v)?,
                "negatives" => c.negatives = value(line, &key, v)?,
                "units" => c.units = value(line, &key, v)?,
                "window_len" => c.window_len = value(line, &key, v)?,
                "seed" => c.seed = value(line, &key, v)?,
                "recenter" => c.recenter = flag(line, &key, v)?,
                "deterministic" => c.deterministic = flag(line, &key, v)?,
                "threads" => c.threads = value(line, &key, v)?,
                "eval_seeds" => c.eval_seeds = value(line, &key, v)?,
                "lr_start" => c.lr_start = value(line, &key, v)?,
                "lr_end" => c.lr_end = value(line, &key, v)?,
                "noise_exponent" => c.noise_exponent = value(line, &key, v)?,
                "subsample" => c.subsample = if v == "none" { None } else { Some(value(line, &key, v)?) },
                "elbow_fallback" => c.elbow_fallback = flag(line, &key, v)?,
                "scoring" => {
                    c.scoring = match v {
                        "live" => ScoringMode::Live,
                        "frozen" => ScoringMode::Frozen,
                        _ => {
                            return Err(Error::Parse {
                                line,
                                message: format!("scoring must be live or frozen, found {v:?}"),
                            })
                        }
                    }
                }
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown key {key:?}"),
                    })
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, message } => Error::Config(format!("{}:{line}: {message}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        KFactor::new(self.k_factor)?;
        if !self.default_score.is_finite() {
            return Err(Error::Config("default_score must be finite".into()));
        }
        let counts = [
            ("walks_per_node", self.walks_per_node),
            ("walk_length", self.walk_length),
            ("units", self.units),
            ("window_len", self.window_len),
            ("threads", self.threads),
            ("eval_seeds", self.eval_seeds),
        ];
        for (name, n) in counts {
            if n == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        self.embedding().validate()
    }

    pub fn embedding(&self) -> EmbeddingConfig {
        EmbeddingConfig {
            dim: self.dim,
            context: self.context,
            epochs: self.epochs,
            negatives: self.negatives,
            lr_start: self.lr_start,
            lr_end: self.lr_end,
            noise_exponent: self.noise_exponent,
            subsample: self.subsample,
            seed: EmbeddingConfig::default().seed,
            mode: if self.deterministic {
                TrainingMode::Deterministic
            } else {
                TrainingMode::Parallel { threads: self.threads }
            },
        }
    }

    pub fn gelo_params(&self) -> Result<GeloParams> {
        Ok(GeloParams {
            k: KFactor::new(self.k_factor)?,
            default_score: self.default_score,
            walks_per_node: self.walks_per_node,
            walk_length: self.walk_length,
            embedding: self.embedding(),
            recenter: self.recenter,
            elbow_fallback: self.elbow_fallback,
        })
    }

    /// Evaluation runs many trainings side by side, so each one trains
    /// single-threaded and the jobs share the thread pool.
    pub fn eval_params(&self) -> Result<EvalParams> {
        let mut gelo = self.gelo_params()?;
        gelo.embedding.mode = TrainingMode::Deterministic;
        Ok(EvalParams {
            gelo,
            scoring: self.scoring,
            units: self.units,
            window_len: self.window_len,
            seeds: self.eval_seeds,
            seed: self.seed,
        })
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))
    }
}

/// Files written by a command plus any non-fatal diagnostics.
#[derive(Clone, Debug, Default)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub const RATINGS_FILE: &str = "ratings.tsv";
pub const GELO_RATINGS_FILE: &str = "gelo_ratings.tsv";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const ADJUSTMENT_FILE: &str = "adjustment.tsv";
pub const GRAPH_FILE: &str = "graph.tsv";
pub const EVAL_FILE: &str = "eval.tsv";
pub const EVAL_KV_FILE: &str = "eval.kv";
pub const MATCHES_FILE: &str = "matches.csv";

pub fn read_matches(path: &Path) -> Result<ParsedMatches> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    parse_matches(BufReader::new(file)).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::file(&path, e))?;
    let mut out = BufWriter::new(file);
    f(&mut out)?;
    out.flush().map_err(|e| Error::file(&path, e))?;
    Ok(path)
}

/// Elo replay over the whole file.
pub fn cmd_rate(matches_path: &Path, cfg: &RunConfig, out_dir: &Path) -> Result<CommandOutput> {
    let parsed = read_matches(matches_path)?;
    let table = replay(&parsed.dataset, KFactor::new(cfg.k_factor)?, cfg.default_score);
    let path = write_file(out_dir, RATINGS_FILE, |w| write_ratings(&table, w))?;
    Ok(CommandOutput {
        files: vec![path],
        warnings: parsed.warnings,
    })
}

/// Full GElo pipeline over the whole file.
pub fn cmd_gelo(matches_path: &Path, cfg: &RunConfig, out_dir: &Path) -> Result<(CommandOutput, GeloRun)> {
    let parsed = read_matches(matches_path).stage("ingest")?;
    let params = cfg.gelo_params()?;
    let run = cfg.pool()?.install(|| run_gelo(&parsed.dataset, &params, cfg.seed))?;
    let mut warnings = parsed.warnings;
    if run.elbow.fallback {
        warnings.push("activity histogram too short for an elbow; threshold defaulted to 1".into());
    }
    let files = vec![
        write_file(out_dir, GELO_RATINGS_FILE, |w| write_ratings(&run.adjusted, w))?,
        write_file(out_dir, EMBEDDINGS_FILE, |w| run.embeddings.write_word2vec(w))?,
        write_file(out_dir, ADJUSTMENT_FILE, |w| run.report.write_tsv(w))?,
        write_file(out_dir, GRAPH_FILE, |w| run.graph.write_tsv(w))?,
    ];
    Ok((CommandOutput { files, warnings }, run))
}

/// Windowed Elo versus GElo comparison.
pub fn cmd_eval(matches_path: &Path, cfg: &RunConfig, out_dir: &Path) -> Result<(CommandOutput, EvalReport)> {
    let parsed = read_matches(matches_path).stage("ingest")?;
    let params = cfg.eval_params()?;
    let report = cfg.pool()?.install(|| evaluate(&parsed.dataset, &params))?;
    let files = vec![
        write_file(out_dir, EVAL_FILE, |w| report.write_tsv(w))?,
        write_file(out_dir, EVAL_KV_FILE, |w| report.write_kv(w))?,
    ];
    Ok((
        CommandOutput {
            files,
            warnings: parsed.warnings,
        },
        report,
    ))
}

/// Reads a synthetic spec from `key = value` text.
///
/// Keys: `player_count`, `skill_mean`, `skill_sd`, `low_activity_shift`,
/// `skills` (comma-separated, overrides the normal model),
/// `low_activity_fraction`, `low_activity_budget`, `match_count`,
/// `team_size`, `units`, `seed`, `matchmaking` (`uniform` or `skill`) and
/// `matchmaking_scale` (used by `skill` only).
pub fn parse_synthetic_spec(text: &str) -> Result<SyntheticSpec> {
    let mut spec = SyntheticSpec::default();
    let (mut mean, mut sd, mut shift) = match spec.skills {
        SkillModel::Normal {
            mean,
            sd,
            low_activity_shift,
        } => (mean, sd, low_activity_shift),
        SkillModel::Explicit(_) => unreachable!("default skills are normal"),
    };
    let mut explicit = None;
    let mut uniform = true;
    let mut scale = DEFAULT_MATCHMAKING_SCALE;
    for (line, key, v) in parse_kv(text)? {
        let v = v.as_str();
        match key.as_str() {
            "player_count" => spec.player_count = value(line, &key, v)?,
            "skill_mean" => mean = value(line, &key, v)?,
            "skill_sd" => sd = value(line, &key, v)?,
            "low_activity_shift" => shift = value(line, &key, v)?,
            "skills" => {
                explicit = Some(
                    v.split(',')
                        .map(|s| value(line, &key, s.trim()))
                        .collect::<Result<Vec<f64>>>()?,
                )
            }
            "low_activity_fraction" => spec.low_activity_fraction = value(line, &key, v)?,
            "low_activity_budget" => spec.low_activity_budget = value(line, &key, v)?,
            "match_count" => spec.match_count = value(line, &key, v)?,
            "team_size" => spec.team_size = value(line, &key, v)?,
            "units" => spec.units = value(line, &key, v)?,
            "seed" => spec.seed = value(line, &key, v)?,
            "matchmaking" => {
                uniform = match v {
                    "uniform" => true,
                    "skill" => false,
                    _ => {
                        return Err(Error::Parse {
                            line,
                            message: format!("matchmaking must be uniform or skill, got {v:?}"),
                        })
                    }
                }
            }
            "matchmaking_scale" => scale = value(line, &key, v)?,
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key {key:?}"),
                })
            }
        }
    }
    spec.skills = match explicit {
        Some(s) => SkillModel::Explicit(s),
        None => SkillModel::Normal {
            mean,
            sd,
            low_activity_shift: shift,
        },
    };
    spec.matchmaking = if uniform {
        Matchmaking::Uniform
    } else {
        Matchmaking::Skill { scale }
    };
    spec.validate()?;
    Ok(spec)
}

/// Generates a match file from a spec file; `seed` overrides the spec's seed.
pub fn cmd_simulate(spec_path: &Path, seed: Option<u64>, out_dir: &Path) -> Result<CommandOutput> {
    let text = fs::read_to_string(spec_path).map_err(|e| Error::file(spec_path, e))?;
    let mut spec = parse_synthetic_spec(&text)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let data = generate_synthetic(&spec)?;
    let path = write_file(out_dir, MATCHES_FILE, |w| write_matches(&data.dataset, w))?;
    Ok(CommandOutput {
        files: vec![path],
        warnings: Vec::new(),
    })
}
