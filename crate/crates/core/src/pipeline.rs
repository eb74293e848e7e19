//! Training-side GElo pipeline: Elo replay, skill gap graph, walks,
//! embeddings and the similarity bonus.

use crate::adjust::{
    apply_adjustment, elbow_threshold, match_counts, ActiveSet, ActivityHistogram, AdjustmentReport, Elbow,
};
use crate::elo::{replay, KFactor, RatingTable, DEFAULT_RATING};
use crate::embedding::{train, EmbeddingConfig, EmbeddingMatrix};
use crate::error::{Result, StageExt};
use crate::graph::{mix, SkillGapGraph, WalkCorpus, DEFAULT_WALKS_PER_NODE, DEFAULT_WALK_LENGTH};
use crate::matches::Dataset;

#[derive(Clone, Debug, PartialEq)]
pub struct GeloParams {
    pub k: KFactor,
    pub default_score: f64,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub embedding: EmbeddingConfig,
    /// Shift adjusted ratings back to the pre-adjustment mean.
    pub recenter: bool,
    /// Treat everyone as active when the histogram is too short for an elbow.
    /// When off, such datasets get no bonus at all.
    pub elbow_fallback: bool,
}

impl Default for GeloParams {
    fn default() -> Self {
        GeloParams {
            k: KFactor::default(),
            default_score: DEFAULT_RATING,
            walks_per_node: DEFAULT_WALKS_PER_NODE,
            walk_length: DEFAULT_WALK_LENGTH,
            embedding: EmbeddingConfig::default(),
            recenter: true,
            elbow_fallback: true,
        }
    }
}

/// Everything produced by one GElo training run.
#[derive(Clone, Debug)]
pub struct GeloRun {
    pub elo: RatingTable,
    pub graph: SkillGapGraph,
    pub corpus: WalkCorpus,
    pub embeddings: EmbeddingMatrix<f32>,
    pub elbow: Elbow,
    pub active: Option<ActiveSet>,
    pub adjusted: RatingTable,
    pub report: AdjustmentReport,
}

/// Graph-independent part of a run, reusable across seeds.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub elo: RatingTable,
    pub graph: SkillGapGraph,
    pub elbow: Elbow,
    pub active: Option<ActiveSet>,
}

pub fn prepare(ds: &Dataset, params: &GeloParams) -> Prepared {
    let elo = replay(ds, params.k, params.default_score);
    let graph = SkillGapGraph::build(ds);
    let counts = match_counts(ds);
    let elbow = elbow_threshold(&ActivityHistogram::from_match_counts(&counts));
    let active = if elbow.fallback && !params.elbow_fallback {
        None
    } else {
        ActiveSet::select(&counts, &elo, elbow.threshold)
    };
    Prepared {
        elo,
        graph,
        elbow,
        active,
    }
}

/// Walks, embeddings and adjustment on top of a prepared dataset. The walk and
/// embedding seeds are both derived from `seed`.
pub fn run_seeded(prep: &Prepared, params: &GeloParams, seed: u64) -> Result<GeloRun> {
    let corpus = prep
        .graph
        .generate_walks(params.walks_per_node, params.walk_length, seed)
        .stage("walk")?;
    let cfg = EmbeddingConfig {
        seed: mix(seed, params.embedding.seed),
        ..params.embedding.clone()
    };
    let embeddings = train::<f32>(&corpus, &cfg).stage("train")?;
    let (adjusted, report) = match &prep.active {
        Some(active) => apply_adjustment(&prep.elo, &embeddings, active, params.k, params.recenter).stage("adjust")?,
        None => (prep.elo.clone(), unadjusted_report(&prep.elo)),
    };
    Ok(GeloRun {
        elo: prep.elo.clone(),
        graph: prep.graph.clone(),
        corpus,
        embeddings,
        elbow: prep.elbow,
        active: prep.active.clone(),
        adjusted,
        report,
    })
}

pub fn run_gelo(ds: &Dataset, params: &GeloParams, seed: u64) -> Result<GeloRun> {
    run_seeded(&prepare(ds, params), params, seed)
}

fn unadjusted_report(table: &RatingTable) -> AdjustmentReport {
    AdjustmentReport {
        entries: table
            .iter()
            .map(|(p, s)| crate::adjust::AdjustmentEntry {
                player: p.clone(),
                pre_score: s,
                sim_top: None,
                bonus: 0.0,
                post_score: s,
            })
            .collect(),
        recenter_shift: 0.0,
    }
}
