//! Skill gap graph and weighted random walks over it.
//!
//! Each pair of players who met across sides gets an undirected edge whose
//! weight shrinks as their head-to-head record becomes lopsided:
//! `w = 1 - tanh(|Σo| / m)` for `m >= 2` meetings and a flat `0.01` for a
//! single meeting, so walkers rarely cross edges backed by one result.
//!
//! Team matches contribute one observation for every winner/loser pair;
//! teammates are never connected.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matches::{Dataset, PlayerId};

/// Weight assigned to edges backed by a single match.
pub const SINGLE_MATCH_WEIGHT: f64 = 0.01;

pub const DEFAULT_WALKS_PER_NODE: usize = 16;
pub const DEFAULT_WALK_LENGTH: usize = 100;

/// Head-to-head record between two players.
///
/// `outcome_sum` is counted from the perspective of the lexicographically
/// smaller player.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeStats {
    pub outcome_sum: i64,
    pub match_count: u64,
    pub weight: f64,
}

impl EdgeStats {
    fn from_record(outcome_sum: i64, match_count: u64) -> Self {
        EdgeStats {
            outcome_sum,
            match_count,
            weight: edge_weight(outcome_sum, match_count),
        }
    }
}

/// Skill gap weight for a record of `match_count` meetings summing to `outcome_sum`.
pub fn edge_weight(outcome_sum: i64, match_count: u64) -> f64 {
    match match_count {
        0 => 0.0,
        1 => SINGLE_MATCH_WEIGHT,
        m => 1.0 - (outcome_sum.unsigned_abs() as f64 / m as f64).tanh(),
    }
}

/// Undirected weighted graph with id-sorted nodes and index-sorted neighbor
/// lists. This is what the walker consumes.
#[derive(Clone, Debug, Default)]
pub struct WeightedGraph {
    nodes: Vec<PlayerId>,
    index: HashMap<PlayerId, usize>,
    neighbors: Vec<Vec<(usize, f64)>>,
    cumulative: Vec<Vec<f64>>,
}

impl WeightedGraph {
    /// Builds a graph from explicit weights. Nodes that only appear in
    /// `nodes` are isolated. Repeated pairs accumulate weight.
    pub fn from_weighted_edges<I>(nodes: impl IntoIterator<Item = PlayerId>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PlayerId, PlayerId, f64)>,
    {
        let mut ids: Vec<PlayerId> = nodes.into_iter().collect();
        let edges: Vec<_> = edges.into_iter().collect();
        for (a, b, _) in &edges {
            ids.push(a.clone());
            ids.push(b.clone());
        }
        ids.sort();
        ids.dedup();
        let index: HashMap<_, _> = ids.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();

        let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (a, b, w) in edges {
            if a == b {
                return Err(Error::InvalidMatch(format!("self-loop on {a}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Config(format!("edge {a}-{b} has non-positive weight {w}")));
            }
            let (i, j) = (index[&a], index[&b]);
            *pairs.entry((i.min(j), i.max(j))).or_default() += w;
        }
        Ok(Self::assemble(ids, index, &pairs))
    }

    fn assemble(nodes: Vec<PlayerId>, index: HashMap<PlayerId, usize>, pairs: &BTreeMap<(usize, usize), f64>) -> Self {
        let mut neighbors = vec![Vec::new(); nodes.len()];
        for (&(i, j), &w) in pairs {
            neighbors[i].push((j, w));
            neighbors[j].push((i, w));
        }
        for list in &mut neighbors {
            list.sort_by_key(|&(j, _)| j);
        }
        let cumulative = neighbors
            .iter()
            .map(|list| {
                list.iter()
                    .scan(0.0, |acc, &(_, w)| {
                        *acc += w;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        WeightedGraph {
            nodes,
            index,
            neighbors,
            cumulative,
        }
    }

    pub fn nodes(&self) -> &[PlayerId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn index_of(&self, id: &PlayerId) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Neighbors of node `i` as `(index, weight)`, sorted by index.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search_by_key(&j, |&(n, _)| n).is_ok()
    }

    /// Probability of stepping from `v` to each neighbor, proportional to
    /// edge weight. Empty for an isolated node.
    pub fn transition_distribution(&self, v: &PlayerId) -> Result<BTreeMap<PlayerId, f64>> {
        let i = self.index_of(v).ok_or_else(|| Error::UnknownPlayer(v.clone()))?;
        let total: f64 = self.neighbors[i].iter().map(|&(_, w)| w).sum();
        Ok(self.neighbors[i]
            .iter()
            .map(|&(j, w)| (self.nodes[j].clone(), w / total))
            .collect())
    }

    /// Samples the next node after `i`, or `None` if `i` is isolated.
    pub fn step<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Option<usize> {
        let cum = &self.cumulative[i];
        let total = *cum.last()?;
        let u = rng.gen::<f64>() * total;
        let k = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        Some(self.neighbors[i][k].0)
    }

    /// Generates `walks_per_node` walks of `walk_length` nodes from every node.
    ///
    /// Walks are ordered round by round; within a round the start nodes are
    /// shuffled. Each walk draws from its own generator seeded by
    /// `(seed, start node id, walk index)`, so the corpus does not depend on
    /// how the work is scheduled across threads.
    pub fn generate_walks(&self, walks_per_node: usize, walk_length: usize, seed: u64) -> Result<WalkCorpus> {
        if walk_length == 0 {
            return Err(Error::Config("walk length must be at least 1".into()));
        }
        let mut order_rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x5eed_0fde_ed5a_1e00));
        let mut jobs = Vec::with_capacity(walks_per_node * self.nodes.len());
        for round in 0..walks_per_node {
            let mut starts: Vec<usize> = (0..self.nodes.len()).collect();
            rand::seq::SliceRandom::shuffle(starts.as_mut_slice(), &mut order_rng);
            jobs.extend(starts.into_iter().map(|s| (s, round)));
        }

        let walks = jobs
            .par_iter()
            .map(|&(start, round)| {
                let mut rng = ChaCha8Rng::seed_from_u64(walk_seed(seed, &self.nodes[start], round));
                let mut walk = Vec::with_capacity(walk_length);
                walk.push(start as u32);
                let mut cur = start;
                while walk.len() < walk_length {
                    match self.step(cur, &mut rng) {
                        Some(next) => {
                            walk.push(next as u32);
                            cur = next;
                        }
                        None => break,
                    }
                }
                walk
            })
            .collect();

        Ok(WalkCorpus {
            vocab: self.nodes.clone(),
            walks,
            walks_per_node,
            walk_length,
        })
    }
}

/// Skill gap graph: head-to-head statistics plus the derived walk topology.
#[derive(Clone, Debug, Default)]
pub struct SkillGapGraph {
    edges: BTreeMap<(usize, usize), EdgeStats>,
    topology: WeightedGraph,
}

impl SkillGapGraph {
    /// Builds the graph from every winner/loser pair in the dataset.
    pub fn build(ds: &Dataset) -> Self {
        let nodes: Vec<PlayerId> = ds.players().iter().cloned().collect();
        let index: HashMap<_, _> = nodes.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();

        let mut records: BTreeMap<(usize, usize), (i64, u64)> = BTreeMap::new();
        for m in ds.matches() {
            for w in m.winners() {
                for l in m.losers() {
                    let (wi, li) = (index[w], index[l]);
                    let key = (wi.min(li), wi.max(li));
                    let rec = records.entry(key).or_default();
                    rec.0 += if wi < li { 1 } else { -1 };
                    rec.1 += 1;
                }
            }
        }
        let edges: BTreeMap<_, _> = records
            .into_iter()
            .map(|(k, (sum, count))| (k, EdgeStats::from_record(sum, count)))
            .collect();
        let weights = edges.iter().map(|(&k, s)| (k, s.weight)).collect();
        SkillGapGraph {
            topology: WeightedGraph::assemble(nodes, index, &weights),
            edges,
        }
    }

    pub fn topology(&self) -> &WeightedGraph {
        &self.topology
    }

    pub fn nodes(&self) -> &[PlayerId] {
        self.topology.nodes()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Statistics for the unordered pair `{a, b}`.
    pub fn edge(&self, a: &PlayerId, b: &PlayerId) -> Option<&EdgeStats> {
        let (i, j) = (self.topology.index_of(a)?, self.topology.index_of(b)?);
        self.edges.get(&(i.min(j), i.max(j)))
    }

    /// Edges as `(a, b, stats)` with `a < b`, in id order.
    pub fn edges(&self) -> impl Iterator<Item = (&PlayerId, &PlayerId, &EdgeStats)> {
        let nodes = self.topology.nodes();
        self.edges.iter().map(move |(&(i, j), s)| (&nodes[i], &nodes[j], s))
    }

    pub fn transition_distribution(&self, v: &PlayerId) -> Result<BTreeMap<PlayerId, f64>> {
        self.topology.transition_distribution(v)
    }

    pub fn generate_walks(&self, walks_per_node: usize, walk_length: usize, seed: u64) -> Result<WalkCorpus> {
        self.topology.generate_walks(walks_per_node, walk_length, seed)
    }

    /// Writes `a<TAB>b<TAB>match_count<TAB>outcome_sum<TAB>weight` lines.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for (a, b, s) in self.edges() {
            writeln!(out, "{a}\t{b}\t{}\t{}\t{:.6}", s.match_count, s.outcome_sum, s.weight)?;
        }
        Ok(())
    }
}

/// Node sequences produced by random walks, stored as indices into `vocab`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WalkCorpus {
    vocab: Vec<PlayerId>,
    walks: Vec<Vec<u32>>,
    walks_per_node: usize,
    walk_length: usize,
}

impl WalkCorpus {
    /// Builds a corpus from explicit id sequences. The vocabulary is the set
    /// of ids that appear, in sorted order.
    pub fn from_walks(walks: Vec<Vec<PlayerId>>) -> Self {
        let mut vocab: Vec<PlayerId> = walks.iter().flatten().cloned().collect();
        vocab.sort();
        vocab.dedup();
        let index: HashMap<&PlayerId, u32> = vocab.iter().enumerate().map(|(i, p)| (p, i as u32)).collect();
        let encoded = walks.iter().map(|w| w.iter().map(|p| index[p]).collect()).collect();
        let walk_length = walks.iter().map(Vec::len).max().unwrap_or(0);
        WalkCorpus {
            vocab,
            walks: encoded,
            walks_per_node: 0,
            walk_length,
        }
    }

    pub fn vocab(&self) -> &[PlayerId] {
        &self.vocab
    }

    pub fn walks(&self) -> &[Vec<u32>] {
        &self.walks
    }

    pub fn walks_per_node(&self) -> usize {
        self.walks_per_node
    }

    pub fn walk_length(&self) -> usize {
        self.walk_length
    }

    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.iter().all(Vec::is_empty)
    }

    /// The `n`-th walk as player ids.
    pub fn walk_ids(&self, n: usize) -> Vec<&PlayerId> {
        self.walks[n].iter().map(|&i| &self.vocab[i as usize]).collect()
    }

    /// Writes one walk per line, ids separated by spaces.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        for n in 0..self.walks.len() {
            let line: Vec<&str> = self.walk_ids(n).into_iter().map(PlayerId::as_str).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// splitmix64 finalizer over `a ^ b`.
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn walk_seed(seed: u64, start: &PlayerId, round: usize) -> u64 {
    mix(mix(seed, fnv1a(start.as_str().as_bytes())), round as u64 + 1)
}
