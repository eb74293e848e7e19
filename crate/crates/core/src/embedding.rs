//! Skip-gram player embeddings trained with negative sampling.
//!
//! Each `(center, context)` pair taken from a walk window is one example. The
//! trainer runs stochastic gradient ascent on
//!
//! ```text
//! log σ(c_pos · x_center) + Σ_neg log σ(-c_neg · x_center)
//! ```
//!
//! where `x` are the input rows (the exported embeddings) and `c` the output
//! rows, which stay inside the trainer. Negatives come from the corpus unigram
//! distribution raised to `noise_exponent`.
//!
//! Two modes exist. Deterministic mode is single-threaded and bitwise
//! reproducible for a given seed. Parallel mode splits the corpus across
//! threads that update shared rows without locks; collisions may drop updates
//! and results are not reproducible, but every entry stays finite.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use num_traits::Float;
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::WeightedAliasIndex;

use crate::error::{Error, Result};
use crate::graph::{mix, WalkCorpus};
use crate::matches::PlayerId;

/// Floating point type usable for embedding storage.
pub trait Real: Float + Send + Sync + std::fmt::Debug + 'static {}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TrainingMode {
    #[default]
    Deterministic,
    /// Lock-free updates from `threads` workers.
    Parallel { threads: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingConfig {
    pub dim: usize,
    /// Window radius around each center node.
    pub context: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub noise_exponent: f64,
    /// Frequent-node subsampling threshold; `None` keeps every token.
    pub subsample: Option<f64>,
    pub seed: u64,
    pub mode: TrainingMode,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 300,
            context: 5,
            epochs: 5,
            negatives: 5,
            lr_start: 0.025,
            lr_end: 1e-4,
            noise_exponent: 0.75,
            subsample: None,
            seed: 0x6e10,
            mode: TrainingMode::Deterministic,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_owned()));
        if self.dim == 0 {
            return fail("dim must be at least 1");
        }
        if self.context == 0 {
            return fail("context must be at least 1");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.negatives == 0 {
            return fail("negatives must be at least 1");
        }
        if !(self.lr_end > 0.0 && self.lr_end <= self.lr_start && self.lr_start.is_finite()) {
            return fail("learning rates must satisfy 0 < lr_end <= lr_start");
        }
        if !self.noise_exponent.is_finite() {
            return fail("noise exponent must be finite");
        }
        if let Some(t) = self.subsample {
            if !(t > 0.0 && t.is_finite()) {
                return fail("subsample threshold must be positive");
            }
        }
        if let TrainingMode::Parallel { threads: 0 } = self.mode {
            return fail("parallel mode needs at least one thread");
        }
        Ok(())
    }
}

/// Learned input-side embeddings, one row per player.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix<F = f32> {
    ids: Vec<PlayerId>,
    index: HashMap<PlayerId, usize>,
    dim: usize,
    data: Vec<F>,
}

impl<F: Real> EmbeddingMatrix<F> {
    pub fn from_rows(rows: Vec<(PlayerId, Vec<F>)>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.1.len());
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        let mut index = HashMap::with_capacity(rows.len());
        for (id, row) in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch(dim, row.len()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("embedding row"));
            }
            if index.insert(id.clone(), ids.len()).is_some() {
                return Err(Error::Config(format!("duplicate embedding row for {id}")));
            }
            ids.push(id);
            data.extend(row);
        }
        Ok(EmbeddingMatrix { ids, index, dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[PlayerId] {
        &self.ids
    }

    pub fn row(&self, id: &PlayerId) -> Option<&[F]> {
        self.index
            .get(id)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn rows(&self) -> impl Iterator<Item = (&PlayerId, &[F])> {
        self.ids.iter().zip(self.data.chunks_exact(self.dim.max(1)))
    }

    /// Absolute cosine similarity between two players' rows.
    pub fn similarity(&self, a: &PlayerId, b: &PlayerId) -> Result<f64> {
        let ra = self.row(a).ok_or_else(|| Error::MissingEmbedding(a.clone()))?;
        let rb = self.row(b).ok_or_else(|| Error::MissingEmbedding(b.clone()))?;
        cosm(ra, rb)
    }

    /// Writes the word2vec text format: `N d` then `id v1 .. vd` per row.
    pub fn write_word2vec<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        let mut line = String::new();
        for (id, row) in self.rows() {
            line.clear();
            line.push_str(id.as_str());
            for v in row {
                line.push(' ');
                line.push_str(&format_sig6(v.to_f64().unwrap_or(f64::NAN)));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Reads the word2vec text format.
    pub fn read_word2vec<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let (count, dim) = match lines.next() {
            Some((_, header)) => {
                let header = header?;
                let nums: Vec<usize> = header
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| parse_err(1, format!("bad header {header:?}")))?;
                match nums[..] {
                    [n, d] => (n, d),
                    _ => return Err(parse_err(1, "header must be `N d`".into())),
                }
            }
            None => return Err(parse_err(1, "missing header".into())),
        };
        let mut rows = Vec::with_capacity(count);
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let id = PlayerId::new(parts.next().unwrap_or_default())?;
            let row: Vec<F> = parts
                .map(|v| v.parse::<f64>().ok().and_then(F::from))
                .collect::<Option<_>>()
                .ok_or_else(|| parse_err(idx + 1, "bad vector entry".into()))?;
            if row.len() != dim {
                return Err(parse_err(
                    idx + 1,
                    format!("expected {dim} values, found {}", row.len()),
                ));
            }
            rows.push((id, row));
        }
        if rows.len() != count {
            return Err(parse_err(
                1,
                format!("header promises {count} rows, found {}", rows.len()),
            ));
        }
        EmbeddingMatrix::from_rows(rows)
    }
}

/// Absolute cosine similarity `|a·b| / (‖a‖‖b‖)`, in `[0, 1]`.
pub fn cosm<F: Real>(a: &[F], b: &[F]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x.to_f64().unwrap_or(f64::NAN), y.to_f64().unwrap_or(f64::NAN));
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::ZeroVector);
    }
    // sqrt of the product keeps cosm(a, a) exactly 1
    let norms = match (aa * bb).sqrt() {
        n if n.is_finite() => n,
        _ => aa.sqrt() * bb.sqrt(),
    };
    let c = (ab / norms).abs();
    if !c.is_finite() {
        return Err(Error::NonFinite("cosm"));
    }
    Ok(c.min(1.0))
}

/// One skip-gram training example with its sampled negatives.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    pub center: PlayerId,
    pub positive: PlayerId,
    pub negatives: Vec<PlayerId>,
}

/// Center/context index pairs of one walk: every position paired with every
/// other position at most `radius` away.
pub fn walk_pairs(walk: &[u32], radius: usize) -> impl Iterator<Item = (u32, u32)> + '_ {
    (0..walk.len()).flat_map(move |p| {
        let lo = p.saturating_sub(radius);
        let hi = (p + radius).min(walk.len() - 1);
        (lo..=hi).filter(move |&q| q != p).map(move |q| (walk[p], walk[q]))
    })
}

/// All `(center, positive)` pairs of the corpus, walk by walk.
pub fn extract_pairs(corpus: &WalkCorpus, radius: usize) -> impl Iterator<Item = (&PlayerId, &PlayerId)> {
    let vocab = corpus.vocab();
    corpus
        .walks()
        .iter()
        .flat_map(move |w| walk_pairs(w, radius))
        .map(move |(c, p)| (&vocab[c as usize], &vocab[p as usize]))
}

fn pair_count(len: usize, radius: usize) -> u64 {
    (0..len)
        .map(|p| (p.min(radius) + (len - 1 - p).min(radius)) as u64)
        .sum()
}

/// Trainer state: input rows (the embeddings) and output rows.
#[derive(Clone, Debug)]
pub struct SkipGramModel<F = f32> {
    ids: Vec<PlayerId>,
    index: HashMap<PlayerId, usize>,
    dim: usize,
    input: Vec<F>,
    output: Vec<F>,
}

impl<F: Real> SkipGramModel<F> {
    /// Input rows uniform in `[-0.5/d, 0.5/d]`, output rows zero.
    pub fn new<R: Rng + ?Sized>(ids: Vec<PlayerId>, dim: usize, rng: &mut R) -> Self {
        let half = 0.5 / dim as f64;
        let input = (0..ids.len() * dim)
            .map(|_| F::from(rng.gen_range(-half..=half)).unwrap())
            .collect();
        let output = vec![F::zero(); ids.len() * dim];
        let index = ids.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        SkipGramModel {
            ids,
            index,
            dim,
            input,
            output,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_row(&self, id: &PlayerId) -> Option<&[F]> {
        let i = *self.index.get(id)?;
        Some(&self.input[i * self.dim..(i + 1) * self.dim])
    }

    pub fn output_row(&self, id: &PlayerId) -> Option<&[F]> {
        let i = *self.index.get(id)?;
        Some(&self.output[i * self.dim..(i + 1) * self.dim])
    }

    pub fn input_row_mut(&mut self, id: &PlayerId) -> Option<&mut [F]> {
        let i = *self.index.get(id)?;
        Some(&mut self.input[i * self.dim..(i + 1) * self.dim])
    }

    pub fn output_row_mut(&mut self, id: &PlayerId) -> Option<&mut [F]> {
        let i = *self.index.get(id)?;
        Some(&mut self.output[i * self.dim..(i + 1) * self.dim])
    }

    fn idx(&self, id: &PlayerId) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownPlayer(id.clone()))
    }

    /// One ascent step on the example; returns the loss before the step.
    pub fn sgns_step(&mut self, ex: &TrainingExample, lr: F) -> Result<F> {
        let center = self.idx(&ex.center)?;
        let mut targets = Vec::with_capacity(ex.negatives.len() + 1);
        targets.push(self.idx(&ex.positive)?);
        for n in &ex.negatives {
            targets.push(self.idx(n)?);
        }
        let mut scratch = Scratch::new(self.dim);
        let dim = self.dim;
        let (input, output) = (&mut self.input, &mut self.output);
        let mut rows = SliceRows { data: output, dim };
        sgns_update::<true, _, _>(
            &mut input[center * dim..(center + 1) * dim],
            &mut rows,
            &targets,
            lr,
            &mut scratch,
        )
    }

    pub fn into_embeddings(self) -> EmbeddingMatrix<F> {
        EmbeddingMatrix {
            ids: self.ids,
            index: self.index,
            dim: self.dim,
            data: self.input,
        }
    }
}

struct Scratch<F> {
    grad: Vec<F>,
    coeffs: Vec<F>,
}

impl<F: Real> Scratch<F> {
    fn new(dim: usize) -> Self {
        Scratch {
            grad: vec![F::zero(); dim],
            coeffs: Vec::new(),
        }
    }
}

/// Mutable access to output rows by index.
trait RowAccess<F> {
    fn row(&mut self, i: usize) -> &mut [F];
}

struct SliceRows<'a, F> {
    data: &'a mut [F],
    dim: usize,
}

impl<F> RowAccess<F> for SliceRows<'_, F> {
    #[inline(always)]
    fn row(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Shared matrix written by several threads without synchronization.
struct Hogwild<F> {
    ptr: *mut F,
    rows: usize,
    dim: usize,
}

// SAFETY: workers read and write rows concurrently and accept torn or lost
// updates; each element is a plain float, so every interleaving still leaves
// a valid value in memory. The backing Vec outlives all workers (scoped threads).
unsafe impl<F: Send> Send for Hogwild<F> {}
unsafe impl<F: Send> Sync for Hogwild<F> {}

impl<F> Hogwild<F> {
    fn new(data: &mut [F], dim: usize) -> Self {
        Hogwild {
            ptr: data.as_mut_ptr(),
            rows: data.len() / dim.max(1),
            dim,
        }
    }

    #[allow(clippy::mut_from_ref)]
    #[inline(always)]
    fn row(&self, i: usize) -> &mut [F] {
        assert!(i < self.rows);
        // SAFETY: in bounds; aliasing across threads is the lock-free contract above.
        unsafe { std::slice::from_raw_parts_mut(self.ptr.add(i * self.dim), self.dim) }
    }
}

struct HogwildRows<'a, F>(&'a Hogwild<F>);

impl<F> RowAccess<F> for HogwildRows<'_, F> {
    #[inline(always)]
    fn row(&mut self, i: usize) -> &mut [F] {
        self.0.row(i)
    }
}

const LANES: usize = 8;

/// `a * b + c`, fused when the kernel is compiled with FMA.
#[inline(always)]
fn madd<const FMA: bool, F: Real>(a: F, b: F, c: F) -> F {
    if FMA {
        a.mul_add(b, c)
    } else {
        a * b + c
    }
}

#[inline(always)]
fn dot<const FMA: bool, F: Real>(a: &[F], b: &[F]) -> F {
    let mut acc = [F::zero(); LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail: F = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .fold(F::zero(), |s, (&x, &y)| madd::<FMA, F>(x, y, s));
    for (x, y) in ca.zip(cb) {
        for k in 0..LANES {
            acc[k] = madd::<FMA, F>(x[k], y[k], acc[k]);
        }
    }
    acc.iter().fold(tail, |s, &v| s + v)
}

/// `grad += g * row; row += step * center`, reading `row` before writing it.
#[inline(always)]
fn fused_update<const FMA: bool, F: Real>(grad: &mut [F], row: &mut [F], g: F, step: F, center: &[F]) {
    for ((gi, ri), &ci) in grad.iter_mut().zip(row.iter_mut()).zip(center) {
        let r = *ri;
        *gi = madd::<FMA, F>(g, r, *gi);
        *ri = madd::<FMA, F>(step, ci, r);
    }
}

#[inline(always)]
fn axpy<const FMA: bool, F: Real>(y: &mut [F], alpha: F, x: &[F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = madd::<FMA, F>(alpha, xi, *yi);
    }
}

#[inline(always)]
fn log_sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline(always)]
fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Core update. `targets[0]` is the positive, the rest negatives. All scores
/// are computed before any row changes, so the step follows the exact
/// gradient at the current point.
///
/// Returns the loss before the step when `LOSS` is set, zero otherwise.
/// On x86-64 the kernel is compiled again for AVX2 and AVX-512 and picked at
/// run time.
fn sgns_update<const LOSS: bool, F: Real, R: RowAccess<F>>(
    center: &mut [F],
    rows: &mut R,
    targets: &[usize],
    lr: F,
    scratch: &mut Scratch<F>,
) -> Result<F> {
    #[cfg(target_arch = "x86_64")]
    {
        let fma = std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma");
        if fma && std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: the required CPU features were detected above.
            return unsafe { sgns_update_avx512::<LOSS, _, _>(center, rows, targets, lr, scratch) };
        }
        if fma {
            // SAFETY: as above.
            return unsafe { sgns_update_avx2::<LOSS, _, _>(center, rows, targets, lr, scratch) };
        }
    }
    sgns_update_portable::<LOSS, false, _, _>(center, rows, targets, lr, scratch)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f,avx2,fma")]
unsafe fn sgns_update_avx512<const LOSS: bool, F: Real, R: RowAccess<F>>(
    center: &mut [F],
    rows: &mut R,
    targets: &[usize],
    lr: F,
    scratch: &mut Scratch<F>,
) -> Result<F> {
    sgns_update_portable::<LOSS, true, _, _>(center, rows, targets, lr, scratch)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn sgns_update_avx2<const LOSS: bool, F: Real, R: RowAccess<F>>(
    center: &mut [F],
    rows: &mut R,
    targets: &[usize],
    lr: F,
    scratch: &mut Scratch<F>,
) -> Result<F> {
    sgns_update_portable::<LOSS, true, _, _>(center, rows, targets, lr, scratch)
}

#[inline(always)]
fn sgns_update_portable<const LOSS: bool, const FMA: bool, F: Real, R: RowAccess<F>>(
    center: &mut [F],
    rows: &mut R,
    targets: &[usize],
    lr: F,
    scratch: &mut Scratch<F>,
) -> Result<F> {
    let mut loss = F::zero();
    let mut finite = true;
    scratch.coeffs.clear();
    for (n, &t) in targets.iter().enumerate() {
        let score = dot::<FMA, F>(center, rows.row(t));
        finite &= score.is_finite();
        let positive = n == 0;
        if LOSS {
            loss = loss - log_sigmoid(if positive { score } else { -score });
        }
        let s = sigmoid(score);
        scratch.coeffs.push(if positive { F::one() - s } else { -s });
    }
    if !finite || !loss.is_finite() {
        return Err(Error::NonFinite("skip-gram gradient"));
    }
    scratch.grad.iter_mut().for_each(|g| *g = F::zero());
    let distinct = targets.iter().enumerate().all(|(i, t)| !targets[..i].contains(t));
    if distinct {
        // each row is read once before its own update, and the center row
        // only changes at the end, so this fused pass is still exact
        for (&t, &g) in targets.iter().zip(&scratch.coeffs) {
            fused_update::<FMA, F>(&mut scratch.grad, rows.row(t), g, lr * g, center);
        }
    } else {
        for (&t, &g) in targets.iter().zip(&scratch.coeffs) {
            axpy::<FMA, F>(&mut scratch.grad, g, rows.row(t));
        }
        for (&t, &g) in targets.iter().zip(&scratch.coeffs) {
            axpy::<FMA, F>(rows.row(t), lr * g, center);
        }
    }
    axpy::<FMA, F>(center, lr, &scratch.grad);
    Ok(loss)
}

/// Unigram^exponent noise distribution over the corpus vocabulary.
struct NoiseSampler {
    alias: Option<WeightedAliasIndex<f64>>,
    weights: Vec<f64>,
    total: f64,
}

impl NoiseSampler {
    fn new(counts: &[u64], exponent: f64) -> Self {
        let weights: Vec<f64> = counts
            .iter()
            .map(|&c| if c == 0 { 0.0 } else { (c as f64).powf(exponent) })
            .collect();
        let total = weights.iter().sum();
        NoiseSampler {
            alias: WeightedAliasIndex::new(weights.clone()).ok(),
            weights,
            total,
        }
    }

    /// Fills `out` with negatives distinct from `center` and `positive`.
    /// Leaves it empty when no other node carries noise mass.
    fn sample_into<R: Rng>(&self, rng: &mut R, center: usize, positive: usize, k: usize, out: &mut Vec<usize>) {
        out.clear();
        let alias = match &self.alias {
            Some(a) => a,
            None => return,
        };
        let mut excluded = self.weights[center];
        if positive != center {
            excluded += self.weights[positive];
        }
        if self.total - excluded <= self.total * 1e-12 {
            return;
        }
        while out.len() < k {
            let n = alias.sample(rng);
            if n != center && n != positive {
                out.push(n);
            }
        }
    }
}

fn token_counts(corpus: &WalkCorpus) -> Vec<u64> {
    let mut counts = vec![0u64; corpus.vocab().len()];
    for w in corpus.walks() {
        for &t in w {
            counts[t as usize] += 1;
        }
    }
    counts
}

/// Keeps each token with probability `sqrt(t / f)` capped at 1, where `f` is
/// the token's corpus frequency.
fn subsample_walk<R: Rng>(walk: &[u32], keep: &[f64], rng: &mut R, out: &mut Vec<u32>) {
    out.clear();
    out.extend(walk.iter().copied().filter(|&t| rng.gen::<f64>() < keep[t as usize]));
}

fn keep_probabilities(counts: &[u64], threshold: Option<f64>) -> Option<Vec<f64>> {
    let t = threshold?;
    let total: u64 = counts.iter().sum();
    Some(
        counts
            .iter()
            .map(|&c| {
                let f = c as f64 / total as f64;
                if f == 0.0 {
                    1.0
                } else {
                    (t / f).sqrt().min(1.0)
                }
            })
            .collect(),
    )
}

/// Trains embeddings for every node in the corpus vocabulary.
pub fn train<F: Real>(corpus: &WalkCorpus, cfg: &EmbeddingConfig) -> Result<EmbeddingMatrix<F>> {
    cfg.validate()?;
    if corpus.is_empty() || corpus.vocab().is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let counts = token_counts(corpus);
    let noise = NoiseSampler::new(&counts, cfg.noise_exponent);
    let keep = keep_probabilities(&counts, cfg.subsample);
    let per_epoch: u64 = corpus.walks().iter().map(|w| pair_count(w.len(), cfg.context)).sum();
    let total_steps = (per_epoch * cfg.epochs as u64).max(1);

    let mut init_rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0x1417));
    let mut model = SkipGramModel::<F>::new(corpus.vocab().to_vec(), cfg.dim, &mut init_rng);
    let schedule = LrSchedule {
        start: cfg.lr_start,
        end: cfg.lr_end,
        total: total_steps,
    };

    match cfg.mode {
        TrainingMode::Deterministic => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0x7a1e));
            let dim = model.dim;
            let mut rows = SliceRows {
                data: &mut model.output,
                dim,
            };
            let walks: Vec<&[u32]> = corpus.walks().iter().map(Vec::as_slice).collect();
            let mut worker = Worker::new(cfg, &noise, keep.as_deref(), dim);
            let mut step = 0u64;
            for _ in 0..cfg.epochs {
                for walk in &walks {
                    worker.walk(walk, &mut rng, |center, targets, scratch| {
                        let lr = F::from(schedule.at(step)).unwrap();
                        step += 1;
                        sgns_update::<false, _, _>(
                            &mut model.input[center * dim..(center + 1) * dim],
                            &mut rows,
                            targets,
                            lr,
                            scratch,
                        )
                        .map(|_| ())
                    })?;
                }
            }
        }
        TrainingMode::Parallel { threads } => {
            train_parallel(&mut model, corpus, cfg, threads, &noise, keep.as_deref(), schedule)?;
            if model.input.iter().chain(&model.output).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("parallel training"));
            }
        }
    }
    Ok(model.into_embeddings())
}

#[derive(Clone, Copy)]
struct LrSchedule {
    start: f64,
    end: f64,
    total: u64,
}

impl LrSchedule {
    fn at(&self, step: u64) -> f64 {
        let frac = (step as f64 / self.total as f64).min(1.0);
        (self.start - (self.start - self.end) * frac).max(self.end)
    }
}

/// Per-thread pair extraction and negative sampling.
struct Worker<'a, F> {
    radius: usize,
    negatives: usize,
    noise: &'a NoiseSampler,
    keep: Option<&'a [f64]>,
    tokens: Vec<u32>,
    targets: Vec<usize>,
    negs: Vec<usize>,
    scratch: Scratch<F>,
}

impl<'a, F: Real> Worker<'a, F> {
    fn new(cfg: &EmbeddingConfig, noise: &'a NoiseSampler, keep: Option<&'a [f64]>, dim: usize) -> Self {
        Worker {
            radius: cfg.context,
            negatives: cfg.negatives,
            noise,
            keep,
            tokens: Vec::new(),
            targets: Vec::with_capacity(cfg.negatives + 1),
            negs: Vec::with_capacity(cfg.negatives),
            scratch: Scratch::new(dim),
        }
    }

    fn walk<R: Rng>(
        &mut self,
        walk: &[u32],
        rng: &mut R,
        mut apply: impl FnMut(usize, &[usize], &mut Scratch<F>) -> Result<()>,
    ) -> Result<()> {
        let mut tokens = std::mem::take(&mut self.tokens);
        match self.keep {
            Some(keep) => subsample_walk(walk, keep, rng, &mut tokens),
            None => {
                tokens.clear();
                tokens.extend_from_slice(walk);
            }
        }
        let result = (|| {
            if tokens.is_empty() {
                return Ok(());
            }
            for (c, p) in walk_pairs(&tokens, self.radius) {
                let (c, p) = (c as usize, p as usize);
                self.noise.sample_into(rng, c, p, self.negatives, &mut self.negs);
                self.targets.clear();
                self.targets.push(p);
                self.targets.extend_from_slice(&self.negs);
                apply(c, &self.targets, &mut self.scratch)?;
            }
            Ok(())
        })();
        self.tokens = tokens;
        result
    }
}

fn train_parallel<F: Real>(
    model: &mut SkipGramModel<F>,
    corpus: &WalkCorpus,
    cfg: &EmbeddingConfig,
    threads: usize,
    noise: &NoiseSampler,
    keep: Option<&[f64]>,
    schedule: LrSchedule,
) -> Result<()> {
    let dim = model.dim;
    let input = Hogwild::new(&mut model.input, dim);
    let output = Hogwild::new(&mut model.output, dim);
    let progress = AtomicU64::new(0);
    let walks = corpus.walks();

    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let (input, output, progress) = (&input, &output, &progress);
                scope.spawn(move || -> Result<()> {
                    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0xa11e + t as u64));
                    let mut worker = Worker::<F>::new(cfg, noise, keep, dim);
                    let mut rows = HogwildRows(output);
                    let mut pending = 0u64;
                    for _ in 0..cfg.epochs {
                        for walk in walks.iter().skip(t).step_by(threads) {
                            worker.walk(walk, &mut rng, |center, targets, scratch| {
                                let seen = progress.load(Ordering::Relaxed) + pending;
                                let lr = F::from(schedule.at(seen)).unwrap();
                                pending += 1;
                                if pending == 1024 {
                                    progress.fetch_add(pending, Ordering::Relaxed);
                                    pending = 0;
                                }
                                // Lost updates can push scores out of range; skip those steps.
                                match sgns_update::<false, _, _>(input.row(center), &mut rows, targets, lr, scratch) {
                                    Ok(_) | Err(Error::NonFinite(_)) => Ok(()),
                                    Err(e) => Err(e),
                                }
                            })?;
                        }
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("embedding worker panicked"))
            .collect::<Result<Vec<()>>>()
    })?;
    Ok(())
}

/// Formats like C's `%g`: six significant digits, trailing zeros trimmed.
pub fn format_sig6(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_owned()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
