//! Embedding and composition-tensor objectives and their training loops.
//!
//! Embeddings fit `log X[w, a] ~ ||v_w + v_a||^2 + C` over window pair counts.
//! The tensor then fits
//!
//! ```text
//! sum f(X) (log X[(a,b),w] - ||v_w + v_a + v_b + T(v_a, v_b, .)||^2 - C_a - C)^2
//! ```
//!
//! over triple counts with `f(x) = min(x, cap)`. Neither norm carries a `1/2d`
//! factor; the learned scales absorb it. Sums run over observed cells only.
//!
//! Training uses Adam over shuffled mini-batches. With `threads == 1` the
//! whole run is deterministic for a given seed; with more threads each batch
//! gradient is split into contiguous chunks whose partial sums are added in
//! chunk order before the (single) parameter update.

use std::collections::BTreeMap;
use std::io::Write;
use std::thread;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cooccur::{PairCounts, TripleCounts};
use crate::embedding::EmbeddingMatrix;
use crate::error::{check_dim, Checkpoint, Error, Result};
use crate::linalg::{axpy, dot, norm_sq};
use crate::optim::{Adam, AdamConfig};
use crate::tensor::CpTensor;

/// Loss weight ceiling used throughout.
pub const DEFAULT_CAP: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub cp_rank: usize,
    pub cap: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub init_scale: f64,
    /// Worker threads for batch gradients; 1 means deterministic mode.
    pub threads: usize,
    /// Also update the embeddings while training the tensor.
    pub joint: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            dim: 300,
            cp_rank: 1000,
            cap: DEFAULT_CAP,
            learning_rate: adam.learning_rate,
            epochs: 5,
            batch_size: 1024,
            seed: 0,
            init_scale: 0.1,
            threads: 1,
            joint: false,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim as f64),
            ("cap", self.cap),
            ("learning_rate", self.learning_rate),
            ("batch_size", self.batch_size as f64),
            ("init_scale", self.init_scale),
            ("threads", self.threads as f64),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }

    pub fn deterministic(&self) -> bool {
        self.threads <= 1
    }
}

/// `f(x) = min(x, cap)`.
pub fn loss_weight(x: f64, cap: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("loss weight needs a nonnegative count, got {x}")));
    }
    Ok(x.min(cap))
}

/// One observed window pair cell `{i, j}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCell {
    pub i: u32,
    pub j: u32,
    pub count: f64,
}

/// One observed triple cell: root `a`, dependent `b`, context `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleCell {
    pub a: u32,
    pub b: u32,
    pub w: u32,
    pub count: f64,
}

/// Nonzero cells in key order.
pub fn pair_cells(counts: &PairCounts) -> Vec<PairCell> {
    counts.sorted().into_iter().filter(|e| e.1 > 0.0).map(|((i, j), count)| PairCell { i, j, count }).collect()
}

pub fn triple_cells(counts: &TripleCounts) -> Vec<TripleCell> {
    counts
        .sorted()
        .into_iter()
        .filter(|e| e.1 > 0.0)
        .map(|((a, b, w), count)| TripleCell { a, b, w, count })
        .collect()
}

fn check_ids(ids: impl Iterator<Item = u32>, n: usize) -> Result<()> {
    for id in ids {
        if id as usize >= n {
            return Err(Error::InvalidArgument(format!("word id {id} out of range for {n} vectors")));
        }
    }
    Ok(())
}

fn weight(count: f64, cap: f64) -> f64 {
    count.min(cap)
}

/// Embedding loss over explicit cells.
pub fn embedding_loss_cells(emb: &EmbeddingMatrix, cells: &[PairCell], cap: f64) -> Result<f64> {
    check_ids(cells.iter().flat_map(|c| [c.i, c.j]), emb.len())?;
    let mut s = vec![0.0; emb.dim()];
    Ok(cells
        .iter()
        .map(|c| {
            s.copy_from_slice(emb.row(c.i));
            axpy(1.0, emb.row(c.j), &mut s);
            let r = c.count.ln() - norm_sq(&s) - emb.offset;
            weight(c.count, cap) * r * r
        })
        .sum())
}

/// `sum f(X) (log X - ||v_i + v_j||^2 - C)^2` over every nonzero pair cell.
pub fn embedding_loss(emb: &EmbeddingMatrix, counts: &PairCounts, cap: f64) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::InsufficientData("pair counts are empty".into()));
    }
    embedding_loss_cells(emb, &pair_cells(counts), cap)
}

/// Sparse gradient of the embedding loss.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingGradient {
    pub rows: BTreeMap<u32, Vec<f64>>,
    pub offset: f64,
}

impl EmbeddingGradient {
    fn merge(&mut self, other: EmbeddingGradient) {
        for (id, g) in other.rows {
            match self.rows.get_mut(&id) {
                Some(row) => axpy(1.0, &g, row),
                None => {
                    self.rows.insert(id, g);
                }
            }
        }
        self.offset += other.offset;
    }
}

fn row_entry(rows: &mut BTreeMap<u32, Vec<f64>>, id: u32, d: usize) -> &mut Vec<f64> {
    rows.entry(id).or_insert_with(|| vec![0.0; d])
}

pub fn embedding_gradient(emb: &EmbeddingMatrix, cells: &[PairCell], cap: f64) -> Result<EmbeddingGradient> {
    check_ids(cells.iter().flat_map(|c| [c.i, c.j]), emb.len())?;
    Ok(embedding_gradient_unchecked(emb, cells, cap))
}

fn embedding_gradient_unchecked(emb: &EmbeddingMatrix, cells: &[PairCell], cap: f64) -> EmbeddingGradient {
    let d = emb.dim();
    let mut g = EmbeddingGradient::default();
    let mut s = vec![0.0; d];
    for c in cells {
        s.copy_from_slice(emb.row(c.i));
        axpy(1.0, emb.row(c.j), &mut s);
        let f = weight(c.count, cap);
        let r = c.count.ln() - norm_sq(&s) - emb.offset;
        // d/ds of f r^2 is -4 f r s, and s moves one-for-one with both rows
        let k = -4.0 * f * r;
        axpy(k, &s, row_entry(&mut g.rows, c.i, d));
        axpy(k, &s, row_entry(&mut g.rows, c.j, d));
        g.offset += -2.0 * f * r;
    }
    g
}

/// Per-cell quantities shared by the tensor loss and its gradient.
struct TripleEval {
    /// `<a_r, v_a>`
    u: Vec<f64>,
    /// `<b_r, v_b>`
    p: Vec<f64>,
    /// `v_w + v_a + v_b + T(v_a, v_b, .)`
    composite: Vec<f64>,
    residual: f64,
}

fn eval_triple(t: &CpTensor, emb: &EmbeddingMatrix, c: &TripleCell) -> TripleEval {
    let (va, vb, vw) = (emb.row(c.a), emb.row(c.b), emb.row(c.w));
    let mut composite = vw.to_vec();
    axpy(1.0, va, &mut composite);
    axpy(1.0, vb, &mut composite);
    let rank = t.rank();
    let mut u = Vec::with_capacity(rank);
    let mut p = Vec::with_capacity(rank);
    for r in 0..rank {
        let ur = dot(t.a(r), va);
        let pr = dot(t.b(r), vb);
        axpy(t.weights()[r] * ur * pr, t.c(r), &mut composite);
        u.push(ur);
        p.push(pr);
    }
    let residual = c.count.ln() - norm_sq(&composite) - t.root_bias_of(c.a) - t.global_bias;
    TripleEval { u, p, composite, residual }
}

pub fn tensor_loss_cells(t: &CpTensor, emb: &EmbeddingMatrix, cells: &[TripleCell], cap: f64) -> Result<f64> {
    check_dim(emb.dim(), t.dim())?;
    check_ids(cells.iter().flat_map(|c| [c.a, c.b, c.w]), emb.len())?;
    Ok(cells
        .iter()
        .map(|c| {
            let e = eval_triple(t, emb, c);
            weight(c.count, cap) * e.residual * e.residual
        })
        .sum())
}

/// The weighted log-squared tensor objective over every nonzero triple cell.
/// Root words without a stored bias contribute `C_a = 0`.
pub fn tensor_loss(t: &CpTensor, emb: &EmbeddingMatrix, counts: &TripleCounts, cap: f64) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::InsufficientData("triple counts are empty".into()));
    }
    tensor_loss_cells(t, emb, &triple_cells(counts), cap)
}

/// Gradient of the tensor objective restricted to a batch. Factor blocks are
/// row-major `rank x dim`, like the tensor's own storage. `embeddings` is
/// filled only when requested (joint training).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGradient {
    pub weights: Vec<f64>,
    pub factor_a: Vec<f64>,
    pub factor_b: Vec<f64>,
    pub factor_c: Vec<f64>,
    pub root_bias: BTreeMap<u32, f64>,
    pub global_bias: f64,
    pub embeddings: Option<BTreeMap<u32, Vec<f64>>>,
}

impl TensorGradient {
    fn zeros(rank: usize, dim: usize, with_embeddings: bool) -> Self {
        Self {
            weights: vec![0.0; rank],
            factor_a: vec![0.0; rank * dim],
            factor_b: vec![0.0; rank * dim],
            factor_c: vec![0.0; rank * dim],
            root_bias: BTreeMap::new(),
            global_bias: 0.0,
            embeddings: with_embeddings.then(BTreeMap::new),
        }
    }

    fn merge(&mut self, other: TensorGradient) {
        axpy(1.0, &other.weights, &mut self.weights);
        axpy(1.0, &other.factor_a, &mut self.factor_a);
        axpy(1.0, &other.factor_b, &mut self.factor_b);
        axpy(1.0, &other.factor_c, &mut self.factor_c);
        for (a, g) in other.root_bias {
            *self.root_bias.entry(a).or_insert(0.0) += g;
        }
        self.global_bias += other.global_bias;
        if let (Some(mine), Some(theirs)) = (self.embeddings.as_mut(), other.embeddings) {
            for (id, g) in theirs {
                match mine.get_mut(&id) {
                    Some(row) => axpy(1.0, &g, row),
                    None => {
                        mine.insert(id, g);
                    }
                }
            }
        }
    }
}

pub fn tensor_gradient(
    t: &CpTensor,
    emb: &EmbeddingMatrix,
    cells: &[TripleCell],
    cap: f64,
    with_embeddings: bool,
) -> Result<TensorGradient> {
    check_dim(emb.dim(), t.dim())?;
    check_ids(cells.iter().flat_map(|c| [c.a, c.b, c.w]), emb.len())?;
    Ok(tensor_gradient_unchecked(t, emb, cells, cap, with_embeddings))
}

fn tensor_gradient_unchecked(
    t: &CpTensor,
    emb: &EmbeddingMatrix,
    cells: &[TripleCell],
    cap: f64,
    with_embeddings: bool,
) -> TensorGradient {
    let d = t.dim();
    let mut g = TensorGradient::zeros(t.rank(), d, with_embeddings);
    for c in cells {
        let e = eval_triple(t, emb, c);
        let f = weight(c.count, cap);
        let k = -4.0 * f * e.residual;
        // q = dL/d(composite)
        let q: Vec<f64> = e.composite.iter().map(|x| k * x).collect();
        let (va, vb) = (emb.row(c.a), emb.row(c.b));
        let mut ga = with_embeddings.then(|| q.clone());
        let mut gb = with_embeddings.then(|| q.clone());
        for r in 0..t.rank() {
            let lam = t.weights()[r];
            let (ur, pr) = (e.u[r], e.p[r]);
            let cq = dot(t.c(r), &q);
            g.weights[r] += ur * pr * cq;
            axpy(lam * pr * cq, va, &mut g.factor_a[r * d..(r + 1) * d]);
            axpy(lam * ur * cq, vb, &mut g.factor_b[r * d..(r + 1) * d]);
            axpy(lam * ur * pr, &q, &mut g.factor_c[r * d..(r + 1) * d]);
            if let (Some(ga), Some(gb)) = (ga.as_mut(), gb.as_mut()) {
                axpy(lam * pr * cq, t.a(r), ga);
                axpy(lam * ur * cq, t.b(r), gb);
            }
        }
        *g.root_bias.entry(c.a).or_insert(0.0) += -2.0 * f * e.residual;
        g.global_bias += -2.0 * f * e.residual;
        if let Some(rows) = g.embeddings.as_mut() {
            axpy(1.0, &q, row_entry(rows, c.w, d));
            axpy(1.0, &ga.unwrap(), row_entry(rows, c.a, d));
            axpy(1.0, &gb.unwrap(), row_entry(rows, c.b, d));
        }
    }
    g
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub wallclock_s: f64,
}

/// Full-data loss before training (epoch 0) and after every epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch\tloss\twallclock_s")?;
        for r in &self.records {
            writeln!(w, "{}\t{}\t{:.3}", r.epoch, r.loss, r.wallclock_s)?;
        }
        Ok(())
    }

    pub fn initial_loss(&self) -> Option<f64> {
        self.records.first().map(|r| r.loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }
}

/// Splits `items` into at most `threads` contiguous chunks, maps each on its
/// own thread and returns the results in chunk order.
fn map_chunks<T: Sync, U: Send>(items: &[T], threads: usize, f: impl Fn(&[T]) -> U + Sync) -> Vec<U> {
    // below this size the spawn cost outweighs the work
    const MIN_CHUNK: usize = 256;
    let workers = threads.min(items.len() / MIN_CHUNK).max(1);
    if workers == 1 {
        return vec![f(items)];
    }
    let chunk = items.len().div_ceil(workers);
    thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = items.chunks(chunk).map(|c| scope.spawn(move || f(c))).collect();
        handles.into_iter().map(|h| h.join().expect("gradient worker panicked")).collect()
    })
}

fn parallel_sum(parts: Vec<f64>) -> f64 {
    parts.into_iter().sum()
}

fn diverged(epoch: usize, checkpoint: Checkpoint) -> Error {
    Error::Diverged { epoch, checkpoint: Box::new(checkpoint) }
}

/// Flattened row-major indices of the given rows.
fn row_indices(rows: impl Iterator<Item = u32>, d: usize, out: &mut Vec<usize>) {
    out.clear();
    for id in rows {
        let base = id as usize * d;
        out.extend(base..base + d);
    }
}

/// Random start used by [`train_embeddings`]: `N(0, init_scale^2)` entries.
pub fn init_embeddings(n: usize, config: &TrainConfig) -> Result<EmbeddingMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    EmbeddingMatrix::gaussian(n, config.dim, config.init_scale, &mut rng)
}

/// Trains embeddings from the random start of [`init_embeddings`].
pub fn train_embeddings(counts: &PairCounts, config: &TrainConfig) -> Result<EmbeddingMatrix> {
    let init = init_embeddings(counts.vocab_size(), config)?;
    Ok(train_embeddings_from(init, counts, config)?.0)
}

/// Mini-batch Adam on the embedding objective starting from `emb`. The offset
/// `C` starts at the weighted mean of `log X`.
pub fn train_embeddings_from(
    mut emb: EmbeddingMatrix,
    counts: &PairCounts,
    config: &TrainConfig,
) -> Result<(EmbeddingMatrix, TrainLog)> {
    config.validate()?;
    check_dim(config.dim, emb.dim())?;
    check_dim(counts.vocab_size(), emb.len())?;
    let cells = pair_cells(counts);
    if cells.is_empty() {
        return Err(Error::InsufficientData("pair counts are empty".into()));
    }
    let cap = config.cap;
    let (wsum, wlog) = cells.iter().fold((0.0, 0.0), |(s, l), c| {
        let f = weight(c.count, cap);
        (s + f, l + f * c.count.ln())
    });
    emb.offset = wlog / wsum;

    let d = emb.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x0e3b_ed00);
    let mut adam_rows = Adam::new(config.adam(), emb.as_slice().len());
    let mut adam_offset = Adam::new(config.adam(), 1);
    let mut order: Vec<usize> = (0..cells.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size.min(cells.len()));
    let mut dense = vec![0.0; emb.as_slice().len()];
    let mut touched = Vec::new();
    let loss_of = |emb: &EmbeddingMatrix| {
        parallel_sum(map_chunks(&cells, config.threads, |c| embedding_loss_cells(emb, c, cap).unwrap_or(f64::NAN)))
    };

    let start = Instant::now();
    let mut log = TrainLog::default();
    log.records.push(EpochRecord { epoch: 0, loss: loss_of(&emb), wallclock_s: 0.0 });
    for epoch in 1..=config.epochs {
        let checkpoint = emb.clone();
        order.shuffle(&mut rng);
        for idx in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(idx.iter().map(|&i| cells[i]));
            let mut g = EmbeddingGradient::default();
            for part in map_chunks(&batch, config.threads, |c| embedding_gradient_unchecked(&emb, c, cap)) {
                g.merge(part);
            }
            row_indices(g.rows.keys().copied(), d, &mut touched);
            for (id, row) in &g.rows {
                let base = *id as usize * d;
                dense[base..base + d].copy_from_slice(row);
            }
            adam_rows.step_indices(emb.as_mut_slice(), &dense, &touched);
            let mut offset = [emb.offset];
            adam_offset.step(&mut offset, &[g.offset]);
            emb.offset = offset[0];
        }
        let loss = loss_of(&emb);
        if !loss.is_finite() || !emb.is_finite() {
            return Err(diverged(epoch, Checkpoint::Embeddings(checkpoint)));
        }
        log.records.push(EpochRecord { epoch, loss, wallclock_s: start.elapsed().as_secs_f64() });
    }
    Ok((emb, log))
}

/// Random start for tensor training: unit weights, factor entries
/// `N(0, init_scale^2 / sqrt(d R))`, zero biases.
pub fn init_tensor(config: &TrainConfig) -> Result<CpTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let std = config.init_scale / ((config.dim * config.cp_rank.max(1)) as f64).powf(0.25);
    CpTensor::gaussian(config.dim, config.cp_rank, std, &mut rng)
}

/// Result of [`train_tensor_cells`].
#[derive(Debug, Clone)]
pub struct TensorTraining {
    pub tensor: CpTensor,
    /// Updated embeddings in joint mode.
    pub embeddings: Option<EmbeddingMatrix>,
    pub log: TrainLog,
}

pub fn train_tensor(counts: &TripleCounts, emb: &EmbeddingMatrix, config: &TrainConfig) -> Result<CpTensor> {
    Ok(train_tensor_cells(&triple_cells(counts), emb, init_tensor(config)?, config)?.tensor)
}

/// Mini-batch Adam on the tensor objective from `tensor`. Embeddings stay
/// frozen unless `config.joint` is set. Empty data returns the start
/// unchanged.
pub fn train_tensor_cells(
    cells: &[TripleCell],
    emb: &EmbeddingMatrix,
    mut tensor: CpTensor,
    config: &TrainConfig,
) -> Result<TensorTraining> {
    config.validate()?;
    check_dim(emb.dim(), tensor.dim())?;
    check_ids(cells.iter().flat_map(|c| [c.a, c.b, c.w]), emb.len())?;
    let mut emb = emb.clone();
    let joint = config.joint;
    let mut log = TrainLog::default();
    if cells.is_empty() {
        return Ok(TensorTraining { tensor, embeddings: joint.then_some(emb), log });
    }
    let cap = config.cap;
    let d = tensor.dim();
    let n = emb.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7e45_0a11);
    let rank = tensor.rank();
    let mut adam_blocks: Vec<Adam> =
        [rank, rank * d, rank * d, rank * d].iter().map(|&len| Adam::new(config.adam(), len)).collect();
    let mut adam_root = Adam::new(config.adam(), n);
    let mut adam_global = Adam::new(config.adam(), 1);
    let mut adam_emb = Adam::new(config.adam(), if joint { n * d } else { 0 });
    let mut root_dense: Vec<f64> = (0..n as u32).map(|a| tensor.root_bias_of(a)).collect();
    let mut root_grad = vec![0.0; n];
    let mut emb_grad = vec![0.0; if joint { n * d } else { 0 }];
    let mut touched = Vec::new();
    let mut order: Vec<usize> = (0..cells.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size.min(cells.len()));
    let loss_of = |t: &CpTensor, e: &EmbeddingMatrix| {
        parallel_sum(map_chunks(cells, config.threads, |c| tensor_loss_cells(t, e, c, cap).unwrap_or(f64::NAN)))
    };

    let start = Instant::now();
    log.records.push(EpochRecord { epoch: 0, loss: loss_of(&tensor, &emb), wallclock_s: 0.0 });
    for epoch in 1..=config.epochs {
        let checkpoint = tensor.clone();
        order.shuffle(&mut rng);
        for idx in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(idx.iter().map(|&i| cells[i]));
            let mut g = TensorGradient::zeros(rank, d, joint);
            for part in map_chunks(&batch, config.threads, |c| tensor_gradient_unchecked(&tensor, &emb, c, cap, joint)) {
                g.merge(part);
            }
            let grads = [&g.weights, &g.factor_a, &g.factor_b, &g.factor_c];
            for ((block, adam), grad) in tensor.blocks_mut().into_iter().zip(&mut adam_blocks).zip(grads) {
                adam.step(block, grad);
            }
            touched.clear();
            for (&a, &ga) in &g.root_bias {
                root_grad[a as usize] = ga;
                touched.push(a as usize);
            }
            adam_root.step_indices(&mut root_dense, &root_grad, &touched);
            for &a in &touched {
                tensor.root_bias.insert(a as u32, root_dense[a]);
            }
            let mut global = [tensor.global_bias];
            adam_global.step(&mut global, &[g.global_bias]);
            tensor.global_bias = global[0];
            if let Some(rows) = &g.embeddings {
                row_indices(rows.keys().copied(), d, &mut touched);
                for (id, row) in rows {
                    let base = *id as usize * d;
                    emb_grad[base..base + d].copy_from_slice(row);
                }
                adam_emb.step_indices(emb.as_mut_slice(), &emb_grad, &touched);
            }
        }
        let loss = loss_of(&tensor, &emb);
        if !loss.is_finite() || !tensor.is_finite() || !emb.is_finite() {
            return Err(diverged(epoch, Checkpoint::Tensor(checkpoint)));
        }
        log.records.push(EpochRecord { epoch, loss, wallclock_s: start.elapsed().as_secs_f64() });
    }
    Ok(TensorTraining { tensor, embeddings: joint.then_some(emb), log })
}

/// JSON sidecar written next to a trained tensor file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorMetadata {
    pub config: TrainConfig,
    /// Where triple context windows were centred.
    pub anchor: String,
    pub window: usize,
    /// Dependency label to relation mapping used when counting.
    pub relations: String,
    pub dim: usize,
    pub rank: usize,
    pub root_biases: usize,
    pub log: TrainLog,
}
