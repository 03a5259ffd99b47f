//! Partition functions, PMI / PMI3 estimates and the verification reports:
//! partition-function concentration, tensor boundedness and the check of
//! empirical PMI3 against `T(v_a, v_b, v_w) / d`.

use std::collections::BTreeMap;
use std::io::Write;
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cooccur::{PairCounts, TripleCounts};
use crate::embedding::EmbeddingMatrix;
use crate::error::{check_dim, Error, Result};
use crate::evaluation;
use crate::linalg::{self, dot, sample_unit_sphere};
use crate::tensor::CpTensor;

/// Histogram range for `Z / mean(Z)`.
pub const HISTOGRAM_LO: f64 = 0.5;
pub const HISTOGRAM_HI: f64 = 1.5;
pub const HISTOGRAM_BUCKETS: usize = 40;

/// A partition function kept in log space so that it never overflows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub log_value: f64,
}

impl Partition {
    /// The value itself, or `None` when it is not representable as an `f64`.
    pub fn value(&self) -> Option<f64> {
        let v = self.log_value.exp();
        (v.is_finite() && v > 0.0).then_some(v)
    }
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

fn partition_along(direction: &[f64], emb: &EmbeddingMatrix) -> Result<Partition> {
    if emb.is_empty() {
        return Err(Error::InvalidArgument("partition function over an empty vocabulary".into()));
    }
    linalg::check_finite(direction, "discourse vector")?;
    Ok(Partition { log_value: log_sum_exp(&emb.rows().map(|v| dot(v, direction)).collect::<Vec<_>>()) })
}

/// `Z_c = sum_w exp(<v_w, c>)`.
pub fn partition(c: &[f64], emb: &EmbeddingMatrix) -> Result<Partition> {
    check_dim(emb.dim(), c.len())?;
    partition_along(c, emb)
}

/// `Z_{c,a} = sum_w exp(<c, v_w> + T(v_a, v_w, c))`, using
/// `<c, v_w> + T(v_a, v_w, c) = <v_w, c + T(v_a, ., c)>`.
pub fn partition_syntactic(c: &[f64], a: u32, emb: &EmbeddingMatrix, tensor: &CpTensor) -> Result<Partition> {
    check_dim(emb.dim(), c.len())?;
    check_dim(emb.dim(), tensor.dim())?;
    let mut direction = tensor.contract_first_third(emb.get(a)?, c)?;
    linalg::axpy(1.0, c, &mut direction);
    partition_along(&direction, emb)
}

/// Counts of `value / mean` in equal buckets over `[lo, hi)`, plus the mass
/// that fell outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub buckets: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, buckets: usize) -> Self {
        Self { lo, hi, buckets: vec![0; buckets], underflow: 0, overflow: 0 }
    }

    pub fn add(&mut self, x: f64) {
        if x < self.lo {
            self.underflow += 1;
        } else if x >= self.hi {
            self.overflow += 1;
        } else {
            let width = (self.hi - self.lo) / self.buckets.len() as f64;
            let i = (((x - self.lo) / width) as usize).min(self.buckets.len() - 1);
            self.buckets[i] += 1;
        }
    }

    pub fn mass(&self) -> u64 {
        self.buckets.iter().sum::<u64>() + self.underflow + self.overflow
    }

    /// `lo  hi  count` rows; the outlier rows use infinite edges.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lo\thi\tcount")?;
        writeln!(w, "-inf\t{}\t{}", self.lo, self.underflow)?;
        let width = (self.hi - self.lo) / self.buckets.len() as f64;
        for (i, c) in self.buckets.iter().enumerate() {
            let lo = self.lo + i as f64 * width;
            writeln!(w, "{:.4}\t{:.4}\t{c}", lo, lo + width)?;
        }
        writeln!(w, "{}\tinf\t{}", self.hi, self.overflow)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    /// Root word for `Z_{c,a}`; `None` for `Z_c`.
    pub word: Option<u32>,
    pub num_samples: usize,
    pub log_mean: f64,
    /// `exp(log_mean)` when representable.
    pub mean: Option<f64>,
    pub coeff_variation: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub histogram: Histogram,
}

/// Samples `num_samples` uniform unit vectors `c` and summarizes `Z_c`, or
/// `Z_{c,a}` when a root word is given. Sample `i` draws from stream `i` of a
/// generator seeded with `seed`, so results do not depend on `threads`.
pub fn concentration_report(
    emb: &EmbeddingMatrix,
    tensor: Option<&CpTensor>,
    word: Option<u32>,
    num_samples: usize,
    seed: u64,
    threads: usize,
) -> Result<ConcentrationReport> {
    if num_samples < 2 {
        return Err(Error::InvalidArgument("concentration report needs at least 2 samples".into()));
    }
    let zero;
    let tensor = match (tensor, word) {
        (Some(t), _) => t,
        (None, None) => {
            zero = CpTensor::zero(emb.dim())?;
            &zero
        }
        (None, Some(_)) => return Err(Error::InvalidArgument("Z_{c,a} needs a tensor".into())),
    };
    if let Some(a) = word {
        emb.get(a)?;
    }
    let sample = |i: usize| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let c = sample_unit_sphere(emb.dim(), &mut rng)?;
        Ok(match word {
            Some(a) => partition_syntactic(&c, a, emb, tensor)?.log_value,
            None => partition(&c, emb)?.log_value,
        })
    };
    let threads = threads.clamp(1, num_samples);
    let chunk = num_samples.div_ceil(threads);
    let logs: Vec<f64> = thread::scope(|scope| {
        let handles: Vec<_> = (0..num_samples)
            .step_by(chunk)
            .map(|lo| {
                let sample = &sample;
                scope.spawn(move || (lo..(lo + chunk).min(num_samples)).map(sample).collect::<Result<Vec<f64>>>())
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampling worker panicked"))
            .collect::<Result<Vec<Vec<f64>>>>()
    })?
    .into_iter()
    .flatten()
    .collect();

    // ratios relative to the largest sample stay in range whatever the scale
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rel: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let n = rel.len() as f64;
    let mean_rel = rel.iter().sum::<f64>() / n;
    let var = rel.iter().map(|r| (r - mean_rel).powi(2)).sum::<f64>() / n;
    let log_mean = top + mean_rel.ln();
    let mut histogram = Histogram::new(HISTOGRAM_LO, HISTOGRAM_HI, HISTOGRAM_BUCKETS);
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    for r in &rel {
        let ratio = r / mean_rel;
        histogram.add(ratio);
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
    }
    Ok(ConcentrationReport {
        word,
        num_samples,
        log_mean,
        mean: Partition { log_value: log_mean }.value(),
        coeff_variation: var.sqrt() / mean_rel,
        min_ratio,
        max_ratio,
        histogram,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub max: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// The three boundedness statistics for one `(a, b)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBoundedness {
    pub a: u32,
    pub b: u32,
    /// `(1/d) ||T(v_a,.,.) + I||^2` (spectral norm)
    pub spectral: f64,
    /// `(1/d) ||T(v_a,.,.) + I||_F^2`
    pub frobenius: f64,
    /// `(1/d) ||T(v_a,v_b,.)||^2`
    pub vector: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub num_pairs: usize,
    pub spectral: Summary,
    pub frobenius: Summary,
    pub vector: Summary,
    /// Largest Frobenius or vector statistic.
    pub k: f64,
    /// Solves `spectral max = K eps^2` with the log factor dropped.
    pub epsilon: f64,
    /// `k` rounded up to an integer, and the matching epsilon.
    pub k_ceil: f64,
    pub epsilon_at_k_ceil: f64,
    /// Power iterations that hit the cap before converging.
    pub unconverged: usize,
    pub pairs: Vec<PairBoundedness>,
}

impl BoundednessReport {
    /// Infers `(K, eps)` from the three maxima.
    pub fn infer(spectral_max: f64, frobenius_max: f64, vector_max: f64) -> (f64, f64) {
        let k = frobenius_max.max(vector_max);
        let eps = if k > 0.0 { (spectral_max / k).sqrt() } else { f64::INFINITY };
        (k, eps)
    }

    pub fn write_tsv<W: Write>(&self, mut w: W, words: Option<&[String]>) -> Result<()> {
        writeln!(w, "a\tb\tspectral\tfrobenius\tvector")?;
        for p in &self.pairs {
            match words {
                Some(ws) => write!(w, "{}\t{}", ws[p.a as usize], ws[p.b as usize])?,
                None => write!(w, "{}\t{}", p.a, p.b)?,
            }
            writeln!(w, "\t{}\t{}\t{}", p.spectral, p.frobenius, p.vector)?;
        }
        Ok(())
    }
}

/// Evaluates the boundedness statistics over `pairs` (root first). Slice
/// statistics depend on the root only and are computed once per root.
pub fn boundedness_report(tensor: &CpTensor, emb: &EmbeddingMatrix, pairs: &[(u32, u32)]) -> Result<BoundednessReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("boundedness report needs at least one pair".into()));
    }
    check_dim(emb.dim(), tensor.dim())?;
    let d = tensor.dim() as f64;
    let gram = tensor.slice_gram();
    let mut per_root: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    let mut unconverged = 0;
    let mut rows = Vec::with_capacity(pairs.len());
    for &(a, b) in pairs {
        let (va, vb) = (emb.get(a)?, emb.get(b)?);
        let (spectral, frobenius) = match per_root.get(&a) {
            Some(&s) => s,
            None => {
                let slice = tensor.slice(va)?;
                let mut rng = ChaCha8Rng::seed_from_u64(u64::from(a));
                let est = slice.spectral_norm_sq(true, &mut rng)?;
                unconverged += usize::from(!est.converged);
                let s = (est.value / d, slice.frobenius_sq(&gram, true) / d);
                per_root.insert(a, s);
                s
            }
        };
        let vector = linalg::norm_sq(&tensor.contract_two(va, vb)?) / d;
        rows.push(PairBoundedness { a, b, spectral, frobenius, vector });
    }
    let pick = |f: fn(&PairBoundedness) -> f64| Summary::of(&rows.iter().map(f).collect::<Vec<_>>());
    let spectral = pick(|p| p.spectral);
    let frobenius = pick(|p| p.frobenius);
    let vector = pick(|p| p.vector);
    let (k, epsilon) = BoundednessReport::infer(spectral.max, frobenius.max, vector.max);
    let k_ceil = k.ceil();
    let (_, epsilon_at_k_ceil) = BoundednessReport::infer(spectral.max, k_ceil, 0.0);
    Ok(BoundednessReport {
        num_pairs: rows.len(),
        spectral,
        frobenius,
        vector,
        k,
        epsilon,
        k_ceil,
        epsilon_at_k_ceil,
        unconverged,
        pairs: rows,
    })
}

/// Plug-in probability estimates from the three count tables.
///
/// * `p(w, a)`: ordered window pairs. The pair table stores each unordered
///   pair once, so an off-diagonal cell holds two ordered events out of
///   `2 * total`; a diagonal cell holds `2 X` of them.
/// * `p(w)` (for [`PmiEstimator::pmi2`]): pair-table marginals.
/// * `p(w)` (for [`PmiEstimator::pmi3`]): unigram counts.
/// * `p(w, [a, b])` and `p([a, b])`: triple cells and pair totals over the
///   triple total.
#[derive(Debug, Clone)]
pub struct PmiEstimator<'c> {
    pairs: &'c PairCounts,
    triples: Option<&'c TripleCounts>,
    marginals: Vec<f64>,
    unigrams: Vec<f64>,
    unigram_total: f64,
}

impl<'c> PmiEstimator<'c> {
    pub fn new(pairs: &'c PairCounts, triples: Option<&'c TripleCounts>, unigrams: &[u64]) -> Result<Self> {
        if let Some(t) = triples {
            check_dim(pairs.vocab_size(), t.vocab_size())?;
        }
        if !unigrams.is_empty() {
            check_dim(pairs.vocab_size(), unigrams.len())?;
        }
        let unigrams: Vec<f64> = unigrams.iter().map(|&c| c as f64).collect();
        Ok(Self {
            pairs,
            triples,
            marginals: pairs.marginals(),
            unigram_total: unigrams.iter().sum(),
            unigrams,
        })
    }

    fn check_id(&self, id: u32) -> Result<()> {
        if (id as usize) < self.pairs.vocab_size() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("word id {id} out of range")))
        }
    }

    /// Ordered window-pair probability.
    pub fn pair_probability(&self, w: u32, a: u32) -> f64 {
        let x = self.pairs.get(w, a);
        if w == a {
            x / self.pairs.total()
        } else {
            x / (2.0 * self.pairs.total())
        }
    }

    fn ln_checked(p: f64, what: &str) -> Result<f64> {
        if p > 0.0 && p.is_finite() {
            Ok(p.ln())
        } else {
            Err(Error::Undefined(format!("{what} has no observations")))
        }
    }

    /// `log p(w, a) / (p(w) p(a))` with pair-table marginals.
    pub fn pmi2(&self, a: u32, w: u32) -> Result<f64> {
        self.check_id(a)?;
        self.check_id(w)?;
        let denom = 2.0 * self.pairs.total();
        let joint = Self::ln_checked(self.pair_probability(w, a), "pair (w, a)")?;
        let pa = Self::ln_checked(self.marginals[a as usize] / denom, "word a")?;
        let pw = Self::ln_checked(self.marginals[w as usize] / denom, "word w")?;
        Ok(joint - pa - pw)
    }

    /// `log [p(w,[a,b]) p(a) p(b) p(w) / (p(w,a) p(w,b) p([a,b]))]`.
    pub fn pmi3(&self, a: u32, b: u32, w: u32) -> Result<f64> {
        let triples = self.triples.ok_or_else(|| Error::InvalidArgument("PMI3 needs triple counts".into()))?;
        if self.unigrams.is_empty() {
            return Err(Error::InvalidArgument("PMI3 needs unigram counts".into()));
        }
        for id in [a, b, w] {
            self.check_id(id)?;
        }
        let tt = triples.total();
        let joint = Self::ln_checked(triples.get(a, b, w) / tt, "triple (w, [a, b])")?;
        let pair = Self::ln_checked(triples.pair_total(a, b) / tt, "pair [a, b]")?;
        let uni = |id: u32, what| Self::ln_checked(self.unigrams[id as usize] / self.unigram_total, what);
        let (pa, pb, pw) = (uni(a, "word a")?, uni(b, "word b")?, uni(w, "word w")?);
        let wa = Self::ln_checked(self.pair_probability(w, a), "pair (w, a)")?;
        let wb = Self::ln_checked(self.pair_probability(w, b), "pair (w, b)")?;
        Ok(joint + pa + pb + pw - wa - wb - pair)
    }
}

/// One-off `pmi2`; build a [`PmiEstimator`] for repeated queries.
pub fn pmi2(pairs: &PairCounts, a: u32, w: u32) -> Result<f64> {
    PmiEstimator::new(pairs, None, &[])?.pmi2(a, w)
}

/// One-off `pmi3`; build a [`PmiEstimator`] for repeated queries.
pub fn pmi3(pairs: &PairCounts, triples: &TripleCounts, unigrams: &[u64], a: u32, b: u32, w: u32) -> Result<f64> {
    PmiEstimator::new(pairs, Some(triples), unigrams)?.pmi3(a, b, w)
}

/// Empirical PMI3 next to the model prediction for one triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pmi3Point {
    pub a: u32,
    pub b: u32,
    pub w: u32,
    pub count: f64,
    pub empirical: f64,
    pub predicted: f64,
}

/// Every triple with `count >= min_count` and a defined PMI3, predicted as
/// `T(v_a, v_b, v_w) / d`. Sorted by `(a, b, w)`.
pub fn pmi3_points(
    tensor: &CpTensor,
    emb: &EmbeddingMatrix,
    triples: &TripleCounts,
    pairs: &PairCounts,
    unigrams: &[u64],
    min_count: f64,
) -> Result<Vec<Pmi3Point>> {
    if !(min_count >= 1.0) {
        return Err(Error::InvalidArgument(format!("min_count must be at least 1, got {min_count}")));
    }
    check_dim(emb.dim(), tensor.dim())?;
    check_dim(triples.vocab_size(), emb.len())?;
    let est = PmiEstimator::new(pairs, Some(triples), unigrams)?;
    let d = tensor.dim() as f64;
    let mut out = Vec::new();
    for ((a, b, w), count) in triples.sorted() {
        if count < min_count {
            continue;
        }
        let empirical = match est.pmi3(a, b, w) {
            Ok(v) => v,
            Err(Error::Undefined(_)) => continue,
            Err(e) => return Err(e),
        };
        let predicted = tensor.trilinear(emb.row(a), emb.row(b), emb.row(w))? / d;
        out.push(Pmi3Point { a, b, w, count, empirical, predicted });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuckerCheck {
    /// `None` when either side is constant (e.g. `T = 0`).
    pub pearson_r: Option<f64>,
    pub rmse: f64,
    pub num_triples: usize,
}

/// Correlation and RMSE between prediction and empirical value.
pub fn summarize_points(points: &[Pmi3Point]) -> Result<TuckerCheck> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("{} eligible triples, need at least 3", points.len())));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.predicted).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.empirical).collect();
    let rmse = (xs.iter().zip(&ys).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
    let pearson_r = match evaluation::pearson(&xs, &ys) {
        Ok(r) => Some(r),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(TuckerCheck { pearson_r, rmse, num_triples: points.len() })
}

pub fn tucker_residual_check(
    tensor: &CpTensor,
    emb: &EmbeddingMatrix,
    triples: &TripleCounts,
    pairs: &PairCounts,
    unigrams: &[u64],
    min_count: f64,
) -> Result<TuckerCheck> {
    summarize_points(&pmi3_points(tensor, emb, triples, pairs, unigrams, min_count)?)
}
