//! Synthetic corpora sampled from the syntactic random-walk model.
//!
//! Each step moves the discourse vector `c` by a bounded random-walk step, then
//! with probability `p_syn` emits a syntactic pair (root `a` from
//! `softmax(<v_w, c>)`, dependent `b` from `softmax(<v_b, c> + T(v_a, v_b, c))`)
//! and otherwise a single word from `softmax(<v_w, c>)`. Output sentences are
//! 20 steps long.
//!
//! The walk kernel is one valid choice among many: a Gaussian proposal
//! `normalize(c + delta g)` that is rejected (the walk stays put) when it moves
//! further than `eps_w / sqrt(d)`. The proposal density depends only on the
//! angle between `c` and `c'`, so the kernel is symmetric and the uniform
//! measure on the sphere is stationary.

use std::io::Write;
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{EncodedSentence, ParsedSentence, Relation, SyntacticPair, Token, Vocabulary};
use crate::embedding::EmbeddingMatrix;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dot, sample_unit_sphere};
use crate::tensor::CpTensor;

/// Discourse steps per synthetic sentence.
pub const STEPS_PER_SENTENCE: usize = 20;

/// Ground-truth model parameters.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub embeddings: EmbeddingMatrix,
    pub tensor: CpTensor,
    pub p_syn: f64,
    pub eps_w: f64,
    pub kappa: f64,
    pub tau: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_syn) {
            return Err(Error::InvalidArgument(format!("p_syn {} outside [0, 1]", self.p_syn)));
        }
        if !(self.eps_w >= 0.0) {
            return Err(Error::InvalidArgument(format!("eps_w {} must be nonnegative", self.eps_w)));
        }
        check_scaling(self.kappa, self.tau)?;
        if self.embeddings.is_empty() {
            return Err(Error::InvalidArgument("model needs at least one word".into()));
        }
        check_dim(self.embeddings.dim(), self.tensor.dim())
    }

    pub fn dim(&self) -> usize {
        self.embeddings.dim()
    }

    pub fn vocab_size(&self) -> usize {
        self.embeddings.len()
    }
}

fn check_scaling(kappa: f64, tau: f64) -> Result<()> {
    if !(tau > 0.0 && kappa > 0.0 && tau <= kappa) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < tau <= kappa, got tau={tau} kappa={kappa}"
        )));
    }
    Ok(())
}

/// `v_w = s * g` with `g ~ N(0, I_d)` and `s ~ U[2 tau - kappa, kappa]`,
/// clipped at zero, so that `s <= kappa` and `E[s] = tau` when `2 tau >= kappa`.
pub fn init_embeddings<R: Rng + ?Sized>(n: usize, d: usize, kappa: f64, tau: f64, rng: &mut R) -> Result<EmbeddingMatrix> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument("need n >= 1 and d >= 1".into()));
    }
    check_scaling(kappa, tau)?;
    let lo = 2.0 * tau - kappa;
    let mut flat = Vec::with_capacity(n * d);
    for _ in 0..n {
        let s = if lo >= kappa { kappa } else { rng.random_range(lo..=kappa).max(0.0) };
        flat.extend(linalg::gaussian_vector(d, rng).into_iter().map(|g| s * g));
    }
    EmbeddingMatrix::new(d, flat)
}

/// Rank-`rank` tensor with factor rows drawn uniformly from the unit sphere
/// and every weight equal to `weight`.
pub fn random_tensor<R: Rng + ?Sized>(d: usize, rank: usize, weight: f64, rng: &mut R) -> Result<CpTensor> {
    let draw = |rng: &mut R| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(rank * d);
        for _ in 0..rank {
            out.extend(sample_unit_sphere(d, rng)?);
        }
        Ok(out)
    };
    let a = draw(rng)?;
    let b = draw(rng)?;
    let c = draw(rng)?;
    CpTensor::new(d, vec![weight; rank], a, b, c)
}

/// Unit discourse vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscourseState(Vec<f64>);

impl DiscourseState {
    pub fn new(mut c: Vec<f64>) -> Result<Self> {
        if linalg::normalize(&mut c) == 0.0 || !c.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("discourse vector must be finite and nonzero".into()));
        }
        Ok(Self(c))
    }

    pub fn uniform<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Self> {
        Ok(Self(sample_unit_sphere(d, rng)?))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// One step of the bounded walk; `||c' - c|| <= eps_w / sqrt(d)` always holds.
pub fn walk_step<R: Rng + ?Sized>(state: &DiscourseState, eps_w: f64, rng: &mut R) -> DiscourseState {
    let d = state.dim();
    let bound = eps_w / (d as f64).sqrt();
    if bound <= 0.0 {
        return state.clone();
    }
    // typical proposal length is about bound / 2, so rejections are rare
    let delta = 0.5 * bound / (d as f64).sqrt();
    let mut next = linalg::gaussian_vector(d, rng);
    for (n, c) in next.iter_mut().zip(&state.0) {
        *n = c + delta * *n;
    }
    if linalg::normalize(&mut next) == 0.0 {
        return state.clone();
    }
    let dist_sq: f64 = next.iter().zip(&state.0).map(|(a, b)| (a - b) * (a - b)).sum();
    if dist_sq <= bound * bound {
        DiscourseState(next)
    } else {
        state.clone()
    }
}

/// Draws an index from `softmax(logits)`; `scratch` is overwritten.
fn sample_softmax<R: Rng + ?Sized>(logits: &[f64], scratch: &mut Vec<f64>, rng: &mut R) -> u32 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scratch.clear();
    let mut acc = 0.0;
    for &l in logits {
        acc += (l - max).exp();
        scratch.push(acc);
    }
    let u = rng.random::<f64>() * acc;
    // first index whose cumulative weight exceeds u
    let idx = scratch.partition_point(|&c| c <= u);
    idx.min(logits.len() - 1) as u32
}

fn logits_into(direction: &[f64], emb: &EmbeddingMatrix, out: &mut Vec<f64>) {
    out.clear();
    out.extend(emb.rows().map(|v| dot(v, direction)));
}

/// Reusable buffers for repeated emissions.
struct Emitter<'p> {
    emb: &'p EmbeddingMatrix,
    tensor: &'p CpTensor,
    logits: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'p> Emitter<'p> {
    fn new(emb: &'p EmbeddingMatrix, tensor: &'p CpTensor) -> Self {
        Self { emb, tensor, logits: Vec::with_capacity(emb.len()), scratch: Vec::with_capacity(emb.len()) }
    }

    fn word<R: Rng + ?Sized>(&mut self, c: &[f64], rng: &mut R) -> u32 {
        logits_into(c, self.emb, &mut self.logits);
        sample_softmax(&self.logits, &mut self.scratch, rng)
    }

    fn pair<R: Rng + ?Sized>(&mut self, c: &[f64], rng: &mut R) -> Result<(u32, u32)> {
        let a = self.word(c, rng);
        // <v_b, c> + T(v_a, v_b, c) = <v_b, c + T(v_a, ., c)>
        let mut direction = self.tensor.contract_first_third(self.emb.row(a), c)?;
        linalg::axpy(1.0, c, &mut direction);
        logits_into(&direction, self.emb, &mut self.logits);
        Ok((a, sample_softmax(&self.logits, &mut self.scratch, rng)))
    }
}

/// Samples a word with probability proportional to `exp(<v_w, c>)`.
pub fn emit_word<R: Rng + ?Sized>(c: &[f64], emb: &EmbeddingMatrix, rng: &mut R) -> Result<u32> {
    check_dim(emb.dim(), c.len())?;
    if emb.is_empty() {
        return Err(Error::InvalidArgument("cannot emit from an empty vocabulary".into()));
    }
    let zero = CpTensor::zero(emb.dim())?;
    Ok(Emitter::new(emb, &zero).word(c, rng))
}

/// Samples `(root, dep)`.
pub fn emit_pair<R: Rng + ?Sized>(c: &[f64], emb: &EmbeddingMatrix, tensor: &CpTensor, rng: &mut R) -> Result<(u32, u32)> {
    check_dim(emb.dim(), c.len())?;
    check_dim(emb.dim(), tensor.dim())?;
    if emb.is_empty() {
        return Err(Error::InvalidArgument("cannot emit from an empty vocabulary".into()));
    }
    Emitter::new(emb, tensor).pair(c, rng)
}

/// A synthetic sentence: word ids and gold pairs as `(root_pos, dep_pos)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SyntheticSentence {
    pub tokens: Vec<u32>,
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SyntheticCorpus {
    pub sentences: Vec<SyntheticSentence>,
    pub steps: usize,
}

impl SyntheticCorpus {
    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }

    pub fn num_pairs(&self) -> usize {
        self.sentences.iter().map(|s| s.pairs.len()).sum()
    }

    /// Sentences keyed by ground-truth ids, ready for counting.
    pub fn to_encoded(&self) -> Vec<EncodedSentence> {
        self.sentences
            .iter()
            .map(|s| EncodedSentence {
                ids: s.tokens.clone(),
                pairs: s
                    .pairs
                    .iter()
                    .map(|&(root_pos, dep_pos)| SyntacticPair {
                        root: s.tokens[root_pos],
                        dep: s.tokens[dep_pos],
                        root_pos,
                        dep_pos,
                        relation: Relation::AdjNoun,
                    })
                    .collect(),
            })
            .collect()
    }

    /// Token counts per ground-truth id.
    pub fn unigram_counts(&self, n: usize) -> Vec<u64> {
        let mut counts = vec![0; n];
        for s in &self.sentences {
            for &t in &s.tokens {
                counts[t as usize] += 1;
            }
        }
        counts
    }

    /// Vocabulary in ground-truth id order (not frequency order).
    pub fn vocabulary(&self, n: usize) -> Result<Vocabulary> {
        Vocabulary::from_parts(synthetic_words(n), self.unigram_counts(n), 1)
    }

    /// Parsed-sentence view with gold labels: the dependent carries `amod`
    /// pointing at its root, every other token hangs off the artificial root.
    pub fn to_parsed(&self, words: &[String]) -> Vec<ParsedSentence> {
        self.sentences
            .iter()
            .map(|s| {
                let mut tokens: Vec<Token> = s
                    .tokens
                    .iter()
                    .map(|&t| Token { form: words[t as usize].clone(), head: 0, deprel: "dep".into(), line: 0 })
                    .collect();
                for &(root, dep) in &s.pairs {
                    tokens[dep].head = root + 1;
                    tokens[dep].deprel = "amod".into();
                }
                ParsedSentence { tokens }
            })
            .collect()
    }

    /// Sidecar TSV: sentence index, root position, dependent position
    /// (1-based token ids, as in the corpus file) and relation.
    pub fn write_gold_pairs<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# sentence\troot\tdep\trelation")?;
        for (i, s) in self.sentences.iter().enumerate() {
            for &(root, dep) in &s.pairs {
                writeln!(w, "{i}\t{}\t{}\t{}", root + 1, dep + 1, Relation::AdjNoun)?;
            }
        }
        Ok(())
    }
}

/// Word forms `w0 .. w{n-1}` used for synthetic vocabularies.
pub fn synthetic_words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

/// Runs the model for `num_steps` discourse steps from a uniform start.
pub fn generate_corpus<R: Rng + ?Sized>(params: &ModelParams, num_steps: usize, rng: &mut R) -> Result<SyntheticCorpus> {
    params.validate()?;
    if num_steps == 0 {
        return Err(Error::InvalidArgument("num_steps must be at least 1".into()));
    }
    let mut emitter = Emitter::new(&params.embeddings, &params.tensor);
    let mut state = DiscourseState::uniform(params.dim(), rng)?;
    let mut sentences = Vec::with_capacity(num_steps.div_ceil(STEPS_PER_SENTENCE));
    let mut current = SyntheticSentence::default();
    for step in 0..num_steps {
        state = walk_step(&state, params.eps_w, rng);
        if rng.random_bool(params.p_syn) {
            let (a, b) = emitter.pair(state.as_slice(), rng)?;
            let dep_pos = current.tokens.len();
            current.tokens.push(b);
            current.tokens.push(a);
            current.pairs.push((dep_pos + 1, dep_pos));
        } else {
            let w = emitter.word(state.as_slice(), rng);
            current.tokens.push(w);
        }
        if (step + 1) % STEPS_PER_SENTENCE == 0 {
            sentences.push(std::mem::take(&mut current));
        }
    }
    if !current.tokens.is_empty() {
        sentences.push(current);
    }
    Ok(SyntheticCorpus { sentences, steps: num_steps })
}

/// Generates `segments` independent walks in parallel, segment `k` on stream
/// `k` of a ChaCha generator seeded with `seed`, and concatenates them.
pub fn generate_corpus_parallel(params: &ModelParams, num_steps: usize, segments: usize, seed: u64) -> Result<SyntheticCorpus> {
    params.validate()?;
    let segments = segments.clamp(1, num_steps.max(1));
    let base = num_steps / segments;
    let extra = num_steps % segments;
    let parts: Vec<Result<SyntheticCorpus>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..segments)
            .map(|k| {
                let steps = base + usize::from(k < extra);
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(k as u64);
                    generate_corpus(params, steps, &mut rng)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("generator worker panicked")).collect()
    });
    let mut out = SyntheticCorpus::default();
    for p in parts {
        let p = p?;
        out.steps += p.steps;
        out.sentences.extend(p.sentences);
    }
    Ok(out)
}
