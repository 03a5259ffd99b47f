//! Phrase composition and cosine nearest neighbours.
//!
//! Every method takes the root word first (`a`: the noun of an adjective-noun
//! phrase, the object of a verb-object phrase). `T` is not symmetric, so
//! swapping the arguments changes the tensor term.

use std::collections::HashSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::embedding::EmbeddingMatrix;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, axpy, dot, norm};
use crate::tensor::CpTensor;

/// Default smoothing constant of the sif weights.
pub const DEFAULT_SIF_A: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompositionMethod {
    /// `v_a + v_b`
    Additive,
    /// `beta v_a + v_b`, or `v_a + beta v_b` with `swap`.
    WeightedAdditive { beta: f64, swap: bool },
    /// `v_a + v_b + alpha T(v_a, v_b, .)`
    Tensor { alpha: f64 },
    /// `w_a v_a + w_b v_b` with sif weights, then common-component removal.
    Sif { a: f64 },
    /// The sif composite plus `gamma w_a w_b T(v_a, v_b, .)`.
    SifTensor { a: f64, gamma: f64 },
}

impl CompositionMethod {
    pub fn validate(&self) -> Result<()> {
        let (weight, a) = match *self {
            Self::Additive => (0.0, None),
            Self::WeightedAdditive { beta, .. } => (beta, None),
            Self::Tensor { alpha } => (alpha, None),
            Self::Sif { a } => (0.0, Some(a)),
            Self::SifTensor { a, gamma } => (gamma, Some(a)),
        };
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidArgument(format!("composition weight {weight} must be finite and >= 0")));
        }
        if let Some(a) = a {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidArgument(format!("sif parameter {a} must be positive")));
            }
        }
        Ok(())
    }

    pub fn needs_tensor(&self) -> bool {
        matches!(self, Self::Tensor { .. } | Self::SifTensor { .. })
    }

    pub fn is_sif(&self) -> bool {
        matches!(self, Self::Sif { .. } | Self::SifTensor { .. })
    }
}

impl fmt::Display for CompositionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Additive => write!(f, "additive"),
            Self::WeightedAdditive { beta, swap } => {
                write!(f, "weighted additive (beta={beta}{})", if swap { ", dependent" } else { "" })
            }
            Self::Tensor { alpha } => write!(f, "tensor (alpha={alpha})"),
            Self::Sif { a } => write!(f, "sif (a={a})"),
            Self::SifTensor { a, gamma } => write!(f, "sif+tensor (a={a}, gamma={gamma})"),
        }
    }
}

/// `a / (a + p(w))` with `p(w) = count(w) / total tokens`.
pub fn sif_weight(id: u32, vocab: &Vocabulary, a_param: f64) -> Result<f64> {
    if (id as usize) >= vocab.len() {
        return Err(Error::UnknownWord(format!("id {id}")));
    }
    if !(a_param > 0.0) {
        return Err(Error::InvalidArgument(format!("sif parameter {a_param} must be positive")));
    }
    let total = vocab.total();
    let p = if total == 0 { 0.0 } else { vocab.count(id) as f64 / total as f64 };
    Ok(a_param / (a_param + p))
}

/// Composed phrase vectors and, for sif methods, the removed direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedBatch {
    pub vectors: Vec<Vec<f64>>,
    pub common_component: Option<Vec<f64>>,
}

/// Model state needed to compose phrases.
#[derive(Debug, Clone, Copy)]
pub struct Composer<'m> {
    pub embeddings: &'m EmbeddingMatrix,
    pub tensor: Option<&'m CpTensor>,
    /// Word frequencies for the sif weights.
    pub vocab: Option<&'m Vocabulary>,
}

impl<'m> Composer<'m> {
    pub fn new(embeddings: &'m EmbeddingMatrix, tensor: Option<&'m CpTensor>, vocab: Option<&'m Vocabulary>) -> Result<Self> {
        if let Some(t) = tensor {
            check_dim(embeddings.dim(), t.dim())?;
        }
        if let Some(v) = vocab {
            check_dim(v.len(), embeddings.len())?;
        }
        Ok(Self { embeddings, tensor, vocab })
    }

    fn tensor_for(&self, method: &CompositionMethod) -> Result<&'m CpTensor> {
        self.tensor.ok_or_else(|| Error::InvalidArgument(format!("{method} needs a composition tensor")))
    }

    fn sif_weights(&self, a: u32, b: u32, a_param: f64) -> Result<(f64, f64)> {
        let vocab = self.vocab.ok_or_else(|| Error::InvalidArgument("sif weights need word counts".into()))?;
        Ok((sif_weight(a, vocab, a_param)?, sif_weight(b, vocab, a_param)?))
    }

    /// The composite of one phrase without sif common-component removal.
    pub fn compose_raw(&self, a: u32, b: u32, method: &CompositionMethod) -> Result<Vec<f64>> {
        method.validate()?;
        let (va, vb) = (self.embeddings.get(a)?, self.embeddings.get(b)?);
        let weighted = |wa: f64, wb: f64| -> Vec<f64> {
            let mut out = linalg::scale(wa, va);
            axpy(wb, vb, &mut out);
            out
        };
        Ok(match *method {
            CompositionMethod::Additive => linalg::add(va, vb),
            CompositionMethod::WeightedAdditive { beta, swap: false } => weighted(beta, 1.0),
            CompositionMethod::WeightedAdditive { beta, swap: true } => weighted(1.0, beta),
            CompositionMethod::Tensor { alpha } => {
                let t = self.tensor_for(method)?;
                let mut out = linalg::add(va, vb);
                if alpha != 0.0 {
                    axpy(alpha, &t.contract_two(va, vb)?, &mut out);
                }
                out
            }
            CompositionMethod::Sif { a: a_param } => {
                let (wa, wb) = self.sif_weights(a, b, a_param)?;
                weighted(wa, wb)
            }
            CompositionMethod::SifTensor { a: a_param, gamma } => {
                let t = self.tensor_for(method)?;
                let (wa, wb) = self.sif_weights(a, b, a_param)?;
                let mut out = weighted(wa, wb);
                if gamma != 0.0 {
                    axpy(gamma * wa * wb, &t.contract_two(va, vb)?, &mut out);
                }
                out
            }
        })
    }

    /// One phrase. Sif methods skip common-component removal here since there
    /// is no batch to estimate it from; use [`Composer::compose_batch`].
    pub fn compose(&self, a: u32, b: u32, method: &CompositionMethod) -> Result<Vec<f64>> {
        self.compose_raw(a, b, method)
    }

    /// Composes every `(root, dependent)` pair. For sif methods the first
    /// principal direction `u` of the (uncentered) batch is removed from every
    /// output as `v - <u, v> u`.
    pub fn compose_batch(&self, pairs: &[(u32, u32)], method: &CompositionMethod) -> Result<ComposedBatch> {
        let mut vectors = pairs
            .iter()
            .map(|&(a, b)| self.compose_raw(a, b, method))
            .collect::<Result<Vec<_>>>()?;
        let mut common_component = None;
        if method.is_sif() && vectors.len() > 1 {
            let mut rng = ChaCha8Rng::seed_from_u64(0x51f);
            let u = linalg::principal_direction(&vectors, self.embeddings.dim(), &mut rng)?;
            for v in &mut vectors {
                let k = dot(&u, v);
                axpy(-k, &u, v);
            }
            common_component = Some(u);
        }
        Ok(ComposedBatch { vectors, common_component })
    }
}

/// Free-function form of [`Composer::compose`].
pub fn compose(
    a: u32,
    b: u32,
    emb: &EmbeddingMatrix,
    tensor: Option<&CpTensor>,
    vocab: Option<&Vocabulary>,
    method: &CompositionMethod,
) -> Result<Vec<f64>> {
    Composer::new(emb, tensor, vocab)?.compose(a, b, method)
}

/// Top `k` words by cosine similarity to `query`, best first; ties go to the
/// smaller id. Ids in `exclude` are skipped.
pub fn nearest_neighbors(query: &[f64], emb: &EmbeddingMatrix, k: usize, exclude: &HashSet<u32>) -> Result<Vec<(u32, f64)>> {
    check_dim(emb.dim(), query.len())?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let qn = norm(query);
    if qn == 0.0 || !qn.is_finite() {
        return Err(Error::InvalidArgument("query vector must be nonzero and finite".into()));
    }
    let mut scored: Vec<(u32, f64)> = emb
        .rows()
        .enumerate()
        .filter(|(i, _)| !exclude.contains(&(*i as u32)))
        .map(|(i, v)| (i as u32, linalg::cosine(query, v)))
        .collect();
    let order = |x: &(u32, f64), y: &(u32, f64)| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0));
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(order);
    Ok(scored)
}
