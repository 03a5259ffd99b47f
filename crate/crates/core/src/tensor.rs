//! Rank-R CP (canonical polyadic) third-order tensors.
//!
//! `T = sum_r w_r a_r (x) b_r (x) c_r` with three independent factor matrices,
//! so no symmetry between modes is assumed. Every contraction works on the
//! factors directly and never materializes the `d^3` array.
//!
//! Mode convention: the first mode takes the root word, the second the
//! dependent word, the third the discourse (or context) direction. The slice
//! operator `T(x, ., .)` is the `d x d` matrix `M[j][k] = sum_i T[i][j][k] x[i]`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dot, power_iteration_psd, SpectralEstimate};

const SCT_MAGIC: &[u8; 4] = b"SCT1";

/// Seed for the start vector of [`CpTensor::slice_spectral_norm`].
const SPECTRAL_SEED: u64 = 0x5eed_5eed;

#[derive(Debug, Clone, PartialEq)]
pub struct CpTensor {
    dim: usize,
    rank: usize,
    weights: Vec<f64>,
    factor_a: Vec<f64>,
    factor_b: Vec<f64>,
    factor_c: Vec<f64>,
    /// Per-root-word offsets learned with the tensor.
    pub root_bias: BTreeMap<u32, f64>,
    pub global_bias: f64,
}

impl CpTensor {
    /// Builds a tensor from row-major `rank x dim` factor matrices.
    pub fn new(
        dim: usize,
        weights: Vec<f64>,
        factor_a: Vec<f64>,
        factor_b: Vec<f64>,
        factor_c: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("tensor dimension must be positive".into()));
        }
        let rank = weights.len();
        for f in [&factor_a, &factor_b, &factor_c] {
            check_dim(rank * dim, f.len())?;
        }
        for (v, what) in [
            (&weights, "weights"),
            (&factor_a, "factor A"),
            (&factor_b, "factor B"),
            (&factor_c, "factor C"),
        ] {
            linalg::check_finite(v, what)?;
        }
        Ok(Self {
            dim,
            rank,
            weights,
            factor_a,
            factor_b,
            factor_c,
            root_bias: BTreeMap::new(),
            global_bias: 0.0,
        })
    }

    /// The rank-0 tensor, `T = 0`.
    pub fn zero(dim: usize) -> Result<Self> {
        Self::new(dim, vec![], vec![], vec![], vec![])
    }

    /// Unit weights and i.i.d. `N(0, std^2)` factor entries.
    pub fn gaussian<R: Rng + ?Sized>(dim: usize, rank: usize, std: f64, rng: &mut R) -> Result<Self> {
        let normal = Normal::new(0.0, std)
            .map_err(|e| Error::InvalidArgument(format!("factor std {std}: {e}")))?;
        let mut draw = || -> Vec<f64> { (0..rank * dim).map(|_| normal.sample(rng)).collect() };
        let a = draw();
        let b = draw();
        let c = draw();
        Self::new(dim, vec![1.0; rank], a, b, c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn factor_a(&self) -> &[f64] {
        &self.factor_a
    }

    pub fn factor_b(&self) -> &[f64] {
        &self.factor_b
    }

    pub fn factor_c(&self) -> &[f64] {
        &self.factor_c
    }

    pub fn a(&self, r: usize) -> &[f64] {
        &self.factor_a[r * self.dim..(r + 1) * self.dim]
    }

    pub fn b(&self, r: usize) -> &[f64] {
        &self.factor_b[r * self.dim..(r + 1) * self.dim]
    }

    pub fn c(&self, r: usize) -> &[f64] {
        &self.factor_c[r * self.dim..(r + 1) * self.dim]
    }

    /// Mutable views of (weights, A, B, C) for optimizers.
    pub(crate) fn blocks_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.weights, &mut self.factor_a, &mut self.factor_b, &mut self.factor_c]
    }

    pub fn root_bias_of(&self, a: u32) -> f64 {
        self.root_bias.get(&a).copied().unwrap_or(0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.factor_a)
            .chain(&self.factor_b)
            .chain(&self.factor_c)
            .chain(self.root_bias.values())
            .all(|v| v.is_finite())
            && self.global_bias.is_finite()
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        check_dim(self.dim, v.len())
    }

    /// `<a_r, x>` for every component.
    fn project(factor: &[f64], dim: usize, x: &[f64]) -> Vec<f64> {
        factor.chunks_exact(dim).map(|row| dot(row, x)).collect()
    }

    /// `T(x, y, z) = sum_r w_r <a_r,x> <b_r,y> <c_r,z>`.
    pub fn trilinear(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        self.check(z)?;
        Ok((0..self.rank)
            .map(|r| self.weights[r] * dot(self.a(r), x) * dot(self.b(r), y) * dot(self.c(r), z))
            .sum())
    }

    /// `T(x, y, .)`, the vector with `<z, T(x,y,.)> = T(x,y,z)`.
    pub fn contract_two(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        self.check(y)?;
        let mut out = vec![0.0; self.dim];
        for r in 0..self.rank {
            let coef = self.weights[r] * dot(self.a(r), x) * dot(self.b(r), y);
            linalg::axpy(coef, self.c(r), &mut out);
        }
        Ok(out)
    }

    /// `T(x, ., z)`, the vector with `<y, T(x,.,z)> = T(x,y,z)`.
    ///
    /// This is what turns the dependent-word logit `T(v_a, v_b, c)` into a
    /// single dot product with `v_b`.
    pub fn contract_first_third(&self, x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        self.check(z)?;
        let mut out = vec![0.0; self.dim];
        for r in 0..self.rank {
            let coef = self.weights[r] * dot(self.a(r), x) * dot(self.c(r), z);
            linalg::axpy(coef, self.b(r), &mut out);
        }
        Ok(out)
    }

    /// The slice operator `T(x, ., .)` in factored form.
    pub fn slice(&self, x: &[f64]) -> Result<SliceOperator<'_>> {
        self.check(x)?;
        let coef = Self::project(&self.factor_a, self.dim, x)
            .into_iter()
            .zip(&self.weights)
            .map(|(p, w)| p * w)
            .collect();
        Ok(SliceOperator { tensor: self, coef })
    }

    /// `[T(x, ., .)]^T y`, computed through the slice operator.
    pub fn contract_one_matvec(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        Ok(self.slice(x)?.apply_transpose(y))
    }

    /// Largest singular value of `T(x, ., .)` (plus `I` when `add_identity`).
    pub fn slice_spectral_norm(&self, x: &[f64], add_identity: bool) -> Result<SpectralEstimate> {
        let mut rng = ChaCha8Rng::seed_from_u64(SPECTRAL_SEED);
        self.slice(x)?.spectral_norm(add_identity, &mut rng)
    }

    /// Exact Frobenius norm of `T(x, ., .)` (plus `I` when `add_identity`).
    pub fn slice_frobenius(&self, x: &[f64], add_identity: bool) -> Result<f64> {
        Ok(self.slice(x)?.frobenius(&self.slice_gram(), add_identity))
    }

    /// Gram products shared by all slice Frobenius norms of this tensor.
    pub fn slice_gram(&self) -> SliceGram {
        let r = self.rank;
        let mut hadamard = vec![0.0; r * r];
        for s in 0..r {
            for t in s..r {
                let v = dot(self.b(s), self.b(t)) * dot(self.c(s), self.c(t));
                hadamard[s * r + t] = v;
                hadamard[t * r + s] = v;
            }
        }
        let bc = (0..r).map(|s| dot(self.b(s), self.c(s))).collect();
        SliceGram { rank: r, hadamard, bc }
    }

    /// Writes the binary `SCT1` layout: magic, `d` and `R` as u32, weights and
    /// A, B, C as row-major f64, a u64 count of root-bias entries followed by
    /// `(u32 id, f64 bias)` pairs in id order, then the global bias. All
    /// little-endian.
    pub fn write_sct<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(SCT_MAGIC)?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.rank as u32).to_le_bytes())?;
        for block in [&self.weights, &self.factor_a, &self.factor_b, &self.factor_c] {
            for v in block.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.write_all(&(self.root_bias.len() as u64).to_le_bytes())?;
        for (&id, &b) in &self.root_bias {
            w.write_all(&id.to_le_bytes())?;
            w.write_all(&b.to_le_bytes())?;
        }
        w.write_all(&self.global_bias.to_le_bytes())?;
        Ok(())
    }

    pub fn read_sct<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SCT_MAGIC {
            return Err(Error::Format(format!("bad tensor magic {magic:?}")));
        }
        let dim = read_u32(&mut r)? as usize;
        let rank = read_u32(&mut r)? as usize;
        let weights = read_f64s(&mut r, rank)?;
        let a = read_f64s(&mut r, rank * dim)?;
        let b = read_f64s(&mut r, rank * dim)?;
        let c = read_f64s(&mut r, rank * dim)?;
        let mut t = Self::new(dim, weights, a, b, c)?;
        let nbias = read_u64(&mut r)?;
        for _ in 0..nbias {
            let id = read_u32(&mut r)?;
            let bias = read_f64(&mut r)?;
            t.root_bias.insert(id, bias);
        }
        t.global_bias = read_f64(&mut r)?;
        Ok(t)
    }
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(r)).collect()
}

/// `(<b_s,b_t> <c_s,c_t>)_{s,t}` and `<b_s,c_s>` for a fixed tensor.
#[derive(Debug, Clone)]
pub struct SliceGram {
    rank: usize,
    hadamard: Vec<f64>,
    bc: Vec<f64>,
}

/// `M = T(x, ., .)` with `M[j][k] = sum_r coef_r b_r[j] c_r[k]`.
#[derive(Debug, Clone)]
pub struct SliceOperator<'t> {
    tensor: &'t CpTensor,
    coef: Vec<f64>,
}

impl SliceOperator<'_> {
    pub fn dim(&self) -> usize {
        self.tensor.dim
    }

    /// `M z`
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let t = self.tensor;
        let mut out = vec![0.0; t.dim];
        for (r, &k) in self.coef.iter().enumerate() {
            linalg::axpy(k * dot(t.c(r), z), t.b(r), &mut out);
        }
        out
    }

    /// `M^T y`
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let t = self.tensor;
        let mut out = vec![0.0; t.dim];
        for (r, &k) in self.coef.iter().enumerate() {
            linalg::axpy(k * dot(t.b(r), y), t.c(r), &mut out);
        }
        out
    }

    pub fn trace(&self) -> f64 {
        let t = self.tensor;
        self.coef.iter().enumerate().map(|(r, k)| k * dot(t.b(r), t.c(r))).sum()
    }

    /// `||M||_F^2` (or `||M + I||_F^2`) from `||M||_F^2 + 2 tr(M) + d`.
    pub fn frobenius_sq(&self, gram: &SliceGram, add_identity: bool) -> f64 {
        debug_assert_eq!(gram.rank, self.coef.len());
        let r = gram.rank;
        let mut sq = 0.0;
        for s in 0..r {
            let row = &gram.hadamard[s * r..(s + 1) * r];
            sq += self.coef[s] * dot(row, &self.coef);
        }
        if add_identity {
            let trace: f64 = self.coef.iter().zip(&gram.bc).map(|(k, bc)| k * bc).sum();
            sq += 2.0 * trace + self.dim() as f64;
        }
        sq.max(0.0)
    }

    pub fn frobenius(&self, gram: &SliceGram, add_identity: bool) -> f64 {
        self.frobenius_sq(gram, add_identity).sqrt()
    }

    /// Largest eigenvalue of `(M + sI)^T (M + sI)` by power iteration, where
    /// `s` is 1 with the identity. A zero slice gives exactly `s^2`.
    pub fn spectral_norm_sq<R: Rng + ?Sized>(&self, add_identity: bool, rng: &mut R) -> Result<SpectralEstimate> {
        let shift = if add_identity { 1.0 } else { 0.0 };
        if self.coef.iter().all(|&k| k == 0.0) {
            return Ok(SpectralEstimate { value: shift, iterations: 0, converged: true });
        }
        let (est, _) = power_iteration_psd(
            self.dim(),
            |x, out| {
                let mut mx = self.apply(x);
                linalg::axpy(shift, x, &mut mx);
                let mut mtmx = self.apply_transpose(&mx);
                linalg::axpy(shift, &mx, &mut mtmx);
                out.copy_from_slice(&mtmx);
            },
            linalg::POWER_TOLERANCE,
            linalg::POWER_MAX_ITERATIONS,
            rng,
        )?;
        Ok(est)
    }

    pub fn spectral_norm<R: Rng + ?Sized>(&self, add_identity: bool, rng: &mut R) -> Result<SpectralEstimate> {
        let est = self.spectral_norm_sq(add_identity, rng)?;
        Ok(SpectralEstimate { value: est.value.sqrt(), ..est })
    }
}
