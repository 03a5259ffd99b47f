//! Dense vector helpers, uniform sphere sampling and power iteration.
//!
//! Vectors are plain `&[f64]` slices; matrices are row-major `&[f64]` with an
//! explicit column count.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Relative residual below which power iteration stops.
pub const POWER_TOLERANCE: f64 = 1e-8;

/// Iteration cap for power iteration.
pub const POWER_MAX_ITERATIONS: usize = 1000;

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm_sq(x: &[f64]) -> f64 {
    dot(x, x)
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

/// Scales `x` to unit length in place and returns the original norm.
/// A zero vector is left untouched.
pub fn normalize(x: &mut [f64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

/// Cosine similarity; zero if either vector is zero.
pub fn cosine(x: &[f64], y: &[f64]) -> f64 {
    let denom = norm(x) * norm(y);
    if denom == 0.0 {
        0.0
    } else {
        (dot(x, y) / denom).clamp(-1.0, 1.0)
    }
}

pub fn check_finite(x: &[f64], what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} has non-finite entries")))
    }
}

pub fn gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Uniform draw from the unit sphere in `R^d` (normalized standard Gaussian).
pub fn sample_unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::InvalidArgument("sphere dimension must be at least 1".into()));
    }
    loop {
        let mut v = gaussian_vector(d, rng);
        // an exactly zero draw has probability zero but would not normalize
        if normalize(&mut v) > 0.0 {
            return Ok(v);
        }
    }
}

/// Result of a power-iteration norm estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by power
/// iteration from a random start. `apply` writes `A x` into its second argument.
///
/// Returns the Rayleigh quotient estimate; convergence is declared when the
/// residual `||A x - rho x||` falls below `tol` relative to `rho`, which also
/// bounds the eigenvalue error by `tol * rho`.
///
/// Nearly tied top eigenvalues make plain power iteration crawl. If the cap is
/// reached, the last iterate seeds a restarted Krylov (Rayleigh-Ritz) solve
/// with the same budget; `converged` is false only if that also fails.
pub fn power_iteration_psd<R, F>(
    dim: usize,
    mut apply: F,
    tol: f64,
    max_iterations: usize,
    rng: &mut R,
) -> Result<(SpectralEstimate, Vec<f64>)>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64], &mut [f64]),
{
    let mut x = sample_unit_sphere(dim, rng)?;
    let mut y = vec![0.0; dim];
    for it in 1..=max_iterations {
        apply(&x, &mut y);
        let rho = dot(&x, &y).max(0.0);
        let ynorm = norm(&y);
        if ynorm == 0.0 {
            // x is in the null space; for PSD operators hit at random this means A = 0
            return Ok((SpectralEstimate { value: 0.0, iterations: it, converged: true }, x));
        }
        let residual = x.iter().zip(&y).map(|(xi, yi)| (yi - rho * xi).powi(2)).sum::<f64>().sqrt();
        if residual <= tol * rho {
            return Ok((SpectralEstimate { value: rho, iterations: it, converged: true }, x));
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ynorm;
        }
    }
    krylov_refine(dim, &mut apply, x, tol, max_iterations, max_iterations)
}

/// Largest Krylov subspace used by the fallback solver.
const KRYLOV_DIM: usize = 32;

fn krylov_refine<F>(
    dim: usize,
    apply: &mut F,
    start: Vec<f64>,
    tol: f64,
    budget: usize,
    spent: usize,
) -> Result<(SpectralEstimate, Vec<f64>)>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let k_max = dim.min(KRYLOV_DIM);
    let mut x = start;
    let mut used = 0;
    let mut best = (0.0, x.clone());
    while used < budget {
        let mut basis: Vec<Vec<f64>> = vec![x.clone()];
        let mut images: Vec<Vec<f64>> = Vec::with_capacity(k_max);
        let mut complete = false;
        while images.len() < basis.len() && used < budget {
            let q = &basis[images.len()];
            let mut w = vec![0.0; dim];
            apply(q, &mut w);
            used += 1;
            images.push(w.clone());
            if basis.len() == k_max {
                continue;
            }
            let scale = norm(&w);
            // two passes of Gram-Schmidt keep the basis orthogonal to rounding
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &w);
                    axpy(-c, b, &mut w);
                }
            }
            if normalize(&mut w) <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
                complete = true;
                continue;
            }
            basis.push(w);
        }
        let k = images.len();
        let basis = &basis[..k];
        let h = nalgebra::DMatrix::from_fn(k, k, |i, j| 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i])));
        let eig = h.symmetric_eigen();
        let (top, &theta) =
            eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("subspace is non-empty");
        let s = eig.eigenvectors.column(top);
        let mut next = vec![0.0; dim];
        let mut image = vec![0.0; dim];
        for j in 0..k {
            axpy(s[j], &basis[j], &mut next);
            axpy(s[j], &images[j], &mut image);
        }
        let theta = theta.max(0.0);
        axpy(-theta, &next, &mut image);
        let residual = norm(&image);
        best = (theta, next.clone());
        let exhausted = complete || k == dim;
        if residual <= tol * theta || exhausted || theta == 0.0 {
            let estimate = SpectralEstimate { value: theta, iterations: spent + used, converged: true };
            return Ok((estimate, next));
        }
        x = next;
        normalize(&mut x);
    }
    Ok((SpectralEstimate { value: best.0, iterations: spent + used, converged: false }, best.1))
}

/// Leading right singular direction of a row-major `rows x cols` matrix,
/// i.e. the first principal direction of its (uncentered) rows.
pub fn principal_direction<R: Rng + ?Sized>(
    rows: &[Vec<f64>],
    cols: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("no rows to fit a principal direction".into()));
    }
    for r in rows {
        check_dim(cols, r.len())?;
    }
    let mut gram = vec![0.0; cols * cols];
    for r in rows {
        for i in 0..cols {
            let ri = r[i];
            if ri == 0.0 {
                continue;
            }
            for j in 0..cols {
                gram[i * cols + j] += ri * r[j];
            }
        }
    }
    let (_, dir) = power_iteration_psd(
        cols,
        |x, y| {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = dot(&gram[i * cols..(i + 1) * cols], x);
            }
        },
        1e-12,
        10 * POWER_MAX_ITERATIONS,
        rng,
    )?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sphere_rejects_zero_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_unit_sphere(0, &mut rng), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn sphere_in_one_dimension_is_plus_or_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = [false; 2];
        for _ in 0..100 {
            let v = sample_unit_sphere(1, &mut rng).unwrap();
            assert!(v[0] == 1.0 || v[0] == -1.0);
            seen[(v[0] > 0.0) as usize] = true;
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn sphere_samples_have_unit_norm_and_are_seeded() {
        for d in [2, 3, 17, 300] {
            let a = sample_unit_sphere(d, &mut ChaCha8Rng::seed_from_u64(d as u64)).unwrap();
            let b = sample_unit_sphere(d, &mut ChaCha8Rng::seed_from_u64(d as u64)).unwrap();
            assert_eq!(a, b);
            assert!((norm(&a) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_coordinates_are_centered() {
        // each coordinate of a uniform point on S^2 has variance 1/3
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut mean = [0.0; 3];
        for _ in 0..n {
            let v = sample_unit_sphere(3, &mut rng).unwrap();
            for k in 0..3 {
                mean[k] += v[k] / n as f64;
            }
        }
        let sigma = 1.0 / (3.0 * n as f64).sqrt();
        for m in mean {
            assert!(m.abs() < 4.0 * sigma, "mean {m} vs sigma {sigma}");
        }
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let diag = [4.0, 1.0, 0.5];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (est, _) = power_iteration_psd(
            3,
            |x, y| {
                for i in 0..3 {
                    y[i] = diag[i] * x[i];
                }
            },
            POWER_TOLERANCE,
            POWER_MAX_ITERATIONS,
            &mut rng,
        )
        .unwrap();
        assert!(est.converged);
        assert!((est.value - 4.0).abs() < 1e-7);
    }

    #[test]
    fn near_tie_falls_back_to_krylov() {
        let diag = [1.0 + 1e-4, 1.0, 0.999, 0.5];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (est, x) = power_iteration_psd(
            4,
            |x, y| {
                for i in 0..4 {
                    y[i] = diag[i] * x[i];
                }
            },
            POWER_TOLERANCE,
            POWER_MAX_ITERATIONS,
            &mut rng,
        )
        .unwrap();
        assert!(est.converged);
        assert!(est.iterations > POWER_MAX_ITERATIONS);
        assert!((est.value - diag[0]).abs() < 1e-12, "{}", est.value);
        assert!(x[0].abs() > 1.0 - 1e-9);
    }

    #[test]
    fn principal_direction_of_collinear_rows() {
        let rows = vec![vec![1.0, 2.0, 0.0], vec![-2.0, -4.0, 0.0], vec![0.5, 1.0, 0.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = principal_direction(&rows, 3, &mut rng).unwrap();
        let expected = [1.0 / 5f64.sqrt(), 2.0 / 5f64.sqrt(), 0.0];
        assert!((dot(&u, &expected).abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cosine_of_zero_vector_is_zero() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
        assert!((cosine(&[1.0, 0.0], &[2.0, 0.0]) - 1.0).abs() < 1e-15);
    }
}
