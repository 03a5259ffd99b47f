use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synwalk::linalg::{add, cosine, norm_sq};
use synwalk::training::{self, TrainConfig};
use synwalk::{CpTensor, EmbeddingMatrix, PairCounts, TripleCounts};

fn to_matrix(emb: &EmbeddingMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(emb.len(), emb.dim(), emb.as_slice())
}

/// Median row cosine between `learned` and `truth` after the best orthogonal
/// map of `learned` onto `truth`.
fn aligned_median_cosine(learned: &EmbeddingMatrix, truth: &EmbeddingMatrix) -> f64 {
    let x = to_matrix(learned);
    let y = to_matrix(truth);
    let svd = (x.transpose() * &y).svd(true, true);
    let rotation = svd.u.unwrap() * svd.v_t.unwrap();
    let mapped = x * rotation;
    let mut cos: Vec<f64> = (0..truth.len())
        .map(|i| {
            let m: Vec<f64> = mapped.row(i).iter().copied().collect();
            cosine(&m, truth.row(i as u32))
        })
        .collect();
    cos.sort_by(f64::total_cmp);
    cos[cos.len() / 2]
}

#[test]
fn embeddings_are_recovered_up_to_rotation() {
    let (n, d) = (60, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let truth = EmbeddingMatrix::gaussian(n, d, 0.35, &mut rng).unwrap();
    let mut counts = PairCounts::new(n);
    for i in 0..n as u32 {
        for j in i + 1..n as u32 {
            let x = (norm_sq(&add(truth.row(i), truth.row(j))) + 50f64.ln()).exp().round();
            counts.add(i, j, x).unwrap();
        }
    }
    let config = TrainConfig { dim: d, learning_rate: 0.02, epochs: 400, batch_size: 128, seed: 3, ..TrainConfig::default() };
    let learned = training::train_embeddings(&counts, &config).unwrap();

    let random = EmbeddingMatrix::gaussian(n, d, 0.35, &mut rng).unwrap();
    let chance = aligned_median_cosine(&random, &truth);
    let fit = aligned_median_cosine(&learned, &truth);
    assert!(fit >= chance + 0.3, "learned {fit:.3} vs random {chance:.3}");
    assert!(fit > 0.9, "learned {fit:.3}");
}

#[test]
fn planted_tensor_is_fitted() {
    let (n, d) = (30, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let emb = EmbeddingMatrix::gaussian(n, d, 0.4, &mut rng).unwrap();
    let planted = CpTensor::gaussian(d, 2, 0.8, &mut rng).unwrap();
    let mut counts = TripleCounts::new(n);
    for (a, b) in [(0u32, 1u32), (2, 3), (4, 5), (6, 7), (8, 9), (10, 11)] {
        let phrase = add(&add(emb.row(a), emb.row(b)), &planted.contract_two(emb.row(a), emb.row(b)).unwrap());
        for w in 12..n as u32 {
            let x = (norm_sq(&add(emb.row(w), &phrase)) + 40f64.ln()).exp().round();
            counts.add(a, b, w, x).unwrap();
        }
    }
    let config = TrainConfig {
        dim: d,
        cp_rank: 2,
        learning_rate: 0.02,
        epochs: 3000,
        batch_size: 32,
        seed: 1,
        ..TrainConfig::default()
    };
    let cells = training::triple_cells(&counts);
    let zero = training::train_tensor_cells(&cells, &emb, CpTensor::zero(d).unwrap(), &config).unwrap().tensor;
    let fitted = training::train_tensor(&counts, &emb, &config).unwrap();
    let zero_loss = training::tensor_loss(&zero, &emb, &counts, config.cap).unwrap();
    let fitted_loss = training::tensor_loss(&fitted, &emb, &counts, config.cap).unwrap();
    assert!(fitted_loss < 0.02 * zero_loss, "fitted {fitted_loss:.4} vs zero tensor {zero_loss:.4}");
}

#[test]
fn deterministic_training_repeats_exactly() {
    let mut counts = PairCounts::new(10);
    for i in 0..10u32 {
        for j in i + 1..10 {
            counts.add(i, j, ((i * 7 + j * 3) % 11 + 1) as f64).unwrap();
        }
    }
    let config = TrainConfig { dim: 3, epochs: 5, batch_size: 8, seed: 9, ..TrainConfig::default() };
    let first = training::train_embeddings(&counts, &config).unwrap();
    let second = training::train_embeddings(&counts, &config).unwrap();
    assert_eq!(first, second);
}
