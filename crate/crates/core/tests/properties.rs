use proptest::prelude::*;
use synwalk::cooccur::{count_pairs, count_sharded, count_triples};
use synwalk::corpus::{EncodedSentence, Relation, SyntacticPair};
use synwalk::linalg::dot;
use synwalk::{CompositionMethod, Composer, CpTensor, EmbeddingMatrix, PairCounts, TripleCounts};

fn close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs()))
}

fn values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, len)
}

/// A tensor plus three vectors of matching dimension.
fn tensor_and_vectors() -> impl Strategy<Value = (CpTensor, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..=6, 0usize..=4).prop_flat_map(|(d, r)| {
        (values(r), values(r * d), values(r * d), values(r * d), values(d), values(d), values(d)).prop_map(
            move |(w, a, b, c, x, y, z)| (CpTensor::new(d, w, a, b, c).unwrap(), x, y, z),
        )
    })
}

fn sentences(n: u32) -> impl Strategy<Value = Vec<EncodedSentence>> {
    let sentence = prop::collection::vec(0..n, 2..12).prop_flat_map(|ids| {
        let len = ids.len();
        prop::collection::vec((0..len, 0..len), 0..3).prop_map(move |positions| {
            let pairs = positions
                .into_iter()
                .filter(|(i, j)| i != j)
                .map(|(i, j)| SyntacticPair { root: ids[i], dep: ids[j], root_pos: i, dep_pos: j, relation: Relation::AdjNoun })
                .collect();
            EncodedSentence { ids: ids.clone(), pairs }
        })
    });
    prop::collection::vec(sentence, 0..20)
}

fn pair_bytes(p: &PairCounts) -> Vec<u8> {
    let mut out = Vec::new();
    p.write_binary(&mut out).unwrap();
    out
}

fn triple_bytes(t: &TripleCounts) -> Vec<u8> {
    let mut out = Vec::new();
    t.write_binary(&mut out).unwrap();
    out
}

proptest! {
    #[test]
    fn trilinear_agrees_with_contractions((t, x, y, z) in tensor_and_vectors()) {
        let full = t.trilinear(&x, &y, &z).unwrap();
        prop_assert!(close(full, dot(&t.contract_two(&x, &y).unwrap(), &z), 1e-10));
        prop_assert!(close(full, dot(&t.contract_first_third(&x, &z).unwrap(), &y), 1e-10));
        let slice = t.slice(&x).unwrap();
        prop_assert!(close(full, dot(&y, &slice.apply(&z)), 1e-10));
        let ty = slice.apply_transpose(&y);
        for (u, v) in ty.iter().zip(t.contract_two(&x, &y).unwrap()) {
            prop_assert!(close(*u, v, 1e-12));
        }
    }

    #[test]
    fn contraction_is_linear_in_the_root((t, x, y, z) in tensor_and_vectors(), s in -3.0f64..3.0) {
        let mixed: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + s * b).collect();
        let lhs = t.contract_two(&mixed, &y).unwrap();
        let tx = t.contract_two(&x, &y).unwrap();
        let tz = t.contract_two(&z, &y).unwrap();
        for k in 0..lhs.len() {
            prop_assert!(close(lhs[k], tx[k] + s * tz[k], 1e-10));
        }
    }

    #[test]
    fn factored_frobenius_matches_columns((t, x, _, _) in tensor_and_vectors(), shift in any::<bool>()) {
        let d = t.dim();
        let slice = t.slice(&x).unwrap();
        let mut dense = 0.0;
        for k in 0..d {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            let mut col = slice.apply(&e);
            if shift {
                col[k] += 1.0;
            }
            dense += dot(&col, &col);
        }
        prop_assert!(close(slice.frobenius_sq(&t.slice_gram(), shift), dense, 1e-10));
    }

    #[test]
    fn tensor_file_round_trip((mut t, _, _, _) in tensor_and_vectors(), bias in -5.0f64..5.0) {
        t.root_bias.insert(3, bias);
        t.global_bias = -bias;
        let mut bytes = Vec::new();
        t.write_sct(&mut bytes).unwrap();
        prop_assert_eq!(CpTensor::read_sct(bytes.as_slice()).unwrap(), t);
    }

    #[test]
    fn sharding_never_changes_counts(corpus in sentences(8), workers in 1usize..6) {
        let pairs = count_pairs(&corpus, 8, 3).unwrap();
        let triples = count_triples(&corpus, 8, 3).unwrap();
        let (sp, st) = count_sharded(&corpus, 8, 3, workers).unwrap();
        prop_assert_eq!(pair_bytes(&sp), pair_bytes(&pairs));
        prop_assert_eq!(triple_bytes(&st), triple_bytes(&triples));
    }

    #[test]
    fn pair_total_counts_every_window_position(corpus in sentences(8), window in 1usize..6) {
        let pairs = count_pairs(&corpus, 8, window).unwrap();
        let expected: usize = corpus
            .iter()
            .map(|s| (0..s.ids.len()).map(|i| window.min(s.ids.len() - 1 - i)).sum::<usize>())
            .sum();
        prop_assert_eq!(pairs.total(), expected as f64);
    }

    #[test]
    fn pair_counts_ignore_direction(corpus in sentences(8)) {
        let reversed: Vec<EncodedSentence> = corpus
            .iter()
            .map(|s| EncodedSentence { ids: s.ids.iter().rev().copied().collect(), pairs: vec![] })
            .collect();
        let forward = count_pairs(&corpus, 8, 4).unwrap();
        let backward = count_pairs(&reversed, 8, 4).unwrap();
        prop_assert_eq!(pair_bytes(&forward), pair_bytes(&backward));
        for ((i, j), c) in forward.iter() {
            prop_assert!(i <= j);
            prop_assert_eq!(forward.get(j, i), c);
        }
    }

    #[test]
    fn triple_totals_match_window_sizes(corpus in sentences(8), window in 1usize..6) {
        let triples = count_triples(&corpus, 8, window).unwrap();
        let mut expected = 0usize;
        for s in &corpus {
            for p in &s.pairs {
                let lo = p.root_pos.saturating_sub(window);
                let hi = (p.root_pos + window).min(s.ids.len() - 1);
                expected += (lo..=hi).filter(|&k| k != p.root_pos && k != p.dep_pos).count();
            }
        }
        prop_assert_eq!(triples.total(), expected as f64);
    }

    #[test]
    fn merge_is_order_free(x in sentences(6), y in sentences(6)) {
        let (px, tx) = count_sharded(&x, 6, 2, 1).unwrap();
        let (py, ty) = count_sharded(&y, 6, 2, 1).unwrap();
        let mut a = px.clone();
        a.merge(&py).unwrap();
        let mut b = py;
        b.merge(&px).unwrap();
        prop_assert_eq!(pair_bytes(&a), pair_bytes(&b));
        let mut c = tx.clone();
        c.merge(&ty).unwrap();
        let mut e = ty;
        e.merge(&tx).unwrap();
        prop_assert_eq!(triple_bytes(&c), triple_bytes(&e));
    }

    #[test]
    fn count_files_round_trip(corpus in sentences(8)) {
        let (p, t) = count_sharded(&corpus, 8, 5, 1).unwrap();
        prop_assert_eq!(PairCounts::read_binary(pair_bytes(&p).as_slice()).unwrap(), p);
        prop_assert_eq!(TripleCounts::read_binary(triple_bytes(&t).as_slice()).unwrap(), t);
    }

    #[test]
    fn zero_weight_tensor_composes_additively((t, x, y, _) in tensor_and_vectors()) {
        let emb = EmbeddingMatrix::from_rows(&[x.clone(), y.clone()]).unwrap();
        let composer = Composer::new(&emb, Some(&t), None).unwrap();
        let add = composer.compose_raw(0, 1, &CompositionMethod::Additive).unwrap();
        let flat = composer.compose_raw(0, 1, &CompositionMethod::Tensor { alpha: 0.0 }).unwrap();
        prop_assert_eq!(&add, &flat);
        let full = composer.compose_raw(0, 1, &CompositionMethod::Tensor { alpha: 1.0 }).unwrap();
        let txy = t.contract_two(&x, &y).unwrap();
        for k in 0..full.len() {
            prop_assert!(close(full[k], x[k] + y[k] + txy[k], 1e-12));
        }
    }

    #[test]
    fn embedding_text_round_trip(rows in prop::collection::vec(values(3), 1..6)) {
        let emb = EmbeddingMatrix::from_rows(&rows).unwrap();
        let words: Vec<String> = (0..rows.len()).map(|i| format!("w{i}")).collect();
        let mut text = Vec::new();
        emb.write_text(&mut text, &words).unwrap();
        let (read_words, read) = EmbeddingMatrix::read_text(text.as_slice()).unwrap();
        prop_assert_eq!(read_words, words);
        prop_assert_eq!(read.as_slice(), emb.as_slice());
    }
}
