//! Phrase similarity evaluation.
//!
//! Subjects are split into folds; each rotation picks the composition weight
//! on one fold (dev) by Spearman correlation and scores the other folds
//! (test). Scores are cosines between composed phrase vectors, correlated
//! against every `(subject, pair)` rating row.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::composition::{CompositionMethod, Composer};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::linalg;

fn check_lengths(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!("lengths differ: {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("correlation needs at least two points".into()));
    }
    Ok(())
}

/// Centered (Pearson) correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_lengths(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation of a constant vector".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && xs[idx[end]] == xs[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_lengths(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhraseType {
    AdjNoun,
    VerbObj,
    NounNoun,
}

impl fmt::Display for PhraseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::AdjNoun => "AN",
            Self::VerbObj => "VO",
            Self::NounNoun => "NN",
        })
    }
}

impl FromStr for PhraseType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "an" | "adj_noun" | "adjectivenouns" => Ok(Self::AdjNoun),
            "vo" | "verb_obj" | "verbobjects" => Ok(Self::VerbObj),
            "nn" | "noun_noun" | "compoundnouns" => Ok(Self::NounNoun),
            _ => Err(Error::InvalidArgument(format!("unknown phrase type {s:?}"))),
        }
    }
}

/// One rating row. Phrases are in surface order (`adjective noun`,
/// `verb object`); the root is the second word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub subject: String,
    pub phrase1: (String, String),
    pub phrase2: (String, String),
    pub rating: f64,
    pub phrase_type: PhraseType,
}

pub const RATING_MIN: f64 = 1.0;
pub const RATING_MAX: f64 = 7.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhraseSimDataset {
    pub records: Vec<RatingRecord>,
}

impl PhraseSimDataset {
    fn push_checked(&mut self, rec: RatingRecord, line: usize) -> Result<()> {
        if !(RATING_MIN..=RATING_MAX).contains(&rec.rating) {
            return Err(Error::Parse { line, message: format!("rating {} outside [1, 7]", rec.rating) });
        }
        self.records.push(rec);
        Ok(())
    }

    /// `subject  w1  w2  w3  w4  rating  type` per line; `#` starts a comment.
    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut out = Self::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 7 {
                return Err(Error::Parse { line: i + 1, message: format!("expected 7 columns, found {}", f.len()) });
            }
            let rating = f[5]
                .trim()
                .parse()
                .map_err(|_| Error::Parse { line: i + 1, message: format!("bad rating {:?}", f[5]) })?;
            let phrase_type = f[6].trim().parse().map_err(|e: Error| Error::Parse { line: i + 1, message: e.to_string() })?;
            let rec = RatingRecord {
                subject: f[0].into(),
                phrase1: (f[1].into(), f[2].into()),
                phrase2: (f[3].into(), f[4].into()),
                rating,
                phrase_type,
            };
            out.push_checked(rec, i + 1)?;
        }
        Ok(out)
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.subject, r.phrase1.0, r.phrase1.1, r.phrase2.0, r.phrase2.1, r.rating, r.phrase_type
            )?;
        }
        Ok(())
    }

    /// Reads the whitespace-separated layout of the published ratings file:
    /// `participant type group w1 w2 w3 w4 rating`, with an optional header
    /// line starting with `participant`.
    pub fn read_published<R: BufRead>(r: R) -> Result<Self> {
        let mut out = Self::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() || (i == 0 && f[0].eq_ignore_ascii_case("participant")) {
                continue;
            }
            if f.len() != 8 {
                return Err(Error::Parse { line: i + 1, message: format!("expected 8 fields, found {}", f.len()) });
            }
            let phrase_type = f[1].parse().map_err(|e: Error| Error::Parse { line: i + 1, message: e.to_string() })?;
            let rating = f[7]
                .parse()
                .map_err(|_| Error::Parse { line: i + 1, message: format!("bad rating {:?}", f[7]) })?;
            let rec = RatingRecord {
                subject: f[0].into(),
                phrase1: (f[3].into(), f[4].into()),
                phrase2: (f[5].into(), f[6].into()),
                rating,
                phrase_type,
            };
            out.push_checked(rec, i + 1)?;
        }
        Ok(out)
    }

    /// Subjects in order of first appearance.
    pub fn subjects(&self) -> Vec<String> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for r in &self.records {
            if seen.insert(r.subject.as_str(), ()).is_none() {
                out.push(r.subject.clone());
            }
        }
        out
    }

    pub fn filter_type(&self, t: PhraseType) -> Self {
        Self { records: self.records.iter().filter(|r| r.phrase_type == t).cloned().collect() }
    }
}

/// Which weight the grid search tunes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MethodFamily {
    /// No tunable weight.
    Fixed { method: CompositionMethod },
    /// `alpha` of [`CompositionMethod::Tensor`].
    Tensor,
    /// `beta` of [`CompositionMethod::WeightedAdditive`].
    WeightedAdditive { swap: bool },
    /// `gamma` of [`CompositionMethod::SifTensor`].
    SifTensor { a: f64 },
}

impl MethodFamily {
    pub fn method(&self, weight: f64) -> CompositionMethod {
        match *self {
            Self::Fixed { method } => method,
            Self::Tensor => CompositionMethod::Tensor { alpha: weight },
            Self::WeightedAdditive { swap } => CompositionMethod::WeightedAdditive { beta: weight, swap },
            Self::SifTensor { a } => CompositionMethod::SifTensor { a, gamma: weight },
        }
    }

    pub fn is_tunable(&self) -> bool {
        !matches!(self, Self::Fixed { .. })
    }

    pub fn name(&self) -> String {
        match self {
            Self::Fixed { method } => method.to_string(),
            Self::Tensor => "tensor".into(),
            Self::WeightedAdditive { .. } => "weighted additive".into(),
            Self::SifTensor { .. } => "sif+tensor".into(),
        }
    }
}

/// `{0, 0.1, ..., 1.0}`
pub fn default_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub folds: usize,
    pub grid: Vec<f64>,
    /// Select the weight on the test subjects themselves (an upper bound).
    pub cheat: bool,
    /// Correlate against per-pair mean ratings instead of every rating row.
    pub average_ratings: bool,
    /// Standardize each subject's ratings before pooling.
    pub zscore: bool,
}

impl Default for FoldSpec {
    fn default() -> Self {
        Self { folds: 3, grid: default_grid(), cheat: false, average_ratings: false, zscore: false }
    }
}

/// Splits `count` subjects into `folds` contiguous groups; the first
/// `count % folds` groups get one extra subject.
pub fn fold_sizes(count: usize, folds: usize) -> Vec<usize> {
    (0..folds).map(|k| count / folds + usize::from(k < count % folds)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub dev_fold: usize,
    pub chosen_weight: Option<f64>,
    pub dev_spearman: f64,
    pub test_spearman: f64,
    pub test_pearson: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub method: String,
    /// Test scores averaged over rotations.
    pub spearman: f64,
    pub pearson: f64,
    /// Mean of the per-rotation choices; `None` for untuned methods.
    pub chosen_weight: Option<f64>,
    pub per_fold: Vec<FoldResult>,
    pub rows_used: usize,
    pub rows_skipped: usize,
    pub subjects: usize,
    /// Weight picked on the test subjects.
    pub upper_bound: bool,
}

/// A rating row resolved to phrase-pair and subject indices.
struct Row {
    pair: usize,
    subject: usize,
    rating: f64,
}

fn correlate(
    rows: &[Row],
    sims: &[f64],
    in_set: &[bool],
    num_pairs: usize,
    average: bool,
) -> Result<(f64, f64)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = if average {
        let mut sum = vec![0.0; num_pairs];
        let mut n = vec![0usize; num_pairs];
        for r in rows.iter().filter(|r| in_set[r.subject]) {
            sum[r.pair] += r.rating;
            n[r.pair] += 1;
        }
        (0..num_pairs).filter(|&p| n[p] > 0).map(|p| (sims[p], sum[p] / n[p] as f64)).unzip()
    } else {
        rows.iter().filter(|r| in_set[r.subject]).map(|r| (sims[r.pair], r.rating)).unzip()
    };
    Ok((spearman(&xs, &ys)?, pearson(&xs, &ys)?))
}

/// Runs the fold-rotated protocol for one method family.
pub fn evaluate(dataset: &PhraseSimDataset, composer: &Composer<'_>, vocab: &Vocabulary, family: &MethodFamily, spec: &FoldSpec) -> Result<EvalResult> {
    if spec.folds < 2 {
        return Err(Error::InvalidArgument("need at least two folds".into()));
    }
    let grid: Vec<f64> = if family.is_tunable() { spec.grid.clone() } else { vec![f64::NAN] };
    if grid.is_empty() {
        return Err(Error::InvalidArgument("weight grid is empty".into()));
    }

    // resolve words; phrases are (root, dependent) = (second word, first word)
    let mut phrase_index: HashMap<(u32, u32), usize> = HashMap::new();
    let mut phrases = Vec::new();
    let mut pair_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pair_list = Vec::new();
    let subjects = dataset.subjects();
    let subject_index: HashMap<&str, usize> = subjects.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut rows = Vec::new();
    let mut skipped = 0;
    for r in &dataset.records {
        let ids = [&r.phrase1.1, &r.phrase1.0, &r.phrase2.1, &r.phrase2.0].map(|w| vocab.id(w));
        let [Some(a1), Some(b1), Some(a2), Some(b2)] = ids else {
            skipped += 1;
            continue;
        };
        let mut intern = |p: (u32, u32)| {
            *phrase_index.entry(p).or_insert_with(|| {
                phrases.push(p);
                phrases.len() - 1
            })
        };
        let (p1, p2) = (intern((a1, b1)), intern((a2, b2)));
        let pair = *pair_index.entry((p1, p2)).or_insert_with(|| {
            pair_list.push((p1, p2));
            pair_list.len() - 1
        });
        rows.push(Row { pair, subject: subject_index[r.subject.as_str()], rating: r.rating });
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData(format!("all {skipped} rating rows have out-of-vocabulary words")));
    }
    if spec.zscore {
        let mut stats = vec![(0.0, 0.0, 0usize); subjects.len()];
        for r in &rows {
            let s = &mut stats[r.subject];
            s.0 += r.rating;
            s.1 += r.rating * r.rating;
            s.2 += 1;
        }
        for r in &mut rows {
            let (sum, sq, n) = stats[r.subject];
            let mean = sum / n as f64;
            let sd = (sq / n as f64 - mean * mean).max(0.0).sqrt();
            r.rating = if sd > 0.0 { (r.rating - mean) / sd } else { 0.0 };
        }
    }

    // phrase-pair similarity for every grid weight
    let mut sims: Vec<Vec<f64>> = Vec::with_capacity(grid.len());
    for &w in &grid {
        let method = family.method(w);
        let vectors = composer.compose_batch(&phrases, &method)?.vectors;
        sims.push(pair_list.iter().map(|&(p, q)| linalg::cosine(&vectors[p], &vectors[q])).collect());
    }

    let sizes = fold_sizes(subjects.len(), spec.folds);
    if sizes.contains(&0) {
        return Err(Error::InsufficientData(format!("{} subjects cannot fill {} folds", subjects.len(), spec.folds)));
    }
    let mut fold_of = Vec::with_capacity(subjects.len());
    for (k, &s) in sizes.iter().enumerate() {
        fold_of.extend(std::iter::repeat_n(k, s));
    }

    let mut per_fold = Vec::with_capacity(spec.folds);
    for k in 0..spec.folds {
        let dev: Vec<bool> = fold_of.iter().map(|&f| f == k).collect();
        let test: Vec<bool> = dev.iter().map(|d| !d).collect();
        let select = if spec.cheat { &test } else { &dev };
        let mut best = (0, f64::NEG_INFINITY);
        for (g, s) in sims.iter().enumerate() {
            let (rho, _) = correlate(&rows, s, select, pair_list.len(), spec.average_ratings)?;
            // strict improvement keeps the smaller weight on ties
            if rho > best.1 {
                best = (g, rho);
            }
        }
        let (dev_spearman, _) = correlate(&rows, &sims[best.0], &dev, pair_list.len(), spec.average_ratings)?;
        let (test_spearman, test_pearson) = correlate(&rows, &sims[best.0], &test, pair_list.len(), spec.average_ratings)?;
        per_fold.push(FoldResult {
            dev_fold: k,
            chosen_weight: family.is_tunable().then_some(grid[best.0]),
            dev_spearman,
            test_spearman,
            test_pearson,
        });
    }
    let n = per_fold.len() as f64;
    let chosen: Vec<f64> = per_fold.iter().filter_map(|f| f.chosen_weight).collect();
    Ok(EvalResult {
        method: family.name(),
        spearman: per_fold.iter().map(|f| f.test_spearman).sum::<f64>() / n,
        pearson: per_fold.iter().map(|f| f.test_pearson).sum::<f64>() / n,
        chosen_weight: (!chosen.is_empty()).then(|| chosen.iter().sum::<f64>() / chosen.len() as f64),
        per_fold,
        rows_used: rows.len(),
        rows_skipped: skipped,
        subjects: subjects.len(),
        upper_bound: spec.cheat,
    })
}

/// Plain-text table: one row per method with test Spearman and Pearson.
pub fn format_table(title: &str, results: &[EvalResult]) -> String {
    let width = results.iter().map(|r| r.method.len() + 2).chain([title.len(), 6]).max().unwrap_or(6);
    let mut out = format!("{title:<width$}  {:>8}  {:>8}  {:>6}\n", "spearman", "pearson", "weight");
    for r in results {
        let name = if r.upper_bound { format!("{}*", r.method) } else { r.method.clone() };
        let weight = r.chosen_weight.map_or("-".to_string(), |w| format!("{w:.2}"));
        out.push_str(&format!("{name:<width$}  {:>8.3}  {:>8.3}  {weight:>6}\n", r.spearman, r.pearson));
    }
    if results.iter().any(|r| r.upper_bound) {
        out.push_str("* weight selected on the test subjects (upper bound)\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingMatrix;

    #[test]
    fn correlation_extremes() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 3.0).collect();
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&xs, &xs).unwrap(), 1.0);
        assert_eq!(spearman(&xs, &neg).unwrap(), -1.0);
        assert!(matches!(pearson(&xs, &[1.0; 5]), Err(Error::Undefined(_))));
        assert!(spearman(&xs, &xs[..3]).is_err());
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn spearman_with_a_tie() {
        // ranks of xs with the tie averaged: 1, 2.5, 2.5, 4, 5; ys ranks 1, 3, 2, 5, 4
        let xs = [1.0, 2.0, 2.0, 3.0, 4.0];
        let ys = [10.0, 30.0, 20.0, 50.0, 40.0];
        assert_eq!(average_ranks(&xs), [1.0, 2.5, 2.5, 4.0, 5.0]);
        let rx = [1.0, 2.5, 2.5, 4.0, 5.0];
        let ry = [1.0, 3.0, 2.0, 5.0, 4.0];
        let mean = 3.0;
        let num: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mean) * (b - mean)).sum();
        let dx: f64 = rx.iter().map(|a| (a - mean) * (a - mean)).sum();
        let dy: f64 = ry.iter().map(|b| (b - mean) * (b - mean)).sum();
        let expected = num / (dx * dy).sqrt();
        assert!((spearman(&xs, &ys).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn folds_pad_the_first_groups() {
        assert_eq!(fold_sizes(54, 3), [18, 18, 18]);
        assert_eq!(fold_sizes(8, 3), [3, 3, 2]);
        assert_eq!(fold_sizes(2, 3), [1, 1, 0]);
    }

    #[test]
    fn tsv_round_trip_and_validation() {
        let text = "# comment\ns1\tnew\tinformation\tfurther\tevidence\t6\tAN\ns2\tuse\tknowledge\texercise\tinfluence\t2\tVO\n";
        let ds = PhraseSimDataset::read_tsv(text.as_bytes()).unwrap();
        assert_eq!(ds.records.len(), 2);
        assert_eq!(ds.records[1].phrase_type, PhraseType::VerbObj);
        let mut out = Vec::new();
        ds.write_tsv(&mut out).unwrap();
        assert_eq!(PhraseSimDataset::read_tsv(&out[..]).unwrap(), ds);
        let bad = "s1\ta\tb\tc\td\t9\tAN\n";
        assert!(matches!(PhraseSimDataset::read_tsv(bad.as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(PhraseSimDataset::read_tsv("s1\ta\tb\n".as_bytes()).is_err());
    }

    #[test]
    fn published_layout_converts() {
        let text = "participant type group input1 input2 input3 input4 sim\n\
                    participant20 adjectivenouns 2 new information further evidence 7\n\
                    participant20 verbobjects 1 use knowledge exercise influence 3\n";
        let ds = PhraseSimDataset::read_published(text.as_bytes()).unwrap();
        assert_eq!(ds.records.len(), 2);
        assert_eq!(ds.records[0].phrase1, ("new".to_string(), "information".to_string()));
        assert_eq!(ds.records[1].phrase_type, PhraseType::VerbObj);
        assert_eq!(ds.subjects(), ["participant20"]);
    }

    fn toy() -> (EmbeddingMatrix, Vocabulary, PhraseSimDataset) {
        let words: Vec<String> = ["a", "b", "c", "d", "e", "f"].iter().map(|s| s.to_string()).collect();
        let emb = EmbeddingMatrix::from_rows(&[
            vec![1.0, 0.0, 0.2],
            vec![0.3, 1.0, 0.0],
            vec![0.0, 0.5, 1.0],
            vec![1.0, 1.0, 0.1],
            vec![-0.4, 0.2, 0.9],
            vec![0.7, -0.6, 0.3],
        ])
        .unwrap();
        let vocab = Vocabulary::from_parts(words.clone(), vec![1; 6], 1).unwrap();
        let composer = Composer::new(&emb, None, None).unwrap();
        let mut records = Vec::new();
        let phrase_pairs = [(0, 1, 2, 3), (0, 2, 4, 5), (1, 3, 5, 0), (2, 4, 1, 5), (3, 5, 0, 4), (4, 0, 2, 1)];
        for s in 0..6 {
            for &(p, q, r, t) in &phrase_pairs {
                // surface order is (dependent, root)
                let u = composer.compose(q, p, &CompositionMethod::Additive).unwrap();
                let v = composer.compose(t, r, &CompositionMethod::Additive).unwrap();
                let cos = linalg::cosine(&u, &v);
                records.push(RatingRecord {
                    subject: format!("s{s}"),
                    phrase1: (words[p as usize].clone(), words[q as usize].clone()),
                    phrase2: (words[r as usize].clone(), words[t as usize].clone()),
                    rating: 4.0 + 3.0 * cos,
                    phrase_type: PhraseType::AdjNoun,
                });
            }
        }
        (emb, vocab, PhraseSimDataset { records })
    }

    #[test]
    fn planted_additive_answers_score_one() {
        let (emb, vocab, ds) = toy();
        let composer = Composer::new(&emb, None, None).unwrap();
        let family = MethodFamily::Fixed { method: CompositionMethod::Additive };
        let res = evaluate(&ds, &composer, &vocab, &family, &FoldSpec::default()).unwrap();
        assert!((res.spearman - 1.0).abs() < 1e-12);
        assert!((res.pearson - 1.0).abs() < 1e-12);
        assert_eq!(res.chosen_weight, None);
        // nothing to tune: every rotation scores the same
        for f in &res.per_fold {
            assert_eq!(f.test_spearman, res.per_fold[0].test_spearman);
        }
    }

    #[test]
    fn out_of_vocabulary_rows_are_skipped() {
        let (emb, vocab, mut ds) = toy();
        ds.records[0].phrase1.0 = "zzz".into();
        let composer = Composer::new(&emb, None, None).unwrap();
        let family = MethodFamily::Fixed { method: CompositionMethod::Additive };
        let res = evaluate(&ds, &composer, &vocab, &family, &FoldSpec::default()).unwrap();
        assert_eq!(res.rows_skipped, 1);
        for r in &mut ds.records {
            r.phrase2.1 = "zzz".into();
        }
        assert!(matches!(
            evaluate(&ds, &composer, &vocab, &family, &FoldSpec::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn table_layout() {
        let r = EvalResult {
            method: "tensor".into(),
            spearman: 0.46,
            pearson: 0.465,
            chosen_weight: Some(0.4),
            per_fold: vec![],
            rows_used: 1,
            rows_skipped: 0,
            subjects: 54,
            upper_bound: true,
        };
        let t = format_table("AN", &[r]);
        assert!(t.contains("tensor*"));
        assert!(t.contains("0.460"));
        assert!(t.contains("upper bound"));
    }
}
