//! Sparse co-occurrence accumulators.
//!
//! Pair counts: every two in-vocabulary tokens at distance `<= window` in the
//! same sentence add 1 to the cell `(min, max)` of their ids.
//!
//! Triple counts: for each syntactic pair `(a, b)`, every token within
//! `window` of the root position (same sentence, excluding the pair's own two
//! positions) adds 1 to `((a, b), w)`. Windows are anchored at the root.
//!
//! Counts are unit increments held as `f64`, so any sharding of a corpus sums
//! to exactly the same values as a single pass.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::thread;

use crate::corpus::EncodedSentence;
use crate::error::{Error, Result};
use crate::tensor::{read_f64, read_u32, read_u64};

const PAIR_MAGIC: &[u8; 4] = b"SPC1";
const TRIPLE_MAGIC: &[u8; 4] = b"STC1";

/// Where triple context windows are centred.
pub const TRIPLE_ANCHOR: &str = "root";

#[derive(Debug, Clone, PartialEq)]
pub struct PairCounts {
    n: usize,
    entries: HashMap<(u32, u32), f64>,
    total: f64,
}

impl PairCounts {
    pub fn new(n: usize) -> Self {
        Self { n, entries: HashMap::new(), total: 0.0 }
    }

    pub fn vocab_size(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    fn key(i: u32, j: u32) -> (u32, u32) {
        if i <= j {
            (i, j)
        } else {
            (j, i)
        }
    }

    /// Count for the unordered pair `{i, j}`.
    pub fn get(&self, i: u32, j: u32) -> f64 {
        self.entries.get(&Self::key(i, j)).copied().unwrap_or(0.0)
    }

    pub fn add(&mut self, i: u32, j: u32, c: f64) -> Result<()> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("count {c} must be finite and nonnegative")));
        }
        if i as usize >= self.n || j as usize >= self.n {
            return Err(Error::InvalidArgument(format!("word id out of range for vocabulary of {}", self.n)));
        }
        *self.entries.entry(Self::key(i, j)).or_insert(0.0) += c;
        self.total += c;
        Ok(())
    }

    fn bump(&mut self, i: u32, j: u32) {
        *self.entries.entry(Self::key(i, j)).or_insert(0.0) += 1.0;
        self.total += 1.0;
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    /// Entries in `(i, j)` order.
    pub fn sorted(&self) -> Vec<((u32, u32), f64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by_key(|e| e.0);
        v
    }

    /// Row sums of the symmetric count matrix; a diagonal cell counts twice so
    /// that the sums add up to `2 * total`.
    pub fn marginals(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n];
        for ((i, j), c) in self.sorted() {
            m[i as usize] += c;
            m[j as usize] += c;
        }
        m
    }

    pub fn merge(&mut self, other: &PairCounts) -> Result<()> {
        if self.n != other.n {
            return Err(Error::InvalidArgument(format!(
                "cannot merge pair counts over vocabularies of {} and {} words",
                self.n, other.n
            )));
        }
        for ((i, j), c) in other.sorted() {
            *self.entries.entry((i, j)).or_insert(0.0) += c;
        }
        self.total += other.total;
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(PAIR_MAGIC)?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for ((i, j), c) in self.sorted() {
            w.write_all(&i.to_le_bytes())?;
            w.write_all(&j.to_le_bytes())?;
            w.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != PAIR_MAGIC {
            return Err(Error::Format(format!("bad pair-count magic {magic:?}")));
        }
        let n = read_u32(&mut r)? as usize;
        let len = read_u64(&mut r)?;
        let mut out = Self::new(n);
        out.entries.reserve(len as usize);
        for _ in 0..len {
            let i = read_u32(&mut r)?;
            let j = read_u32(&mut r)?;
            let c = read_f64(&mut r)?;
            if i > j {
                return Err(Error::Format(format!("pair cell ({i}, {j}) not in canonical order")));
            }
            out.add(i, j, c).map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(out)
    }

    /// `i<TAB>j<TAB>count` (with words instead of ids when `words` is given).
    pub fn write_tsv<W: Write>(&self, mut w: W, words: Option<&[String]>) -> Result<()> {
        writeln!(w, "# i\tj\tcount")?;
        for ((i, j), c) in self.sorted() {
            match words {
                Some(ws) => writeln!(w, "{}\t{}\t{c}", ws[i as usize], ws[j as usize])?,
                None => writeln!(w, "{i}\t{j}\t{c}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleCounts {
    n: usize,
    entries: HashMap<(u32, u32, u32), f64>,
    pair_totals: HashMap<(u32, u32), f64>,
    total: f64,
}

impl TripleCounts {
    pub fn new(n: usize) -> Self {
        Self { n, entries: HashMap::new(), pair_totals: HashMap::new(), total: 0.0 }
    }

    pub fn vocab_size(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Count of context word `w` around root `a` with dependent `b`.
    pub fn get(&self, a: u32, b: u32, w: u32) -> f64 {
        self.entries.get(&(a, b, w)).copied().unwrap_or(0.0)
    }

    /// `sum_w X[(a, b), w]`
    pub fn pair_total(&self, a: u32, b: u32) -> f64 {
        self.pair_totals.get(&(a, b)).copied().unwrap_or(0.0)
    }

    pub fn pairs(&self) -> impl Iterator<Item = ((u32, u32), f64)> + '_ {
        self.pair_totals.iter().map(|(&k, &v)| (k, v))
    }

    pub fn add(&mut self, a: u32, b: u32, w: u32, c: f64) -> Result<()> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("count {c} must be finite and nonnegative")));
        }
        if [a, b, w].iter().any(|&x| x as usize >= self.n) {
            return Err(Error::InvalidArgument(format!("word id out of range for vocabulary of {}", self.n)));
        }
        *self.entries.entry((a, b, w)).or_insert(0.0) += c;
        *self.pair_totals.entry((a, b)).or_insert(0.0) += c;
        self.total += c;
        Ok(())
    }

    fn bump(&mut self, a: u32, b: u32, w: u32) {
        *self.entries.entry((a, b, w)).or_insert(0.0) += 1.0;
        *self.pair_totals.entry((a, b)).or_insert(0.0) += 1.0;
        self.total += 1.0;
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32, u32), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn sorted(&self) -> Vec<((u32, u32, u32), f64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by_key(|e| e.0);
        v
    }

    pub fn merge(&mut self, other: &TripleCounts) -> Result<()> {
        if self.n != other.n {
            return Err(Error::InvalidArgument(format!(
                "cannot merge triple counts over vocabularies of {} and {} words",
                self.n, other.n
            )));
        }
        for ((a, b, w), c) in other.sorted() {
            *self.entries.entry((a, b, w)).or_insert(0.0) += c;
            *self.pair_totals.entry((a, b)).or_insert(0.0) += c;
        }
        self.total += other.total;
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(TRIPLE_MAGIC)?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for ((a, b, x), c) in self.sorted() {
            w.write_all(&a.to_le_bytes())?;
            w.write_all(&b.to_le_bytes())?;
            w.write_all(&x.to_le_bytes())?;
            w.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != TRIPLE_MAGIC {
            return Err(Error::Format(format!("bad triple-count magic {magic:?}")));
        }
        let n = read_u32(&mut r)? as usize;
        let len = read_u64(&mut r)?;
        let mut out = Self::new(n);
        out.entries.reserve(len as usize);
        for _ in 0..len {
            let a = read_u32(&mut r)?;
            let b = read_u32(&mut r)?;
            let w = read_u32(&mut r)?;
            let c = read_f64(&mut r)?;
            out.add(a, b, w, c).map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn write_tsv<W: Write>(&self, mut w: W, words: Option<&[String]>) -> Result<()> {
        writeln!(w, "# anchor={TRIPLE_ANCHOR}")?;
        writeln!(w, "# root\tdep\tcontext\tcount")?;
        for ((a, b, x), c) in self.sorted() {
            match words {
                Some(ws) => writeln!(w, "{}\t{}\t{}\t{c}", ws[a as usize], ws[b as usize], ws[x as usize])?,
                None => writeln!(w, "{a}\t{b}\t{x}\t{c}")?,
            }
        }
        Ok(())
    }
}

fn check_window(window: usize) -> Result<()> {
    if window == 0 {
        Err(Error::InvalidArgument("window must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn check_ids(s: &EncodedSentence, n: usize) -> Result<()> {
    if let Some(&bad) = s.ids.iter().find(|&&id| id as usize >= n) {
        return Err(Error::InvalidArgument(format!("word id {bad} out of range for vocabulary of {n}")));
    }
    for p in &s.pairs {
        if p.root_pos >= s.ids.len() || p.dep_pos >= s.ids.len() {
            return Err(Error::InvalidArgument("pair position outside its sentence".into()));
        }
    }
    Ok(())
}

fn add_sentence_pairs(counts: &mut PairCounts, ids: &[u32], window: usize) {
    for (i, &x) in ids.iter().enumerate() {
        for &y in ids.iter().skip(i + 1).take(window) {
            counts.bump(x, y);
        }
    }
}

fn add_sentence_triples(counts: &mut TripleCounts, s: &EncodedSentence, window: usize) {
    for p in &s.pairs {
        let lo = p.root_pos.saturating_sub(window);
        let hi = (p.root_pos + window).min(s.ids.len() - 1);
        for pos in lo..=hi {
            if pos != p.root_pos && pos != p.dep_pos {
                counts.bump(p.root, p.dep, s.ids[pos]);
            }
        }
    }
}

pub fn count_pairs(sentences: &[EncodedSentence], n: usize, window: usize) -> Result<PairCounts> {
    check_window(window)?;
    let mut counts = PairCounts::new(n);
    for s in sentences {
        check_ids(s, n)?;
        add_sentence_pairs(&mut counts, &s.ids, window);
    }
    Ok(counts)
}

pub fn count_triples(sentences: &[EncodedSentence], n: usize, window: usize) -> Result<TripleCounts> {
    check_window(window)?;
    let mut counts = TripleCounts::new(n);
    for s in sentences {
        check_ids(s, n)?;
        add_sentence_triples(&mut counts, s, window);
    }
    Ok(counts)
}

/// Counts pairs and triples over `workers` contiguous shards and merges the
/// shard results in order.
pub fn count_sharded(
    sentences: &[EncodedSentence],
    n: usize,
    window: usize,
    workers: usize,
) -> Result<(PairCounts, TripleCounts)> {
    check_window(window)?;
    let workers = workers.max(1);
    let shard_len = sentences.len().div_ceil(workers).max(1);
    let shards: Vec<Result<(PairCounts, TripleCounts)>> = thread::scope(|scope| {
        let handles: Vec<_> = sentences
            .chunks(shard_len)
            .map(|chunk| scope.spawn(move || Ok((count_pairs(chunk, n, window)?, count_triples(chunk, n, window)?))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("counting worker panicked")).collect()
    });
    let mut pairs = PairCounts::new(n);
    let mut triples = TripleCounts::new(n);
    for shard in shards {
        let (p, t) = shard?;
        pairs.merge(&p)?;
        triples.merge(&t)?;
    }
    Ok((pairs, triples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Relation, SyntacticPair};

    fn sent(ids: &[u32]) -> EncodedSentence {
        EncodedSentence { ids: ids.to_vec(), pairs: vec![] }
    }

    fn an(root: u32, root_pos: usize, dep: u32, dep_pos: usize) -> SyntacticPair {
        SyntacticPair { root, dep, root_pos, dep_pos, relation: Relation::AdjNoun }
    }

    #[test]
    fn three_token_sentence() {
        let c = count_pairs(&[sent(&[0, 1, 2])], 3, 5).unwrap();
        assert_eq!(c.sorted(), vec![((0, 1), 1.0), ((0, 2), 1.0), ((1, 2), 1.0)]);
        assert_eq!(c.total(), 3.0);
    }

    #[test]
    fn single_token_has_no_pairs() {
        assert!(count_pairs(&[sent(&[4])], 5, 3).unwrap().is_empty());
    }

    #[test]
    fn repeated_token_fills_diagonal() {
        let c = count_pairs(&[sent(&[0, 0])], 1, 1).unwrap();
        assert_eq!(c.sorted(), vec![((0, 0), 1.0)]);
    }

    #[test]
    fn window_limits_distance_and_sentences_do_not_mix() {
        let c = count_pairs(&[sent(&[0, 1, 2, 3]), sent(&[3, 0])], 4, 2).unwrap();
        // distance-3 pair (0, 3) in the first sentence is out of window; (0, 3)
        // only comes from the second sentence
        assert_eq!(c.get(0, 3), 1.0);
        assert_eq!(c.get(3, 0), 1.0);
        assert_eq!(c.get(0, 2), 1.0);
        assert_eq!(c.total(), 5.0 + 1.0);
    }

    #[test]
    fn zero_window_rejected() {
        assert!(count_pairs(&[], 1, 0).is_err());
        assert!(count_triples(&[], 1, 0).is_err());
    }

    #[test]
    fn triple_excludes_pair_tokens() {
        // big(0) dog(1) ran(2)
        let s = EncodedSentence { ids: vec![0, 1, 2], pairs: vec![an(1, 1, 0, 0)] };
        let t = count_triples(&[s], 3, 5).unwrap();
        assert_eq!(t.sorted(), vec![((1, 0, 2), 1.0)]);
        assert_eq!(t.pair_total(1, 0), 1.0);
    }

    #[test]
    fn pair_alone_has_no_context() {
        let s = EncodedSentence { ids: vec![0, 1], pairs: vec![an(1, 1, 0, 0)] };
        assert!(count_triples(&[s], 2, 5).unwrap().is_empty());
    }

    #[test]
    fn triple_window_is_anchored_at_root() {
        // ids 0..8, root at 4 with dep at 3, window 2 -> contexts at 2, 5, 6
        let s = EncodedSentence { ids: (0..8).collect(), pairs: vec![an(4, 4, 3, 3)] };
        let t = count_triples(&[s], 8, 2).unwrap();
        let ctx: Vec<u32> = t.sorted().iter().map(|e| e.0 .2).collect();
        assert_eq!(ctx, vec![2, 5, 6]);
    }

    #[test]
    fn identical_sentences_double_counts() {
        let s = EncodedSentence { ids: vec![0, 1, 2, 0], pairs: vec![an(1, 1, 0, 0)] };
        let once = count_triples(std::slice::from_ref(&s), 3, 5).unwrap();
        let twice = count_triples(&[s.clone(), s], 3, 5).unwrap();
        for ((a, b, w), c) in once.iter() {
            assert_eq!(twice.get(a, b, w), 2.0 * c);
        }
        assert_eq!(twice.total(), 2.0 * once.total());
    }

    #[test]
    fn merge_identity_and_vocabulary_check() {
        let x = count_pairs(&[sent(&[0, 1, 2, 1])], 3, 2).unwrap();
        let mut y = x.clone();
        y.merge(&PairCounts::new(3)).unwrap();
        assert_eq!(y, x);
        assert!(y.merge(&PairCounts::new(4)).is_err());
        let mut t = TripleCounts::new(3);
        assert!(t.merge(&TripleCounts::new(2)).is_err());
    }

    #[test]
    fn marginals_sum_to_twice_total() {
        let c = count_pairs(&[sent(&[0, 0, 1, 2])], 3, 5).unwrap();
        let m = c.marginals();
        assert_eq!(m.iter().sum::<f64>(), 2.0 * c.total());
    }

    #[test]
    fn binary_layouts() {
        let s = EncodedSentence { ids: vec![2, 0, 1, 2], pairs: vec![an(0, 1, 2, 0)] };
        let p = count_pairs(std::slice::from_ref(&s), 3, 5).unwrap();
        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"SPC1");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), p.len() as u64);
        assert_eq!(buf.len(), 16 + 16 * p.len());
        assert_eq!(PairCounts::read_binary(&buf[..]).unwrap(), p);

        let t = count_triples(&[s], 3, 5).unwrap();
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"STC1");
        assert_eq!(buf.len(), 16 + 20 * t.len());
        assert_eq!(TripleCounts::read_binary(&buf[..]).unwrap(), t);
        assert!(TripleCounts::read_binary(&b"SPC1"[..]).is_err());
    }

    #[test]
    fn negative_counts_rejected() {
        let mut p = PairCounts::new(2);
        assert!(p.add(0, 1, -1.0).is_err());
        assert!(p.add(0, 2, 1.0).is_err());
    }
}
