//! Word vectors and their word2vec-text file format.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::corpus::Vocabulary;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, norm};

/// `n x d` word vectors plus the scalar offset `C` fitted by the embedding
/// objective (it absorbs `-2 log Z` and the log corpus size).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    vectors: Vec<f64>,
    pub offset: f64,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, vectors: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        if !vectors.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "{} entries do not form rows of length {dim}",
                vectors.len()
            )));
        }
        linalg::check_finite(&vectors, "embedding matrix")?;
        Ok(Self { dim, vectors, offset: 0.0 })
    }

    pub fn zeros(n: usize, dim: usize) -> Result<Self> {
        Self::new(dim, vec![0.0; n * dim])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            check_dim(dim, r.len())?;
            flat.extend_from_slice(r);
        }
        Self::new(dim, flat)
    }

    /// i.i.d. `N(0, std^2)` entries.
    pub fn gaussian<R: Rng + ?Sized>(n: usize, dim: usize, std: f64, rng: &mut R) -> Result<Self> {
        let v = (0..n * dim).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
        Self::new(dim, v)
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, id: u32) -> &[f64] {
        let i = id as usize * self.dim;
        &self.vectors[i..i + self.dim]
    }

    pub fn row_mut(&mut self, id: u32) -> &mut [f64] {
        let i = id as usize * self.dim;
        &mut self.vectors[i..i + self.dim]
    }

    /// Row lookup that reports ids past the end instead of panicking.
    pub fn get(&self, id: u32) -> Result<&[f64]> {
        if (id as usize) < self.len() {
            Ok(self.row(id))
        } else {
            Err(Error::InvalidArgument(format!("word id {id} out of range for {} vectors", self.len())))
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vectors
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.vectors
    }

    pub fn is_finite(&self) -> bool {
        self.offset.is_finite() && self.vectors.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { dim: self.dim, vectors: linalg::scale(factor, &self.vectors), offset: self.offset }
    }

    /// Rescales every row to the norm of the same row in `reference`, e.g. to
    /// bring pre-trained vectors onto the frequency-linked norms the composition
    /// tensor was trained against. Zero rows stay zero.
    pub fn rescale_norms_to(&self, reference: &EmbeddingMatrix) -> Result<Self> {
        check_dim(self.len(), reference.len())?;
        let mut out = self.clone();
        for id in 0..self.len() as u32 {
            let target = norm(reference.row(id));
            let row = out.row_mut(id);
            let current = norm(row);
            if current > 0.0 {
                row.iter_mut().for_each(|v| *v *= target / current);
            }
        }
        Ok(out)
    }

    /// Header line `n d`, then `word v1 ... vd` per row.
    pub fn write_text<W: Write>(&self, mut w: W, words: &[String]) -> Result<()> {
        check_dim(self.len(), words.len())?;
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (word, row) in words.iter().zip(self.rows()) {
            write!(w, "{word}")?;
            for v in row {
                // shortest representation that parses back to the same f64
                write!(w, " {v:?}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads the word2vec text layout. The header line is optional (GloVe
    /// files omit it).
    pub fn read_text<R: BufRead>(r: R) -> Result<(Vec<String>, Self)> {
        let mut words = Vec::new();
        let mut flat = Vec::new();
        let mut dim = None;
        let mut expected_rows = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(first) = fields.next() else { continue };
            let rest: Vec<&str> = fields.collect();
            if i == 0 && rest.len() == 1 {
                if let (Ok(n), Ok(d)) = (first.parse::<usize>(), rest[0].parse::<usize>()) {
                    expected_rows = Some(n);
                    dim = Some(d);
                    continue;
                }
            }
            let d = *dim.get_or_insert(rest.len());
            if rest.len() != d {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {d} components, found {}", rest.len()),
                });
            }
            for tok in rest {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::Parse { line: i + 1, message: format!("bad number {tok:?}") })?;
                flat.push(v);
            }
            words.push(first.to_string());
        }
        if let Some(n) = expected_rows {
            if n != words.len() {
                return Err(Error::Format(format!("header promises {n} vectors, file has {}", words.len())));
            }
        }
        let dim = dim.ok_or_else(|| Error::Format("embedding file has no vectors".into()))?;
        Ok((words, Self::new(dim, flat)?))
    }

    /// Reorders rows to vocabulary ids. Vocabulary words missing from the file
    /// get zero vectors; their number is returned.
    pub fn align(words: &[String], matrix: &EmbeddingMatrix, vocab: &Vocabulary) -> Result<(Self, usize)> {
        check_dim(matrix.len(), words.len())?;
        let mut out = Self::zeros(vocab.len(), matrix.dim)?;
        let mut found = vec![false; vocab.len()];
        for (row, w) in matrix.rows().zip(words) {
            if let Some(id) = vocab.id(w) {
                if !found[id as usize] {
                    out.row_mut(id).copy_from_slice(row);
                    found[id as usize] = true;
                }
            }
        }
        let missing = found.iter().filter(|f| !**f).count();
        Ok((out, missing))
    }
}
