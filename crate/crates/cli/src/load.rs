//! Input loading. Every path is checked before any work starts so a typo
//! fails fast instead of after a long counting pass.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use synwalk::corpus::{self, ConllReader};
use synwalk::{CpTensor, EmbeddingMatrix, Error, PairCounts, TripleCounts, Vocabulary};

use crate::output::sidecar;
use crate::{CliError, CliResult};

pub fn require_inputs<'a>(paths: impl IntoIterator<Item = &'a Path>) -> CliResult<()> {
    for p in paths {
        if !p.is_file() {
            return Err(CliError::Core(Error::InvalidArgument(format!("input file {} does not exist", p.display()))));
        }
    }
    Ok(())
}

/// Required path plus any optional ones, for [`require_inputs`].
pub fn paths<'a>(required: &[&'a PathBuf], optional: &[&'a Option<PathBuf>]) -> Vec<&'a Path> {
    required
        .iter()
        .map(|p| p.as_path())
        .chain(optional.iter().filter_map(|p| p.as_deref()))
        .collect()
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn context(path: &Path, e: Error) -> CliError {
    match e {
        Error::Parse { line, message } => {
            CliError::Core(Error::Format(format!("{}: line {line}: {message}", path.display())))
        }
        Error::Format(m) => CliError::Core(Error::Format(format!("{}: {m}", path.display()))),
        other => CliError::Core(other),
    }
}

pub fn vocab(path: &Path) -> CliResult<Vocabulary> {
    Vocabulary::read_tsv(open(path)?).map_err(|e| context(path, e))
}

pub fn embeddings(path: &Path) -> CliResult<(Vec<String>, EmbeddingMatrix)> {
    EmbeddingMatrix::read_text(open(path)?).map_err(|e| context(path, e))
}

/// Embeddings reordered to vocabulary ids.
pub fn aligned_embeddings(path: &Path, vocab: &Vocabulary) -> CliResult<EmbeddingMatrix> {
    let (words, m) = embeddings(path)?;
    let (aligned, missing) = EmbeddingMatrix::align(&words, &m, vocab)?;
    if missing > 0 {
        eprintln!("{missing} vocabulary words have no vector in {}; using zeros", path.display());
    }
    Ok(aligned)
}

pub fn tensor(path: &Path) -> CliResult<CpTensor> {
    CpTensor::read_sct(open(path)?).map_err(|e| context(path, e))
}

/// Pair counts, checked against the vocabulary they will be read with.
pub fn pair_counts(path: &Path, vocab: &Vocabulary) -> CliResult<PairCounts> {
    let counts = PairCounts::read_binary(open(path)?).map_err(|e| context(path, e))?;
    check_counts_vocab(path, counts.vocab_size(), vocab)?;
    Ok(counts)
}

pub fn triple_counts(path: &Path, vocab: &Vocabulary) -> CliResult<TripleCounts> {
    let counts = TripleCounts::read_binary(open(path)?).map_err(|e| context(path, e))?;
    check_counts_vocab(path, counts.vocab_size(), vocab)?;
    Ok(counts)
}

pub fn conll(path: &Path) -> CliResult<ConllReader<BufReader<File>>> {
    Ok(ConllReader::new(open(path)?))
}

pub fn stopwords(path: &Path) -> CliResult<std::collections::HashSet<String>> {
    corpus::read_stopwords(open(path)?).map_err(|e| context(path, e))
}

/// FNV-1a over the vocabulary words in id order. Count files only store ids,
/// so this is what ties them to the vocabulary they were counted with.
pub fn vocab_fingerprint(vocab: &Vocabulary) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for w in vocab.words() {
        for &byte in w.as_bytes().iter().chain(b"\n") {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// Counts must use the same id space as `vocab`. The size is always checked;
/// the fingerprint only when the count file has a sidecar that records one.
fn check_counts_vocab(path: &Path, found: usize, vocab: &Vocabulary) -> CliResult<()> {
    let mismatch = |why: String| CliError::Core(Error::Format(format!("{}: {why}", path.display())));
    if found != vocab.len() {
        return Err(mismatch(format!("counted over {found} words but the vocabulary has {}", vocab.len())));
    }
    let recorded = std::fs::read_to_string(sidecar(path))
        .ok()
        .and_then(|text| serde_json::from_str::<serde_json::Value>(&text).ok())
        .and_then(|meta| meta.get("vocab_fingerprint")?.as_str().map(str::to_owned));
    if let Some(recorded) = recorded {
        if recorded != vocab_fingerprint(vocab) {
            return Err(mismatch("counted with a different vocabulary (same size, different words or order)".into()));
        }
    }
    Ok(())
}

/// Looks a word up, trying the normalized form as well.
pub fn word_id(vocab: &Vocabulary, word: &str) -> CliResult<u32> {
    vocab
        .id(word)
        .or_else(|| vocab.id(&corpus::normalize_token(word)))
        .ok_or_else(|| CliError::Core(Error::UnknownWord(word.to_string())))
}
