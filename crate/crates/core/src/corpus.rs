//! Dependency-parsed corpus ingestion.
//!
//! Input is CoNLL-U shaped: one tab-separated record per token with the
//! FORM, HEAD and DEPREL columns (2, 7 and 8) used and everything else
//! ignored, `#` comment lines, and a blank line after each sentence.
//! Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are skipped.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

/// A token as read from the parse: surface form, 1-based head (0 = root),
/// dependency label and the source line it came from (0 when built in memory).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub head: usize,
    pub deprel: String,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedSentence {
    pub tokens: Vec<Token>,
}

impl ParsedSentence {
    /// Builds a sentence from `(form, head, deprel)` triples.
    pub fn from_triples<S: Into<String>>(tokens: impl IntoIterator<Item = (S, usize, S)>) -> Self {
        Self {
            tokens: tokens
                .into_iter()
                .map(|(form, head, deprel)| Token {
                    form: form.into(),
                    head,
                    deprel: deprel.into(),
                    line: 0,
                })
                .collect(),
        }
    }

    /// Builds an unparsed sentence (every token attached to the root).
    pub fn from_forms<S: Into<String>>(forms: impl IntoIterator<Item = S>) -> Self {
        Self::from_triples(forms.into_iter().map(|f| (f.into(), 0, "dep".to_string())))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks head ranges and labels.
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        for (i, t) in self.tokens.iter().enumerate() {
            if t.head > n || t.head == i + 1 {
                return Err(Error::Parse {
                    line: t.line,
                    message: format!("head {} out of range for token {} of {n}", t.head, i + 1),
                });
            }
            if t.deprel.is_empty() {
                return Err(Error::Parse { line: t.line, message: "empty relation label".into() });
            }
        }
        Ok(())
    }
}

/// Streams sentences out of a CoNLL-U style reader.
pub struct ConllReader<R> {
    inner: R,
    line_no: usize,
    buf: String,
    done: bool,
}

impl<R: BufRead> ConllReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, line_no: 0, buf: String::new(), done: false }
    }

    fn next_sentence(&mut self) -> Result<Option<ParsedSentence>> {
        let mut sentence = ParsedSentence::default();
        loop {
            self.buf.clear();
            if self.inner.read_line(&mut self.buf)? == 0 {
                self.done = true;
                break;
            }
            self.line_no += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                if sentence.is_empty() {
                    continue;
                }
                break;
            }
            if line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 8 {
                return Err(Error::Parse {
                    line: self.line_no,
                    message: format!("expected at least 8 tab-separated columns, found {}", cols.len()),
                });
            }
            if cols[0].contains(['-', '.']) {
                continue;
            }
            let head = cols[6].parse::<usize>().map_err(|_| Error::Parse {
                line: self.line_no,
                message: format!("malformed head index {:?}", cols[6]),
            })?;
            sentence.tokens.push(Token {
                form: cols[1].to_string(),
                head,
                deprel: cols[7].to_string(),
                line: self.line_no,
            });
        }
        if sentence.is_empty() {
            return Ok(None);
        }
        sentence.validate()?;
        Ok(Some(sentence))
    }
}

impl<R: BufRead> Iterator for ConllReader<R> {
    type Item = Result<ParsedSentence>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_sentence() {
            Ok(Some(s)) => Some(Ok(s)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Writes sentences in the same record layout the reader accepts.
pub fn write_conll<W: Write>(mut w: W, sentences: &[ParsedSentence]) -> Result<()> {
    for s in sentences {
        for (i, t) in s.tokens.iter().enumerate() {
            writeln!(w, "{}\t{}\t_\t_\t_\t_\t{}\t{}\t_\t_", i + 1, t.form, t.head, t.deprel)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn normalize_token(form: &str) -> String {
    form.to_lowercase()
}

/// One stopword per line; blank lines ignored.
pub fn read_stopwords<R: BufRead>(r: R) -> Result<HashSet<String>> {
    let mut out = HashSet::new();
    for line in r.lines() {
        let line = line?;
        let w = line.trim();
        if !w.is_empty() {
            out.insert(normalize_token(w));
        }
    }
    Ok(out)
}

/// Raw (lowercased) token counts. Per-shard counts merge associatively.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenCounts(HashMap<String, u64>);

impl TokenCounts {
    pub fn add_sentence(&mut self, s: &ParsedSentence) {
        for t in &s.tokens {
            *self.0.entry(normalize_token(&t.form)).or_insert(0) += 1;
        }
    }

    pub fn merge(&mut self, other: TokenCounts) {
        for (w, c) in other.0 {
            *self.0.entry(w).or_insert(0) += c;
        }
    }

    pub fn get(&self, w: &str) -> u64 {
        self.0.get(w).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Word <-> id map. Ids follow descending frequency, ties in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    min_count: u64,
}

impl Vocabulary {
    /// Keeps words with count `>= min_count` that are not stopwords.
    pub fn build(counts: &TokenCounts, min_count: u64, stopwords: &HashSet<String>) -> Result<Self> {
        if min_count == 0 {
            return Err(Error::InvalidArgument("min_count must be at least 1".into()));
        }
        let mut kept: Vec<(&String, u64)> = counts
            .0
            .iter()
            .filter(|(w, &c)| c >= min_count && !stopwords.contains(*w))
            .map(|(w, &c)| (w, c))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let (words, counts) = kept.into_iter().map(|(w, c)| (w.clone(), c)).unzip();
        Self::from_parts(words, counts, min_count)
    }

    /// Builds a vocabulary with the given id order.
    pub fn from_parts(words: Vec<String>, counts: Vec<u64>, min_count: u64) -> Result<Self> {
        if words.len() != counts.len() {
            return Err(Error::DimensionMismatch { expected: words.len(), found: counts.len() });
        }
        if words.len() > u32::MAX as usize {
            return Err(Error::InvalidArgument("vocabulary too large for u32 ids".into()));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate vocabulary word {w:?}")));
            }
        }
        Ok(Self { words, counts, index, min_count })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Looks up a surface form (lowercased first).
    pub fn id(&self, form: &str) -> Option<u32> {
        self.index.get(form).or_else(|| self.index.get(&normalize_token(form))).copied()
    }

    pub fn require(&self, form: &str) -> Result<u32> {
        self.id(form).ok_or_else(|| Error::UnknownWord(form.to_string()))
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// `word<TAB>id<TAB>count`, one line per word in id order.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, (word, c)) in self.words.iter().zip(&self.counts).enumerate() {
            writeln!(w, "{word}\t{i}\t{c}")?;
        }
        Ok(())
    }

    /// Reads the TSV layout. The file does not carry the threshold, so
    /// `min_count` is recovered as the smallest stored count (1 when empty).
    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut words = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse { line: i + 1, message };
            let mut cols = line.split('\t');
            let (Some(word), Some(id), Some(count), None) = (cols.next(), cols.next(), cols.next(), cols.next())
            else {
                return Err(bad("expected word<TAB>id<TAB>count".into()));
            };
            let id: usize = id.parse().map_err(|_| bad(format!("bad id {id:?}")))?;
            if id != words.len() {
                return Err(bad(format!("ids must be consecutive from 0, found {id}")));
            }
            let count: u64 = count.parse().map_err(|_| bad(format!("bad count {count:?}")))?;
            words.push(word.to_string());
            counts.push(count);
        }
        let min_count = counts.iter().copied().min().unwrap_or(1).max(1);
        Self::from_parts(words, counts, min_count)
    }
}

/// Counts the corpus and builds the thresholded vocabulary in one pass.
pub fn build_vocabulary<I>(sentences: I, min_count: u64, stopwords: &HashSet<String>) -> Result<Vocabulary>
where
    I: IntoIterator<Item = Result<ParsedSentence>>,
{
    let mut counts = TokenCounts::default();
    for s in sentences {
        counts.add_sentence(&s?);
    }
    Vocabulary::build(&counts, min_count, stopwords)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    AdjNoun,
    VerbObj,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::AdjNoun => "ADJ_NOUN",
            Relation::VerbObj => "VERB_OBJ",
        })
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ADJ_NOUN" | "AN" => Ok(Relation::AdjNoun),
            "VERB_OBJ" | "VO" => Ok(Relation::VerbObj),
            _ => Err(Error::InvalidArgument(format!("unknown relation {s:?}"))),
        }
    }
}

/// Dependency label -> relation table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationMap(HashMap<String, Relation>);

impl Default for RelationMap {
    fn default() -> Self {
        Self(HashMap::from([
            ("amod".to_string(), Relation::AdjNoun),
            ("obj".to_string(), Relation::VerbObj),
            ("dobj".to_string(), Relation::VerbObj),
        ]))
    }
}

impl RelationMap {
    pub fn empty() -> Self {
        Self(HashMap::new())
    }

    pub fn insert(&mut self, label: &str, rel: Relation) {
        self.0.insert(label.to_string(), rel);
    }

    /// Exact label first, then the universal part before a `:` subtype.
    pub fn lookup(&self, label: &str) -> Option<Relation> {
        self.0
            .get(label)
            .or_else(|| label.split_once(':').and_then(|(base, _)| self.0.get(base)))
            .copied()
    }

    /// Parses `label=REL,label=REL`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut map = Self::empty();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (label, rel) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("relation mapping {item:?} needs label=REL")))?;
            map.insert(label.trim(), rel.trim().parse()?);
        }
        Ok(map)
    }

    /// Inverse of [`RelationMap::parse`], labels sorted.
    pub fn to_spec(&self) -> String {
        let mut items: Vec<_> = self.0.iter().map(|(l, r)| format!("{l}={r}")).collect();
        items.sort();
        items.join(",")
    }
}

/// A root/dependent pair. For adjective-noun the noun is the root; for
/// verb-object the object is. Positions are token indices (0-based) in the
/// sentence the pair was extracted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SyntacticPair {
    pub root: u32,
    pub dep: u32,
    pub root_pos: usize,
    pub dep_pos: usize,
    pub relation: Relation,
}

/// One pair per mapped dependency edge whose two words are both in vocabulary.
pub fn extract_pairs(s: &ParsedSentence, vocab: &Vocabulary, relations: &RelationMap) -> Result<Vec<SyntacticPair>> {
    s.validate()?;
    let mut pairs = Vec::new();
    for (i, t) in s.tokens.iter().enumerate() {
        if t.head == 0 {
            continue;
        }
        let Some(relation) = relations.lookup(&t.deprel) else {
            continue;
        };
        let h = t.head - 1;
        // amod: the dependent token is the adjective, its head the noun.
        // obj: the dependent token is the object, its head the verb.
        let (root_pos, dep_pos) = match relation {
            Relation::AdjNoun => (h, i),
            Relation::VerbObj => (i, h),
        };
        let (Some(root), Some(dep)) = (vocab.id(&s.tokens[root_pos].form), vocab.id(&s.tokens[dep_pos].form)) else {
            continue;
        };
        pairs.push(SyntacticPair { root, dep, root_pos, dep_pos, relation });
    }
    Ok(pairs)
}

/// A sentence reduced to its in-vocabulary tokens. Out-of-vocabulary words
/// (rare words and stopwords) are removed before windowing, and pair
/// positions index into `ids`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EncodedSentence {
    pub ids: Vec<u32>,
    pub pairs: Vec<SyntacticPair>,
}

pub fn encode_sentence(s: &ParsedSentence, vocab: &Vocabulary, relations: &RelationMap) -> Result<EncodedSentence> {
    let pairs = extract_pairs(s, vocab, relations)?;
    let mut compact = vec![usize::MAX; s.len()];
    let mut ids = Vec::with_capacity(s.len());
    for (i, t) in s.tokens.iter().enumerate() {
        if let Some(id) = vocab.id(&t.form) {
            compact[i] = ids.len();
            ids.push(id);
        }
    }
    let pairs = pairs
        .into_iter()
        .map(|p| SyntacticPair { root_pos: compact[p.root_pos], dep_pos: compact[p.dep_pos], ..p })
        .collect();
    Ok(EncodedSentence { ids, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab_of(words: &[&str]) -> Vocabulary {
        Vocabulary::from_parts(words.iter().map(|w| w.to_string()).collect(), vec![1; words.len()], 1).unwrap()
    }

    #[test]
    fn threshold_arithmetic() {
        let mut c = TokenCounts::default();
        c.add_sentence(&ParsedSentence::from_forms(["a", "a", "b"]));
        let v = Vocabulary::build(&c, 2, &HashSet::new()).unwrap();
        assert_eq!(v.words(), ["a"]);
        assert_eq!(v.count(0), 2);
    }

    #[test]
    fn toy_corpus_matches_hand_tally() {
        // the cat sat / The dog sat on the mat / a cat ran
        // tallies: the 3, sat 2, cat 2, dog 1, on 1, mat 1, a 1, ran 1
        let text = ["the cat sat", "The dog sat on the mat", "a cat ran"];
        let sentences = text.iter().map(|t| Ok(ParsedSentence::from_forms(t.split(' '))));
        let stop: HashSet<String> = ["on".to_string()].into();
        let v = build_vocabulary(sentences, 1, &stop).unwrap();
        assert_eq!(v.words(), ["the", "cat", "sat", "a", "dog", "mat", "ran"]);
        assert_eq!(v.counts(), [3, 2, 2, 1, 1, 1, 1]);
        assert_eq!(v.total(), 11);
        assert_eq!(v.id("The"), Some(0));
        assert_eq!(v.id("on"), None);
    }

    #[test]
    fn zero_min_count_rejected() {
        assert!(Vocabulary::build(&TokenCounts::default(), 0, &HashSet::new()).is_err());
    }

    #[test]
    fn empty_corpus_gives_empty_vocabulary() {
        let v = build_vocabulary(std::iter::empty(), 5, &HashSet::new()).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn vocabulary_tsv_round_trip() {
        let v = Vocabulary::from_parts(vec!["x".into(), "y".into()], vec![9, 4], 4).unwrap();
        let mut buf = Vec::new();
        v.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "x\t0\t9\ny\t1\t4\n");
        let back = Vocabulary::read_tsv(&buf[..]).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn vocabulary_tsv_rejects_gaps() {
        let err = Vocabulary::read_tsv(&b"x\t0\t9\ny\t2\t4\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn amod_makes_head_noun_the_root() {
        let v = vocab_of(&["red", "car"]);
        let s = ParsedSentence::from_triples([("red", 2, "amod"), ("car", 0, "root")]);
        let p = extract_pairs(&s, &v, &RelationMap::default()).unwrap();
        assert_eq!(
            p,
            [SyntacticPair {
                root: v.id("car").unwrap(),
                dep: v.id("red").unwrap(),
                root_pos: 1,
                dep_pos: 0,
                relation: Relation::AdjNoun
            }]
        );
    }

    #[test]
    fn dobj_makes_object_the_root() {
        let v = vocab_of(&["kick", "ball"]);
        let s = ParsedSentence::from_triples([("kick", 0, "root"), ("ball", 1, "dobj")]);
        let p = extract_pairs(&s, &v, &RelationMap::default()).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].root, p[0].dep), (v.id("ball").unwrap(), v.id("kick").unwrap()));
        assert_eq!(p[0].relation, Relation::VerbObj);
        assert_eq!(p[0].root_pos, 1);
    }

    #[test]
    fn oov_adjective_emits_nothing() {
        let v = vocab_of(&["car"]);
        let s = ParsedSentence::from_triples([("shiny", 2, "amod"), ("car", 0, "root")]);
        assert!(extract_pairs(&s, &v, &RelationMap::default()).unwrap().is_empty());
    }

    #[test]
    fn two_adjectives_give_two_pairs() {
        let v = vocab_of(&["big", "red", "car"]);
        let s = ParsedSentence::from_triples([("big", 3, "amod"), ("red", 3, "amod"), ("car", 0, "root")]);
        assert_eq!(extract_pairs(&s, &v, &RelationMap::default()).unwrap().len(), 2);
    }

    #[test]
    fn subtyped_labels_fall_back_to_base() {
        let m = RelationMap::default();
        assert_eq!(m.lookup("obj:lvc"), Some(Relation::VerbObj));
        assert_eq!(m.lookup("nsubj"), None);
        let parsed = RelationMap::parse("amod=ADJ_NOUN, dobj=VERB_OBJ,obj=VO").unwrap();
        assert_eq!(parsed, m);
        assert_eq!(parsed.to_spec(), "amod=ADJ_NOUN,dobj=VERB_OBJ,obj=VERB_OBJ");
        assert!(RelationMap::parse("amod").is_err());
    }

    #[test]
    fn reader_parses_records_and_boundaries() {
        let text = "# sent 1\n1\tRed\t_\tADJ\t_\t_\t2\tamod\t_\t_\n2\tcar\t_\tNOUN\t_\t_\t0\troot\t_\t_\n\n\n\
                    1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n1\tgo\t_\t_\t_\t_\t0\troot\t_\t_\n";
        let sents: Vec<_> = ConllReader::new(text.as_bytes()).collect::<Result<_>>().unwrap();
        assert_eq!(sents.len(), 2);
        assert_eq!(sents[0].tokens[0].form, "Red");
        assert_eq!(sents[0].tokens[0].head, 2);
        assert_eq!(sents[0].tokens[1].line, 3);
        assert_eq!(sents[1].len(), 1);
    }

    #[test]
    fn reader_reports_bad_head_with_line() {
        let text = "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n2\tb\t_\t_\t_\t_\tx\tamod\t_\t_\n";
        let err = ConllReader::new(text.as_bytes()).next().unwrap().unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let text = "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n2\tb\t_\t_\t_\t_\t9\tamod\t_\t_\n";
        let err = ConllReader::new(text.as_bytes()).next().unwrap().unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn write_then_read_is_identity() {
        let s = ParsedSentence::from_triples([("big", 2, "amod"), ("dog", 0, "root"), ("ran", 2, "dep")]);
        let mut buf = Vec::new();
        write_conll(&mut buf, &[s.clone(), s.clone()]).unwrap();
        let back: Vec<_> = ConllReader::new(&buf[..]).collect::<Result<_>>().unwrap();
        assert_eq!(back.len(), 2);
        for b in back {
            let stripped: Vec<_> = b.tokens.iter().map(|t| (t.form.clone(), t.head, t.deprel.clone())).collect();
            let orig: Vec<_> = s.tokens.iter().map(|t| (t.form.clone(), t.head, t.deprel.clone())).collect();
            assert_eq!(stripped, orig);
        }
    }

    #[test]
    fn encoding_compacts_positions() {
        let v = vocab_of(&["big", "dog"]);
        let s = ParsedSentence::from_triples([("the", 3, "det"), ("big", 3, "amod"), ("dog", 0, "root")]);
        let e = encode_sentence(&s, &v, &RelationMap::default()).unwrap();
        assert_eq!(e.ids, vec![0, 1]);
        assert_eq!((e.pairs[0].root_pos, e.pairs[0].dep_pos), (1, 0));
    }
}
