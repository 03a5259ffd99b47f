//! Syntactic random-walk word embeddings.
//!
//! The generative model extends the log-linear random-walk model of text: a
//! slowly drifting unit "discourse" vector `c` emits words with probability
//! proportional to `exp(<v_w, c>)`. With a small probability a step emits a
//! syntactic pair instead (root word `a`, dependent `b`), and the dependent is
//! drawn with the extra logit `T(v_a, v_b, c)` from a third-order composition
//! tensor `T`. Under the model the three-way PMI of `(a, b, w)` approximates
//! `T(v_a, v_b, v_w) / d`, and the phrase embedding `v_a + v_b + T(v_a, v_b, .)`
//! falls out as the MAP estimate of the discourse vector.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`linalg`] | vector helpers, sphere sampling, power iteration |
//! | [`tensor`] | [`CpTensor`] with every contraction form, slice norms, `SCT1` files |
//! | [`corpus`] | CoNLL-U style reader, [`Vocabulary`], syntactic pair extraction |
//! | [`cooccur`] | window pair counts, (pair, context) triple counts, sharding |
//! | [`generator`] | synthetic corpora sampled from the model itself |
//! | [`embedding`] | [`EmbeddingMatrix`] and word2vec-text files |
//! | [`optim`] | Adam |
//! | [`training`] | embedding and tensor objectives, gradients, training loops |
//! | [`statistics`] | partition functions, PMI/PMI3, verification reports |
//! | [`composition`] | phrase composition methods and nearest neighbours |
//! | [`evaluation`] | rank/linear correlation and the fold-rotated phrase similarity protocol |

pub mod composition;
pub mod cooccur;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod generator;
pub mod linalg;
pub mod optim;
pub mod statistics;
pub mod tensor;
pub mod training;

pub use composition::{CompositionMethod, Composer};
pub use cooccur::{PairCounts, TripleCounts};
pub use corpus::{ParsedSentence, RelationMap, SyntacticPair, Vocabulary};
pub use embedding::EmbeddingMatrix;
pub use error::{Error, Result};
pub use tensor::CpTensor;
pub use training::TrainConfig;

/// Default window used for both pair and triple counting.
pub const DEFAULT_WINDOW: usize = 5;

/// Words seen fewer times than this are dropped from the reference vocabulary.
pub const DEFAULT_MIN_COUNT: u64 = 1000;
