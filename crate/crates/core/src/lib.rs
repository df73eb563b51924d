//! Retrieval-constrained decoding (RCD).
//!
//! A language model is asked a factual question and its output is forced,
//! token by token, to spell out members of a retrieved candidate set of
//! unique entity surface forms (IDSFs). Answers are separated by a SEP token
//! and parsed into an order-free set, which is then scored against the
//! ground-truth set with precision, recall and F1, macro-averaged per
//! relation.
//!
//! The crate is organised along the pipeline:
//!
//! - [`kb`]: triple store, alias table and relation catalog.
//! - [`dataset`]: question generation, filtering and the majority baseline.
//! - [`retriever`]: per-question candidate sets and the static global pool.
//! - [`token`]: tokenizers and language-model backends (including mocks).
//! - [`trie`]: token prefix tree over candidate encodings.
//! - [`decoder`]: the constrained decoding state machine and vanilla decoding.
//! - [`prompt`]: few-shot prompt construction.
//! - [`eval`]: set-based scoring, aggregation and report files.
//! - [`pipeline`]: end-to-end commands used by the `rcd` binary.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod dataset;
pub mod decoder;
pub mod eval;
pub mod kb;
pub mod pipeline;
pub mod prompt;
pub mod retriever;
pub mod text;
pub mod token;
pub mod trie;

pub use dataset::{DatasetStats, MajorityTable, QAItem};
pub use decoder::{DecodeConfig, DecodeMode, DecodeOutcome, DecodeState, Phase};
pub use eval::{EvalReport, QuestionScore};
pub use kb::{EntityRecord, RelationSpec, Triple, TripleStore};
pub use retriever::{CandidateSet, KbRetriever, Retriever};
pub use token::{
    ByteTokenizer, LmBackend, NoiseLm, ScriptedLm, TokenId, TokenSequence, Tokenizer, Vocabulary,
    WhitespaceTokenizer,
};
pub use trie::{NodeId, TokenTrie};
