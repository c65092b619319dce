//! Intrinsic and downstream evaluation of embedding tables.

pub mod binomial;
pub mod datasets;
pub mod qvec;
pub mod spearman;
pub mod tagger;
pub mod wordsim;

pub use binomial::binomial_test;
pub use datasets::TaggedCorpus;
pub use qvec::{qvec, QvecOracle};
pub use spearman::spearman;
pub use tagger::{tagger_accuracy, tagger_train, Tagger, TaggerConfig};
pub use wordsim::{eval_wordsim, SimilarityDataset, WordsimMode, WordsimReport};
