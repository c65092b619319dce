//! Latent Bernoulli word embeddings with a morphology-derived prior.
//!
//! Word embeddings are latent binary vectors whose per-bit prior is the
//! sigmoid of summed morpheme embeddings. A mean-field variational
//! distribution over the embeddings is trained jointly with a recurrent
//! (RNN or LSTM) language model by maximizing the expected corpus
//! log-likelihood minus the KL divergence from the prior. Because the prior
//! is a function of morphology alone, embeddings can be imputed for words
//! never seen in training.
//!
//! The crate provides corpus handling, a baseline MDL morphological
//! segmenter (plus import of external segmentations), the numerical core
//! (computation graph, RMSProp, gradient checking), the prior and
//! variational machinery, the language-model training loop, an additive
//! compositional baseline, and evaluation tools (word similarity,
//! embedding-feature alignment, window-based POS tagging).

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod prior;
pub mod segment;
pub mod table;
pub mod variational;

pub use error::{Error, Result};
