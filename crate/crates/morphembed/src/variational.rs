//! Mean-field variational state over the latent word embeddings.
//!
//! Each word has a row of free logits; the variational Bernoulli means are
//! their sigmoids. The KL term against the morphological prior has a closed
//! form per bit, which is what training subtracts from the expected corpus
//! log-likelihood.

use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand_chacha::ChaCha20Rng;

use crate::corpus::{write_atomic, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::graph::bernoulli_kl_scalar;
use crate::numerics::tensor::{sigmoid_scalar, Tensor};
use crate::prior::{prior_logits, MorphemeEmbeddings, INIT_RANGE};
use crate::segment::SegmentationTable;

/// Logit range targeted when warm-starting from external real vectors.
pub const WARM_START_LOGIT_RANGE: f64 = 4.0;

/// Variational parameters: a (v_w x k) logit matrix; gamma = sigmoid(logits).
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    logits: Tensor,
}

impl VariationalState {
    pub fn zeros(v_w: usize, k: usize) -> Self {
        VariationalState {
            logits: Tensor::zeros(v_w, k),
        }
    }

    /// Default initialization: uniform logits in [-0.08, 0.08].
    pub fn init(v_w: usize, k: usize, rng: &mut ChaCha20Rng) -> Self {
        let dist = Uniform::new_inclusive(-INIT_RANGE, INIT_RANGE);
        let data = (0..v_w * k).map(|_| dist.sample(rng)).collect();
        VariationalState {
            logits: Tensor::from_vec(v_w, k, data),
        }
    }

    /// Warm start from external real-valued vectors: each coordinate is
    /// rescaled affinely from its observed [min, max] onto
    /// [-4, 4] in logit space. Words missing from the table keep zero
    /// logits; constant coordinates map to zero.
    pub fn from_external_vectors(
        vocab: &Vocabulary,
        k: usize,
        vectors: &dyn Fn(&str) -> Option<Vec<f64>>,
    ) -> Result<Self> {
        let v_w = vocab.size();
        let mut raw = Tensor::zeros(v_w, k);
        let mut present = vec![false; v_w];
        for id in 0..v_w {
            if let Some(v) = vectors(vocab.surface(id)) {
                if v.len() != k {
                    return Err(Error::Shape(format!(
                        "external vector of length {} for k={k}",
                        v.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "external vector for {:?}",
                        vocab.surface(id)
                    )));
                }
                raw.row_mut(id).copy_from_slice(&v);
                present[id] = true;
            }
        }
        let mut logits = Tensor::zeros(v_w, k);
        for c in 0..k {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for id in 0..v_w {
                if present[id] {
                    lo = lo.min(raw.at(id, c));
                    hi = hi.max(raw.at(id, c));
                }
            }
            if hi <= lo {
                // no observed vectors or a constant coordinate
                continue;
            }
            let scale = 2.0 * WARM_START_LOGIT_RANGE / (hi - lo);
            for id in 0..v_w {
                if present[id] {
                    logits.set(id, c, (raw.at(id, c) - lo) * scale - WARM_START_LOGIT_RANGE);
                }
            }
        }
        Ok(VariationalState { logits })
    }

    pub fn from_tensor(logits: Tensor) -> Self {
        assert!(logits.is_finite(), "variational logits must be finite");
        VariationalState { logits }
    }

    pub fn logits(&self) -> &Tensor {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut Tensor {
        &mut self.logits
    }

    pub fn word_count(&self) -> usize {
        self.logits.rows()
    }

    pub fn k(&self) -> usize {
        self.logits.cols()
    }

    /// gamma_w = sigmoid(logits_w), strictly inside (0,1).
    pub fn expected_embedding(&self, word_id: usize) -> Result<Vec<f64>> {
        if word_id >= self.logits.rows() {
            return Err(Error::UnknownWordId(word_id));
        }
        Ok(self
            .logits
            .row(word_id)
            .iter()
            .map(|&v| sigmoid_scalar(v))
            .collect())
    }

    /// The stored logits of a word: the exact inverse sigmoid of gamma.
    pub fn word_logits(&self, word_id: usize) -> Result<&[f64]> {
        if word_id >= self.logits.rows() {
            return Err(Error::UnknownWordId(word_id));
        }
        Ok(self.logits.row(word_id))
    }

    /// Text export for downstream evaluation: header `v_w k`, then one
    /// `word v1 ... vk` line per word, in logit space.
    pub fn export_logits(&self, vocab: &Vocabulary, path: &Path) -> Result<()> {
        assert_eq!(vocab.size(), self.word_count());
        let mut out = format!("{} {}\n", self.word_count(), self.k());
        for id in 0..self.word_count() {
            out.push_str(vocab.surface(id));
            for v in self.logits.row(id) {
                out.push(' ');
                out.push_str(&format!("{v:.17e}"));
            }
            out.push('\n');
        }
        write_atomic(path, out.as_bytes())
    }
}

/// Closed-form KL(q(b_w) || P(b_w)) for one word, summed over bits.
pub fn kl_word(
    word_id: usize,
    state: &VariationalState,
    seg: &SegmentationTable,
    u: &MorphemeEmbeddings,
) -> Result<f64> {
    let var_logits = state.word_logits(word_id)?;
    let p_logits = prior_logits(word_id, seg, u)?;
    Ok(var_logits
        .iter()
        .zip(&p_logits)
        .map(|(&a, &s)| bernoulli_kl_scalar(a, s))
        .sum())
}

/// KL(Q || P) summed over the vocabulary.
pub fn kl_total(
    state: &VariationalState,
    seg: &SegmentationTable,
    u: &MorphemeEmbeddings,
) -> Result<f64> {
    (0..state.word_count())
        .map(|w| kl_word(w, state, seg, u))
        .sum()
}
