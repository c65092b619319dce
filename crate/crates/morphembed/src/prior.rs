//! Morpheme-conditioned prior over latent binary word embeddings.
//!
//! Each morpheme carries a real embedding row; a word's per-bit Bernoulli
//! prior probability is the sigmoid of the sum of its morpheme rows. The
//! same machinery imputes expected embeddings for out-of-vocabulary surface
//! forms from their morphemes alone.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand_chacha::ChaCha20Rng;

use crate::corpus::write_atomic;
use crate::error::{Error, Result};
use crate::numerics::tensor::{sigmoid_scalar, softplus, Tensor};
use crate::segment::SegmentationTable;

pub const INIT_RANGE: f64 = 0.08;

/// Real matrix u of shape (morpheme count x k).
#[derive(Debug, Clone, PartialEq)]
pub struct MorphemeEmbeddings {
    u: Tensor,
}

impl MorphemeEmbeddings {
    pub fn zeros(v_m: usize, k: usize) -> Self {
        MorphemeEmbeddings {
            u: Tensor::zeros(v_m, k),
        }
    }

    /// Uniform initialization in [-0.08, 0.08].
    pub fn init(v_m: usize, k: usize, rng: &mut ChaCha20Rng) -> Self {
        let dist = Uniform::new_inclusive(-INIT_RANGE, INIT_RANGE);
        let data = (0..v_m * k).map(|_| dist.sample(rng)).collect();
        MorphemeEmbeddings {
            u: Tensor::from_vec(v_m, k, data),
        }
    }

    pub fn from_tensor(u: Tensor) -> Self {
        assert!(u.is_finite(), "morpheme embeddings must be finite");
        MorphemeEmbeddings { u }
    }

    pub fn tensor(&self) -> &Tensor {
        &self.u
    }

    pub fn k(&self) -> usize {
        self.u.cols()
    }

    pub fn morpheme_count(&self) -> usize {
        self.u.rows()
    }

    pub fn row(&self, morph_id: usize) -> &[f64] {
        self.u.row(morph_id)
    }

    /// Text export, `morpheme v1 ... vk` per line.
    pub fn save(&self, seg: &SegmentationTable, path: &Path) -> Result<()> {
        assert_eq!(seg.morpheme_count(), self.morpheme_count());
        let mut out = String::new();
        for (m, name) in seg.morphemes().iter().enumerate() {
            out.push_str(name);
            for v in self.u.row(m) {
                out.push(' ');
                out.push_str(&format!("{v:.17e}"));
            }
            out.push('\n');
        }
        write_atomic(path, out.as_bytes())
    }

    pub fn load(path: &Path, seg: &SegmentationTable) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows: HashMap<String, Vec<f64>> = HashMap::new();
        let mut k = None;
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let name = parts
                .next()
                .ok_or_else(|| Error::parse(path, i + 1, "empty line"))?;
            let values: std::result::Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
            let values =
                values.map_err(|e| Error::parse(path, i + 1, format!("bad value: {e}")))?;
            if let Some(k) = k {
                if values.len() != k {
                    return Err(Error::parse(
                        path,
                        i + 1,
                        format!("expected {k} values, found {}", values.len()),
                    ));
                }
            } else {
                k = Some(values.len());
            }
            rows.insert(name.to_string(), values);
        }
        let k = k.ok_or_else(|| Error::EmptyInput("no morpheme vectors".into()))?;
        let mut u = Tensor::zeros(seg.morpheme_count(), k);
        for (m, name) in seg.morphemes().iter().enumerate() {
            let row = rows
                .get(name)
                .ok_or_else(|| Error::parse(path, 0, format!("missing morpheme {name:?}")))?;
            u.row_mut(m).copy_from_slice(row);
        }
        Ok(MorphemeEmbeddings { u })
    }
}

/// Per-word Bernoulli prior means, strictly inside (0,1).
#[derive(Debug, Clone, PartialEq)]
pub struct PriorProbs(pub Vec<f64>);

/// Sum of a word's morpheme rows: the prior logits for that word.
pub fn prior_logits(
    word_id: usize,
    seg: &SegmentationTable,
    u: &MorphemeEmbeddings,
) -> Result<Vec<f64>> {
    let morphs = seg.morphs_of(word_id)?;
    Ok(sum_rows(morphs, u))
}

fn sum_rows(morphs: &[usize], u: &MorphemeEmbeddings) -> Vec<f64> {
    let mut s = vec![0.0; u.k()];
    for &m in morphs {
        for (acc, &v) in s.iter_mut().zip(u.row(m)) {
            *acc += v;
        }
    }
    s
}

/// Prior mean p_w = sigmoid(sum of morpheme rows).
pub fn prior_prob(
    word_id: usize,
    seg: &SegmentationTable,
    u: &MorphemeEmbeddings,
) -> Result<PriorProbs> {
    Ok(PriorProbs(
        prior_logits(word_id, seg, u)?
            .into_iter()
            .map(sigmoid_scalar)
            .collect(),
    ))
}

/// log P(b; M_w, u) for a binary vector b, summed over bits.
pub fn prior_log_likelihood(
    b: &[u8],
    word_id: usize,
    seg: &SegmentationTable,
    u: &MorphemeEmbeddings,
) -> Result<f64> {
    if b.len() != u.k() {
        return Err(Error::Shape(format!(
            "binary vector of length {} for k={}",
            b.len(),
            u.k()
        )));
    }
    if let Some(&bad) = b.iter().find(|&&v| v > 1) {
        return Err(Error::Config(format!("non-binary value {bad} in b")));
    }
    let logits = prior_logits(word_id, seg, u)?;
    // ln sigmoid(s) = -softplus(-s); ln(1-sigmoid(s)) = -softplus(s)
    Ok(b.iter()
        .zip(&logits)
        .map(|(&bit, &s)| {
            if bit == 1 {
                -softplus(-s)
            } else {
                -softplus(s)
            }
        })
        .sum())
}

/// Expected embedding of an arbitrary surface form under the prior. For
/// in-vocabulary words this is exactly [`prior_prob`]; otherwise the surface
/// is segmented against the morph lexicon, and if no covering segmentation
/// exists the word contributes nothing and the result is the maximum-entropy
/// vector of 0.5s.
pub fn impute_oov(
    surface: &str,
    vocab: &crate::corpus::Vocabulary,
    seg: &SegmentationTable,
    u: &MorphemeEmbeddings,
) -> Result<PriorProbs> {
    Ok(PriorProbs(
        impute_logits(surface, vocab, seg, u)?
            .into_iter()
            .map(sigmoid_scalar)
            .collect(),
    ))
}

/// Logit-space imputation: the morpheme-row sum for the surface form, zero
/// when the form cannot be segmented into known morphemes.
pub fn impute_logits(
    surface: &str,
    vocab: &crate::corpus::Vocabulary,
    seg: &SegmentationTable,
    u: &MorphemeEmbeddings,
) -> Result<Vec<f64>> {
    if surface.is_empty() {
        return Err(Error::EmptyInput("empty surface form".into()));
    }
    if let Some(word_id) = vocab.id(surface) {
        return prior_logits(word_id, seg, u);
    }
    match seg.segment_surface(surface) {
        Some(morphs) => Ok(sum_rows(&morphs, u)),
        None => Ok(vec![0.0; u.k()]),
    }
}
