//! Real-valued embedding tables in the text export format, plus the
//! embedder abstraction used by the evaluations: a way to map any surface
//! form to a vector, with or without the ability to impute unseen words.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::{write_atomic, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{Checkpoint, ModelKind};
use crate::numerics::tensor::Tensor;
use crate::prior::impute_logits;

/// Embedding table: header `v_w k`, then `word v1 ... vk` per line.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    words: Vec<String>,
    ids: HashMap<String, usize>,
    matrix: Tensor,
}

impl EmbeddingTable {
    pub fn new(words: Vec<String>, matrix: Tensor) -> Result<Self> {
        if words.len() != matrix.rows() {
            return Err(Error::Shape(format!(
                "{} words for {} rows",
                words.len(),
                matrix.rows()
            )));
        }
        let ids: HashMap<String, usize> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        if ids.len() != words.len() {
            return Err(Error::Config("duplicate word in embedding table".into()));
        }
        Ok(EmbeddingTable { words, ids, matrix })
    }

    pub fn k(&self) -> usize {
        self.matrix.cols()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.ids.get(word).map(|&i| self.matrix.row(i))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = format!("{} {}\n", self.len(), self.k());
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(w);
            for v in self.matrix.row(i) {
                out.push(' ');
                out.push_str(&format!("{v:.17e}"));
            }
            out.push('\n');
        }
        write_atomic(path, out.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parse the text format. `path` is only used in error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
        let mut hp = header.split_whitespace();
        let n: usize = hp
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(path, 1, "expected `v_w k` header"))?;
        let k: usize = hp
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(path, 1, "expected `v_w k` header"))?;
        if hp.next().is_some() {
            return Err(Error::parse(path, 1, "trailing fields in header"));
        }
        if n == 0 || k == 0 {
            return Err(Error::parse(path, 1, "empty table"));
        }
        if n.saturating_mul(k) > text.len() {
            return Err(Error::parse(path, 1, "header larger than file"));
        }
        let mut words = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * k);
        for (i, line) in lines {
            let mut parts = line.split_whitespace();
            let word = match parts.next() {
                Some(w) => w,
                None => continue, // blank or whitespace-only line
            };
            words.push(word.to_string());
            let before = data.len();
            for p in parts {
                let v: f64 = p
                    .parse()
                    .map_err(|e| Error::parse(path, i + 1, format!("bad value {p:?}: {e}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(path, i + 1, "non-finite value"));
                }
                data.push(v);
            }
            if data.len() - before != k {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected {k} values, found {}", data.len() - before),
                ));
            }
        }
        if words.len() != n {
            return Err(Error::parse(
                path,
                0,
                format!("header declared {n} words, found {}", words.len()),
            ));
        }
        EmbeddingTable::new(words, Tensor::from_vec(n, k, data))
    }
}

/// Maps surface forms to embedding vectors for evaluation. `embed` returns
/// `None` for words the source cannot represent; `in_vocab` reports true
/// membership (an imputing embedder returns vectors for words that are not
/// in vocabulary); `can_impute` says whether out-of-vocabulary forms are
/// representable at all.
pub trait WordEmbedder {
    fn k(&self) -> usize;
    fn embed(&self, word: &str) -> Option<Vec<f64>>;
    fn in_vocab(&self, word: &str) -> bool;
    fn can_impute(&self) -> bool;
}

/// A plain table: in-vocabulary words only.
pub struct FixedEmbedder<'a>(pub &'a EmbeddingTable);

impl WordEmbedder for FixedEmbedder<'_> {
    fn k(&self) -> usize {
        self.0.k()
    }

    fn embed(&self, word: &str) -> Option<Vec<f64>> {
        self.0.get(word).map(|r| r.to_vec())
    }

    fn in_vocab(&self, word: &str) -> bool {
        self.0.get(word).is_some()
    }

    fn can_impute(&self) -> bool {
        false
    }
}

/// Embeddings of a trained latent-variable model in logit space:
/// in-vocabulary words use their variational logits (the inverse sigmoid of
/// the expected embedding), out-of-vocabulary words the prior logit sums of
/// their morphemes.
pub struct VarembedEmbedder<'a> {
    pub ck: &'a Checkpoint,
}

impl WordEmbedder for VarembedEmbedder<'_> {
    fn k(&self) -> usize {
        self.ck.model.dims.k
    }

    fn embed(&self, word: &str) -> Option<Vec<f64>> {
        let model = &self.ck.model;
        if let Some(id) = self.ck.vocab.id(word) {
            return Some(model.set.get(model.input_table).row(id).to_vec());
        }
        impute_logits(
            word,
            &self.ck.vocab,
            &self.ck.seg,
            &crate::prior::MorphemeEmbeddings::from_tensor(
                model.set.get(model.morph_table).clone(),
            ),
        )
        .ok()
    }

    fn in_vocab(&self, word: &str) -> bool {
        self.ck.vocab.contains(word)
    }

    fn can_impute(&self) -> bool {
        true
    }
}

/// Embeddings of the additive baseline: word vector plus morpheme sums for
/// in-vocabulary words, morpheme sums alone for out-of-vocabulary forms.
pub struct AdditiveEmbedder<'a> {
    pub ck: &'a Checkpoint,
}

impl AdditiveEmbedder<'_> {
    fn morph_sum(&self, morphs: &[usize]) -> Vec<f64> {
        let table = self.ck.model.set.get(self.ck.model.morph_table);
        let mut s = vec![0.0; table.cols()];
        for &m in morphs {
            for (acc, &v) in s.iter_mut().zip(table.row(m)) {
                *acc += v;
            }
        }
        s
    }
}

impl WordEmbedder for AdditiveEmbedder<'_> {
    fn k(&self) -> usize {
        self.ck.model.dims.k
    }

    fn embed(&self, word: &str) -> Option<Vec<f64>> {
        let model = &self.ck.model;
        if let Some(id) = self.ck.vocab.id(word) {
            let mut v = self.morph_sum(&model.morph_lists[id]);
            for (acc, &w) in v.iter_mut().zip(model.set.get(model.input_table).row(id)) {
                *acc += w;
            }
            return Some(v);
        }
        let morphs = self.ck.seg.segment_surface(word)?;
        Some(self.morph_sum(&morphs))
    }

    fn in_vocab(&self, word: &str) -> bool {
        self.ck.vocab.contains(word)
    }

    fn can_impute(&self) -> bool {
        true
    }
}

/// Wrapper that disables imputation: only words passing the membership test
/// embed, everything else reports no vector (the tagger then zero-pads).
pub struct NoImputeEmbedder<'a> {
    pub inner: Box<dyn WordEmbedder + 'a>,
    pub in_vocab: Box<dyn Fn(&str) -> bool + 'a>,
}

impl WordEmbedder for NoImputeEmbedder<'_> {
    fn k(&self) -> usize {
        self.inner.k()
    }

    fn embed(&self, word: &str) -> Option<Vec<f64>> {
        if (self.in_vocab)(word) {
            self.inner.embed(word)
        } else {
            None
        }
    }

    fn in_vocab(&self, word: &str) -> bool {
        (self.in_vocab)(word)
    }

    fn can_impute(&self) -> bool {
        false
    }
}

/// Embedder for a checkpoint of either model kind.
pub fn checkpoint_embedder<'a>(ck: &'a Checkpoint) -> Box<dyn WordEmbedder + 'a> {
    match ck.model.kind {
        ModelKind::Varembed => Box::new(VarembedEmbedder { ck }),
        ModelKind::Additive => Box::new(AdditiveEmbedder { ck }),
    }
}

/// Export the full vocabulary through an embedder into a table.
pub fn export_table(vocab: &Vocabulary, embedder: &dyn WordEmbedder) -> Result<EmbeddingTable> {
    let k = embedder.k();
    let mut data = Vec::with_capacity(vocab.size() * k);
    for id in 0..vocab.size() {
        let v = embedder
            .embed(vocab.surface(id))
            .ok_or_else(|| Error::Config(format!("no embedding for {:?}", vocab.surface(id))))?;
        data.extend_from_slice(&v);
    }
    EmbeddingTable::new(
        vocab.words().to_vec(),
        Tensor::from_vec(vocab.size(), k, data),
    )
}
