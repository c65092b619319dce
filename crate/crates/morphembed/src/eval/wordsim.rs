//! Word-similarity evaluation: Spearman correlation between human scores
//! and cosine similarities of the embedding vectors.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::spearman::spearman;
use crate::table::WordEmbedder;

/// Human-scored word pairs.
#[derive(Debug, Clone)]
pub struct SimilarityDataset {
    pub name: String,
    pub pairs: Vec<(String, String, f64)>,
}

impl SimilarityDataset {
    /// `word1<TAB>word2<TAB>score`, `#` comment lines ignored.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        Self::parse(&text, &name, path)
    }

    pub fn parse(text: &str, name: &str, path: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (w1, w2, score) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(s)) if !a.is_empty() && !b.is_empty() => (a, b, s),
                _ => {
                    return Err(Error::parse(
                        path,
                        i + 1,
                        "expected word1<TAB>word2<TAB>score",
                    ))
                }
            };
            let score: f64 = score
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad score {score:?}")))?;
            if !score.is_finite() {
                return Err(Error::parse(path, i + 1, "non-finite score"));
            }
            pairs.push((w1.to_string(), w2.to_string(), score));
        }
        if pairs.is_empty() {
            return Err(Error::EmptyInput(format!("no pairs in {name}")));
        }
        Ok(SimilarityDataset {
            name: name.to_string(),
            pairs,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordsimMode {
    /// Every pair is scored; out-of-vocabulary words are imputed. Fails for
    /// embedders that cannot impute.
    All,
    /// Pairs with an out-of-vocabulary word are skipped and counted.
    InVocab,
}

#[derive(Debug, Clone)]
pub struct WordsimReport {
    pub dataset: String,
    /// Spearman's rho times 100.
    pub rho_x100: f64,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
}

/// Zero vectors have no direction; their similarity to anything is 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Correlate model cosine similarities with the human scores.
pub fn eval_wordsim(
    dataset: &SimilarityDataset,
    embedder: &dyn WordEmbedder,
    mode: WordsimMode,
) -> Result<WordsimReport> {
    if mode == WordsimMode::All && !embedder.can_impute() {
        return Err(Error::UnsupportedMode(
            "n/a: no imputer for out-of-vocabulary words".into(),
        ));
    }
    let mut human = Vec::new();
    let mut model = Vec::new();
    let mut skipped = 0usize;
    for (w1, w2, score) in &dataset.pairs {
        if mode == WordsimMode::InVocab && !(embedder.in_vocab(w1) && embedder.in_vocab(w2)) {
            // never consult the imputer in this mode
            skipped += 1;
            continue;
        }
        match (embedder.embed(w1), embedder.embed(w2)) {
            (Some(a), Some(b)) => {
                human.push(*score);
                model.push(cosine(&a, &b));
            }
            _ => {
                // an imputing embedder with no representation at all: the
                // vector is undirected
                human.push(*score);
                model.push(0.0);
            }
        }
    }
    let rho = spearman(&human, &model)?;
    Ok(WordsimReport {
        dataset: dataset.name.clone(),
        rho_x100: rho * 100.0,
        pairs_used: human.len(),
        pairs_skipped: skipped,
    })
}
