//! Window-based feedforward part-of-speech tagger.
//!
//! The input for a token is the concatenation of the embeddings of its
//! five-word neighborhood (zero vectors beyond sentence boundaries, so 640
//! values at k=128), fed through two tanh hidden layers of size 625 and a
//! softmax over the tagset. Embeddings are frozen; only the tagger weights
//! train, with RMSProp. Out-of-vocabulary words go through the embedder's
//! imputation; embedders that return nothing fall back to the zero vector.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::corpus::normalize_token;
use crate::error::{Error, Result};
use crate::eval::datasets::TaggedCorpus;
use crate::numerics::graph::{Gradients, Graph, NodeId, ParamId, ParamSet};
use crate::numerics::optim::RmsProp;
use crate::numerics::tensor::Tensor;
use crate::table::WordEmbedder;

pub const CONTEXT: usize = 2; // tokens on each side: a five-word window

#[derive(Debug, Clone)]
pub struct TaggerConfig {
    pub hidden: [usize; 2],
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            hidden: [625, 625],
            epochs: 20,
            batch_size: 32,
            lr: 0.01,
            rho: 0.9,
            eps: 1e-8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tagger {
    pub params: ParamSet,
    pub tags: Vec<String>,
    pub k: usize,
    ids: [ParamId; 6], // w1 b1 w2 b2 w3 b3
}

/// Embed one normalized token, falling back to zeros when the embedder has
/// nothing for it.
fn embed_or_zero(embedder: &dyn WordEmbedder, word: &str, k: usize) -> Vec<f64> {
    normalize_token(word)
        .ok()
        .and_then(|w| embedder.embed(&w))
        .unwrap_or_else(|| vec![0.0; k])
}

/// Feature matrix for one sentence: row t concatenates the five window
/// embeddings around token t.
fn sentence_features(
    sentence: &[(String, usize)],
    embedder: &dyn WordEmbedder,
    k: usize,
) -> Tensor {
    let n = sentence.len();
    let width = (2 * CONTEXT + 1) * k;
    let embs: Vec<Vec<f64>> = sentence
        .iter()
        .map(|(w, _)| embed_or_zero(embedder, w, k))
        .collect();
    let mut feats = Tensor::zeros(n, width);
    for t in 0..n {
        let row = feats.row_mut(t);
        for (slot, offset) in (-(CONTEXT as isize)..=CONTEXT as isize).enumerate() {
            let pos = t as isize + offset;
            if pos < 0 || pos >= n as isize {
                continue; // padding beyond the boundary stays zero
            }
            row[slot * k..(slot + 1) * k].copy_from_slice(&embs[pos as usize]);
        }
    }
    feats
}

fn forward(g: &mut Graph, ids: &[ParamId; 6], input: NodeId) -> Result<NodeId> {
    let [w1, b1, w2, b2, w3, b3] = *ids;
    let p1 = g.param(w1);
    let pb1 = g.param(b1);
    let a1 = g.matmul(input, p1)?;
    let a1 = g.add_row(a1, pb1)?;
    let h1 = g.tanh(a1);
    let p2 = g.param(w2);
    let pb2 = g.param(b2);
    let a2 = g.matmul(h1, p2)?;
    let a2 = g.add_row(a2, pb2)?;
    let h2 = g.tanh(a2);
    let p3 = g.param(w3);
    let pb3 = g.param(b3);
    let a3 = g.matmul(h2, p3)?;
    let scores = g.add_row(a3, pb3)?;
    Ok(g.log_softmax_rows(scores))
}

impl Tagger {
    fn init(k: usize, tags: Vec<String>, cfg: &TaggerConfig) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let width = (2 * CONTEXT + 1) * k;
        let [h1, h2] = cfg.hidden;
        let t = tags.len();
        let mut set = ParamSet::new();
        let mut mat = |set: &mut ParamSet, name: &str, r: usize, c: usize| {
            // fan-in scaled uniform init
            let bound = (6.0 / (r + c) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            let data = (0..r * c).map(|_| dist.sample(&mut rng)).collect();
            set.add(name, Tensor::from_vec(r, c, data))
        };
        let w1 = mat(&mut set, "w1", width, h1);
        let b1 = set.add("b1", Tensor::zeros(1, h1));
        let w2 = mat(&mut set, "w2", h1, h2);
        let b2 = set.add("b2", Tensor::zeros(1, h2));
        let w3 = mat(&mut set, "w3", h2, t);
        let b3 = set.add("b3", Tensor::zeros(1, t));
        Tagger {
            params: set,
            tags,
            k,
            ids: [w1, b1, w2, b2, w3, b3],
        }
    }

    /// Loss and gradients for a batch of feature rows; used by training and
    /// by the gradient-check tests.
    pub fn loss_and_grads(&self, feats: &Tensor, targets: &[usize]) -> Result<(f64, Gradients)> {
        let mut g = Graph::new(&self.params);
        let input = g.constant(feats.clone());
        let lp = forward(&mut g, &self.ids, input)?;
        let loss = g.pick_neg_sum(lp, targets.to_vec())?;
        let value = g.value(loss).item();
        let grads = g.backward(loss)?;
        Ok((value, grads))
    }

    pub fn loss_only(&self, feats: &Tensor, targets: &[usize]) -> Result<f64> {
        let mut g = Graph::new(&self.params);
        let input = g.constant(feats.clone());
        let lp = forward(&mut g, &self.ids, input)?;
        let loss = g.pick_neg_sum(lp, targets.to_vec())?;
        Ok(g.value(loss).item())
    }

    /// Predicted tag ids for one sentence.
    pub fn predict(
        &self,
        sentence: &[(String, usize)],
        embedder: &dyn WordEmbedder,
    ) -> Result<Vec<usize>> {
        let feats = sentence_features(sentence, embedder, self.k);
        let mut g = Graph::new(&self.params);
        let input = g.constant(feats);
        let lp = forward(&mut g, &self.ids, input)?;
        let out = g.value(lp);
        Ok((0..out.rows())
            .map(|r| {
                let row = out.row(r);
                let mut best = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect())
    }
}

/// Train the window tagger on frozen embeddings.
pub fn tagger_train(
    corpus: &TaggedCorpus,
    embedder: &dyn WordEmbedder,
    cfg: &TaggerConfig,
) -> Result<Tagger> {
    if corpus.sentences.is_empty() {
        return Err(Error::EmptyInput("empty tagged corpus".into()));
    }
    let k = embedder.k();
    let mut tagger = Tagger::init(k, corpus.tags.clone(), cfg);
    let mut optimizer = RmsProp::new(&tagger.params, cfg.lr, cfg.rho, cfg.eps);

    // materialize all features once; embeddings are frozen
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(corpus.tokens());
    let mut targets: Vec<usize> = Vec::with_capacity(corpus.tokens());
    for sentence in &corpus.sentences {
        let feats = sentence_features(sentence, embedder, k);
        for (t, (_, tag)) in sentence.iter().enumerate() {
            rows.push(feats.row(t).to_vec());
            targets.push(*tag);
        }
    }
    let width = (2 * CONTEXT + 1) * k;
    for _epoch in 0..cfg.epochs {
        for (chunk_rows, chunk_targets) in rows
            .chunks(cfg.batch_size)
            .zip(targets.chunks(cfg.batch_size))
        {
            let data: Vec<f64> = chunk_rows.iter().flatten().copied().collect();
            let feats = Tensor::from_vec(chunk_rows.len(), width, data);
            let (_, grads) = tagger.loss_and_grads(&feats, chunk_targets)?;
            optimizer.step(&mut tagger.params, &grads)?;
        }
    }
    Ok(tagger)
}

/// Error statistics for one frequency bucket.
#[derive(Debug, Clone)]
pub struct BucketStat {
    pub lo: u64,
    /// Exclusive upper bound; `u64::MAX` for the open top bucket.
    pub hi: u64,
    pub tokens: usize,
    pub errors: usize,
}

impl BucketStat {
    pub fn error_rate(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.errors as f64 / self.tokens as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct AccuracyReport {
    pub correct: usize,
    pub tokens: usize,
    pub buckets: Vec<BucketStat>,
}

impl AccuracyReport {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.tokens as f64
    }
}

/// Bucket edges: 0-100, then one decade each.
fn bucket_of(freq: u64) -> usize {
    if freq <= 100 {
        0
    } else if freq <= 1_000 {
        1
    } else if freq <= 10_000 {
        2
    } else if freq <= 100_000 {
        3
    } else {
        4
    }
}

/// Token accuracy plus a by-frequency error breakdown; `frequency` reports
/// the training-corpus frequency of a normalized word.
pub fn tagger_accuracy(
    tagger: &Tagger,
    corpus: &TaggedCorpus,
    embedder: &dyn WordEmbedder,
    frequency: &dyn Fn(&str) -> u64,
) -> Result<AccuracyReport> {
    // eval tags map into the tagger's tagset by name; tags the tagger has
    // never seen can never be predicted and count as errors
    let tag_map: Vec<Option<usize>> = corpus
        .tags
        .iter()
        .map(|t| tagger.tags.iter().position(|s| s == t))
        .collect();
    let edges = [
        (0u64, 100u64),
        (101, 1_000),
        (1_001, 10_000),
        (10_001, 100_000),
        (100_001, u64::MAX),
    ];
    let mut buckets: Vec<BucketStat> = edges
        .iter()
        .map(|&(lo, hi)| BucketStat {
            lo,
            hi,
            tokens: 0,
            errors: 0,
        })
        .collect();
    let mut correct = 0usize;
    let mut tokens = 0usize;
    for sentence in &corpus.sentences {
        let predicted = tagger.predict(sentence, embedder)?;
        for ((word, gold), pred) in sentence.iter().zip(predicted) {
            let gold = tag_map[*gold];
            let ok = gold == Some(pred);
            tokens += 1;
            if ok {
                correct += 1;
            }
            let freq = normalize_token(word).map(|w| frequency(&w)).unwrap_or(0);
            let b = &mut buckets[bucket_of(freq)];
            b.tokens += 1;
            if !ok {
                b.errors += 1;
            }
        }
    }
    if tokens == 0 {
        return Err(Error::EmptyInput("no tokens to evaluate".into()));
    }
    Ok(AccuracyReport {
        correct,
        tokens,
        buckets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::{grad_check, max_error};
    use std::collections::HashMap;

    struct MapEmbedder {
        map: HashMap<String, Vec<f64>>,
        k: usize,
    }

    impl WordEmbedder for MapEmbedder {
        fn k(&self) -> usize {
            self.k
        }
        fn embed(&self, word: &str) -> Option<Vec<f64>> {
            self.map.get(word).cloned()
        }
        fn in_vocab(&self, word: &str) -> bool {
            self.map.contains_key(word)
        }
        fn can_impute(&self) -> bool {
            false
        }
    }

    fn suffix_embedder() -> MapEmbedder {
        // embeddings expose the suffix class in one coordinate
        let mut map = HashMap::new();
        for stem in ["luma", "veko", "ripa", "sona"] {
            map.insert(format!("{stem}x"), vec![1.0, 0.3]);
            map.insert(format!("{stem}y"), vec![-1.0, 0.3]);
        }
        MapEmbedder { map, k: 2 }
    }

    fn suffix_corpus(stems: &[&str]) -> TaggedCorpus {
        let mut text = String::new();
        for stem in stems {
            text.push_str(&format!("{stem}x_TX {stem}y_TY\n"));
        }
        TaggedCorpus::parse_inline(&text, std::path::Path::new("mem")).unwrap()
    }

    fn tiny_config() -> TaggerConfig {
        TaggerConfig {
            hidden: [8, 8],
            epochs: 60,
            batch_size: 4,
            lr: 0.02,
            seed: 5,
            ..TaggerConfig::default()
        }
    }

    #[test]
    fn single_tag_corpus_is_trivially_perfect() {
        let corpus =
            TaggedCorpus::parse_inline("lumax_T lumay_T\n", std::path::Path::new("mem")).unwrap();
        let emb = suffix_embedder();
        let tagger = tagger_train(&corpus, &emb, &tiny_config()).unwrap();
        let report = tagger_accuracy(&tagger, &corpus, &emb, &|_| 1).unwrap();
        assert_eq!(report.accuracy(), 1.0);
    }

    #[test]
    fn suffix_determined_tags_beat_majority_class() {
        let train = suffix_corpus(&["luma", "veko", "ripa"]);
        let held_out = suffix_corpus(&["sona"]);
        let emb = suffix_embedder();
        let tagger = tagger_train(&train, &emb, &tiny_config()).unwrap();
        let report = tagger_accuracy(&tagger, &held_out, &emb, &|_| 1).unwrap();
        // both tags are equally frequent, so majority-class is 0.5
        assert!(report.accuracy() > 0.5, "accuracy {}", report.accuracy());
    }

    #[test]
    fn window_width_matches_five_word_neighborhood() {
        let emb = suffix_embedder();
        let sentence = vec![("lumax".to_string(), 0), ("lumay".to_string(), 1)];
        let feats = sentence_features(&sentence, &emb, 2);
        assert_eq!(feats.cols(), 5 * 2);
        // first token: two left pads are zero
        assert_eq!(&feats.row(0)[..4], &[0.0, 0.0, 0.0, 0.0]);
        // center slot holds the token embedding
        assert_eq!(&feats.row(0)[4..6], &[1.0, 0.3]);
        // at the reference width the input is 640 wide
        assert_eq!((2 * CONTEXT + 1) * 128, 640);
        let default = TaggerConfig::default();
        assert_eq!(default.hidden, [625, 625]);
    }

    #[test]
    fn bucket_errors_recompose_overall_error() {
        let train = suffix_corpus(&["luma", "veko"]);
        let emb = suffix_embedder();
        let mut cfg = tiny_config();
        cfg.epochs = 5;
        let tagger = tagger_train(&train, &emb, &cfg).unwrap();
        // spread tokens across buckets via a synthetic frequency fn
        let freq = |w: &str| -> u64 {
            if w.starts_with("luma") {
                50
            } else {
                5_000
            }
        };
        let report = tagger_accuracy(&tagger, &train, &emb, &freq).unwrap();
        let bucket_tokens: usize = report.buckets.iter().map(|b| b.tokens).sum();
        let bucket_errors: usize = report.buckets.iter().map(|b| b.errors).sum();
        assert_eq!(bucket_tokens, report.tokens);
        assert_eq!(bucket_errors, report.tokens - report.correct);
        let recomposed: f64 = report
            .buckets
            .iter()
            .map(|b| b.error_rate() * b.tokens as f64)
            .sum::<f64>()
            / report.tokens as f64;
        assert!((recomposed - (1.0 - report.accuracy())).abs() < 1e-12);
    }

    #[test]
    fn tagger_gradients_match_finite_differences() {
        let mut cfg = tiny_config();
        cfg.hidden = [5, 4];
        cfg.seed = 11;
        let mut tagger = Tagger::init(2, vec!["A".into(), "B".into(), "C".into()], &cfg);
        let feats = Tensor::from_vec(
            3,
            10,
            (0..30)
                .map(|i| ((i * 37 % 19) as f64 - 9.0) / 10.0)
                .collect(),
        );
        let targets = vec![0usize, 2, 1];
        let (_, grads) = tagger.loss_and_grads(&feats, &targets).unwrap();
        let feats2 = feats.clone();
        let targets2 = targets.clone();
        let mut params = std::mem::take(&mut tagger.params);
        let ids = tagger.ids;
        let tags = tagger.tags.clone();
        let mut f = |p: &ParamSet| {
            let probe = Tagger {
                params: p.clone(),
                tags: tags.clone(),
                k: 2,
                ids,
            };
            probe.loss_only(&feats2, &targets2).unwrap()
        };
        let reports = grad_check(&mut f, &mut params, &grads, 1e-5, usize::MAX, 0);
        assert!(max_error(&reports) < 1e-4, "{reports:?}");
    }
}
