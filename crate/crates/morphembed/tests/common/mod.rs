//! Shared fixtures for the integration suites: a synthetic morphological
//! language where the suffix determines distributional behavior, plus
//! independent oracles kept separate from the implementation paths they
//! check.

#![allow(dead_code)]

use std::io::Write;

use morphembed::corpus::{build_vocab, encode, TokenStream, Vocabulary};
use morphembed::model::{train, Checkpoint, ModelKind, RecurrenceKind, TrainConfig, TrainedModel};
use morphembed::segment::{load_segmentations, SegmentationTable};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const STEMS: [&str; 20] = [
    "ba", "ce", "di", "fo", "gu", "hi", "jo", "ka", "le", "mu", "ne", "qi", "ra", "se", "ti", "vu",
    "wa", "ye", "za", "bo",
];
pub const SUFFIXES: [&str; 4] = ["xa", "xe", "xi", "xo"];
pub const MARKERS: [&str; 4] = ["pa", "pe", "pi", "po"];

/// Word types held out of every generated corpus: stems 0..10, suffix i%4.
pub fn held_out_pairs() -> Vec<(usize, usize)> {
    (0..10).map(|i| (i, i % 4)).collect()
}

pub fn word_of(stem: usize, suffix: usize) -> String {
    format!("{}{}", STEMS[stem], SUFFIXES[suffix])
}

/// The suffix class of a generated word, if it is one.
pub fn class_of(word: &str) -> Option<usize> {
    if word.len() != 4 {
        return None;
    }
    let (stem, suffix) = word.split_at(2);
    if !STEMS.contains(&stem) {
        return None;
    }
    SUFFIXES.iter().position(|&s| s == suffix)
}

/// `n_pairs` of (word, class-marker) tokens over the non-held-out types.
/// When `planted` is given, that word is inserted `freq` times, always
/// followed by the marker of `marker_class` (which may contradict its
/// suffix), spread evenly through the corpus.
pub fn generate_corpus(
    seed: u64,
    n_pairs: usize,
    planted: Option<(&str, usize, usize)>,
) -> Vec<String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let held = held_out_pairs();
    let mut pool = Vec::new();
    for s in 0..STEMS.len() {
        for x in 0..SUFFIXES.len() {
            if !held.contains(&(s, x)) {
                pool.push((s, x));
            }
        }
    }
    let mut tokens = Vec::with_capacity(2 * n_pairs + 64);
    let insert_every = planted.map(|(_, _, freq)| n_pairs / freq.max(1));
    let mut planted_left = planted.map(|(_, _, freq)| freq).unwrap_or(0);
    for i in 0..n_pairs {
        if let (Some((word, marker_class, _)), Some(every)) = (planted, insert_every) {
            if planted_left > 0 && every > 0 && i % every == 0 {
                tokens.push(word.to_string());
                tokens.push(MARKERS[marker_class].to_string());
                planted_left -= 1;
            }
        }
        let (s, x) = pool[rng.gen_range(0..pool.len())];
        tokens.push(word_of(s, x));
        tokens.push(MARKERS[x].to_string());
    }
    // any remainder of the planted budget lands at the end
    if let Some((word, marker_class, _)) = planted {
        for _ in 0..planted_left {
            tokens.push(word.to_string());
            tokens.push(MARKERS[marker_class].to_string());
        }
    }
    tokens
}

/// Segmentation entries for every stem+suffix word in the vocabulary,
/// loaded through the real file loader; everything else is monomorphemic.
pub fn segment_language(vocab: &Vocabulary) -> SegmentationTable {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("segs.tsv");
    let mut text = String::new();
    for id in 0..vocab.size() {
        let w = vocab.surface(id);
        if class_of(w).is_some() {
            let (stem, suffix) = w.split_at(2);
            text.push_str(&format!("{w}\t{stem} {suffix}\n"));
        }
    }
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(text.as_bytes()).unwrap();
    load_segmentations(&path, vocab, false).unwrap()
}

pub fn language_train_config(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        k: 8,
        h: 8,
        epochs,
        lr: 0.01,
        batch_size: 5,
        bptt: 10,
        recurrence: RecurrenceKind::Lstm,
        seed,
        ..TrainConfig::default()
    }
}

pub struct LanguageModelFixture {
    pub vocab: Vocabulary,
    pub seg: SegmentationTable,
    pub trained: TrainedModel,
    pub train_stream: TokenStream,
}

/// Build vocab + segmentations from the tokens and train a varembed model.
pub fn train_language_model(
    tokens: &[String],
    dev_tokens: &[String],
    cfg: &TrainConfig,
) -> LanguageModelFixture {
    let vocab = build_vocab(tokens, 10_000).unwrap();
    let seg = segment_language(&vocab);
    let train_stream = encode(tokens, &vocab);
    let dev_stream = encode(dev_tokens, &vocab);
    let trained = train(
        cfg,
        &vocab,
        &seg,
        &train_stream,
        &dev_stream,
        ModelKind::Varembed,
    )
    .unwrap();
    LanguageModelFixture {
        vocab,
        seg,
        trained,
        train_stream,
    }
}

pub fn fixture_checkpoint(fx: LanguageModelFixture) -> Checkpoint {
    Checkpoint {
        model: fx.trained.model,
        vocab: fx.vocab,
        seg: fx.seg,
        optimizer: fx.trained.optimizer,
        epoch: 0,
    }
}

/// Independent tied-rank Spearman oracle: ranks by counting smaller and
/// equal elements, correlation through raw moment sums. Shares no code with
/// the implementation.
pub fn spearman_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    fn count_ranks(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|&x| {
                let below = v.iter().filter(|&&y| y < x).count() as f64;
                let equal = v.iter().filter(|&&y| y == x).count() as f64;
                1.0 + below + (equal - 1.0) / 2.0
            })
            .collect()
    }
    let rx = count_ranks(xs);
    let ry = count_ranks(ys);
    let n = rx.len() as f64;
    let sx: f64 = rx.iter().sum();
    let sy: f64 = ry.iter().sum();
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| a * b).sum();
    let sxx: f64 = rx.iter().map(|a| a * a).sum();
    let syy: f64 = ry.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Exhaustive-enumeration KL oracle over all 2^k binary vectors of one
/// word, in probability space.
pub fn kl_enumeration_oracle(gamma: &[f64], p: &[f64]) -> f64 {
    let k = gamma.len();
    assert!(k <= 20);
    let mut total = 0.0;
    for bits in 0u32..(1u32 << k) {
        let mut q = 1.0;
        let mut pr = 1.0;
        for i in 0..k {
            if (bits >> i) & 1 == 1 {
                q *= gamma[i];
                pr *= p[i];
            } else {
                q *= 1.0 - gamma[i];
                pr *= 1.0 - p[i];
            }
        }
        if q > 0.0 {
            total += q * (q / pr).ln();
        }
    }
    total
}

pub fn mean_abs_gap(gamma: &[f64], p: &[f64]) -> f64 {
    gamma.iter().zip(p).map(|(g, q)| (g - q).abs()).sum::<f64>() / gamma.len() as f64
}
