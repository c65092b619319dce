//! Alignment between embedding dimensions and lexical semantic features.
//!
//! Each embedding dimension is aligned to the single oracle feature it
//! correlates with best over the shared words; the score is 100 times the
//! mean of those maximal Pearson correlations, so an embedding identical to
//! the oracle scores exactly 100.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::table::EmbeddingTable;

/// Sparse word-by-feature matrix of non-negative feature values.
#[derive(Debug, Clone)]
pub struct QvecOracle {
    pub words: Vec<String>,
    pub feature_names: Vec<String>,
    /// Dense (words x features), row-aligned with `words`.
    pub features: Vec<Vec<f64>>,
}

impl QvecOracle {
    /// Parse the `word<TAB>feat:val feat:val ...` oracle format.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut feature_ids: HashMap<String, usize> = HashMap::new();
        let mut feature_names: Vec<String> = Vec::new();
        let mut rows: Vec<(String, Vec<(usize, f64)>)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, feats) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected word<TAB>feat:val ..."))?;
            let mut parsed = Vec::new();
            for f in feats.split_whitespace() {
                let (name, val) = f
                    .rsplit_once(':')
                    .ok_or_else(|| Error::parse(path, i + 1, format!("bad feature {f:?}")))?;
                let val: f64 = val
                    .parse()
                    .map_err(|_| Error::parse(path, i + 1, format!("bad value in {f:?}")))?;
                if !val.is_finite() || val < 0.0 {
                    return Err(Error::parse(path, i + 1, "feature values must be >= 0"));
                }
                let fid = *feature_ids.entry(name.to_string()).or_insert_with(|| {
                    feature_names.push(name.to_string());
                    feature_names.len() - 1
                });
                parsed.push((fid, val));
            }
            rows.push((word.to_string(), parsed));
        }
        if rows.is_empty() || feature_names.is_empty() {
            return Err(Error::EmptyInput("oracle has no features".into()));
        }
        let s = feature_names.len();
        let mut words = Vec::with_capacity(rows.len());
        let mut features = Vec::with_capacity(rows.len());
        for (word, parsed) in rows {
            let mut dense = vec![0.0; s];
            for (fid, val) in parsed {
                dense[fid] = val;
            }
            words.push(word);
            features.push(dense);
        }
        Ok(QvecOracle {
            words,
            feature_names,
            features,
        })
    }

    pub fn from_dense(
        words: Vec<String>,
        feature_names: Vec<String>,
        features: Vec<Vec<f64>>,
    ) -> Self {
        QvecOracle {
            words,
            feature_names,
            features,
        }
    }
}

/// Pearson correlation; constant columns yield 0 by convention.
fn pearson_or_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// The alignment score in [-100, 100]: restrict to shared words, correlate
/// every embedding column with every oracle column, and average each
/// dimension's best correlation over all D dimensions.
pub fn qvec(table: &EmbeddingTable, oracle: &QvecOracle) -> Result<f64> {
    let mut shared_rows: Vec<(usize, &[f64])> = Vec::new();
    for (oi, w) in oracle.words.iter().enumerate() {
        if let Some(v) = table.get(w) {
            shared_rows.push((oi, v));
        }
    }
    let n = shared_rows.len();
    if n < 2 {
        return Err(Error::Undefined(format!(
            "only {n} shared words between table and oracle"
        )));
    }
    let d = table.k();
    let s = oracle.feature_names.len();
    let mut score = 0.0;
    let mut emb_col = vec![0.0; n];
    let mut feat_col = vec![0.0; n];
    for dc in 0..d {
        for (r, (_, row)) in shared_rows.iter().enumerate() {
            emb_col[r] = row[dc];
        }
        let mut best = f64::NEG_INFINITY;
        for sc in 0..s {
            for (r, (oi, _)) in shared_rows.iter().enumerate() {
                feat_col[r] = oracle.features[*oi][sc];
            }
            best = best.max(pearson_or_zero(&emb_col, &feat_col));
        }
        score += best;
    }
    Ok(100.0 * score / d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn table_from(words: &[&str], rows: Vec<Vec<f64>>) -> EmbeddingTable {
        let k = rows[0].len();
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        EmbeddingTable::new(
            words.iter().map(|w| w.to_string()).collect(),
            Tensor::from_vec(words.len(), k, data),
        )
        .unwrap()
    }

    fn oracle_from(words: &[&str], rows: Vec<Vec<f64>>) -> QvecOracle {
        let s = rows[0].len();
        QvecOracle::from_dense(
            words.iter().map(|w| w.to_string()).collect(),
            (0..s).map(|i| format!("f{i}")).collect(),
            rows,
        )
    }

    #[test]
    fn self_alignment_scores_exactly_100() {
        let rows = vec![
            vec![0.1, 3.0, 0.0],
            vec![2.0, 1.0, 1.0],
            vec![0.5, 0.0, 2.0],
            vec![1.5, 2.0, 0.5],
        ];
        let words = ["a", "b", "c", "d"];
        let t = table_from(&words, rows.clone());
        let o = oracle_from(&words, rows);
        assert_eq!(qvec(&t, &o).unwrap(), 100.0);
    }

    #[test]
    fn negated_single_feature_scores_minus_100() {
        let words = ["a", "b", "c"];
        let t = table_from(&words, vec![vec![-1.0], vec![-2.0], vec![-3.0]]);
        let o = oracle_from(&words, vec![vec![1.0], vec![2.0], vec![3.0]]);
        assert_eq!(qvec(&t, &o).unwrap(), -100.0);
    }

    #[test]
    fn independent_random_columns_score_near_zero() {
        // Monte Carlo bound: 500 words, D=S=8 -> |score| < 15
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        let n = 500;
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let wref: Vec<&str> = words.iter().map(String::as_str).collect();
        let emb: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let feats: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..8).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let t = table_from(&wref, emb);
        let o = oracle_from(&wref, feats);
        let score = qvec(&t, &o).unwrap();
        assert!(score.abs() < 15.0, "score {score}");
    }

    #[test]
    fn constant_embedding_column_contributes_zero() {
        let words = ["a", "b", "c"];
        let t = table_from(&words, vec![vec![7.0, 1.0], vec![7.0, 2.0], vec![7.0, 3.0]]);
        let o = oracle_from(&words, vec![vec![1.0], vec![2.0], vec![3.0]]);
        // first dim constant -> 0; second aligns perfectly -> 1
        assert_eq!(qvec(&t, &o).unwrap(), 50.0);
    }

    #[test]
    fn score_never_exceeds_100() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for _ in 0..20 {
            let n = 10;
            let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
            let wref: Vec<&str> = words.iter().map(String::as_str).collect();
            let emb: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let feats: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.gen_range(0.0..2.0)).collect())
                .collect();
            let t = table_from(&wref, emb);
            let o = oracle_from(&wref, feats);
            assert!(qvec(&t, &o).unwrap() <= 100.0);
        }
    }

    #[test]
    fn too_few_shared_words_is_error() {
        let t = table_from(&["a", "b"], vec![vec![1.0], vec![2.0]]);
        let o = oracle_from(&["x", "y"], vec![vec![1.0], vec![2.0]]);
        assert!(qvec(&t, &o).is_err());
    }

    #[test]
    fn oracle_file_format_parses() {
        let text = "# comment\nwarm\tnoun.feeling:0.5 adj.all:1.0\ncold\tnoun.feeling:0.25\n";
        let o = QvecOracle::parse(text, Path::new("mem")).unwrap();
        assert_eq!(o.words, vec!["warm", "cold"]);
        assert_eq!(o.feature_names, vec!["noun.feeling", "adj.all"]);
        assert_eq!(o.features[1], vec![0.25, 0.0]);
        assert!(QvecOracle::parse("bad line no tab\n", Path::new("mem")).is_err());
        assert!(QvecOracle::parse("w\tf:-1\n", Path::new("mem")).is_err());
    }
}
