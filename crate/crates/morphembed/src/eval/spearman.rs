//! Spearman rank correlation with average ranks for ties.

use crate::error::{Error, Result};

/// Tie-averaged ranks, 1-based.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("non-comparable value"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // positions i..=j share the mean of ranks i+1..=j+1
        let mean = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
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
        return Err(Error::Undefined("zero rank variance".into()));
    }
    Ok(cov / (vx * vy).sqrt())
}

/// Spearman's rho: the Pearson correlation of tie-averaged ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Undefined("need at least two pairs".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spearman input".into()));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concordant_and_reversed() {
        assert_eq!(
            spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(),
            1.0
        );
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn tied_ranks_hand_value() {
        // ranks x: 1, 2.5, 2.5, 4; ranks y: 1, 3, 2, 4
        // rho = 4.5 / sqrt(4.5 * 5) = 3/sqrt(10)
        let rho = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((rho - 3.0 / 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs_error() {
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn invariant_under_monotone_transform() {
        let xs = [0.3, -1.0, 2.5, 0.7, 0.7, 9.0];
        let ys = [1.0, 4.0, 2.0, 3.0, 5.0, 0.5];
        let base = spearman(&xs, &ys).unwrap();
        let sx: Vec<f64> = xs.iter().map(|&v| (3.0 * v).exp()).collect();
        let sy: Vec<f64> = ys.iter().map(|&v| v.powi(3) + 100.0).collect();
        assert!((spearman(&sx, &ys).unwrap() - base).abs() < 1e-12);
        assert!((spearman(&xs, &sy).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn average_ranks_known() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 20.0, 40.0]),
            vec![1.0, 2.5, 2.5, 4.0]
        );
        assert_eq!(average_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }
}
