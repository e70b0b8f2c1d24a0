//! Spearman rank correlation with average-rank tie handling.

/// Average ranks (1-based); tied values share the mean of their rank positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Spearman rank correlation coefficient: Pearson correlation of the average-rank
/// vectors. Returns 0 when either input is constant.
pub fn srcc(predictions: &[f64], truths: &[f64]) -> f64 {
    assert_eq!(predictions.len(), truths.len());
    assert!(predictions.len() >= 2, "correlation needs at least two points");
    pearson(&average_ranks(predictions), &average_ranks(truths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{range_f64, seeded};

    #[test]
    fn increasing_sequences_correlate_perfectly() {
        let x = vec![0.1, 0.2, 0.5, 0.9];
        let y = vec![1.0, 2.0, 30.0, 40.0];
        assert_eq!(srcc(&x, &y), 1.0);
    }

    #[test]
    fn reversed_sequence_is_minus_one() {
        let x = vec![0.1, 0.2, 0.5, 0.9];
        let y: Vec<f64> = x.iter().rev().cloned().collect();
        assert_eq!(srcc(&x, &y), -1.0);
    }

    #[test]
    fn ties_use_average_ranks() {
        // [1, 2, 2, 3] -> ranks [1, 2.5, 2.5, 4]
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn invariant_under_strictly_monotone_transforms() {
        let mut rng = seeded(8);
        for _ in 0..50 {
            let x: Vec<f64> = (0..12).map(|_| range_f64(&mut rng, -2.0, 2.0)).collect();
            let y: Vec<f64> = (0..12).map(|_| range_f64(&mut rng, -2.0, 2.0)).collect();
            let base = srcc(&x, &y);
            let x2: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let y2: Vec<f64> = y.iter().map(|v| 3.0 * v + 11.0).collect();
            assert!((srcc(&x2, &y2) - base).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_input_defined_as_zero() {
        assert_eq!(srcc(&[1.0, 1.0, 1.0], &[0.3, 0.2, 0.9]), 0.0);
    }
}
