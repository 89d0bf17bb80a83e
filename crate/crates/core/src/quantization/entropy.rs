/// Plug-in entropy in nats of the empirical distribution given by `counts`,
/// with `0 log 0 = 0`.
pub fn discrete_entropy(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    assert!(total > 0, "entropy of an empty histogram");
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Entropy of a probability vector.
pub fn entropy_of_probabilities(probs: &[f64]) -> f64 {
    probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_degenerate() {
        assert!((discrete_entropy(&[5, 5, 5, 5]) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(discrete_entropy(&[0, 9, 0]), 0.0);
    }

    #[test]
    fn three_to_one() {
        let expected = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert!((discrete_entropy(&[3, 1]) - expected).abs() < 1e-15);
        assert!((discrete_entropy(&[3, 1]) - 0.5623).abs() < 1e-4);
    }

    #[test]
    #[should_panic(expected = "empty histogram")]
    fn empty_counts_panic() {
        discrete_entropy(&[0, 0]);
    }
}
