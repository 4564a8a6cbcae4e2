/// Shannon entropy in nats, `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// `1 - (p(1) - p(2))` for the two largest probabilities.
pub fn margin_score(probs: &[f64]) -> f64 {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &p in probs {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    if second == f64::NEG_INFINITY {
        second = 0.0;
    }
    1.0 - (first - second)
}

/// Entropy of the mean prediction minus the mean per-pass entropy.
pub fn bald_score(passes: &[Vec<f64>]) -> f64 {
    let t = passes.len() as f64;
    let width = passes.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; width];
    for row in passes {
        for (m, p) in mean.iter_mut().zip(row) {
            *m += p / t;
        }
    }
    let expected: f64 = passes.iter().map(|r| entropy(r)).sum::<f64>() / t;
    entropy(&mean) - expected
}
