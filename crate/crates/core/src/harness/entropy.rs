use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};

/// Order-independent key of a first-stage sample.
pub fn sample_key(sample: &[usize]) -> u64 {
    let mut s = sample.to_vec();
    s.sort_unstable();
    let mut h = DefaultHasher::new();
    s.hash(&mut h);
    h.finish()
}

/// Plug-in entropy (natural log) of the empirical distribution of the
/// observed first-stage samples.
pub fn empirical_entropy(draws: &[Vec<usize>]) -> f64 {
    let keys: Vec<u64> = draws.iter().map(|d| sample_key(d)).collect();
    entropy_of_keys(&keys)
}

pub fn entropy_of_keys(keys: &[u64]) -> f64 {
    if keys.is_empty() {
        return 0.0;
    }
    let mut freq: HashMap<u64, usize> = HashMap::new();
    for &k in keys {
        *freq.entry(k).or_default() += 1;
    }
    let n = keys.len() as f64;
    let mut counts: Vec<usize> = freq.into_values().collect();
    // fixed summation order
    counts.sort_unstable();
    let h = -counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>();
    h.max(0.0)
}
