use crate::error::{Error, Result};

/// PPS first-stage probabilities `m * N_i / N`.
///
/// Clusters whose probability would exceed one are fixed at one and the
/// remaining size is shared proportionally among the others, repeating
/// until every probability is at most one. Empty clusters get zero.
pub fn pps_probabilities(counts: &[usize], m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::invalid("m", "first-stage size must be >= 1"));
    }
    let nonempty = counts.iter().filter(|&&n| n > 0).count();
    if nonempty == 0 {
        return Err(Error::invalid("counts", "population is empty"));
    }
    if m > nonempty {
        return Err(Error::TooManyClusters {
            m,
            available: nonempty,
        });
    }
    let mut capped = vec![false; counts.len()];
    let mut pi = vec![0.0; counts.len()];
    loop {
        let n_capped = capped.iter().filter(|&&c| c).count();
        let free_total: f64 = counts
            .iter()
            .zip(&capped)
            .filter(|(_, &c)| !c)
            .map(|(&n, _)| n as f64)
            .sum();
        let free_m = (m - n_capped) as f64;
        let mut changed = false;
        for (i, &n) in counts.iter().enumerate() {
            if capped[i] {
                pi[i] = 1.0;
                continue;
            }
            pi[i] = if free_total > 0.0 { free_m * n as f64 / free_total } else { 0.0 };
            if pi[i] >= 1.0 {
                capped[i] = true;
                pi[i] = 1.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(pi)
}

/// Clusters that would exceed probability one under untruncated PPS.
pub fn truncated_clusters(counts: &[usize], m: usize) -> Vec<usize> {
    let total: f64 = counts.iter().map(|&n| n as f64).sum();
    counts
        .iter()
        .enumerate()
        .filter(|(_, &n)| m as f64 * n as f64 > total)
        .map(|(i, _)| i)
        .collect()
}
