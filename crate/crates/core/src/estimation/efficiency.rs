use rand::Rng;

use crate::error::{Error, Result};
use crate::sampling::pps_probabilities;

/// Anticipated variance of the fully spread and balanced strategy at
/// first-stage probabilities `pi`:
/// `sum_i N_i^2 sigma_u2 / (pi_i n_bar) - sum_i N_i sigma_u2`.
pub fn efficient_av_at(counts: &[usize], pi: &[f64], sigma_u2: f64, n_bar: usize) -> Result<f64> {
    if counts.len() != pi.len() {
        return Err(Error::DimensionMismatch(format!("{} sizes, {} probabilities", counts.len(), pi.len())));
    }
    if n_bar == 0 {
        return Err(Error::invalid("n_bar", "second-stage size must be >= 1"));
    }
    let mut total = 0.0;
    for (&n, &p) in counts.iter().zip(pi) {
        if n == 0 {
            continue;
        }
        if p <= 0.0 {
            return Err(Error::invalid("pi", "nonempty cluster with zero probability"));
        }
        let n = n as f64;
        total += n * n * sigma_u2 / (p * n_bar as f64) - n * sigma_u2;
    }
    Ok(total)
}

/// [`efficient_av_at`] evaluated at the PPS probabilities.
pub fn efficient_av(counts: &[usize], sigma_u2: f64, m: usize, n_bar: usize) -> Result<f64> {
    let pi = pps_probabilities(counts, m)?;
    efficient_av_at(counts, &pi, sigma_u2, n_bar)
}

/// First-stage probabilities minimising [`efficient_av_at`] under
/// `sum(pi) = m`. The optimum is PPS; `sigma_u` and `n_bar` cancel. Fails
/// with the offending clusters when some `m N_i` exceeds `N`.
pub fn optimal_first_stage_probs(counts: &[usize], m: usize, sigma_u: f64, n_bar: usize) -> Result<Vec<f64>> {
    if !(sigma_u > 0.0) || n_bar == 0 {
        return Err(Error::invalid("sigma_u", "need sigma_u > 0 and n_bar >= 1"));
    }
    let scale = sigma_u / (n_bar as f64).sqrt();
    let denom: f64 = counts.iter().map(|&n| n as f64 * scale).sum();
    let bad: Vec<usize> = counts
        .iter()
        .enumerate()
        .filter(|(_, &n)| m as f64 * n as f64 * scale > denom * (1.0 + 1e-12))
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(Error::SideCondition(bad));
    }
    pps_probabilities(counts, m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityCheck {
    pub pps_value: f64,
    pub min_perturbed: f64,
    pub evaluated: usize,
}

impl OptimalityCheck {
    /// PPS is no worse than any perturbation, up to `rel_tol`.
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.pps_value <= self.min_perturbed + rel_tol * self.pps_value.abs()
    }
}

/// Evaluates [`efficient_av_at`] at PPS and at perturbed probability
/// vectors with the same sum: every pairwise transfer `+-step * e_a -+ step * e_b`
/// for each step in `steps`, plus `random_dirs` random zero-sum directions
/// scaled to each step. Perturbations leaving `(0, 1]` are skipped.
pub fn check_pps_optimality<R: Rng + ?Sized>(
    counts: &[usize],
    m: usize,
    sigma_u2: f64,
    n_bar: usize,
    steps: &[f64],
    random_dirs: usize,
    rng: &mut R,
) -> Result<OptimalityCheck> {
    let pi = optimal_first_stage_probs(counts, m, sigma_u2.sqrt().max(f64::MIN_POSITIVE), n_bar)?;
    let pps_value = efficient_av_at(counts, &pi, sigma_u2, n_bar)?;
    let k = pi.len();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if a != b {
                let mut d = vec![0.0; k];
                d[a] = 1.0;
                d[b] = -1.0;
                dirs.push(d);
            }
        }
    }
    for _ in 0..random_dirs {
        let mut d: Vec<f64> = (0..k).map(|_| rng.random::<f64>() - 0.5).collect();
        let mean = d.iter().sum::<f64>() / k as f64;
        d.iter_mut().for_each(|v| *v -= mean);
        let norm = d.iter().map(|v| v.abs()).fold(0.0, f64::max);
        d.iter_mut().for_each(|v| *v /= norm);
        dirs.push(d);
    }
    let mut min_perturbed = f64::INFINITY;
    let mut evaluated = 0;
    let mut trial = vec![0.0; k];
    for d in &dirs {
        for &s in steps {
            for sign in [1.0, -1.0] {
                for i in 0..k {
                    trial[i] = pi[i] + sign * s * d[i];
                }
                if trial.iter().any(|&p| p <= 0.0 || p > 1.0) {
                    continue;
                }
                let v = efficient_av_at(counts, &trial, sigma_u2, n_bar)?;
                min_perturbed = min_perturbed.min(v);
                evaluated += 1;
            }
        }
    }
    Ok(OptimalityCheck {
        pps_value,
        min_perturbed,
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::rng_from_seed;

    #[test]
    fn equal_sizes_closed_form() {
        let counts = [40usize; 10];
        let (m, n_bar, s2) = (4, 5, 0.8);
        let v = efficient_av(&counts, s2, m, n_bar).unwrap();
        let direct = 10.0 * (1600.0 * s2 / (0.4 * 5.0) - 40.0 * s2);
        assert!((v - direct).abs() < 1e-9);
        assert_eq!(efficient_av(&counts, 0.0, m, n_bar).unwrap(), 0.0);
    }

    #[test]
    fn census_is_zero() {
        let counts = [3usize, 3, 3];
        assert_eq!(efficient_av(&counts, 2.0, 3, 3).unwrap(), 0.0);
    }

    #[test]
    fn optimum_is_pps_independent_of_scale() {
        let counts = [50usize, 50, 100];
        let a = optimal_first_stage_probs(&counts, 2, 0.3, 1).unwrap();
        let b = optimal_first_stage_probs(&counts, 2, 7.0, 9).unwrap();
        assert_eq!(a, vec![0.5, 0.5, 1.0]);
        assert_eq!(a, b);
        assert_eq!(
            optimal_first_stage_probs(&[1000, 1, 1], 2, 1.0, 1),
            Err(Error::SideCondition(vec![0]))
        );
    }

    #[test]
    fn perturbations_never_improve() {
        let counts = [30usize, 55, 80, 20, 65];
        let c = check_pps_optimality(&counts, 2, 1.5, 3, &[0.01, 0.02, 0.05], 50, &mut rng_from_seed(1)).unwrap();
        assert!(c.evaluated > 100);
        assert!(c.holds(1e-9), "{c:?}");
    }
}
