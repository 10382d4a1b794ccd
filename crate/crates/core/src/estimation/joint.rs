use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::sampling::{draw_first_stage, InclusionPlan};
use crate::seeds::{derive_seed, rng_from_seed};

/// Monte Carlo first-order and joint inclusion frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct InclusionEstimate {
    pub draws: usize,
    pub first: Vec<f64>,
    pub joint: DMatrix<f64>,
}

impl InclusionEstimate {
    /// Joint matrix with the diagonal replaced by the design's `pi`, as the
    /// variance formulas expect.
    pub fn joint_with_design_diagonal(&self, pi: &[f64]) -> DMatrix<f64> {
        let mut j = self.joint.clone();
        for (i, &p) in pi.iter().enumerate() {
            j[(i, i)] = p;
        }
        j
    }
}

const CHUNK: usize = 256;

/// Draws `draws` first-stage samples from `plan`; draw `r` uses the seed
/// derived from `(master_seed, label, r)`, so results do not depend on the
/// thread count.
pub fn empirical_inclusion(plan: &InclusionPlan, draws: usize, master_seed: u64, label: &str) -> InclusionEstimate {
    let m = plan.num_clusters();
    let chunks: Vec<Vec<u64>> = (0..draws.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u64; m * m];
            for r in c * CHUNK..((c + 1) * CHUNK).min(draws) {
                let mut rng = rng_from_seed(derive_seed(master_seed, &format!("{label}/r={r}")));
                let s = draw_first_stage(plan, &mut rng);
                for (a, &i) in s.iter().enumerate() {
                    for &l in &s[a..] {
                        counts[i * m + l] += 1;
                    }
                }
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; m * m];
    for c in &chunks {
        counts.iter_mut().zip(c).for_each(|(a, b)| *a += b);
    }
    let n = draws.max(1) as f64;
    let joint = DMatrix::from_fn(m, m, |i, l| {
        let (a, b) = if i <= l { (i, l) } else { (l, i) };
        counts[a * m + b] as f64 / n
    });
    InclusionEstimate {
        draws,
        first: (0..m).map(|i| joint[(i, i)]).collect(),
        joint,
    }
}
