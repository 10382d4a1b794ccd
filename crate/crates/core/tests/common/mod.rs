#![allow(dead_code)]

use episurvey::estimation::{AuxFrame, AuxPerson, CovarianceModel, MeanFunction, WorkingModel};
use episurvey::frame::{FrameRow, FrameSnapshot};
use episurvey::population::GridSpec;
use episurvey::sampling::{draw_first_stage, InclusionPlan};
use episurvey::seeds::{derive_seed, rng_from_seed};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// A frame on a `rows x cols` grid with per-cell sizes and counts.
pub fn grid_frame(
    rows: usize,
    cols: usize,
    size: impl Fn(usize) -> usize,
    verified: impl Fn(usize) -> usize,
    infected: impl Fn(usize) -> usize,
) -> FrameSnapshot {
    let spec = GridSpec::new(rows, cols, 1.0).unwrap();
    let rows: Vec<FrameRow> = (0..spec.num_cells())
        .map(|cell| FrameRow {
            day: 1,
            cell,
            size: size(cell),
            verified: verified(cell),
            infected: infected(cell),
        })
        .collect();
    FrameSnapshot::from_rows(1, spec, &rows).unwrap()
}

/// 50 clusters on a 5x10 grid with uneven sizes and a spatial trend in the
/// infected and verified counts.
pub fn frame_50() -> FrameSnapshot {
    grid_frame(
        5,
        10,
        |c| 10 + (c * 37) % 41,
        |c| ((c % 10) / 3 + (c / 10)) % 4,
        |c| ((c % 10) / 3 + (c / 10)) % 4 + (c * 7) % 5,
    )
}

/// Six clusters of at most eight residents each, scattered around cluster
/// centres, with a linear mean in the coordinates and Gaussian residual
/// correlation.
pub fn six_cluster_instance() -> (AuxFrame, WorkingModel) {
    let centres = [[0.0, 0.0], [2.0, 0.5], [4.0, 0.0], [0.5, 2.5], [2.5, 2.0], [4.5, 2.5]];
    let sizes = [3usize, 8, 5, 6, 4, 7];
    let mut clusters = Vec::new();
    for (c, (&centre, &n)) in centres.iter().zip(&sizes).enumerate() {
        let persons = (0..n)
            .map(|j| {
                let angle = j as f64 * 2.4 + c as f64;
                let r = 0.25 + 0.1 * (j % 3) as f64;
                let loc = [centre[0] + r * angle.cos(), centre[1] + r * angle.sin()];
                AuxPerson { loc, x: vec![1.0, loc[0], loc[1]] }
            })
            .collect();
        clusters.push(persons);
    }
    let model = WorkingModel {
        mean_fn: MeanFunction::Linear,
        beta: vec![0.3, 0.08, -0.05],
        cov: CovarianceModel::gaussian(0.2, 1.5, 0.0),
    };
    (AuxFrame { clusters }, model)
}

/// Brute-force `E_P E_M (Y_hat - Y)^2`: each replicate draws residuals from
/// the model's multivariate normal, a first-stage sample from `plan` and an
/// SRSWOR of `n_bar` residents per selected cluster.
pub fn brute_force_mse(
    aux: &AuxFrame,
    model: &WorkingModel,
    plan: &InclusionPlan,
    n_bar: usize,
    reps: usize,
    seed: u64,
) -> f64 {
    let persons: Vec<(usize, &AuxPerson)> = aux
        .clusters
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |p| (i, p)))
        .collect();
    let n = persons.len();
    let cov = DMatrix::from_fn(n, n, |a, b| {
        let (pa, pb) = (persons[a].1.loc, persons[b].1.loc);
        let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        let c = &model.cov;
        let rho = if a == b { 1.0 } else { (-3.0 * (d / c.alpha).powi(2)).exp() + c.tau2 };
        c.sigma_u2 * rho
    });
    let chol = cov.cholesky().expect("positive definite").l();
    let means: Vec<f64> = persons
        .iter()
        .map(|(_, p)| model.beta.iter().zip(&p.x).map(|(b, x)| b * x).sum())
        .collect();
    let offsets: Vec<usize> = aux
        .clusters
        .iter()
        .scan(0, |acc, c| {
            let o = *acc;
            *acc += c.len();
            Some(o)
        })
        .collect();

    let total: f64 = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(seed, &format!("oracle/{r}")));
            let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let y: Vec<f64> = (0..n)
                .map(|a| means[a] + (0..=a).map(|b| chol[(a, b)] * z[b]).sum::<f64>())
                .collect();
            let truth: f64 = y.iter().sum();
            let mut est = 0.0;
            for i in draw_first_stage(plan, &mut rng) {
                let size = aux.clusters[i].len();
                let k = n_bar.min(size);
                let picked = rand::seq::index::sample(&mut rng, size, k);
                let sub: f64 = picked.iter().map(|j| y[offsets[i] + j]).sum();
                est += sub * size as f64 / k as f64 / plan.pi[i];
            }
            (est - truth).powi(2)
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    total / reps as f64
}
