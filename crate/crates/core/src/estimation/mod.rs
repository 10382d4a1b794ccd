//! Horvitz-Thompson estimation and design-efficiency calculations.

mod covariance;
mod efficiency;
mod joint;
mod model;
mod variance;

pub use covariance::{covariance_at, CovarianceKind, CovarianceModel};
pub use efficiency::{check_pps_optimality, efficient_av, efficient_av_at, optimal_first_stage_probs, OptimalityCheck};
pub use joint::{empirical_inclusion, InclusionEstimate};
pub use model::{AuxFrame, AuxPerson, MeanFunction, WorkingModel};
pub use variance::{
    anticipated_variance, correlation_sums, dt_residuals, independent_joint, AVReport, AvComponents, AvOptions,
};

use crate::error::{Error, Result};
use crate::frame::FrameSnapshot;
use crate::sampling::SampleDraw;

/// HT estimate `sum_i w_Ii sum_j w_IIi y_ij` of the infected total.
pub fn ht_estimate(draw: &SampleDraw, frame: &FrameSnapshot) -> Result<f64> {
    ht_estimate_with(draw, frame, |c, j| frame.clusters[c].y.get(j).map(|&y| f64::from(u8::from(y))))
}

/// HT estimate of the verified total, the balancing auxiliary.
pub fn ht_estimate_verified(draw: &SampleDraw, frame: &FrameSnapshot) -> Result<f64> {
    ht_estimate_with(draw, frame, |c, j| frame.clusters[c].v.get(j).map(|&v| f64::from(u8::from(v))))
}

fn ht_estimate_with<F>(draw: &SampleDraw, frame: &FrameSnapshot, value: F) -> Result<f64>
where
    F: Fn(usize, usize) -> Option<f64>,
{
    if draw.second_stage.len() != draw.first_stage.len()
        || draw.w_i.len() != draw.first_stage.len()
        || draw.w_ii.len() != draw.first_stage.len()
    {
        return Err(Error::DimensionMismatch("draw weights and stages differ in length".into()));
    }
    let mut total = 0.0;
    for (k, &c) in draw.first_stage.iter().enumerate() {
        if c >= frame.num_clusters() {
            return Err(Error::MissingValue(format!("cluster {c}")));
        }
        let mut sum = 0.0;
        for &j in &draw.second_stage[k] {
            sum += value(c, j).ok_or_else(|| Error::MissingValue(format!("y for person {j} of cluster {c}")))?;
        }
        total += draw.w_i[k] * draw.w_ii[k] * sum;
    }
    Ok(total)
}
