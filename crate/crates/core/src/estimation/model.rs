use serde::{Deserialize, Serialize};

use super::CovarianceModel;
use crate::error::{Error, Result};
use crate::frame::FrameSnapshot;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanFunction {
    /// `beta' x`.
    #[default]
    Linear,
    /// `1 / (1 + exp(-beta' x))`.
    Logistic,
}

impl MeanFunction {
    pub fn eval(self, beta: &[f64], x: &[f64]) -> f64 {
        let eta: f64 = beta.iter().zip(x).map(|(b, v)| b * v).sum();
        match self {
            MeanFunction::Linear => eta,
            MeanFunction::Logistic => 1.0 / (1.0 + (-eta).exp()),
        }
    }
}

/// Superpopulation model `y = m(x; beta) + u` with spatially correlated `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkingModel {
    #[serde(default)]
    pub mean_fn: MeanFunction,
    pub beta: Vec<f64>,
    pub cov: CovarianceModel,
}

impl WorkingModel {
    pub fn validate(&self) -> Result<()> {
        self.cov.validate()?;
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("beta", "coefficients must be finite"));
        }
        Ok(())
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        self.mean_fn.eval(&self.beta, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxPerson {
    pub loc: [f64; 2],
    pub x: Vec<f64>,
}

/// Person-level locations and auxiliaries, grouped by cluster.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AuxFrame {
    pub clusters: Vec<Vec<AuxPerson>>,
}

impl AuxFrame {
    /// Residents placed at their cell centroid with `x = (1, cx, cy)`.
    pub fn from_frame(frame: &FrameSnapshot) -> Self {
        let clusters = frame
            .clusters
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let loc = frame.spec.centroid(i);
                vec![
                    AuxPerson {
                        loc,
                        x: vec![1.0, loc[0], loc[1]],
                    };
                    c.size()
                ]
            })
            .collect();
        AuxFrame { clusters }
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    pub fn validate_for(&self, model: &WorkingModel) -> Result<()> {
        for (i, c) in self.clusters.iter().enumerate() {
            for (j, p) in c.iter().enumerate() {
                if p.x.len() != model.beta.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "person {j} of cluster {i} has {} auxiliaries, model has {} coefficients",
                        p.x.len(),
                        model.beta.len()
                    )));
                }
                if p.loc.iter().chain(&p.x).any(|v| !v.is_finite()) {
                    return Err(Error::MissingValue(format!("person {j} of cluster {i}")));
                }
            }
        }
        Ok(())
    }

    /// Distinct locations of each cluster with their multiplicities, in a
    /// deterministic order.
    pub(crate) fn location_groups(&self) -> Vec<Vec<([f64; 2], f64)>> {
        self.clusters
            .iter()
            .map(|c| {
                let mut locs: Vec<[f64; 2]> = c.iter().map(|p| p.loc).collect();
                locs.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
                let mut groups: Vec<([f64; 2], f64)> = Vec::new();
                for l in locs {
                    match groups.last_mut() {
                        Some((g, n)) if *g == l => *n += 1.0,
                        _ => groups.push((l, 1.0)),
                    }
                }
                groups
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_functions() {
        assert_eq!(MeanFunction::Linear.eval(&[1.0, 2.0], &[3.0, 0.5]), 4.0);
        assert_eq!(MeanFunction::Logistic.eval(&[0.0], &[1.0]), 0.5);
    }

    #[test]
    fn groups_collapse_identical_locations() {
        let p = |x: f64| AuxPerson { loc: [x, 0.0], x: vec![1.0] };
        let aux = AuxFrame {
            clusters: vec![vec![p(1.0), p(0.0), p(1.0)], vec![]],
        };
        let g = aux.location_groups();
        assert_eq!(g[0], vec![([0.0, 0.0], 1.0), ([1.0, 0.0], 2.0)]);
        assert!(g[1].is_empty());
    }
}
