use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    /// `rho_base^d`.
    Power,
    /// `exp(-3 (d / alpha)^2) + tau2`.
    Gaussian,
}

/// Spatial correlation of the working-model residuals, with variance
/// `sigma_u2`. Distances are in the same unit as cell centroids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceModel {
    pub kind: CovarianceKind,
    pub sigma_u2: f64,
    #[serde(default)]
    pub rho_base: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub tau2: f64,
}

fn default_alpha() -> f64 {
    1.0
}

impl CovarianceModel {
    pub fn power(sigma_u2: f64, rho_base: f64) -> Self {
        CovarianceModel {
            kind: CovarianceKind::Power,
            sigma_u2,
            rho_base,
            alpha: 1.0,
            tau2: 0.0,
        }
    }

    pub fn gaussian(sigma_u2: f64, alpha: f64, tau2: f64) -> Self {
        CovarianceModel {
            kind: CovarianceKind::Gaussian,
            sigma_u2,
            rho_base: 0.0,
            alpha,
            tau2,
        }
    }

    /// Decay rate `1 / alpha` of the Gaussian kind.
    pub fn phi_decay(&self) -> f64 {
        1.0 / self.alpha
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_u2 >= 0.0 && self.sigma_u2.is_finite()) {
            return Err(Error::invalid("sigma_u2", format!("must be finite and >= 0, got {}", self.sigma_u2)));
        }
        match self.kind {
            CovarianceKind::Power => {
                // negative bases are not defined at fractional distances
                if !(0.0..=1.0).contains(&self.rho_base) {
                    return Err(Error::invalid("rho_base", format!("must lie in [0, 1], got {}", self.rho_base)));
                }
            }
            CovarianceKind::Gaussian => {
                if !(self.alpha > 0.0 && self.alpha.is_finite()) {
                    return Err(Error::invalid("alpha", format!("must be > 0, got {}", self.alpha)));
                }
                if !(self.tau2 >= 0.0 && self.tau2.is_finite()) {
                    return Err(Error::invalid("tau2", format!("must be >= 0, got {}", self.tau2)));
                }
            }
        }
        Ok(())
    }

    /// Correlation at distance `d`, without the `sigma_u2` factor.
    pub fn correlation(&self, d: f64) -> f64 {
        covariance_at(self, d)
    }
}

/// Correlation function value at distance `d >= 0`.
pub fn covariance_at(model: &CovarianceModel, d: f64) -> f64 {
    debug_assert!(d >= 0.0);
    match model.kind {
        CovarianceKind::Power => model.rho_base.powf(d),
        CovarianceKind::Gaussian => {
            let r = d / model.alpha;
            (-3.0 * r * r).exp() + model.tau2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_at_range() {
        let m = CovarianceModel::gaussian(1.0, 2.5, 0.0);
        let r = covariance_at(&m, 2.5);
        assert!((r - (-3.0f64).exp()).abs() < 1e-15);
        assert!(r < 0.05);
        assert_eq!(m.phi_decay(), 0.4);
    }

    #[test]
    fn limits() {
        assert_eq!(covariance_at(&CovarianceModel::power(1.0, 0.6), 0.0), 1.0);
        assert_eq!(covariance_at(&CovarianceModel::power(1.0, 0.0), 0.0), 1.0);
        assert_eq!(covariance_at(&CovarianceModel::power(1.0, 0.0), 1.0), 0.0);
        let g = CovarianceModel::gaussian(1.0, 1.0, 0.1);
        assert!((covariance_at(&g, 1e3) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn strictly_decreasing() {
        for m in [CovarianceModel::power(1.0, 0.7), CovarianceModel::gaussian(1.0, 3.0, 0.05)] {
            let mut prev = covariance_at(&m, 0.0);
            for k in 1..60 {
                let c = covariance_at(&m, k as f64 * 0.1);
                assert!(c < prev);
                prev = c;
            }
        }
    }

    #[test]
    fn validation() {
        assert!(CovarianceModel::power(1.0, -0.2).validate().is_err());
        assert!(CovarianceModel::gaussian(1.0, 0.0, 0.0).validate().is_err());
        assert!(CovarianceModel::gaussian(-1.0, 1.0, 0.0).validate().is_err());
        assert!(CovarianceModel::gaussian(0.0, 1.0, 0.0).validate().is_ok());
    }
}
