//! Anticipated variance `E_P E_M (Y_hat - Y)^2` of the two-stage HT
//! estimator under the working model.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{AuxFrame, WorkingModel};
use crate::error::{Error, Result};
use crate::sampling::InclusionPlan;

/// Which large-population approximations to apply.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvOptions {
    /// Keep the `M / (M - H)` factor on the first-stage residual term and
    /// the `N_i (n - 1) / (n (N_i - 1))` factor on within-cluster
    /// correlation instead of setting both to one.
    pub exact_factors: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AvComponents {
    pub eta2: f64,
    pub srswor_term: f64,
    pub unit_var_term: f64,
    pub within_corr_term: f64,
    pub between_corr_term: f64,
}

impl AvComponents {
    pub fn total(&self) -> f64 {
        self.eta2 + self.srswor_term + self.unit_var_term + self.within_corr_term + self.between_corr_term
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AVReport {
    pub av_total: f64,
    /// Per-cluster `sigma_i^2`.
    pub sigma2: Vec<f64>,
    /// Per-cluster pieces of `sigma_i^2`, not yet divided by `pi_i`.
    pub cluster_components: Vec<AvComponents>,
    /// Model variance of the population total.
    pub f: f64,
    /// Sums over clusters of each piece divided by `pi_i`.
    pub components: AvComponents,
}

impl AVReport {
    /// One summary row with the component breakdown.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record([
            "av_total",
            "F",
            "eta2",
            "srswor_term",
            "unit_var_term",
            "within_corr_term",
            "between_corr_term",
        ])?;
        let c = &self.components;
        w.write_record(
            [self.av_total, self.f, c.eta2, c.srswor_term, c.unit_var_term, c.within_corr_term, c.between_corr_term]
                .map(|v| v.to_string()),
        )?;
        w.flush()?;
        Ok(())
    }

    /// Per-cluster rows of `sigma_i^2` and its pieces.
    pub fn write_cluster_csv<W: Write>(&self, pi: &[f64], out: W) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record([
            "cluster",
            "pi_I",
            "eta2",
            "srswor_term",
            "unit_var_term",
            "within_corr_term",
            "between_corr_term",
            "sigma2",
        ])?;
        for (i, (c, s)) in self.cluster_components.iter().zip(&self.sigma2).enumerate() {
            w.write_record([
                i.to_string(),
                pi[i].to_string(),
                c.eta2.to_string(),
                c.srswor_term.to_string(),
                c.unit_var_term.to_string(),
                c.within_corr_term.to_string(),
                c.between_corr_term.to_string(),
                s.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Balanced-sampling residuals of the cluster model totals.
///
/// The balancing vector entering the moment matrix is the plan's adjusted
/// row `d_i / pi_i`, so totals that are exactly linear in the balancing
/// variables leave zero residuals.
pub fn dt_residuals(plan: &InclusionPlan, y_tilde: &[f64]) -> Result<(Vec<f64>, DVector<f64>)> {
    let m = plan.num_clusters();
    if y_tilde.len() != m {
        return Err(Error::DimensionMismatch(format!("{} cluster totals for {m} clusters", y_tilde.len())));
    }
    let h = plan.num_balance();
    if h == 0 {
        return Ok((y_tilde.to_vec(), DVector::zeros(0)));
    }
    let mut delta = DMatrix::<f64>::zeros(h, h);
    let mut rhs = DVector::<f64>::zeros(h);
    for i in 0..m {
        let p = plan.pi[i];
        if p <= 0.0 || p >= 1.0 {
            continue;
        }
        let d = DVector::from_column_slice(plan.adjusted(i));
        delta += &d * d.transpose() * (p * (1.0 - p));
        rhs += d * ((1.0 - p) * y_tilde[i]);
    }
    let phi = delta.lu().solve(&rhs).ok_or(Error::SingularMoments)?;
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMoments);
    }
    let eta = (0..m)
        .map(|i| {
            if plan.pi[i] <= 0.0 {
                return y_tilde[i];
            }
            let fit: f64 = plan.adjusted(i).iter().zip(phi.iter()).map(|(a, b)| a * b).sum();
            y_tilde[i] - plan.pi[i] * fit
        })
        .collect();
    Ok((eta, phi))
}

/// Pure correlation sums: `rho_ii = sum_{j != k} rho(d)` inside each
/// cluster and `rho_il = sum_j sum_k rho(d)` between clusters.
pub fn correlation_sums(aux: &AuxFrame, model: &WorkingModel) -> (Vec<f64>, DMatrix<f64>) {
    let groups = aux.location_groups();
    let m = groups.len();
    let rho0 = model.cov.correlation(0.0);
    let mut between = DMatrix::<f64>::zeros(m, m);
    let mut within = vec![0.0; m];
    for i in 0..m {
        for l in i..m {
            let mut s = 0.0;
            for (a, na) in &groups[i] {
                for (b, nb) in &groups[l] {
                    let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                    s += na * nb * model.cov.correlation(d);
                }
            }
            if i == l {
                within[i] = s - aux.clusters[i].len() as f64 * rho0;
            } else {
                between[(i, l)] = s;
                between[(l, i)] = s;
            }
        }
    }
    (within, between)
}

/// Anticipated variance of the HT total under the working model, for the
/// plan's first stage with joint probabilities `joint_pi` and SRSWOR of
/// `n_bar` residents per selected cluster.
pub fn anticipated_variance(
    aux: &AuxFrame,
    plan: &InclusionPlan,
    joint_pi: &DMatrix<f64>,
    model: &WorkingModel,
    n_bar: usize,
    opts: AvOptions,
) -> Result<AVReport> {
    model.validate()?;
    aux.validate_for(model)?;
    let m = plan.num_clusters();
    if aux.num_clusters() != m || joint_pi.nrows() != m || joint_pi.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} frame clusters, {m} plan clusters, {}x{} joint probabilities",
            aux.num_clusters(),
            joint_pi.nrows(),
            joint_pi.ncols()
        )));
    }
    if n_bar == 0 {
        return Err(Error::invalid("n_bar", "second-stage size must be >= 1"));
    }
    for i in 0..m {
        if (joint_pi[(i, i)] - plan.pi[i]).abs() > 1e-9 {
            return Err(Error::invalid("joint_pi", format!("diagonal {i} differs from pi")));
        }
        for l in 0..i {
            if (joint_pi[(i, l)] - joint_pi[(l, i)]).abs() > 1e-12 {
                return Err(Error::invalid("joint_pi", format!("not symmetric at ({i}, {l})")));
            }
        }
    }

    let sizes = aux.sizes();
    for (i, (&n, &p)) in sizes.iter().zip(&plan.pi).enumerate() {
        if n > 0 && p <= 0.0 {
            return Err(Error::invalid("pi", format!("nonempty cluster {i} has zero probability")));
        }
    }
    let mut y_tilde = vec![0.0; m];
    let mut s2 = vec![0.0; m];
    for (i, c) in aux.clusters.iter().enumerate() {
        let vals: Vec<f64> = c.iter().map(|p| model.mean(&p.x)).collect();
        let total: f64 = vals.iter().sum();
        y_tilde[i] = total;
        if vals.len() > 1 {
            let mean = total / vals.len() as f64;
            s2[i] = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        }
    }
    let (eta, _) = dt_residuals(plan, &y_tilde)?;
    let (rho_within, rho_between) = correlation_sums(aux, model);
    let sigma_u2 = model.cov.sigma_u2;

    let eta_factor = if opts.exact_factors {
        let active = plan.pi.iter().filter(|&&p| p > 0.0).count() as f64;
        let h = plan.num_balance() as f64;
        if active > h {
            active / (active - h)
        } else {
            1.0
        }
    } else {
        1.0
    };

    let mut sigma2 = vec![0.0; m];
    let mut cluster_components = vec![AvComponents::default(); m];
    let mut components = AvComponents::default();
    let mut f = 0.0;
    for i in 0..m {
        let size = sizes[i] as f64;
        let eta2 = eta_factor * eta[i] * eta[i];
        if sizes[i] == 0 {
            f += eta2;
            continue;
        }
        let n = n_bar.min(sizes[i]) as f64;
        let within_factor = if opts.exact_factors && sizes[i] > 1 {
            size * (n - 1.0) / (n * (size - 1.0))
        } else {
            1.0
        };
        let mut weighted_between = 0.0;
        let mut all_between = 0.0;
        for l in 0..m {
            if l == i || sizes[l] == 0 {
                continue;
            }
            let r = rho_between[(i, l)];
            weighted_between += joint_pi[(i, l)] / plan.pi[l] * r;
            all_between += r;
        }
        let c = AvComponents {
            eta2,
            srswor_term: s2[i] * size * (size - n) / n,
            unit_var_term: size * size * sigma_u2 / n,
            within_corr_term: within_factor * sigma_u2 * rho_within[i],
            between_corr_term: sigma_u2 * weighted_between,
        };
        sigma2[i] = c.total();
        let p = plan.pi[i];
        components.eta2 += c.eta2 / p;
        components.srswor_term += c.srswor_term / p;
        components.unit_var_term += c.unit_var_term / p;
        components.within_corr_term += c.within_corr_term / p;
        components.between_corr_term += c.between_corr_term / p;
        cluster_components[i] = c;
        // model variance of the total: each resident contributes sigma_u2
        f += eta2 + size * sigma_u2 + sigma_u2 * rho_within[i] + sigma_u2 * all_between;
    }
    let av_total = components.total() - f;
    Ok(AVReport {
        av_total,
        sigma2,
        cluster_components,
        f,
        components,
    })
}

/// Joint probabilities of a Poisson-like design: `pi_i pi_l` off the
/// diagonal, `pi_i` on it.
pub fn independent_joint(pi: &[f64]) -> DMatrix<f64> {
    let m = pi.len();
    DMatrix::from_fn(m, m, |i, l| if i == l { pi[i] } else { pi[i] * pi[l] })
}
