//! First-stage designs and the second-stage simple random sample.

mod cube;
mod design;
mod local_cube;
mod neighbors;
mod pivotal;
mod pps;
mod srs;

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameSnapshot;

pub use cube::{cube_flight, cube_landing, cube_sample, DECIDED_EPS};
pub use design::{
    draw_first_stage, draw_sample, make_design, make_design_from_parts, DesignKind, DesignOptions, DesignSpec,
};
pub use local_cube::local_cube;
pub use neighbors::NeighborIndex;
pub use pivotal::local_pivotal;
pub use pps::{pps_probabilities, truncated_clusters};
pub use srs::second_stage_srswor;

/// A named balancing variable `d_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceColumn {
    pub label: String,
    pub values: Vec<f64>,
}

impl BalanceColumn {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        BalanceColumn {
            label: label.into(),
            values,
        }
    }
}

/// Pair-selection rule of the local pivotal method.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpmVariant {
    /// A random undecided unit competes with its nearest undecided neighbour.
    #[default]
    Nearest,
    /// Only mutually nearest undecided pairs compete.
    MutualNearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMethod {
    Cube,
    LocalPivotal(LpmVariant),
    LocalCube,
}

/// First-stage probabilities together with the balancing matrix and, for
/// spatial methods, the neighbour structure of the cluster centroids.
#[derive(Debug, Clone)]
pub struct InclusionPlan {
    pub pi: Vec<f64>,
    pub m_expected: f64,
    /// `M x H` matrix of balancing variables, one row `d_i` per cluster.
    pub balance: DMatrix<f64>,
    pub balance_labels: Vec<String>,
    pub coords: Option<Vec<[f64; 2]>>,
    pub method: SelectionMethod,
    /// True when the first balancing column is `pi` itself.
    pub fixed_size: bool,
    adjusted: Vec<f64>,
    neighbors: Option<Arc<NeighborIndex>>,
}

impl InclusionPlan {
    /// Builds a plan, dropping balancing columns that are linearly dependent
    /// on earlier ones over the undecided clusters.
    pub fn new(
        pi: Vec<f64>,
        columns: Vec<BalanceColumn>,
        coords: Option<Vec<[f64; 2]>>,
        method: SelectionMethod,
    ) -> Result<Self> {
        let m = pi.len();
        if let Some((i, p)) = pi.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid("pi", format!("cluster {i} has probability {p}")));
        }
        for c in &columns {
            if c.values.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "balancing column {} has {} rows for {m} clusters",
                    c.label,
                    c.values.len()
                )));
            }
        }
        if let Some(xy) = &coords {
            if xy.len() != m {
                return Err(Error::DimensionMismatch(format!("{} centroids for {m} clusters", xy.len())));
            }
        }
        let needs_coords = !matches!(method, SelectionMethod::Cube);
        if needs_coords && coords.is_none() {
            return Err(Error::invalid("coords", "spatial methods need cluster centroids"));
        }

        let columns = prune_dependent(&pi, columns);
        let h = columns.len();
        if h >= m.max(1) && m > 0 {
            return Err(Error::invalid("balance", format!("{h} balancing columns for {m} clusters")));
        }
        let fixed_size = columns
            .first()
            .is_some_and(|c| c.values.iter().zip(&pi).all(|(a, b)| (a - b).abs() <= 1e-12));

        let mut adjusted = vec![0.0; m * h];
        for i in 0..m {
            if pi[i] > 0.0 {
                for (j, c) in columns.iter().enumerate() {
                    adjusted[i * h + j] = c.values[i] / pi[i];
                }
            }
        }
        let balance = DMatrix::from_fn(m, h, |i, j| columns[j].values[i]);
        let neighbors = match (&coords, needs_coords) {
            (Some(xy), true) => Some(Arc::new(NeighborIndex::new(xy))),
            _ => None,
        };
        Ok(InclusionPlan {
            m_expected: pi.iter().sum(),
            pi,
            balance,
            balance_labels: columns.into_iter().map(|c| c.label).collect(),
            coords,
            method,
            fixed_size,
            adjusted,
            neighbors,
        })
    }

    pub fn num_clusters(&self) -> usize {
        self.pi.len()
    }

    /// Number of retained balancing columns `H`.
    pub fn num_balance(&self) -> usize {
        self.balance_labels.len()
    }

    /// Row `d_i / pi_i` of the adjusted balancing matrix.
    pub(crate) fn adjusted(&self, i: usize) -> &[f64] {
        let h = self.num_balance();
        &self.adjusted[i * h..(i + 1) * h]
    }

    pub(crate) fn neighbors(&self) -> &NeighborIndex {
        self.neighbors.as_deref().expect("spatial plan carries a neighbour index")
    }
}

/// Gram-Schmidt over the adjusted columns restricted to undecided clusters.
fn prune_dependent(pi: &[f64], columns: Vec<BalanceColumn>) -> Vec<BalanceColumn> {
    let active: Vec<usize> = (0..pi.len())
        .filter(|&i| pi[i] > DECIDED_EPS && pi[i] < 1.0 - DECIDED_EPS)
        .collect();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    for c in columns {
        let mut v: Vec<f64> = active.iter().map(|&i| c.values[i] / pi[i]).collect();
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= 1e-9 * norm0 {
            log::warn!("dropping balancing column {:?}: linearly dependent on earlier columns", c.label);
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
        kept.push(c);
    }
    kept
}

/// A two-stage sample. `second_stage[k]` holds positions within cluster
/// `first_stage[k]`; weights are parallel to `first_stage`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDraw {
    pub first_stage: Vec<usize>,
    pub second_stage: Vec<Vec<usize>>,
    pub w_i: Vec<f64>,
    pub w_ii: Vec<f64>,
}

impl SampleDraw {
    pub fn len(&self) -> usize {
        self.first_stage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_stage.is_empty()
    }
}

/// Appends draw records `replicate,design,cluster,person,w_I,w_II,y`.
/// Pass `header = true` for the first call on a file.
pub fn write_draw_csv<W: Write>(
    out: W,
    header: bool,
    replicate: usize,
    design: DesignKind,
    draw: &SampleDraw,
    frame: &FrameSnapshot,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    if header {
        w.write_record(["replicate", "design", "cluster", "person", "w_I", "w_II", "y"])?;
    }
    for (k, &c) in draw.first_stage.iter().enumerate() {
        let cluster = &frame.clusters[c];
        for &j in &draw.second_stage[k] {
            w.write_record([
                replicate.to_string(),
                design.as_str().to_string(),
                c.to_string(),
                cluster.persons[j].to_string(),
                draw.w_i[k].to_string(),
                draw.w_ii[k].to_string(),
                u8::from(cluster.y[j]).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
