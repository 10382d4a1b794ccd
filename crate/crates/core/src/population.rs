//! Spatially autocorrelated resident populations on a regular lattice, plus
//! contiguity weights and Moran's I.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::rng_from_seed;

/// Regular lattice of square cells. Row 0 is the top row of the map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    #[serde(default = "default_cell_side")]
    pub cell_side: f64,
}

fn default_cell_side() -> f64 {
    1.0
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, cell_side: f64) -> Result<Self> {
        let spec = GridSpec {
            rows,
            cols,
            cell_side,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::invalid("grid", "rows and cols must both be >= 2"));
        }
        if !(self.cell_side > 0.0 && self.cell_side.is_finite()) {
            return Err(Error::invalid("cell_side", "must be a positive finite real"));
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.rows && col < self.cols);
        row * self.cols + col
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    pub fn centroid(&self, index: usize) -> [f64; 2] {
        let (r, c) = self.row_col(index);
        [
            (c as f64 + 0.5) * self.cell_side,
            (r as f64 + 0.5) * self.cell_side,
        ]
    }

    pub fn centroids(&self) -> Vec<[f64; 2]> {
        (0..self.num_cells()).map(|i| self.centroid(i)).collect()
    }

    /// The four cells around the map centre (one cell on odd axes).
    pub fn central_cells(&self) -> Vec<usize> {
        let rows = if self.rows % 2 == 0 {
            vec![self.rows / 2 - 1, self.rows / 2]
        } else {
            vec![self.rows / 2]
        };
        let cols = if self.cols % 2 == 0 {
            vec![self.cols / 2 - 1, self.cols / 2]
        } else {
            vec![self.cols / 2]
        };
        let mut out = Vec::with_capacity(4);
        for &r in &rows {
            for &c in &cols {
                out.push(self.index(r, c));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationGrid {
    pub spec: GridSpec,
    pub counts: Vec<u32>,
    pub total: u64,
    pub rho_target: f64,
}

impl PopulationGrid {
    pub fn from_counts(spec: GridSpec, counts: Vec<u32>, rho_target: f64) -> Result<Self> {
        if counts.len() != spec.num_cells() {
            return Err(Error::DimensionMismatch(format!(
                "{} counts for {} cells",
                counts.len(),
                spec.num_cells()
            )));
        }
        let total = counts.iter().map(|&c| c as u64).sum();
        Ok(PopulationGrid {
            spec,
            counts,
            total,
            rho_target,
        })
    }

    pub fn count_at(&self, row: usize, col: usize) -> u32 {
        self.counts[self.spec.index(row, col)]
    }

    /// Writes `row,col,count` in row-major order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["row", "col", "count"])?;
        for (i, &c) in self.counts.iter().enumerate() {
            let (r, col) = self.spec.row_col(i);
            w.write_record([r.to_string(), col.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(spec: GridSpec, rho_target: f64, input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let mut counts = vec![None; spec.num_cells()];
        for rec in rd.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<usize> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Csv(format!("bad grid record {:?}", rec)))
            };
            let (r, c, n) = (parse(0)?, parse(1)?, parse(2)?);
            if r >= spec.rows || c >= spec.cols {
                return Err(Error::Csv(format!("cell ({r},{c}) outside grid")));
            }
            counts[spec.index(r, c)] = Some(n as u32);
        }
        let counts = counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| Error::MissingValue(format!("grid cell {i}"))))
            .collect::<Result<Vec<_>>>()?;
        PopulationGrid::from_counts(spec, counts, rho_target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contiguity {
    Rook,
    Queen,
}

/// Sparse contiguity weights; `neighbors[i]` lists `(j, w_ij)` with `j != i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialWeights {
    pub scheme: Contiguity,
    pub row_standardized: bool,
    pub neighbors: Vec<Vec<(usize, f64)>>,
}

impl SpatialWeights {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn s0(&self) -> f64 {
        self.neighbors.iter().flatten().map(|&(_, w)| w).sum()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.neighbors[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.neighbors.iter().enumerate() {
            for &(j, w) in row {
                m[(i, j)] = w;
            }
        }
        m
    }
}

pub fn build_weight_matrix(spec: &GridSpec, scheme: Contiguity, row_standardized: bool) -> SpatialWeights {
    let offsets: &[(isize, isize)] = match scheme {
        Contiguity::Rook => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
        Contiguity::Queen => &[
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ],
    };
    let mut neighbors = Vec::with_capacity(spec.num_cells());
    for i in 0..spec.num_cells() {
        let (r, c) = spec.row_col(i);
        let mut row: Vec<(usize, f64)> = offsets
            .iter()
            .filter_map(|&(dr, dc)| {
                let nr = r as isize + dr;
                let nc = c as isize + dc;
                (nr >= 0 && nc >= 0 && (nr as usize) < spec.rows && (nc as usize) < spec.cols)
                    .then(|| (spec.index(nr as usize, nc as usize), 1.0))
            })
            .collect();
        if row_standardized && !row.is_empty() {
            let w = 1.0 / row.len() as f64;
            row.iter_mut().for_each(|e| e.1 = w);
        }
        neighbors.push(row);
    }
    SpatialWeights {
        scheme,
        row_standardized,
        neighbors,
    }
}

/// Global Moran's I: `(M / S0) * sum_ij w_ij z_i z_j / sum_i z_i^2`.
pub fn morans_i(values: &[f64], weights: &SpatialWeights) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} weight rows",
            values.len(),
            weights.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let dev: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if denom <= 1e-24 * scale * scale * n {
        return Err(Error::ConstantField);
    }
    let s0 = weights.s0();
    if s0 == 0.0 {
        return Err(Error::invalid("weights", "all weights are zero"));
    }
    let num: f64 = weights
        .neighbors
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().map(|&(j, w)| w * dev[i] * dev[j]).sum::<f64>())
        .sum();
    Ok(n / s0 * num / denom)
}

/// Simulates `z = (I - rho W)^-1 eps` with row-standardised rook weights.
pub fn sar_field<R: Rng + ?Sized>(spec: &GridSpec, rho: f64, rng: &mut R) -> Result<Vec<f64>> {
    let m = spec.num_cells();
    let w = build_weight_matrix(spec, Contiguity::Rook, true).to_dense();
    let a = DMatrix::<f64>::identity(m, m) - w * rho;
    let eps = DVector::<f64>::from_iterator(m, (0..m).map(|_| StandardNormal.sample(rng)));
    let z = a.lu().solve(&eps).ok_or(Error::SingularSystem)?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(z.iter().copied().collect())
}

/// Multinomial allocation of `total` residents with cell probabilities
/// proportional to `exp(z)` of a SAR latent field.
pub fn generate_population(spec: GridSpec, rho: f64, total: u64, rng_seed: u64) -> Result<PopulationGrid> {
    spec.validate()?;
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid("rho", format!("{rho} not in [0, 1)")));
    }
    if total == 0 {
        return Err(Error::invalid("total", "must be >= 1"));
    }
    let mut rng = rng_from_seed(rng_seed);
    let z = sar_field(&spec, rho, &mut rng)?;
    let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
    let counts = multinomial(total, &weights, &mut rng);
    PopulationGrid::from_counts(spec, counts, rho)
}

fn multinomial<R: Rng + ?Sized>(total: u64, weights: &[f64], rng: &mut R) -> Vec<u32> {
    let mut remaining_mass: f64 = weights.iter().sum();
    let mut remaining = total;
    let mut out = vec![0u32; weights.len()];
    for (i, &w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == weights.len() {
            out[i] = remaining as u32;
            break;
        }
        let p = (w / remaining_mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, p).map(|b| b.sample(rng)).unwrap_or(0);
        out[i] = k as u32;
        remaining -= k;
        remaining_mass -= w;
    }
    out
}
