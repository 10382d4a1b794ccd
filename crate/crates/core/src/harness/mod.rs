//! Monte Carlo evaluation of the designs on simulated frames.

mod entropy;
mod screening;
mod simulate;
mod tables;
mod trajectory;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::ht_estimate;
use crate::frame::FrameSnapshot;
use crate::sampling::{draw_sample, make_design, DesignKind, DesignOptions};
use crate::seeds::{derive_seed, rng_from_seed};

pub use entropy::{empirical_entropy, entropy_of_keys, sample_key};
pub use screening::{apply_screening, quadrant_of, QuadrantRule, ScreeningScenario};
pub use simulate::{
    epidemic_label, population_label, simulate_all, synthesize, FrameSet, SimulatedRun, SimulationConfig,
};
pub use tables::{
    relative_entropy_table, summarize_tables, write_entropy_csv, write_scenario_csv, write_se_pivot_csv, write_summary_csv,
    EntropyRow,
    TableRow,
};
pub use trajectory::{moran_trajectory, moving_average, TrajectoryCheck};

/// Fewest replicates for which standard errors are reported as reliable.
pub const MIN_SE_REPLICATES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rho_levels: Vec<f64>,
    pub survey_days: Vec<usize>,
    pub designs: Vec<DesignKind>,
    pub m_levels: Vec<usize>,
    pub n_bar_levels: Vec<usize>,
    pub replicates: usize,
    /// Not read from config files; callers set it from their run settings.
    #[serde(skip)]
    pub master_seed: u64,
    pub design_options: DesignOptions,
    /// Keep the empirical joint-inclusion matrix of every cell.
    pub record_joint: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            rho_levels: vec![0.3, 0.5, 0.7],
            survey_days: vec![15, 29, 43],
            designs: DesignKind::ALL.to_vec(),
            m_levels: vec![20, 40, 80, 160],
            n_bar_levels: vec![1, 3, 5, 7],
            replicates: 10_000,
            master_seed: 20_200_315,
            design_options: DesignOptions::default(),
            record_joint: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("rho_levels", self.rho_levels.is_empty()),
            ("survey_days", self.survey_days.is_empty()),
            ("designs", self.designs.is_empty()),
            ("m_levels", self.m_levels.is_empty()),
            ("n_bar_levels", self.n_bar_levels.is_empty()),
        ] {
            if empty {
                return Err(Error::invalid(name, "must list at least one value"));
            }
        }
        if self.m_levels.contains(&0) {
            return Err(Error::invalid("m_levels", "sizes must be >= 1"));
        }
        if self.n_bar_levels.contains(&0) {
            return Err(Error::invalid("n_bar_levels", "sizes must be >= 1"));
        }
        if self.replicates < 2 {
            return Err(Error::invalid(
                "replicates",
                format!("relative SE is undefined with {} replicate(s)", self.replicates),
            ));
        }
        Ok(())
    }
}

/// Seed label of replicate `r` in one experiment cell.
pub fn replicate_label(design: DesignKind, day: usize, rho: f64, m: usize, n_bar: usize, r: usize) -> String {
    format!("draw/{design}/day={day}/rho={rho}/m={m}/n_bar={n_bar}/r={r}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub design: DesignKind,
    pub day: usize,
    pub rho: f64,
    pub m: usize,
    pub n_bar: usize,
    pub replicates: usize,
    pub true_value: f64,
    pub mean_estimate: f64,
    pub rab: f64,
    pub rel_se: f64,
    /// False when fewer than [`MIN_SE_REPLICATES`] replicates were run.
    pub se_reliable: bool,
    pub entropy: f64,
    pub inclusion: Vec<f64>,
    pub joint: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MCReport {
    pub cells: Vec<CellResult>,
}

impl MCReport {
    pub fn find(&self, design: DesignKind, day: usize, rho: f64, m: usize, n_bar: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.design == design && c.day == day && c.rho == rho && c.m == m && c.n_bar == n_bar)
    }
}

const CHUNK: usize = 128;

struct Partial {
    estimates: Vec<f64>,
    keys: Vec<u64>,
    incl: Vec<u64>,
    joint: Vec<u64>,
}

/// Runs every `(rho, day, design, m, n_bar)` cell of the config grid.
/// Each replicate is seeded from its own label, and partial results are
/// combined in replicate order, so the report does not depend on the
/// number of threads.
pub fn run_experiment(config: &ExperimentConfig, frame_sets: &[FrameSet]) -> Result<MCReport> {
    config.validate()?;
    if config.replicates < MIN_SE_REPLICATES {
        log::warn!(
            "{} replicates is below {MIN_SE_REPLICATES}; standard errors are flagged unreliable",
            config.replicates
        );
    }
    let mut cells = Vec::new();
    for &rho in &config.rho_levels {
        let set = frame_sets
            .iter()
            .find(|s| s.rho == rho)
            .ok_or_else(|| Error::MissingValue(format!("frames for rho={rho}")))?;
        for &day in &config.survey_days {
            let frame = crate::epidemic::snapshot_frame(&set.frames, day)?;
            for &design in &config.designs {
                for &m in &config.m_levels {
                    for &n_bar in &config.n_bar_levels {
                        cells.push(run_cell(config, frame, design, rho, m, n_bar)?);
                    }
                }
            }
        }
    }
    Ok(MCReport { cells })
}

/// One experiment cell on a given frame.
pub fn run_cell(
    config: &ExperimentConfig,
    frame: &FrameSnapshot,
    design: DesignKind,
    rho: f64,
    m: usize,
    n_bar: usize,
) -> Result<CellResult> {
    let plan = make_design(design, frame, m, &config.design_options)?;
    let size = plan.num_clusters();
    let reps = config.replicates;
    let day = frame.day;
    let record_joint = config.record_joint;
    let partials: Vec<Partial> = (0..reps.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| -> Result<Partial> {
            let range = c * CHUNK..((c + 1) * CHUNK).min(reps);
            let mut p = Partial {
                estimates: Vec::with_capacity(range.len()),
                keys: Vec::with_capacity(range.len()),
                incl: vec![0; size],
                joint: if record_joint { vec![0; size * size] } else { Vec::new() },
            };
            for r in range {
                let seed = derive_seed(config.master_seed, &replicate_label(design, day, rho, m, n_bar, r));
                let mut rng = rng_from_seed(seed);
                let draw = draw_sample(&plan, frame, n_bar, &mut rng)?;
                p.estimates.push(ht_estimate(&draw, frame)?);
                p.keys.push(sample_key(&draw.first_stage));
                for (a, &i) in draw.first_stage.iter().enumerate() {
                    p.incl[i] += 1;
                    if record_joint {
                        for &l in &draw.first_stage[a..] {
                            p.joint[i * size + l] += 1;
                        }
                    }
                }
            }
            Ok(p)
        })
        .collect::<Result<_>>()?;

    let mut estimates = Vec::with_capacity(reps);
    let mut keys = Vec::with_capacity(reps);
    let mut incl = vec![0u64; size];
    let mut joint = if record_joint { vec![0u64; size * size] } else { Vec::new() };
    for p in partials {
        estimates.extend(p.estimates);
        keys.extend(p.keys);
        incl.iter_mut().zip(&p.incl).for_each(|(a, b)| *a += b);
        joint.iter_mut().zip(&p.joint).for_each(|(a, b)| *a += b);
    }
    let truth = frame.total_infected() as f64;
    let n = reps as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let mse = estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / n;
    let joint = record_joint.then(|| {
        DMatrix::from_fn(size, size, |i, l| {
            let (a, b) = if i <= l { (i, l) } else { (l, i) };
            joint[a * size + b] as f64 / n
        })
    });
    Ok(CellResult {
        design,
        day,
        rho,
        m,
        n_bar,
        replicates: reps,
        true_value: truth,
        mean_estimate: mean,
        rab: (mean - truth).abs() / truth,
        rel_se: mse.sqrt() / truth,
        se_reliable: reps >= MIN_SE_REPLICATES,
        entropy: entropy_of_keys(&keys),
        inclusion: incl.iter().map(|&c| c as f64 / n).collect(),
        joint,
    })
}
