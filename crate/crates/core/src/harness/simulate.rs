use serde::{Deserialize, Serialize};

use crate::epidemic::{run_epidemic, DiseaseParams, EpidemicRun, PhaseParams};
use crate::error::{Error, Result};
use crate::frame::FrameSnapshot;
use crate::population::{generate_population, GridSpec, PopulationGrid};
use crate::seeds::derive_seed;

/// Population and epidemic settings shared by every rho level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub grid: GridSpec,
    pub total_population: u64,
    pub rho_levels: Vec<f64>,
    pub seed_cases: u64,
    pub phases: Vec<PhaseParams>,
    pub disease: DiseaseParams,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            grid: GridSpec {
                rows: 20,
                cols: 20,
                cell_side: 1.0,
            },
            total_population: 20_000,
            rho_levels: vec![0.3, 0.5, 0.7],
            seed_cases: 12,
            phases: PhaseParams::default_schedule(),
            disease: DiseaseParams::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.total_population == 0 {
            return Err(Error::invalid("total_population", "must be >= 1"));
        }
        if self.rho_levels.is_empty() {
            return Err(Error::invalid("rho_levels", "at least one level is required"));
        }
        if self.seed_cases == 0 || self.seed_cases > self.total_population {
            return Err(Error::invalid(
                "seed_cases",
                format!("must lie in 1..={}, got {}", self.total_population, self.seed_cases),
            ));
        }
        if self.phases.is_empty() {
            return Err(Error::invalid("phases", "at least one phase is required"));
        }
        for p in &self.phases {
            p.validate()?;
        }
        self.disease.validate()
    }

    pub fn horizon(&self) -> usize {
        self.phases.iter().map(|p| p.duration_days).sum()
    }
}

pub fn population_label(rho: f64) -> String {
    format!("population/rho={rho}")
}

pub fn epidemic_label(rho: f64) -> String {
    format!("epidemic/rho={rho}")
}

/// Population grid for one rho level, seeded from the master seed.
pub fn synthesize(config: &SimulationConfig, rho: f64, master_seed: u64) -> Result<PopulationGrid> {
    generate_population(
        config.grid,
        rho,
        config.total_population,
        derive_seed(master_seed, &population_label(rho)),
    )
}

#[derive(Debug, Clone)]
pub struct SimulatedRun {
    pub rho: f64,
    pub grid: PopulationGrid,
    pub run: EpidemicRun,
}

/// Daily frames for one rho level.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub rho: f64,
    pub frames: Vec<FrameSnapshot>,
}

/// Synthesizes every population and runs the epidemic on each.
pub fn simulate_all(config: &SimulationConfig, master_seed: u64) -> Result<Vec<SimulatedRun>> {
    config.validate()?;
    config
        .rho_levels
        .iter()
        .map(|&rho| {
            let grid = synthesize(config, rho, master_seed)?;
            let run = run_epidemic(
                &grid,
                &config.phases,
                &config.disease,
                config.seed_cases,
                derive_seed(master_seed, &epidemic_label(rho)),
            )?;
            Ok(SimulatedRun { rho, grid, run })
        })
        .collect()
}

impl From<&SimulatedRun> for FrameSet {
    fn from(r: &SimulatedRun) -> Self {
        FrameSet {
            rho: r.rho,
            frames: r.run.snapshots.clone(),
        }
    }
}
