use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use episurvey::estimation::{AuxPerson, AvOptions, WorkingModel};
use episurvey::harness::{ExperimentConfig, ScreeningScenario, SimulationConfig};
use episurvey::sampling::DesignKind;

use crate::manifest::RunManifest;

/// One experiment of record: every section of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub run: RunSettings,
    pub simulation: SimulationConfig,
    pub experiment: ExperimentConfig,
    pub screening: ScreeningSettings,
    pub tables: TableSettings,
    pub variance: Option<VarianceSettings>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub master_seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            master_seed: 20_200_315,
            threads: 0,
        }
    }
}

/// The heterogeneous-screening comparison written to `table6.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreeningSettings {
    pub enabled: bool,
    pub day: usize,
    pub rho: f64,
    pub m: usize,
    pub n_bar: usize,
    pub designs: Vec<DesignKind>,
    pub scenario: ScreeningScenario,
}

impl Default for ScreeningSettings {
    fn default() -> Self {
        ScreeningSettings {
            enabled: true,
            day: 29,
            rho: 0.3,
            m: 80,
            n_bar: 3,
            designs: vec![DesignKind::Lcbv, DesignKind::Lcbg, DesignKind::Lcbvg],
            scenario: ScreeningScenario::heterogeneous(),
        }
    }
}

/// Sample sizes shown in the per-day SE table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableSettings {
    pub m: usize,
    pub n_bar: usize,
}

impl Default for TableSettings {
    fn default() -> Self {
        TableSettings { m: 80, n_bar: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyCluster {
    pub persons: Vec<AuxPerson>,
    #[serde(default)]
    pub verified: usize,
}

/// Frame produced by `simulate`, identified by rho level and day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSource {
    pub rho: f64,
    pub day: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceSettings {
    #[serde(default = "default_design")]
    pub design: DesignKind,
    pub m: usize,
    pub n_bar: usize,
    #[serde(default)]
    pub options: AvOptions,
    /// First-stage draws used to estimate joint inclusion probabilities.
    #[serde(default = "default_joint_draws")]
    pub joint_draws: usize,
    pub model: WorkingModel,
    /// Explicit clusters; when empty, `source` names a simulated frame.
    #[serde(default)]
    pub clusters: Vec<ToyCluster>,
    #[serde(default)]
    pub source: Option<FrameSource>,
}

fn default_design() -> DesignKind {
    DesignKind::Fpps
}

fn default_joint_draws() -> usize {
    100_000
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub threads: Option<usize>,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| anyhow::anyhow!("{}", e.to_string().trim_end()))?;
        cfg.sync_seed();
        Ok(cfg)
    }

    /// Reads a TOML config, or the config embedded in a run manifest when
    /// the path ends in `.json`.
    pub fn load(path: &Path, overrides: Overrides) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let text = std::str::from_utf8(&bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            let m: RunManifest = serde_json::from_str(text)
                .with_context(|| format!("invalid manifest {}", path.display()))?;
            let mut c = m.config;
            c.sync_seed();
            c
        } else {
            Config::from_toml_str(text).with_context(|| format!("invalid config {}", path.display()))?
        };
        cfg.apply(overrides);
        cfg.validate().with_context(|| format!("invalid config {}", path.display()))?;
        Ok((cfg, bytes))
    }

    fn sync_seed(&mut self) {
        self.experiment.master_seed = self.run.master_seed;
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(s) = o.seed {
            self.run.master_seed = s;
        }
        if let Some(r) = o.replicates {
            self.experiment.replicates = r;
        }
        if let Some(t) = o.threads {
            self.run.threads = t;
        }
        self.sync_seed();
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation.validate().context("in [simulation]")?;
        self.experiment.validate().context("in [experiment]")?;
        let horizon = self.simulation.horizon();
        for &d in &self.experiment.survey_days {
            if d == 0 || d > horizon {
                bail!("experiment.survey_days: day {d} is outside 1..={horizon}");
            }
        }
        for &r in &self.experiment.rho_levels {
            if !self.simulation.rho_levels.contains(&r) {
                bail!("experiment.rho_levels: {r} is not among simulation.rho_levels");
            }
        }
        if self.screening.enabled {
            let s = &self.screening;
            s.scenario.validate().context("in [screening.scenario]")?;
            if !self.simulation.rho_levels.contains(&s.rho) {
                bail!("screening.rho: {} is not among simulation.rho_levels", s.rho);
            }
            if s.day == 0 || s.day > horizon {
                bail!("screening.day: day {} is outside 1..={horizon}", s.day);
            }
            if s.designs.is_empty() {
                bail!("screening.designs: must list at least one design");
            }
        }
        if let Some(v) = &self.variance {
            v.model.validate().context("in [variance.model]")?;
            if v.clusters.is_empty() && v.source.is_none() {
                bail!("variance.clusters: give clusters or a source frame");
            }
            if v.joint_draws == 0 {
                bail!("variance.joint_draws: must be >= 1");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let c = Config::from_toml_str("").unwrap();
        assert_eq!(c, Config::default());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_key_is_named() {
        let e = Config::from_toml_str("[experiment]\nreplicate = 5\n").unwrap_err();
        assert!(format!("{e:#}").contains("replicate"), "{e:#}");
        let e = Config::from_toml_str("[experiment]\ndesigns = [\"FPPS\", \"XYZ\"]\n").unwrap_err();
        assert!(format!("{e:#}").contains("XYZ"), "{e:#}");
    }

    #[test]
    fn overrides_win() {
        let mut c = Config::from_toml_str("[run]\nmaster_seed = 4\n").unwrap();
        assert_eq!(c.experiment.master_seed, 4);
        c.apply(Overrides { seed: Some(9), replicates: Some(1200), threads: Some(2) });
        assert_eq!((c.run.master_seed, c.experiment.master_seed), (9, 9));
        assert_eq!(c.experiment.replicates, 1200);
        assert_eq!(c.run.threads, 2);
    }

    #[test]
    fn cross_section_checks() {
        let mut c = Config::default();
        c.experiment.rho_levels = vec![0.9];
        assert!(format!("{:#}", c.validate().unwrap_err()).contains("experiment.rho_levels"));
        let mut c = Config::default();
        c.experiment.survey_days = vec![71];
        assert!(c.validate().is_err());
    }
}
