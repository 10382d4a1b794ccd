#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use episurvey::estimation::AuxFrame;
use episurvey::sampling::{pps_probabilities, BalanceColumn, InclusionPlan, SelectionMethod};
use episurvey_cli::{cmd_evaluate, cmd_simulate, cmd_synth, cmd_variance, Config, Overrides};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_episurvey"))
}

fn load(text: &str) -> (Config, Vec<u8>) {
    let mut cfg = Config::from_toml_str(text).unwrap();
    cfg.apply(Overrides::default());
    cfg.validate().unwrap();
    (cfg, text.as_bytes().to_vec())
}

const SMALL: &str = r#"
[simulation]
total_population = 4000
grid = { rows = 10, cols = 10, cell_side = 1.0 }
rho_levels = [0.5]
seed_cases = 6

[experiment]
rho_levels = [0.5]
survey_days = [15, 29]
designs = ["FPPS", "LP", "LCBV"]
m_levels = [20]
n_bar_levels = [3]
replicates = 64

[screening]
rho = 0.5
m = 20
designs = ["LCBV"]

[tables]
m = 20
n_bar = 3
"#;

#[test]
fn synth_is_deterministic_per_seed() {
    let (cfg, bytes) = load(SMALL);
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_synth(&cfg, &bytes, a.path()).unwrap();
    cmd_synth(&cfg, &bytes, b.path()).unwrap();
    let mut other = cfg.clone();
    other.apply(Overrides { seed: Some(1), ..Overrides::default() });
    cmd_synth(&other, &bytes, c.path()).unwrap();
    let read = |d: &Path| fs::read(d.join("grid_rho0.5.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_ne!(read(a.path()), read(c.path()));
}

#[test]
fn default_synth_writes_three_grids() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, bytes) = load("");
    let m = cmd_synth(&cfg, &bytes, dir.path()).unwrap();
    assert_eq!(m.outputs, vec!["grid_rho0.3.csv", "grid_rho0.5.csv", "grid_rho0.7.csv"]);
}

#[test]
fn simulate_covers_seventy_days() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, bytes) = load(SMALL);
    cmd_simulate(&cfg, &bytes, dir.path()).unwrap();
    let daily = fs::read_to_string(dir.path().join("daily_rho0.5.csv")).unwrap();
    assert_eq!(daily.lines().count(), 71);
    assert!(daily.lines().last().unwrap().starts_with("70,"));
}

#[test]
fn zero_seed_cases_rejected() {
    let e = Config::from_toml_str("[simulation]\nseed_cases = 0\n").unwrap().validate().unwrap_err();
    assert!(format!("{e:#}").contains("seed_cases"), "{e:#}");
}

#[test]
fn evaluate_is_reproducible_across_threads_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, bytes) = load(SMALL);
    cmd_simulate(&cfg, &bytes, dir.path()).unwrap();
    let m = cmd_evaluate(&cfg, &bytes, dir.path()).unwrap();
    assert_eq!(m.replicates, Some(64));
    let tables = |d: &Path| {
        (3..=6)
            .map(|k| fs::read(d.join(format!("tables/table{k}.csv"))).unwrap())
            .collect::<Vec<_>>()
    };
    let first = tables(dir.path());

    let mut threaded = cfg.clone();
    threaded.apply(Overrides { threads: Some(3), ..Overrides::default() });
    cmd_evaluate(&threaded, &bytes, dir.path()).unwrap();
    assert_eq!(tables(dir.path()), first);

    let (from_manifest, _) =
        Config::load(&dir.path().join("manifest_evaluate.json"), Overrides::default()).unwrap();
    assert_eq!(from_manifest, threaded);
    cmd_evaluate(&from_manifest, &bytes, dir.path()).unwrap();
    assert_eq!(tables(dir.path()), first);
    let t4 = String::from_utf8(first[1].clone()).unwrap();
    assert_eq!(t4.lines().count(), 1 + 2 * 3);
}

#[test]
fn evaluate_without_frames_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, bytes) = load(SMALL);
    let e = cmd_evaluate(&cfg, &bytes, dir.path()).unwrap_err();
    assert!(format!("{e:#}").contains("missing frames"), "{e:#}");
}

#[test]
fn missing_config_file_fails() {
    let out = bin().args(["synth", "--config", "/nonexistent/episurvey.toml"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read config"));
}

#[test]
fn unknown_design_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[experiment]\ndesigns = [\"FPPS\", \"LCVG\"]\n").unwrap();
    let out = bin().args(["evaluate", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("LCVG") && err.contains("designs"), "{err}");
}

#[test]
fn malformed_covariance_kind_fails() {
    let text = fs::read_to_string(configs().join("toy_variance.toml")).unwrap();
    let bad = text.replace("kind = \"gaussian\"", "kind = \"spherical\"");
    let e = Config::from_toml_str(&bad).unwrap_err();
    assert!(format!("{e:#}").contains("spherical"), "{e:#}");
}

#[test]
fn zero_residual_variance_gives_zero_av() {
    let text = fs::read_to_string(configs().join("toy_variance.toml")).unwrap();
    // a mean constant per person is linear in the size column
    let text = text
        .replace("sigma_u2 = 0.2", "sigma_u2 = 0.0")
        .replace("beta = [0.3, 0.08, -0.05]", "beta = [0.3, 0.0, 0.0]")
        .replace("joint_draws = 400000", "joint_draws = 2000");
    let (cfg, bytes) = load(&text);
    let dir = tempfile::tempdir().unwrap();
    let (_, report) = cmd_variance(&cfg, &bytes, dir.path()).unwrap();
    assert!(report.av_total.abs() < 1e-9, "{}", report.av_total);
}

#[test]
fn toy_variance_matches_brute_force() {
    let path = configs().join("toy_variance.toml");
    let (cfg, bytes) = Config::load(&path, Overrides::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (_, report) = cmd_variance(&cfg, &bytes, dir.path()).unwrap();
    assert!(dir.path().join("av_report.csv").exists());

    let v = cfg.variance.as_ref().unwrap();
    let aux = AuxFrame { clusters: v.clusters.iter().map(|c| c.persons.clone()).collect() };
    let pi = pps_probabilities(&aux.sizes(), v.m).unwrap();
    let plan =
        InclusionPlan::new(pi.clone(), vec![BalanceColumn::new("pi", pi)], None, SelectionMethod::Cube).unwrap();
    let mse = common::brute_force_mse(&aux, &v.model, &plan, v.n_bar, 100_000, 5);
    let rel = (report.av_total - mse).abs() / mse;
    assert!(rel < 0.10, "AV {} brute force {mse}", report.av_total);
}

#[test]
fn shipped_configs_parse() {
    for name in ["smoke.toml", "desk.toml", "toy_variance.toml"] {
        Config::load(&configs().join(name), Overrides::default()).unwrap();
    }
}
