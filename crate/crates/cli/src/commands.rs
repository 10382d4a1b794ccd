use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use episurvey::epidemic::snapshot_frame;
use episurvey::estimation::{anticipated_variance, empirical_inclusion, AuxFrame, AVReport};
use episurvey::frame::{read_frames_csv, write_frames_csv, FrameSnapshot};
use episurvey::harness::{
    apply_screening, epidemic_label, population_label, relative_entropy_table, run_cell, run_experiment,
    simulate_all, summarize_tables, synthesize, write_entropy_csv, write_scenario_csv, write_se_pivot_csv,
    write_summary_csv, FrameSet, TableRow,
};
use episurvey::sampling::{make_design, make_design_from_parts, InclusionPlan};
use episurvey::seeds::stage_rng;

use crate::config::{Config, VarianceSettings};
use crate::manifest::{unix_now, RunManifest};

pub const REPLICATE_LABEL: &str = "draw/{design}/day={day}/rho={rho}/m={m}/n_bar={n_bar}/r={r}";

pub fn grid_path(out: &Path, rho: f64) -> PathBuf {
    out.join(format!("grid_rho{rho}.csv"))
}

pub fn daily_path(out: &Path, rho: f64) -> PathBuf {
    out.join(format!("daily_rho{rho}.csv"))
}

pub fn frames_path(out: &Path, rho: f64) -> PathBuf {
    out.join(format!("frames_rho{rho}.csv"))
}

pub fn screening_label(day: usize, rho: f64) -> String {
    format!("screening/day={day}/rho={rho}")
}

pub const VARIANCE_JOINT_LABEL: &str = "variance/joint";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn rel(out: &Path, p: &Path) -> String {
    p.strip_prefix(out).unwrap_or(p).display().to_string()
}

/// Runs `f` on a pool of `threads` workers (0 = all cores).
fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(f)
}

/// One population grid per rho level.
pub fn cmd_synth(cfg: &Config, config_bytes: &[u8], out: &Path) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("synth", cfg, config_bytes, unix_now());
    let seed = cfg.run.master_seed;
    for &rho in &cfg.simulation.rho_levels {
        let grid = synthesize(&cfg.simulation, rho, seed).with_context(|| format!("synthesizing rho={rho}"))?;
        let p = grid_path(out, rho);
        grid.write_csv(create(&p)?)?;
        manifest.seed(population_label(rho));
        manifest.outputs.push(rel(out, &p));
    }
    manifest.write(&out.join("manifest_synth.json"))?;
    Ok(manifest)
}

/// Grids, daily epidemic counts and daily frames per rho level.
pub fn cmd_simulate(cfg: &Config, config_bytes: &[u8], out: &Path) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("simulate", cfg, config_bytes, unix_now());
    let runs = simulate_all(&cfg.simulation, cfg.run.master_seed)?;
    for r in &runs {
        let g = grid_path(out, r.rho);
        r.grid.write_csv(create(&g)?)?;
        let d = daily_path(out, r.rho);
        r.run.write_daily_csv(create(&d)?)?;
        let f = frames_path(out, r.rho);
        write_frames_csv(&r.run.snapshots, create(&f)?)?;
        manifest.seed(population_label(r.rho));
        manifest.seed(epidemic_label(r.rho));
        manifest.outputs.extend([rel(out, &g), rel(out, &d), rel(out, &f)]);
    }
    manifest.write(&out.join("manifest_simulate.json"))?;
    Ok(manifest)
}

fn load_frames(cfg: &Config, out: &Path, rho: f64) -> Result<FrameSet> {
    let p = frames_path(out, rho);
    if !p.exists() {
        bail!("missing frames {}; run `simulate` with the same --out first", p.display());
    }
    let file = File::open(&p).with_context(|| format!("cannot open {}", p.display()))?;
    let frames = read_frames_csv(cfg.simulation.grid, file).with_context(|| format!("reading {}", p.display()))?;
    Ok(FrameSet { rho, frames })
}

/// Tables 3 to 6 from the frames written by `simulate`.
pub fn cmd_evaluate(cfg: &Config, config_bytes: &[u8], out: &Path) -> Result<RunManifest> {
    let mut manifest = RunManifest::new("evaluate", cfg, config_bytes, unix_now());
    let mut rhos = cfg.experiment.rho_levels.clone();
    if cfg.screening.enabled && !rhos.contains(&cfg.screening.rho) {
        rhos.push(cfg.screening.rho);
    }
    let sets = rhos.iter().map(|&r| load_frames(cfg, out, r)).collect::<Result<Vec<_>>>()?;
    let ex = &cfg.experiment;

    let (report, screening) = with_threads(cfg.run.threads, || {
        let report = run_experiment(ex, &sets)?;
        let screening = if cfg.screening.enabled { Some(screening_rows(cfg, &sets)?) } else { None };
        Ok((report, screening))
    })?;

    let tables = out.join("tables");
    let t3 = tables.join("table3.csv");
    write_entropy_csv(&relative_entropy_table(&report)?, create(&t3)?)?;
    let rows = summarize_tables(&report);
    let t4 = tables.join("table4.csv");
    write_summary_csv(&rows, create(&t4)?)?;
    let focus: Vec<TableRow> =
        rows.iter().filter(|r| r.m == cfg.tables.m && r.n_bar == cfg.tables.n_bar).cloned().collect();
    if focus.is_empty() {
        log::warn!(
            "tables.m = {} and tables.n_bar = {} match no experiment cell; table5.csv has no rows",
            cfg.tables.m,
            cfg.tables.n_bar
        );
    }
    let t5 = tables.join("table5.csv");
    write_se_pivot_csv(&focus, create(&t5)?)?;
    manifest.outputs.extend([rel(out, &t3), rel(out, &t4), rel(out, &t5)]);
    if let Some((homog, hetero)) = screening {
        let t6 = tables.join("table6.csv");
        write_scenario_csv(&[("homogeneous", &homog), ("heterogeneous", &hetero)], create(&t6)?)?;
        manifest.outputs.push(rel(out, &t6));
        manifest.seed(screening_label(cfg.screening.day, cfg.screening.rho));
    }
    manifest.replicate_label = Some(REPLICATE_LABEL.to_string());
    manifest.replicates = Some(ex.replicates);
    manifest.write(&out.join("manifest_evaluate.json"))?;
    Ok(manifest)
}

fn screening_rows(cfg: &Config, sets: &[FrameSet]) -> Result<(Vec<TableRow>, Vec<TableRow>)> {
    let s = &cfg.screening;
    let set = sets.iter().find(|f| f.rho == s.rho).context("screening.rho has no frames")?;
    let frame = snapshot_frame(&set.frames, s.day)?;
    let mut rng = stage_rng(cfg.run.master_seed, &screening_label(s.day, s.rho));
    let screened = apply_screening(frame, &s.scenario, &mut rng)?;
    let mut homog = Vec::new();
    let mut hetero = Vec::new();
    for &d in &s.designs {
        homog.push(TableRow::from(&run_cell(&cfg.experiment, frame, d, s.rho, s.m, s.n_bar)?));
        hetero.push(TableRow::from(&run_cell(&cfg.experiment, &screened, d, s.rho, s.m, s.n_bar)?));
    }
    Ok((homog, hetero))
}

fn variance_inputs(v: &VarianceSettings, cfg: &Config, out: &Path) -> Result<(AuxFrame, InclusionPlan)> {
    if !v.clusters.is_empty() {
        let aux = AuxFrame {
            clusters: v.clusters.iter().map(|c| c.persons.clone()).collect(),
        };
        let sizes = aux.sizes();
        let coords = v
            .clusters
            .iter()
            .map(|c| {
                let n = c.persons.len().max(1) as f64;
                let sx: f64 = c.persons.iter().map(|p| p.loc[0]).sum();
                let sy: f64 = c.persons.iter().map(|p| p.loc[1]).sum();
                [sx / n, sy / n]
            })
            .collect();
        let verified = v.clusters.iter().map(|c| c.verified as f64).collect();
        let plan = make_design_from_parts(v.design, &sizes, verified, coords, v.m, &cfg.experiment.design_options)?;
        return Ok((aux, plan));
    }
    let src = v.source.context("variance.source is required without clusters")?;
    let set = load_frames(cfg, out, src.rho)?;
    let frame: &FrameSnapshot = snapshot_frame(&set.frames, src.day)?;
    let plan = make_design(v.design, frame, v.m, &cfg.experiment.design_options)?;
    Ok((AuxFrame::from_frame(frame), plan))
}

/// Anticipated variance of the configured design under the working model.
pub fn cmd_variance(cfg: &Config, config_bytes: &[u8], out: &Path) -> Result<(RunManifest, AVReport)> {
    let v = cfg.variance.as_ref().context("config has no [variance] section")?;
    let mut manifest = RunManifest::new("variance", cfg, config_bytes, unix_now());
    let (aux, plan) = variance_inputs(v, cfg, out)?;
    let report = with_threads(cfg.run.threads, || {
        let joint = empirical_inclusion(&plan, v.joint_draws, cfg.run.master_seed, VARIANCE_JOINT_LABEL)
            .joint_with_design_diagonal(&plan.pi);
        Ok(anticipated_variance(&aux, &plan, &joint, &v.model, v.n_bar, v.options)?)
    })?;
    let a = out.join("av_report.csv");
    report.write_csv(create(&a)?)?;
    let c = out.join("av_clusters.csv");
    report.write_cluster_csv(&plan.pi, create(&c)?)?;
    manifest.outputs.extend([rel(out, &a), rel(out, &c)]);
    manifest.replicate_label = Some(format!("{VARIANCE_JOINT_LABEL}/r={{r}}"));
    manifest.replicates = Some(v.joint_draws);
    manifest.write(&out.join("manifest_variance.json"))?;
    Ok((manifest, report))
}
