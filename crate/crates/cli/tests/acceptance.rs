//! Acceptance suite. Each test prints one `[PASS]` or `[FAIL]` line and then
//! asserts it. Run with `--nocapture` to see the lines.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use episurvey::estimation::{
    anticipated_variance, check_pps_optimality, empirical_inclusion, optimal_first_stage_probs, AvOptions,
};
use episurvey::frame::FrameSnapshot;
use episurvey::harness::{
    apply_screening, moran_trajectory, relative_entropy_table, run_cell, run_experiment, simulate_all,
    ExperimentConfig, FrameSet, MCReport, ScreeningScenario, SimulatedRun, SimulationConfig, TrajectoryCheck,
};
use episurvey::sampling::{
    draw_first_stage, make_design, pps_probabilities, BalanceColumn, DesignKind, DesignOptions, InclusionPlan,
    SelectionMethod,
};
use episurvey::seeds::{derive_seed, rng_from_seed, stage_rng};
use episurvey_cli::{cmd_evaluate, cmd_simulate, Config, Overrides};
use rayon::prelude::*;

const SEED: u64 = 20_200_315;
const RHOS: [f64; 3] = [0.3, 0.5, 0.7];
const DAYS: [usize; 3] = [15, 29, 43];
const M: usize = 80;
const N_BAR: usize = 3;
const REPLICATES: usize = 10_000;

struct Shared {
    runs: Vec<SimulatedRun>,
    report: MCReport,
    config: ExperimentConfig,
}

fn shared() -> &'static Shared {
    static CELL: OnceLock<Shared> = OnceLock::new();
    CELL.get_or_init(|| {
        let runs = simulate_all(&SimulationConfig::default(), SEED).unwrap();
        let sets: Vec<FrameSet> = runs.iter().map(FrameSet::from).collect();
        let config = ExperimentConfig {
            rho_levels: RHOS.to_vec(),
            survey_days: DAYS.to_vec(),
            designs: DesignKind::ALL.to_vec(),
            m_levels: vec![M],
            n_bar_levels: vec![N_BAR],
            replicates: REPLICATES,
            master_seed: SEED,
            design_options: DesignOptions::default(),
            record_joint: false,
        };
        let report = run_experiment(&config, &sets).unwrap();
        Shared { runs, report, config }
    })
}

fn frame(rho: f64, day: usize) -> &'static FrameSnapshot {
    let run = shared().runs.iter().find(|r| r.rho == rho).unwrap();
    run.run.snapshot(day).unwrap()
}

fn cell(design: DesignKind, day: usize, rho: f64) -> &'static episurvey::harness::CellResult {
    shared().report.find(design, day, rho, M, N_BAR).unwrap()
}

fn verdict(n: usize, name: &str, pass: bool, detail: String) {
    println!("[{}] {n:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

#[test]
fn c01_unbiasedness() {
    let mut worst = (0.0, DesignKind::Fpps, 0.0);
    for d in DesignKind::ALL {
        for rho in RHOS {
            let c = cell(d, 15, rho);
            if c.rab > worst.0 {
                worst = (c.rab, d, rho);
            }
        }
    }
    verdict(
        1,
        "unbiasedness",
        worst.0 <= 0.03,
        format!("max RAB {:.4} ({} rho={}) over 18 day-15 cells, tol 0.03", worst.0, worst.1, worst.2),
    );
}

#[test]
fn c02_efficiency_ordering() {
    let compared = [DesignKind::Fpps, DesignKind::Lp, DesignKind::Lcbv, DesignKind::Lcbg, DesignKind::Lcbvg];
    let (mut lcbv_min, mut fpps_max) = (0, 0);
    let mut misses = Vec::new();
    for day in DAYS {
        for rho in RHOS {
            let se = |d| cell(d, day, rho).rel_se;
            let others = |d: DesignKind| compared.iter().filter(move |&&k| k != d).map(|&k| se(k));
            if others(DesignKind::Lcbv).all(|s| se(DesignKind::Lcbv) < s) {
                lcbv_min += 1;
            } else {
                misses.push(format!(
                    "day{day}/rho{rho} LCBV {:.4} LCBVG {:.4}",
                    se(DesignKind::Lcbv),
                    se(DesignKind::Lcbvg)
                ));
            }
            if others(DesignKind::Fpps).all(|s| se(DesignKind::Fpps) > s) {
                fpps_max += 1;
            }
        }
    }
    verdict(
        2,
        "efficiency ordering",
        lcbv_min >= 8 && fpps_max >= 8,
        format!("LCBV strict min in {lcbv_min}/9, FPPS max in {fpps_max}/9 (need 8 each); LCBV misses: [{}]", misses.join("; ")),
    );
}

#[test]
fn c03_magnitude_band() {
    let f = cell(DesignKind::Fpps, 15, 0.3).rel_se;
    let l = cell(DesignKind::Lcbv, 15, 0.3).rel_se;
    verdict(
        3,
        "magnitude band",
        (0.25..=0.50).contains(&f) && (0.15..=0.35).contains(&l),
        format!("day 15 rho 0.3: FPPS rel SE {f:.4} in [0.25, 0.50], LCBV {l:.4} in [0.15, 0.35]"),
    );
}

#[test]
fn c04_entropy_direction() {
    let table = relative_entropy_table(&shared().report).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for day in DAYS {
        let ratio = |d| table.iter().find(|r| r.day == day && r.rho == 0.7 && r.design == d).unwrap().ratio;
        let (lp, lcbv, lcbg, lcbvg) =
            (ratio(DesignKind::Lp), ratio(DesignKind::Lcbv), ratio(DesignKind::Lcbg), ratio(DesignKind::Lcbvg));
        ok &= lp > 1.0 && lcbg > 1.0 && lcbvg > 1.0 && lcbv < 1.0;
        parts.push(format!("day{day} LP {lp:.3} LCBV {lcbv:.3} LCBG {lcbg:.3} LCBVG {lcbvg:.3}"));
    }
    let distinct = shared().report.cells.iter().map(|c| c.entropy).fold(0.0, f64::max);
    verdict(
        4,
        "entropy direction",
        ok,
        format!(
            "rho 0.7 ratios I(FPPS)/I(method): {}; max plug-in entropy {distinct:.4} vs ln({REPLICATES}) = {:.4}",
            parts.join("; "),
            (REPLICATES as f64).ln()
        ),
    );
}

#[test]
fn c05_heterogeneous_screening() {
    let f = frame(0.3, 29);
    let mut rng = stage_rng(SEED, "screening/day=29/rho=0.3");
    let screened = apply_screening(f, &ScreeningScenario::heterogeneous(), &mut rng).unwrap();
    let y_same = screened.total_infected() == f.total_infected();
    let v_changed = screened.total_verified() != f.total_verified();
    let homog = cell(DesignKind::Lcbvg, 29, 0.3);
    let hetero = run_cell(&shared().config, &screened, DesignKind::Lcbvg, 0.3, M, N_BAR).unwrap();
    let pass = y_same && v_changed && hetero.rab <= 0.01 && hetero.rel_se <= 1.2 * homog.rel_se;
    verdict(
        5,
        "heterogeneous screening",
        pass,
        format!(
            "Y {} -> {} (V {} -> {}); LCBVG RAB {:.4} (tol 0.01), rel SE {:.4} vs homogeneous {:.4} (limit +20%)",
            f.total_infected(),
            screened.total_infected(),
            f.total_verified(),
            screened.total_verified(),
            hetero.rab,
            hetero.rel_se,
            homog.rel_se
        ),
    );
}

#[test]
fn c06_av_oracle() {
    let (aux, model) = common::six_cluster_instance();
    let pi = pps_probabilities(&aux.sizes(), 3).unwrap();
    let plan = InclusionPlan::new(pi.clone(), vec![BalanceColumn::new("pi", pi.clone())], None, SelectionMethod::Cube)
        .unwrap();
    let joint = empirical_inclusion(&plan, 400_000, 17, "joint").joint_with_design_diagonal(&pi);
    let av = anticipated_variance(&aux, &plan, &joint, &model, 2, AvOptions { exact_factors: true }).unwrap();
    let mse = common::brute_force_mse(&aux, &model, &plan, 2, 100_000, 5);
    let rel = (av.av_total - mse).abs() / mse;
    verdict(
        6,
        "AV oracle",
        rel < 0.10,
        format!("AV {:.4} vs brute force {mse:.4} over 1e5 replicates, rel diff {rel:.4} (tol 0.10)", av.av_total),
    );
}

#[test]
fn c07_inclusion_fidelity() {
    let f = common::frame_50();
    let m = 10;
    let draws = 100_000usize;
    let mut worst = (0.0f64, DesignKind::Fpps);
    let mut wrong_size = 0usize;
    for d in DesignKind::ALL {
        let plan = make_design(d, &f, m, &DesignOptions::default()).unwrap();
        let n = plan.num_clusters();
        let (counts, bad) = (0..draws)
            .into_par_iter()
            .fold(
                || (vec![0u64; n], 0usize),
                |(mut c, mut bad), r| {
                    let mut rng = rng_from_seed(derive_seed(SEED, &format!("fidelity/{d}/r={r}")));
                    let s = draw_first_stage(&plan, &mut rng);
                    if s.len() != m {
                        bad += 1;
                    }
                    s.iter().for_each(|&i| c[i] += 1);
                    (c, bad)
                },
            )
            .reduce(
                || (vec![0u64; n], 0),
                |(mut a, x), (b, y)| {
                    a.iter_mut().zip(&b).for_each(|(p, q)| *p += q);
                    (a, x + y)
                },
            );
        wrong_size += bad;
        for (i, &c) in counts.iter().enumerate() {
            let p = plan.pi[i];
            let sd = (p * (1.0 - p) / draws as f64).sqrt();
            let z = ((c as f64 / draws as f64) - p).abs() / sd.max(1e-300);
            let z = if sd == 0.0 && (c as f64 / draws as f64 - p).abs() < 1e-12 { 0.0 } else { z };
            if z > worst.0 {
                worst = (z, d);
            }
        }
    }
    verdict(
        7,
        "inclusion fidelity",
        worst.0 <= 4.0 && wrong_size == 0,
        format!(
            "6 designs x 50 clusters x 1e5 draws: max |freq - pi| = {:.2} binomial SD ({}), {wrong_size} draws of wrong size",
            worst.0, worst.1
        ),
    );
}

#[test]
fn c08_balancing() {
    let draws = 10_000usize;
    let mut ok = true;
    let mut parts = Vec::new();
    for rho in RHOS {
        for day in DAYS {
            let f = frame(rho, day);
            let v_true = f.total_verified() as f64;
            let verified = f.verified_counts();
            let mut line = format!("rho{rho}/day{day} V={v_true}:");
            for d in [DesignKind::Fpps, DesignKind::Cbv, DesignKind::Lcbv] {
                let plan = make_design(d, f, M, &DesignOptions::default()).unwrap();
                let label = |r: usize| format!("balance/{d}/rho={rho}/day={day}/r={r}");
                let samples: Vec<Vec<usize>> = (0..draws)
                    .into_par_iter()
                    .map(|r| draw_first_stage(&plan, &mut rng_from_seed(derive_seed(SEED, &label(r)))))
                    .collect();
                if d == DesignKind::Fpps {
                    let sizes_ok = samples.iter().all(|s| s.len() == M);
                    ok &= sizes_ok;
                    line += &format!(" FPPS |S|={M} always {sizes_ok}");
                    continue;
                }
                let est: Vec<f64> =
                    samples.iter().map(|s| s.iter().map(|&i| verified[i] as f64 / plan.pi[i]).sum()).collect();
                let mean = est.iter().sum::<f64>() / draws as f64;
                let sd = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (draws - 1) as f64).sqrt();
                let mc_err = 4.0 * sd / (draws as f64).sqrt() + 1e-9 * v_true;
                let mut resid: Vec<f64> = est.iter().map(|e| (e - v_true).abs() / v_true).collect();
                resid.sort_by(f64::total_cmp);
                let p95 = resid[(0.95 * draws as f64) as usize - 1];
                let unbiased = (mean - v_true).abs() <= mc_err;
                ok &= unbiased && p95 <= 0.1;
                line += &format!(" {d} mean {mean:.1} (unbiased {unbiased}) p95 {p95:.3}");
            }
            parts.push(line);
        }
    }
    verdict(8, "balancing", ok, format!("p95 tol 0.1; {}", parts.join("; ")));
}

#[test]
fn c09_pps_optimality() {
    let counts = [12usize, 30, 7, 21, 15];
    let (m, n_bar, s2) = (2, 3, 0.8f64);
    let pps = pps_probabilities(&counts, m).unwrap();
    let opt = optimal_first_stage_probs(&counts, m, s2.sqrt(), n_bar).unwrap();
    let same = pps.iter().zip(&opt).all(|(a, b)| (a - b).abs() < 1e-12);
    let steps: Vec<f64> = (1..=20).map(|k| k as f64 * 0.005).collect();
    let check = check_pps_optimality(&counts, m, s2, n_bar, &steps, 200, &mut rng_from_seed(SEED)).unwrap();
    verdict(
        9,
        "PPS optimality",
        same && check.holds(1e-9) && check.evaluated > 0,
        format!(
            "PPS value {:.6}, min over {} perturbations {:.6}, optimum equals PPS: {same}",
            check.pps_value, check.evaluated, check.min_perturbed
        ),
    );
}

#[test]
fn c10_moran_trajectory() {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in &shared().runs {
        let infected: Vec<u64> = r.run.daily.iter().map(|d| d.infected()).collect();
        match TrajectoryCheck::evaluate(&moran_trajectory(&r.run), &infected) {
            Some(c) => {
                ok &= c.passes();
                parts.push(format!(
                    "rho {}: rise to day {}, dip day {} (peak day {}), shares {:.2}/{:.2}/{:.2}",
                    r.rho,
                    c.t_max + 1,
                    c.t_dip + 1,
                    c.peak + 1,
                    c.shares[0],
                    c.shares[1],
                    c.shares[2]
                ));
            }
            None => {
                ok = false;
                parts.push(format!("rho {}: trajectory undefined", r.rho));
            }
        }
    }
    verdict(10, "Moran trajectory", ok, parts.join("; "));
}

fn table_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir.join("tables"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn c11_bitwise_reproducibility() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml");
    let (cfg, bytes) = Config::load(&path, Overrides::default()).unwrap();
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, &bytes, dir.path()).unwrap();
        cmd_evaluate(&cfg, &bytes, dir.path()).unwrap();
        let t = table_bytes(dir.path());
        (dir, t)
    };
    let (_a, ta) = run();
    let (_b, tb) = run();
    let same = ta == tb && ta.len() == 4;
    verdict(
        11,
        "bitwise reproducibility",
        same,
        format!("{} table CSVs from two evaluate runs with the smoke config: identical = {same}", ta.len()),
    );
}
