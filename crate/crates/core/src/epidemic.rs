//! Agent-based SEIARD dynamics on the population grid.
//!
//! Each simulated day runs four phases in a fixed order:
//!
//! 1. mobility: persons in S, E, A or R either commute to one of the central
//!    cells (probability `m1_frac`), step to a queen-adjacent cell
//!    (`m2_frac`), or stay home; symptomatic I persons stay quarantined;
//! 2. meetings: each cell holds `Poisson(c_n)` meetings of `Poisson(c_p)`
//!    distinct persons present in it; a meeting with at least one person who
//!    was E or A at the start of the day exposes up to `i_m` susceptible
//!    participants;
//! 3. everyone returns to their home cell;
//! 4. clocks advance and persons who completed their stay in E, I or A move
//!    on according to the transition matrix.

use std::io::Write;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ClusterFrame, FrameSnapshot};
use crate::population::{build_weight_matrix, morans_i, Contiguity, GridSpec, PopulationGrid, SpatialWeights};
use crate::seeds::{rng_from_seed, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HealthState {
    S,
    E,
    I,
    A,
    R,
    D,
}

impl HealthState {
    pub const ALL: [HealthState; 6] = [
        HealthState::S,
        HealthState::E,
        HealthState::I,
        HealthState::A,
        HealthState::R,
        HealthState::D,
    ];

    /// Free to move and attend meetings.
    pub fn is_mobile(self) -> bool {
        matches!(self, HealthState::S | HealthState::E | HealthState::A | HealthState::R)
    }

    pub fn is_contagious(self) -> bool {
        matches!(self, HealthState::E | HealthState::A)
    }

    pub fn is_absorbing(self) -> bool {
        matches!(self, HealthState::R | HealthState::D)
    }

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Person {
    pub id: u32,
    pub home_cell: u32,
    pub state: HealthState,
    pub days_in_state: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseParams {
    pub duration_days: usize,
    pub m1_frac: f64,
    pub m2_frac: f64,
    pub c_n: f64,
    pub c_p: f64,
    pub i_m: u32,
}

impl PhaseParams {
    /// Four weeks of normal mobility.
    pub fn normality() -> Self {
        PhaseParams {
            duration_days: 28,
            m1_frac: 0.10,
            m2_frac: 0.05,
            c_n: 5.0,
            c_p: 5.0,
            i_m: 2,
        }
    }

    /// Six weeks of lockdown.
    pub fn lockdown() -> Self {
        PhaseParams {
            duration_days: 42,
            m1_frac: 0.01,
            m2_frac: 0.0,
            c_n: 2.0,
            c_p: 3.0,
            i_m: 1,
        }
    }

    pub fn default_schedule() -> Vec<PhaseParams> {
        vec![Self::normality(), Self::lockdown()]
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_days == 0 {
            return Err(Error::invalid("duration_days", "must be positive"));
        }
        for (name, f) in [("m1_frac", self.m1_frac), ("m2_frac", self.m2_frac)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::invalid(name, format!("{f} not in [0, 1]")));
            }
        }
        if self.m1_frac + self.m2_frac > 1.0 + 1e-12 {
            return Err(Error::invalid("m1_frac", "m1_frac + m2_frac exceeds 1"));
        }
        for (name, c) in [("c_n", self.c_n), ("c_p", self.c_p)] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid(name, format!("{c} is not a positive Poisson mean")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiseaseParams {
    pub exposed_duration: u32,
    pub infectious_duration: u32,
    pub p_e_to_i: f64,
    pub p_e_to_a: f64,
    pub p_i_to_d: f64,
    pub p_i_to_r: f64,
    /// Count persons in E as infected (`y = 1`) in survey frames.
    pub y_includes_exposed: bool,
}

impl Default for DiseaseParams {
    fn default() -> Self {
        DiseaseParams {
            exposed_duration: 5,
            infectious_duration: 14,
            p_e_to_i: 0.25,
            p_e_to_a: 0.75,
            p_i_to_d: 0.15,
            p_i_to_r: 0.85,
            y_includes_exposed: false,
        }
    }
}

impl DiseaseParams {
    pub fn validate(&self) -> Result<()> {
        if self.exposed_duration == 0 || self.infectious_duration == 0 {
            return Err(Error::invalid("duration", "state durations must be positive"));
        }
        for (name, p) in [
            ("p_e_to_i", self.p_e_to_i),
            ("p_e_to_a", self.p_e_to_a),
            ("p_i_to_d", self.p_i_to_d),
            ("p_i_to_r", self.p_i_to_r),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(name, format!("{p} not in [0, 1]")));
            }
        }
        if (self.p_e_to_i + self.p_e_to_a - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("p_e_to_i", "E row must sum to 1"));
        }
        if (self.p_i_to_d + self.p_i_to_r - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("p_i_to_d", "I row must sum to 1"));
        }
        Ok(())
    }

    /// Rows E, I, A, R, D over columns E, I, A, R, D.
    pub fn transition_matrix(&self) -> [[f64; 5]; 5] {
        [
            [0.0, self.p_e_to_i, self.p_e_to_a, 0.0, 0.0],
            [0.0, 0.0, 0.0, self.p_i_to_r, self.p_i_to_d],
            [0.0, 0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 1.0],
        ]
    }
}

#[derive(Debug, Clone)]
pub struct EpidemicState {
    pub day: usize,
    pub spec: GridSpec,
    pub persons: Vec<Person>,
    /// Cell each person occupies during the current day's meetings.
    pub location: Vec<u32>,
    /// Number of persons who ever left S.
    pub cumulative_infections: u64,
}

impl EpidemicState {
    pub fn state_counts(&self) -> [u64; 6] {
        let mut c = [0u64; 6];
        for p in &self.persons {
            c[p.state.slot()] += 1;
        }
        c
    }

    pub fn count(&self, state: HealthState) -> u64 {
        self.state_counts()[state.slot()]
    }

    pub fn cell_counts(&self, mut select: impl FnMut(HealthState) -> bool) -> Vec<u64> {
        let mut c = vec![0u64; self.spec.num_cells()];
        for p in &self.persons {
            if select(p.state) {
                c[p.home_cell as usize] += 1;
            }
        }
        c
    }

    /// Survey frame: living residents by home cell, `v` for state I and `y`
    /// for I or A (plus E when requested).
    pub fn frame(&self, disease: &DiseaseParams) -> FrameSnapshot {
        let mut clusters = vec![ClusterFrame::default(); self.spec.num_cells()];
        for p in &self.persons {
            if p.state == HealthState::D {
                continue;
            }
            let c = &mut clusters[p.home_cell as usize];
            let y = matches!(p.state, HealthState::I | HealthState::A)
                || (disease.y_includes_exposed && p.state == HealthState::E);
            c.persons.push(p.id);
            c.y.push(y);
            c.v.push(p.state == HealthState::I);
        }
        FrameSnapshot {
            day: self.day,
            spec: self.spec,
            clusters,
        }
    }
}

fn init_with(grid: &PopulationGrid, seed_cases: u64, rng: &mut SimRng) -> Result<EpidemicState> {
    if seed_cases == 0 {
        return Err(Error::invalid("seed_cases", "must be >= 1"));
    }
    if seed_cases > grid.total {
        return Err(Error::invalid(
            "seed_cases",
            format!("{seed_cases} exceeds population {}", grid.total),
        ));
    }
    let mut persons = Vec::with_capacity(grid.total as usize);
    for (cell, &n) in grid.counts.iter().enumerate() {
        for _ in 0..n {
            persons.push(Person {
                id: persons.len() as u32,
                home_cell: cell as u32,
                state: HealthState::S,
                days_in_state: 0,
            });
        }
    }
    for k in index::sample(rng, persons.len(), seed_cases as usize) {
        persons[k].state = HealthState::E;
    }
    let location = persons.iter().map(|p| p.home_cell).collect();
    Ok(EpidemicState {
        day: 0,
        spec: grid.spec,
        persons,
        location,
        cumulative_infections: seed_cases,
    })
}

/// Seeds `seed_cases` uniformly chosen persons into E on day 0.
pub fn init_epidemic(grid: &PopulationGrid, seed_cases: u64, rng_seed: u64) -> Result<EpidemicState> {
    init_with(grid, seed_cases, &mut rng_from_seed(rng_seed))
}

const QUEEN_STEPS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Advances the epidemic by one day. Returns the number of new exposures.
pub fn step_day<R: Rng + ?Sized>(
    state: &mut EpidemicState,
    phase: &PhaseParams,
    disease: &DiseaseParams,
    rng: &mut R,
) -> u64 {
    relocate(state, phase, rng);
    let exposed_today = hold_meetings(state, phase, rng);
    for (p, loc) in state.persons.iter().zip(state.location.iter_mut()) {
        *loc = p.home_cell;
    }
    let new_exposures = advance_clocks(state, &exposed_today, disease, rng);
    state.cumulative_infections += new_exposures;
    state.day += 1;
    new_exposures
}

fn relocate<R: Rng + ?Sized>(state: &mut EpidemicState, phase: &PhaseParams, rng: &mut R) {
    let spec = state.spec;
    let central = spec.central_cells();
    for (p, loc) in state.persons.iter().zip(state.location.iter_mut()) {
        *loc = p.home_cell;
        if !p.state.is_mobile() {
            continue;
        }
        let u: f64 = rng.random();
        if u < phase.m1_frac {
            *loc = central[rng.random_range(0..central.len())] as u32;
        } else if u < phase.m1_frac + phase.m2_frac {
            let (r, c) = spec.row_col(p.home_cell as usize);
            let (dr, dc) = QUEEN_STEPS[rng.random_range(0..QUEEN_STEPS.len())];
            let nr = (r as isize + dr).clamp(0, spec.rows as isize - 1) as usize;
            let nc = (c as isize + dc).clamp(0, spec.cols as isize - 1) as usize;
            *loc = spec.index(nr, nc) as u32;
        }
    }
}

/// Returns the persons exposed during today's meetings.
fn hold_meetings<R: Rng + ?Sized>(state: &EpidemicState, phase: &PhaseParams, rng: &mut R) -> Vec<bool> {
    let mut present: Vec<Vec<u32>> = vec![Vec::new(); state.spec.num_cells()];
    for (k, p) in state.persons.iter().enumerate() {
        if p.state.is_mobile() {
            present[state.location[k] as usize].push(k as u32);
        }
    }
    let meetings = Poisson::new(phase.c_n).expect("validated Poisson mean");
    let attendance = Poisson::new(phase.c_p).expect("validated Poisson mean");
    let mut exposed_today = vec![false; state.persons.len()];
    let mut participants = Vec::new();
    for roster in &present {
        let n_meet = meetings.sample(rng) as u64;
        for _ in 0..n_meet {
            let k = (attendance.sample(rng) as usize).min(roster.len());
            if k < 2 {
                continue;
            }
            participants.clear();
            participants.extend(index::sample(rng, roster.len(), k).into_iter().map(|j| roster[j] as usize));
            // contagiousness is judged on the state held at the start of the day
            let contagious = participants
                .iter()
                .any(|&q| state.persons[q].state.is_contagious() && !exposed_today[q]);
            if !contagious {
                continue;
            }
            let mut budget = phase.i_m;
            for &q in &participants {
                if budget == 0 {
                    break;
                }
                if state.persons[q].state == HealthState::S && !exposed_today[q] {
                    exposed_today[q] = true;
                    budget -= 1;
                }
            }
        }
    }
    exposed_today
}

fn advance_clocks<R: Rng + ?Sized>(
    state: &mut EpidemicState,
    exposed_today: &[bool],
    disease: &DiseaseParams,
    rng: &mut R,
) -> u64 {
    let mut new_exposures = 0;
    for (p, &exposed) in state.persons.iter_mut().zip(exposed_today) {
        if exposed {
            p.state = HealthState::E;
            p.days_in_state = 0;
            new_exposures += 1;
            continue;
        }
        p.days_in_state += 1;
        let next = match p.state {
            HealthState::E if p.days_in_state >= disease.exposed_duration => {
                Some(if rng.random::<f64>() < disease.p_e_to_i {
                    HealthState::I
                } else {
                    HealthState::A
                })
            }
            HealthState::I if p.days_in_state >= disease.infectious_duration => {
                Some(if rng.random::<f64>() < disease.p_i_to_d {
                    HealthState::D
                } else {
                    HealthState::R
                })
            }
            HealthState::A if p.days_in_state >= disease.infectious_duration => Some(HealthState::R),
            _ => None,
        };
        if let Some(s) = next {
            p.state = s;
            p.days_in_state = 0;
        }
    }
    new_exposures
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyCounts {
    pub day: usize,
    pub counts: [u64; 6],
    pub cumulative_infections: u64,
    /// Moran's I of per-cell I counts; `None` when the field is constant.
    pub moran_known: Option<f64>,
    /// Moran's I of per-cell I+A counts.
    pub moran_total: Option<f64>,
}

impl DailyCounts {
    pub fn get(&self, s: HealthState) -> u64 {
        self.counts[s.slot()]
    }

    pub fn infected(&self) -> u64 {
        self.get(HealthState::I) + self.get(HealthState::A)
    }
}

#[derive(Debug, Clone)]
pub struct EpidemicRun {
    pub snapshots: Vec<FrameSnapshot>,
    pub daily: Vec<DailyCounts>,
}

impl EpidemicRun {
    pub fn horizon(&self) -> usize {
        self.snapshots.len()
    }

    pub fn snapshot(&self, day: usize) -> Result<&FrameSnapshot> {
        snapshot_frame(&self.snapshots, day)
    }

    /// Writes `day,S,E,I,A,R,D,moran_I_known,moran_I_total`; undefined
    /// Moran values are left empty.
    pub fn write_daily_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["day", "S", "E", "I", "A", "R", "D", "moran_I_known", "moran_I_total"])?;
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for d in &self.daily {
            let mut rec = vec![d.day.to_string()];
            rec.extend(d.counts.iter().map(|c| c.to_string()));
            rec.push(fmt(d.moran_known));
            rec.push(fmt(d.moran_total));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn daily_counts(state: &EpidemicState, weights: &SpatialWeights) -> DailyCounts {
    let to_f = |v: Vec<u64>| v.into_iter().map(|x| x as f64).collect::<Vec<_>>();
    let known = to_f(state.cell_counts(|s| s == HealthState::I));
    let total = to_f(state.cell_counts(|s| matches!(s, HealthState::I | HealthState::A)));
    DailyCounts {
        day: state.day,
        counts: state.state_counts(),
        cumulative_infections: state.cumulative_infections,
        moran_known: morans_i(&known, weights).ok(),
        moran_total: morans_i(&total, weights).ok(),
    }
}

/// Runs the phase schedule and returns one frame per day `1..=horizon`.
pub fn run_epidemic(
    grid: &PopulationGrid,
    phases: &[PhaseParams],
    disease: &DiseaseParams,
    seed_cases: u64,
    rng_seed: u64,
) -> Result<EpidemicRun> {
    if phases.is_empty() {
        return Err(Error::invalid("phases", "at least one phase is required"));
    }
    for p in phases {
        p.validate()?;
    }
    disease.validate()?;
    let mut rng = rng_from_seed(rng_seed);
    let mut state = init_with(grid, seed_cases, &mut rng)?;
    let weights = build_weight_matrix(&grid.spec, Contiguity::Queen, true);
    let horizon: usize = phases.iter().map(|p| p.duration_days).sum();
    let mut snapshots = Vec::with_capacity(horizon);
    let mut daily = Vec::with_capacity(horizon);
    for phase in phases {
        for _ in 0..phase.duration_days {
            step_day(&mut state, phase, disease, &mut rng);
            snapshots.push(state.frame(disease));
            daily.push(daily_counts(&state, &weights));
        }
    }
    Ok(EpidemicRun { snapshots, daily })
}

pub fn snapshot_frame(snapshots: &[FrameSnapshot], day: usize) -> Result<&FrameSnapshot> {
    if day == 0 || day > snapshots.len() {
        return Err(Error::DayOutOfRange {
            day,
            horizon: snapshots.len(),
        });
    }
    let f = &snapshots[day - 1];
    debug_assert_eq!(f.day, day);
    Ok(f)
}
