//! Cube method: a martingale flight phase followed by a landing phase that
//! relaxes balancing constraints one at a time.
//!
//! The flight works on `H + 1` undecided units at a time. It moves their
//! probability vector along a direction in the null space of the adjusted
//! balancing matrix (`d_i / pi_i`), far enough that at least one coordinate
//! reaches 0 or 1, choosing the sign so the expected move is zero. Balancing
//! totals are therefore preserved exactly at every step and each coordinate
//! remains a martingale with mean `pi_i`.

use rand::seq::SliceRandom;
use rand::Rng;

use super::InclusionPlan;

/// Probabilities within this distance of 0 or 1 are treated as decided.
pub const DECIDED_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct FlightState {
    pub probs: Vec<f64>,
    pub undecided: Vec<usize>,
    pub open: Vec<bool>,
}

impl FlightState {
    pub fn new(probs: &[f64]) -> Self {
        let mut probs = probs.to_vec();
        let mut open = vec![false; probs.len()];
        let mut undecided = Vec::new();
        for (i, p) in probs.iter_mut().enumerate() {
            if *p <= DECIDED_EPS {
                *p = 0.0;
            } else if *p >= 1.0 - DECIDED_EPS {
                *p = 1.0;
            } else {
                open[i] = true;
                undecided.push(i);
            }
        }
        FlightState {
            probs,
            undecided,
            open,
        }
    }

    /// One flight step on `candidates` against the first `cols` balancing
    /// columns. Requires `candidates.len() > cols`.
    pub fn step<R: Rng + ?Sized>(&mut self, plan: &InclusionPlan, cols: usize, candidates: &[usize], rng: &mut R) {
        let k = candidates.len();
        debug_assert!(k > cols);
        let mut mat = Vec::with_capacity(cols * k);
        for j in 0..cols {
            for &c in candidates {
                mat.push(plan.adjusted(c)[j]);
            }
        }
        let u = null_vector(&mut mat, cols, k);

        let (mut up, mut down) = (f64::INFINITY, f64::INFINITY);
        for (&c, &uc) in candidates.iter().zip(&u) {
            let p = self.probs[c];
            if uc > 0.0 {
                up = up.min((1.0 - p) / uc);
                down = down.min(p / uc);
            } else if uc < 0.0 {
                up = up.min(p / -uc);
                down = down.min((1.0 - p) / -uc);
            }
        }
        let lambda = if rng.random::<f64>() * (up + down) < down { up } else { -down };
        for (&c, &uc) in candidates.iter().zip(&u) {
            let p = (self.probs[c] + lambda * uc).clamp(0.0, 1.0);
            self.probs[c] = if p <= DECIDED_EPS {
                0.0
            } else if p >= 1.0 - DECIDED_EPS {
                1.0
            } else {
                p
            };
            if self.probs[c] == 0.0 || self.probs[c] == 1.0 {
                self.open[c] = false;
            }
        }
    }

    pub fn prune(&mut self) {
        let open = &self.open;
        self.undecided.retain(|&i| open[i]);
    }

    pub fn selected(&self) -> Vec<usize> {
        (0..self.probs.len()).filter(|&i| self.probs[i] > 0.5).collect()
    }
}

/// Flight phase of the cube method on the plan's balancing matrix.
///
/// Returns a probability vector in which at most `H` entries are fractional.
pub fn cube_flight<R: Rng + ?Sized>(plan: &InclusionPlan, rng: &mut R) -> Vec<f64> {
    let mut state = FlightState::new(&plan.pi);
    state.undecided.shuffle(rng);
    run_flight(&mut state, plan, rng);
    state.probs
}

pub(crate) fn run_flight<R: Rng + ?Sized>(state: &mut FlightState, plan: &InclusionPlan, rng: &mut R) {
    let h = plan.num_balance();
    while state.undecided.len() > h {
        let candidates: Vec<usize> = state.undecided[..=h].to_vec();
        state.step(plan, h, &candidates, rng);
        state.prune();
    }
}

/// Landing phase: drops balancing columns from the right (the fixed-size
/// column, when first, goes last) and re-flies the residual units until all
/// are decided. Returns the selected cluster indices in ascending order.
pub fn cube_landing<R: Rng + ?Sized>(flight_result: &[f64], plan: &InclusionPlan, rng: &mut R) -> Vec<usize> {
    let mut state = FlightState::new(flight_result);
    land(&mut state, plan, rng);
    state.selected()
}

pub(crate) fn land<R: Rng + ?Sized>(state: &mut FlightState, plan: &InclusionPlan, rng: &mut R) {
    let mut h = plan.num_balance();
    while !state.undecided.is_empty() {
        while h > 0 && state.undecided.len() <= h {
            h -= 1;
        }
        debug_assert!(
            !(plan.fixed_size && h == 0 && state.undecided.len() == 1 && plan.m_expected.fract().abs() < 1e-9),
            "a single fractional unit cannot remain while the size column is retained"
        );
        let candidates: Vec<usize> = state.undecided[..=h].to_vec();
        state.step(plan, h, &candidates, rng);
        state.prune();
    }
}

/// Full cube draw: flight then landing.
pub fn cube_sample<R: Rng + ?Sized>(plan: &InclusionPlan, rng: &mut R) -> Vec<usize> {
    let flight = cube_flight(plan, rng);
    cube_landing(&flight, plan, rng)
}

/// A nonzero vector in the null space of a `rows x cols` row-major matrix
/// with `cols > rows`. The matrix is reduced in place.
pub(crate) fn null_vector(a: &mut [f64], rows: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert!(cols > rows);
    for r in 0..rows {
        let row = &mut a[r * cols..(r + 1) * cols];
        let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale > 0.0 {
            row.iter_mut().for_each(|v| *v /= scale);
        }
    }
    const TOL: f64 = 1e-10;
    let mut pivots: Vec<(usize, usize)> = Vec::with_capacity(rows);
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, best_abs) = (r..rows)
            .map(|i| (i, a[i * cols + c].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_abs <= TOL {
            continue;
        }
        if best != r {
            for j in 0..cols {
                a.swap(best * cols + j, r * cols + j);
            }
        }
        let piv = a[r * cols + c];
        for j in 0..cols {
            a[r * cols + j] /= piv;
        }
        for i in 0..rows {
            if i != r {
                let f = a[i * cols + c];
                if f != 0.0 {
                    for j in 0..cols {
                        a[i * cols + j] -= f * a[r * cols + j];
                    }
                }
            }
        }
        pivots.push((r, c));
        r += 1;
    }
    let is_pivot = |c: usize| pivots.iter().any(|&(_, pc)| pc == c);
    let free = (0..cols).find(|&c| !is_pivot(c)).expect("cols > rows leaves a free column");
    let mut v = vec![0.0; cols];
    v[free] = 1.0;
    for &(pr, pc) in &pivots {
        v[pc] = -a[pr * cols + free];
    }
    v
}
