use rand::Rng;

use super::cube::FlightState;
use super::{InclusionPlan, LpmVariant, SelectionMethod};

/// Local pivotal method on the plan's centroids.
///
/// Two nearby undecided units compete: their probabilities are updated so
/// the pair sum is preserved and at least one of them is decided. A final
/// lone fractional unit (non-integral `sum(pi)`) is settled by a Bernoulli
/// draw. Returns selected indices in ascending order.
pub fn local_pivotal<R: Rng + ?Sized>(plan: &InclusionPlan, rng: &mut R) -> Vec<usize> {
    let variant = match plan.method {
        SelectionMethod::LocalPivotal(v) => v,
        _ => LpmVariant::Nearest,
    };
    let idx = plan.neighbors();
    let mut state = FlightState::new(&plan.pi);
    let mut nn = Vec::with_capacity(1);
    while state.undecided.len() >= 2 {
        let mut i = state.undecided[rng.random_range(..state.undecided.len())];
        let mut hops = 0;
        let j = loop {
            let open = &state.open;
            idx.k_nearest(i, 1, |k| k != i && open[k], rng, &mut nn);
            let j = nn[0];
            // nearest-neighbour chains strictly shorten until a mutual pair;
            // the hop cap only guards against exact-tie cycles
            if variant == LpmVariant::Nearest
                || hops > state.undecided.len()
                || idx.is_nearest(j, i, |k| k != j && open[k])
            {
                break j;
            }
            i = j;
            hops += 1;
        };
        pivot(&mut state.probs, i, j, rng);
        for k in [i, j] {
            if state.probs[k] == 0.0 || state.probs[k] == 1.0 {
                state.open[k] = false;
            }
        }
        state.prune();
    }
    if let Some(&k) = state.undecided.first() {
        state.probs[k] = if rng.random::<f64>() < state.probs[k] { 1.0 } else { 0.0 };
    }
    state.selected()
}

fn pivot<R: Rng + ?Sized>(p: &mut [f64], i: usize, j: usize, rng: &mut R) {
    let (a, b) = (p[i], p[j]);
    let s = a + b;
    let (ni, nj) = if s < 1.0 {
        if rng.random::<f64>() * s < b {
            (0.0, s)
        } else {
            (s, 0.0)
        }
    } else if rng.random::<f64>() * (2.0 - s) < 1.0 - b {
        (1.0, s - 1.0)
    } else {
        (s - 1.0, 1.0)
    };
    p[i] = snap(ni);
    p[j] = snap(nj);
}

fn snap(p: f64) -> f64 {
    if p <= super::DECIDED_EPS {
        0.0
    } else if p >= 1.0 - super::DECIDED_EPS {
        1.0
    } else {
        p
    }
}
