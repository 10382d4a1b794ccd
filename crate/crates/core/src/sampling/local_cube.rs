use rand::Rng;

use super::cube::{land, FlightState};
use super::InclusionPlan;

/// Local cube method: each flight step runs on a random undecided unit and
/// its `H` nearest undecided neighbours, so the sample is balanced on the
/// plan's columns and spread in space. The residue is finished by landing.
pub fn local_cube<R: Rng + ?Sized>(plan: &InclusionPlan, rng: &mut R) -> Vec<usize> {
    let h = plan.num_balance();
    let idx = plan.neighbors();
    let mut state = FlightState::new(&plan.pi);
    let mut nb = Vec::with_capacity(h);
    let mut candidates = Vec::with_capacity(h + 1);
    while state.undecided.len() > h {
        let i = state.undecided[rng.random_range(..state.undecided.len())];
        let open = &state.open;
        idx.k_nearest(i, h, |k| k != i && open[k], rng, &mut nb);
        candidates.clear();
        candidates.push(i);
        candidates.extend_from_slice(&nb);
        state.step(plan, h, &candidates, rng);
        state.prune();
    }
    land(&mut state, plan, rng);
    state.selected()
}
