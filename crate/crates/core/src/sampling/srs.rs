use rand::Rng;

use crate::error::{Error, Result};
use crate::frame::FrameSnapshot;

/// Simple random sample without replacement of `min(n_bar, N_i)` residents
/// of `cluster`. Returns sorted positions within the cluster and the
/// second-stage inclusion probability.
pub fn second_stage_srswor<R: Rng + ?Sized>(
    frame: &FrameSnapshot,
    cluster: usize,
    n_bar: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, f64)> {
    let size = frame
        .clusters
        .get(cluster)
        .ok_or_else(|| Error::invalid("cluster", format!("index {cluster} outside frame")))?
        .size();
    if size == 0 {
        return Err(Error::EmptyCluster(cluster));
    }
    if n_bar == 0 {
        return Err(Error::invalid("n_bar", "second-stage size must be >= 1"));
    }
    if size <= n_bar {
        return Ok(((0..size).collect(), 1.0));
    }
    let mut picked = rand::seq::index::sample(rng, size, n_bar).into_vec();
    picked.sort_unstable();
    Ok((picked, n_bar as f64 / size as f64))
}
