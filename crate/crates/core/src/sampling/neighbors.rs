use rand::seq::SliceRandom;
use rand::Rng;

/// Every unit's peers sorted by Euclidean distance, built once per plan.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    order: Vec<Vec<u32>>,
    dist: Vec<Vec<f64>>,
}

impl NeighborIndex {
    pub fn new(coords: &[[f64; 2]]) -> Self {
        let n = coords.len();
        let mut order = Vec::with_capacity(n);
        let mut dist = Vec::with_capacity(n);
        for i in 0..n {
            let mut peers: Vec<(f64, u32)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dx = coords[i][0] - coords[j][0];
                    let dy = coords[i][1] - coords[j][1];
                    ((dx * dx + dy * dy).sqrt(), j as u32)
                })
                .collect();
            peers.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.push(peers.iter().map(|p| p.0).collect());
            order.push(peers.into_iter().map(|p| p.1).collect());
        }
        NeighborIndex { order, dist }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Fills `out` with the `k` nearest peers of `unit` satisfying `eligible`.
    /// Peers tied at the cut-off distance are chosen uniformly at random.
    pub fn k_nearest<R, F>(&self, unit: usize, k: usize, eligible: F, rng: &mut R, out: &mut Vec<usize>)
    where
        R: Rng + ?Sized,
        F: Fn(usize) -> bool,
    {
        out.clear();
        if k == 0 {
            return;
        }
        let order = &self.order[unit];
        let dist = &self.dist[unit];
        let mut group: Vec<usize> = Vec::new();
        let mut pos = 0;
        while pos < order.len() && out.len() < k {
            let d = dist[pos];
            group.clear();
            while pos < order.len() && dist[pos] == d {
                let j = order[pos] as usize;
                if eligible(j) {
                    group.push(j);
                }
                pos += 1;
            }
            let need = k - out.len();
            if group.len() <= need {
                out.extend_from_slice(&group);
            } else {
                let (picked, _) = group.partial_shuffle(rng, need);
                out.extend_from_slice(picked);
            }
        }
    }

    /// Whether `other` is among the nearest eligible peers of `unit`
    /// (ties included).
    pub fn is_nearest<F>(&self, unit: usize, other: usize, eligible: F) -> bool
    where
        F: Fn(usize) -> bool,
    {
        let order = &self.order[unit];
        let dist = &self.dist[unit];
        let Some(first) = order.iter().position(|&j| eligible(j as usize)) else {
            return false;
        };
        let d = dist[first];
        order[first..]
            .iter()
            .zip(&dist[first..])
            .take_while(|(_, &dj)| dj == d)
            .any(|(&j, _)| j as usize == other)
    }
}
