use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameSnapshot;

/// Relabelling applied inside one map quadrant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadrantRule {
    /// Fraction of verified infected relabelled as unverified.
    pub hide_verified: f64,
    /// Fraction of unverified infected relabelled as verified.
    pub reveal_unverified: f64,
}

/// Quadrants are numbered counter-clockwise from the top right: first
/// top-right, second top-left, third bottom-left, fourth bottom-right.
/// Row 0 is the top of the map.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreeningScenario {
    pub quadrants: [QuadrantRule; 4],
}

impl ScreeningScenario {
    /// 80% of verified cases hidden in the first and third quadrants; 80%
    /// and 50% of unverified cases revealed in the second and fourth.
    pub fn heterogeneous() -> Self {
        let hide = QuadrantRule {
            hide_verified: 0.8,
            reveal_unverified: 0.0,
        };
        let reveal = |f| QuadrantRule {
            hide_verified: 0.0,
            reveal_unverified: f,
        };
        ScreeningScenario {
            quadrants: [hide, reveal(0.8), hide, reveal(0.5)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for q in &self.quadrants {
            for v in [q.hide_verified, q.reveal_unverified] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid("screening", format!("multiplier {v} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// Quadrant index (0 = first) of a cell on an evenly divisible grid.
pub fn quadrant_of(rows: usize, cols: usize, cell: usize) -> usize {
    let (r, c) = (cell / cols, cell % cols);
    match (r < rows / 2, c >= cols / 2) {
        (true, true) => 0,
        (true, false) => 1,
        (false, false) => 2,
        (false, true) => 3,
    }
}

/// Relabels verified status per quadrant by uniform selection of persons.
/// The infected labels, and therefore the target total, are untouched.
pub fn apply_screening<R: Rng + ?Sized>(
    frame: &FrameSnapshot,
    scenario: &ScreeningScenario,
    rng: &mut R,
) -> Result<FrameSnapshot> {
    scenario.validate()?;
    let (rows, cols) = (frame.spec.rows, frame.spec.cols);
    if rows % 2 != 0 || cols % 2 != 0 {
        return Err(Error::invalid("grid", format!("{rows}x{cols} map does not split into equal quadrants")));
    }
    let mut out = frame.clone();
    for (q, rule) in scenario.quadrants.iter().enumerate() {
        let mut verified = Vec::new();
        let mut hidden = Vec::new();
        for (cell, c) in frame.clusters.iter().enumerate() {
            if quadrant_of(rows, cols, cell) != q {
                continue;
            }
            for j in 0..c.size() {
                if c.v[j] {
                    verified.push((cell, j));
                } else if c.y[j] {
                    hidden.push((cell, j));
                }
            }
        }
        for (pool, frac, to) in [(&verified, rule.hide_verified, false), (&hidden, rule.reveal_unverified, true)] {
            let k = (frac * pool.len() as f64).round() as usize;
            if k == 0 {
                continue;
            }
            for idx in sample(rng, pool.len(), k) {
                let (cell, j) = pool[idx];
                out.clusters[cell].v[j] = to;
            }
        }
    }
    Ok(out)
}
