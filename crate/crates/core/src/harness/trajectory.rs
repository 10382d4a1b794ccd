use crate::epidemic::EpidemicRun;

/// Daily Moran's I of per-cell I+A counts. Days with a constant field
/// (no defined statistic) are `None`.
pub fn moran_trajectory(run: &EpidemicRun) -> Vec<Option<f64>> {
    run.daily.iter().map(|d| d.moran_total).collect()
}

/// Centered moving average; the window shrinks at the ends.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Rise, dip near the epidemic peak, rise again, read off smoothed
/// Moran's I. Indices are 0-based days into the trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCheck {
    pub start: usize,
    pub peak: usize,
    pub t_max: usize,
    pub t_dip: usize,
    pub end: usize,
    /// Share of positive, negative and positive smoothed differences in the
    /// three segments.
    pub shares: [f64; 3],
}

const WINDOW: usize = 5;
const DIP_REACH: usize = 10;
const MIN_SHARE: f64 = 2.0 / 3.0;

impl TrajectoryCheck {
    /// `None` when the series is too short or undefined throughout.
    pub fn evaluate(moran: &[Option<f64>], infected: &[u64]) -> Option<Self> {
        let start = moran.iter().position(Option::is_some)?;
        let mut filled = Vec::with_capacity(moran.len() - start);
        let mut last = 0.0;
        for v in &moran[start..] {
            last = v.unwrap_or(last);
            filled.push(last);
        }
        let s = moving_average(&filled, WINDOW);
        let peak = argmax(infected)?;
        if peak <= start + 1 {
            return None;
        }
        let p = peak - start;
        let t_max = argmax_f(&s[..p])?;
        let lo = (t_max + 1).max(p.saturating_sub(DIP_REACH));
        let hi = (p + DIP_REACH + 1).min(s.len());
        if lo >= hi {
            return None;
        }
        let t_dip = lo + argmin_f(&s[lo..hi])?;
        let end = (t_dip + DIP_REACH).min(s.len() - 1);
        let share = |a: usize, b: usize, up: bool| {
            if b <= a {
                return 0.0;
            }
            let n = (a..b).filter(|&t| (s[t + 1] > s[t]) == up && s[t + 1] != s[t]).count();
            n as f64 / (b - a) as f64
        };
        Some(TrajectoryCheck {
            start,
            peak,
            t_max: start + t_max,
            t_dip: start + t_dip,
            end: start + end,
            shares: [share(0, t_max, true), share(t_max, t_dip, false), share(t_dip, end, true)],
        })
    }

    pub fn passes(&self) -> bool {
        self.t_max > self.start && self.end > self.t_dip && self.shares.iter().all(|&x| x >= MIN_SHARE)
    }
}

fn argmax(v: &[u64]) -> Option<usize> {
    (0..v.len()).max_by_key(|&i| (v[i], std::cmp::Reverse(i)))
}

fn argmax_f(v: &[f64]) -> Option<usize> {
    (0..v.len()).reduce(|a, b| if v[b] > v[a] { b } else { a })
}

fn argmin_f(v: &[f64]) -> Option<usize> {
    (0..v.len()).reduce(|a, b| if v[b] < v[a] { b } else { a })
}
