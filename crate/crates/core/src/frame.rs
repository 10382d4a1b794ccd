//! The frozen survey frame for one day: residents per cell with their
//! verified (`v`) and infected (`y`) labels.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::population::GridSpec;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterFrame {
    /// Person identifiers, parallel to `y` and `v`.
    pub persons: Vec<u32>,
    pub y: Vec<bool>,
    pub v: Vec<bool>,
}

impl ClusterFrame {
    pub fn size(&self) -> usize {
        self.persons.len()
    }

    pub fn verified(&self) -> usize {
        self.v.iter().filter(|&&b| b).count()
    }

    pub fn infected(&self) -> usize {
        self.y.iter().filter(|&&b| b).count()
    }

    /// An exchangeable cluster with `verified` verified-infected residents,
    /// `infected - verified` unverified infected and the rest healthy.
    pub fn from_counts(first_id: u32, size: usize, verified: usize, infected: usize) -> Result<Self> {
        if verified > infected || infected > size {
            return Err(Error::invalid(
                "frame",
                format!("need V <= Y <= N, got V={verified} Y={infected} N={size}"),
            ));
        }
        Ok(ClusterFrame {
            persons: (0..size as u32).map(|k| first_id + k).collect(),
            y: (0..size).map(|k| k < infected).collect(),
            v: (0..size).map(|k| k < verified).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSnapshot {
    pub day: usize,
    pub spec: GridSpec,
    pub clusters: Vec<ClusterFrame>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRow {
    pub day: usize,
    pub cell: usize,
    pub size: usize,
    pub verified: usize,
    pub infected: usize,
}

impl FrameSnapshot {
    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(ClusterFrame::size).collect()
    }

    pub fn verified_counts(&self) -> Vec<usize> {
        self.clusters.iter().map(ClusterFrame::verified).collect()
    }

    pub fn infected_counts(&self) -> Vec<usize> {
        self.clusters.iter().map(ClusterFrame::infected).collect()
    }

    pub fn population(&self) -> usize {
        self.clusters.iter().map(ClusterFrame::size).sum()
    }

    /// Known total of verified infected.
    pub fn total_verified(&self) -> usize {
        self.clusters.iter().map(ClusterFrame::verified).sum()
    }

    /// Target total `Y` of infected people.
    pub fn total_infected(&self) -> usize {
        self.clusters.iter().map(ClusterFrame::infected).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters.len() != self.spec.num_cells() {
            return Err(Error::DimensionMismatch(format!(
                "{} clusters for a {}x{} grid",
                self.clusters.len(),
                self.spec.rows,
                self.spec.cols
            )));
        }
        for (i, c) in self.clusters.iter().enumerate() {
            if c.y.len() != c.persons.len() || c.v.len() != c.persons.len() {
                return Err(Error::DimensionMismatch(format!("cluster {i} label lengths")));
            }
            if c.v.iter().zip(&c.y).any(|(&v, &y)| v && !y) {
                return Err(Error::invalid("frame", format!("cluster {i} has v=1 with y=0")));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> impl Iterator<Item = FrameRow> + '_ {
        self.clusters.iter().enumerate().map(move |(cell, c)| FrameRow {
            day: self.day,
            cell,
            size: c.size(),
            verified: c.verified(),
            infected: c.infected(),
        })
    }

    pub fn from_rows(day: usize, spec: GridSpec, rows: &[FrameRow]) -> Result<Self> {
        let mut clusters = vec![None; spec.num_cells()];
        let mut next_id = 0u32;
        let mut sorted: Vec<&FrameRow> = rows.iter().collect();
        sorted.sort_by_key(|r| r.cell);
        for r in sorted {
            if r.cell >= clusters.len() {
                return Err(Error::Csv(format!("cell {} outside grid", r.cell)));
            }
            clusters[r.cell] = Some(ClusterFrame::from_counts(next_id, r.size, r.verified, r.infected)?);
            next_id += r.size as u32;
        }
        let clusters = clusters
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| Error::MissingValue(format!("day {day} cell {i}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(FrameSnapshot { day, spec, clusters })
    }
}

/// Writes `day,cell,N_i,V_i,Y_i` for every snapshot, in day then cell order.
pub fn write_frames_csv<'a, W, I>(frames: I, out: W) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a FrameSnapshot>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["day", "cell", "N_i", "V_i", "Y_i"])?;
    for f in frames {
        for r in f.rows() {
            w.write_record([
                r.day.to_string(),
                r.cell.to_string(),
                r.size.to_string(),
                r.verified.to_string(),
                r.infected.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads frames written by [`write_frames_csv`]. Residents are rebuilt as
/// exchangeable units inside each cell.
pub fn read_frames_csv<R: Read>(spec: GridSpec, input: R) -> Result<Vec<FrameSnapshot>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut by_day: BTreeMap<usize, Vec<FrameRow>> = BTreeMap::new();
    for rec in rd.records() {
        let rec = rec?;
        let field = |k: usize| -> Result<usize> {
            rec.get(k)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Csv(format!("bad frame record {:?}", rec)))
        };
        let row = FrameRow {
            day: field(0)?,
            cell: field(1)?,
            size: field(2)?,
            verified: field(3)?,
            infected: field(4)?,
        };
        by_day.entry(row.day).or_default().push(row);
    }
    by_day
        .into_iter()
        .map(|(day, rows)| FrameSnapshot::from_rows(day, spec, &rows))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> FrameSnapshot {
        let spec = GridSpec::new(2, 2, 1.0).unwrap();
        let rows = [
            FrameRow { day: 3, cell: 0, size: 5, verified: 1, infected: 2 },
            FrameRow { day: 3, cell: 1, size: 0, verified: 0, infected: 0 },
            FrameRow { day: 3, cell: 2, size: 4, verified: 0, infected: 4 },
            FrameRow { day: 3, cell: 3, size: 3, verified: 2, infected: 3 },
        ];
        FrameSnapshot::from_rows(3, spec, &rows).unwrap()
    }

    #[test]
    fn totals_follow_cluster_sums() {
        let f = toy();
        f.validate().unwrap();
        assert_eq!(f.total_verified(), 3);
        assert_eq!(f.total_infected(), 9);
        assert_eq!(f.population(), 12);
        assert!(f.total_infected() >= f.total_verified());
    }

    #[test]
    fn verified_implies_infected() {
        assert!(ClusterFrame::from_counts(0, 3, 2, 1).is_err());
        let mut f = toy();
        f.clusters[0].y[0] = false;
        assert!(f.validate().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let f = toy();
        let mut buf = Vec::new();
        write_frames_csv([&f], &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("day,cell,N_i,V_i,Y_i\n3,0,5,1,2\n"));
        let back = read_frames_csv(f.spec, buf.as_slice()).unwrap();
        assert_eq!(back, vec![f]);
    }

    #[test]
    fn missing_cell_is_an_error() {
        let spec = GridSpec::new(2, 2, 1.0).unwrap();
        let rows = [FrameRow { day: 1, cell: 0, size: 1, verified: 0, infected: 0 }];
        assert!(matches!(FrameSnapshot::from_rows(1, spec, &rows), Err(Error::MissingValue(_))));
    }
}
