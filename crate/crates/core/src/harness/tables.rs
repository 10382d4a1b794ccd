use std::io::Write;

use crate::error::{Error, Result};
use crate::sampling::DesignKind;

use super::{CellResult, MCReport};

/// One `day,rho,design,m,n_bar,true,estimate,rab,se` record.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub day: usize,
    pub rho: f64,
    pub design: DesignKind,
    pub m: usize,
    pub n_bar: usize,
    pub true_value: f64,
    pub estimate: f64,
    pub rab: f64,
    pub se: f64,
}

impl From<&CellResult> for TableRow {
    fn from(c: &CellResult) -> Self {
        TableRow {
            day: c.day,
            rho: c.rho,
            design: c.design,
            m: c.m,
            n_bar: c.n_bar,
            true_value: c.true_value,
            estimate: c.mean_estimate,
            rab: c.rab,
            se: c.rel_se,
        }
    }
}

fn design_rank(d: DesignKind) -> usize {
    DesignKind::ALL.iter().position(|&k| k == d).unwrap_or(usize::MAX)
}

/// Rows ordered by day, rho, design (canonical order), m, n_bar.
pub fn summarize_tables(report: &MCReport) -> Vec<TableRow> {
    let mut rows: Vec<TableRow> = report.cells.iter().map(TableRow::from).collect();
    rows.sort_by(|a, b| {
        a.day
            .cmp(&b.day)
            .then(a.rho.total_cmp(&b.rho))
            .then(design_rank(a.design).cmp(&design_rank(b.design)))
            .then(a.m.cmp(&b.m))
            .then(a.n_bar.cmp(&b.n_bar))
    });
    rows
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn row_fields(r: &TableRow) -> Vec<String> {
    vec![
        r.day.to_string(),
        r.rho.to_string(),
        r.design.to_string(),
        r.m.to_string(),
        r.n_bar.to_string(),
        r.true_value.to_string(),
        r.estimate.to_string(),
        r.rab.to_string(),
        r.se.to_string(),
    ]
}

const SUMMARY_HEADER: [&str; 9] = ["day", "rho", "design", "m", "n_bar", "true", "estimate", "rab", "se"];

pub fn write_summary_csv<W: Write>(rows: &[TableRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record(row_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Summary rows grouped by scenario name, with a leading `scenario` column.
pub fn write_scenario_csv<W: Write>(groups: &[(&str, &[TableRow])], out: W) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec!["scenario"];
    header.extend(SUMMARY_HEADER);
    w.write_record(&header)?;
    for (name, rows) in groups {
        for r in *rows {
            let mut rec = vec![name.to_string()];
            rec.extend(row_fields(r));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Relative SE with one row per design and one column per (day, rho),
/// named `day{d}_rho{r}`. Rows must share a single (m, n_bar).
pub fn write_se_pivot_csv<W: Write>(rows: &[TableRow], out: W) -> Result<()> {
    let mut cols: Vec<(usize, f64)> = Vec::new();
    let mut designs: Vec<DesignKind> = Vec::new();
    for r in rows {
        if !cols.iter().any(|&(d, p)| d == r.day && p == r.rho) {
            cols.push((r.day, r.rho));
        }
        if !designs.contains(&r.design) {
            designs.push(r.design);
        }
    }
    cols.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    designs.sort_by_key(|&d| design_rank(d));
    let mut w = writer(out);
    let mut header = vec!["design".to_string()];
    header.extend(cols.iter().map(|(d, p)| format!("day{d}_rho{p}")));
    w.write_record(&header)?;
    for d in designs {
        let mut rec = vec![d.to_string()];
        for &(day, rho) in &cols {
            let cell: Vec<&TableRow> =
                rows.iter().filter(|r| r.design == d && r.day == day && r.rho == rho).collect();
            match cell.as_slice() {
                [] => rec.push(String::new()),
                [r] => rec.push(r.se.to_string()),
                _ => {
                    return Err(Error::invalid(
                        "table",
                        format!("several (m, n_bar) cells for {d} day {day} rho {rho}"),
                    ))
                }
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `I(FPPS) / I(design)` for one report cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRow {
    pub day: usize,
    pub rho: f64,
    pub m: usize,
    pub n_bar: usize,
    pub design: DesignKind,
    pub entropy: f64,
    /// `f64::INFINITY` when the design's entropy is zero.
    pub ratio: f64,
}

/// Entropy ratios against the FPPS cell with the same (day, rho, m, n_bar).
pub fn relative_entropy_table(report: &MCReport) -> Result<Vec<EntropyRow>> {
    let mut out = Vec::new();
    for c in report.cells.iter() {
        let base = report.find(DesignKind::Fpps, c.day, c.rho, c.m, c.n_bar).ok_or_else(|| {
            Error::MissingValue(format!("FPPS entropy for day {} rho {} m {} n_bar {}", c.day, c.rho, c.m, c.n_bar))
        })?;
        let ratio = if c.entropy > 0.0 {
            base.entropy / c.entropy
        } else {
            f64::INFINITY
        };
        out.push(EntropyRow {
            day: c.day,
            rho: c.rho,
            m: c.m,
            n_bar: c.n_bar,
            design: c.design,
            entropy: c.entropy,
            ratio,
        });
    }
    out.sort_by(|a, b| {
        a.day
            .cmp(&b.day)
            .then(a.rho.total_cmp(&b.rho))
            .then(a.m.cmp(&b.m))
            .then(a.n_bar.cmp(&b.n_bar))
            .then(design_rank(a.design).cmp(&design_rank(b.design)))
    });
    Ok(out)
}

/// Writes `day,rho,m,n_bar,design,entropy,ratio`; infinite ratios as `inf`.
pub fn write_entropy_csv<W: Write>(rows: &[EntropyRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["day", "rho", "m", "n_bar", "design", "entropy", "ratio"])?;
    for r in rows {
        let ratio = if r.ratio.is_infinite() { "inf".to_string() } else { r.ratio.to_string() };
        w.write_record([
            r.day.to_string(),
            r.rho.to_string(),
            r.m.to_string(),
            r.n_bar.to_string(),
            r.design.to_string(),
            r.entropy.to_string(),
            ratio,
        ])?;
    }
    w.flush()?;
    Ok(())
}
