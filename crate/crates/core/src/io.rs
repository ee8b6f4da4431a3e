//! Writers for fields, reports, tables and two-column plot data.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimates::{EstimateReport, RefinementTable};
use crate::field::Field;

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn write_field(field: &Field, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    field.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ReportRow<'a> {
    estimate_id: &'a str,
    case: &'a str,
    mu: f64,
    nr: usize,
    nz: usize,
    lhs: f64,
    rhs: f64,
    ratio: f64,
    prefactor: Option<f64>,
    residual: f64,
    skipped: Option<&'a str>,
    warning: Option<&'a str>,
}

/// One row per report.
pub fn write_reports_csv<W: Write>(reports: &[EstimateReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in reports {
        out.serialize(ReportRow {
            estimate_id: &r.estimate_id,
            case: &r.case,
            mu: r.mu,
            nr: r.nr,
            nz: r.nz,
            lhs: r.lhs,
            rhs: r.rhs,
            ratio: r.ratio,
            prefactor: r.prefactor,
            residual: r.residual,
            skipped: r.skipped.as_deref(),
            warning: r.warning.as_deref(),
        })
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_table_csv<W: Write>(table: &RefinementTable, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "lhs", "rhs", "ratio", "error", "observed_order"]).map_err(csv_err)?;
    for row in &table.rows {
        out.write_record([
            row.n.to_string(),
            row.lhs.to_string(),
            row.rhs.to_string(),
            row.ratio.to_string(),
            row.error.to_string(),
            row.observed_order.map_or(String::new(), |o| o.to_string()),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Whitespace-separated `x y` lines after `#` comment lines, readable by gnuplot.
pub fn write_plot_data<W: Write>(mut w: W, comments: &[&str], points: &[(f64, f64)]) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    for (x, y) in points {
        writeln!(w, "{x:e} {y:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_plot_file(path: &Path, comments: &[&str], points: &[(f64, f64)]) -> Result<()> {
    write_plot_data(create(path)?, comments, points)
}

/// `sigma,reR,imR` rows.
pub fn write_contour_csv<W: Write>(samples: &[(f64, f64, f64)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["sigma", "reR", "imR"]).map_err(csv_err)?;
    for (s, re, im) in samples {
        out.write_record([s.to_string(), re.to_string(), im.to_string()]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// File-name friendly form of an estimate id or weight, e.g. `T1.1` → `T1_1`.
pub fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}
