//! CSV and text export/import. All floating-point output uses 17
//! significant digits so files round-trip bit-exactly and reruns are
//! byte-identical.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::correlators::Method;
use crate::error::{Error, Result};
use crate::model::{Path, TimeGrid};

/// 17 significant digits, scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a path as `t,value` rows.
pub fn write_path_csv(out: &mut impl Write, path: &Path) -> std::io::Result<()> {
    writeln!(out, "t,value")?;
    let grid = path.grid();
    for k in 0..grid.n() {
        writeln!(out, "{},{}", fmt_f64(grid.node(k)), fmt_f64(path.get(k)))?;
    }
    Ok(())
}

/// Read a `t,value` CSV produced by [`write_path_csv`]. The time column is
/// used to reconstruct the grid (uniform spacing is assumed and checked
/// loosely against the first/last entries).
pub fn read_path_csv(input: &mut impl BufRead) -> Result<Path> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidConfig {
            reason: format!("I/O error reading path CSV: {e}"),
        })?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("t,")) {
            continue;
        }
        let mut parts = line.split(',');
        let (t, v) = match (parts.next(), parts.next()) {
            (Some(t), Some(v)) => (t, v),
            _ => {
                return Err(Error::InvalidConfig {
                    reason: format!("malformed CSV row {}: {line:?}", lineno + 1),
                })
            }
        };
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| Error::InvalidConfig {
                reason: format!("bad number in CSV row {}: {s:?}", lineno + 1),
            })
        };
        times.push(parse(t)?);
        values.push(parse(v)?);
    }
    if times.len() < TimeGrid::MIN_NODES {
        return Err(Error::GridTooSmall {
            n: times.len(),
            min: TimeGrid::MIN_NODES,
        });
    }
    let grid = TimeGrid::new(times[0], *times.last().unwrap(), times.len())?;
    Path::new(grid, values)
}

/// One row of a correlator scan.
pub struct ScanRow {
    pub tau: f64,
    pub value: Complex64,
    pub method: Method,
    pub accuracy: f64,
}

/// Write `tau,re,im,method,accuracy` rows.
pub fn write_scan_csv(out: &mut impl Write, rows: &[ScanRow]) -> std::io::Result<()> {
    writeln!(out, "tau,re,im,method,accuracy")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.tau),
            fmt_f64(r.value.re),
            fmt_f64(r.value.im),
            r.method.label(),
            fmt_f64(r.accuracy)
        )?;
    }
    Ok(())
}

/// Write an ensemble as CSV, one trajectory per column.
pub fn write_ensemble_csv(out: &mut impl Write, paths: &[Path]) -> std::io::Result<()> {
    if paths.is_empty() {
        return Ok(());
    }
    let grid = paths[0].grid();
    write!(out, "t")?;
    for i in 0..paths.len() {
        write!(out, ",traj_{i}")?;
    }
    writeln!(out)?;
    for k in 0..grid.n() {
        write!(out, "{}", fmt_f64(grid.node(k)))?;
        for p in paths {
            write!(out, ",{}", fmt_f64(p.get(k)))?;
        }
        writeln!(out)?;
    }
    Ok(())
}
