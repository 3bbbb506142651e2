//! CSV and JSON output. Files are written to a temporary sibling and renamed
//! into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use super::equilibria::EquilibriumRow;
use super::sweep::SweepReport;
use crate::error::Result;

/// Round-trippable formatting with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let mut first = true;
    for c in cells {
        if !first {
            out.push(',');
        }
        out.push_str(&c);
        first = false;
    }
    out.push('\n');
}

/// `t, m_o_1, ..., m_o_n, m_o_U` per stored time.
pub fn trajectory_csv(times: &[f64], projected: &[Vec<f64>]) -> String {
    let n = projected.first().map_or(1, Vec::len) - 1;
    let mut out = String::new();
    push_row(&mut out, std::iter::once("t".to_string()).chain((1..=n).map(|i| format!("m_o_{i}"))).chain(["m_o_U".to_string()]));
    for (t, row) in times.iter().zip(projected) {
        push_row(&mut out, std::iter::once(fmt_f64(*t)).chain(row.iter().map(|&x| fmt_f64(x))));
    }
    out
}

/// One row per tracked equilibrium and grid point.
pub fn sweep_csv(report: &SweepReport) -> String {
    let dim = report.rows.first().map_or(0, |r| r.m.len());
    let mut out = String::new();
    push_row(
        &mut out,
        [report.parameter.as_str().to_string(), "branch".into()]
            .into_iter()
            .chain((1..=dim).map(|i| format!("m_{i}")))
            .chain(["stability".to_string(), "leading_real".to_string()]),
    );
    for r in &report.rows {
        push_row(
            &mut out,
            [fmt_f64(r.parameter), r.branch.to_string()]
                .into_iter()
                .chain(r.m.iter().map(|&x| fmt_f64(x)))
                .chain([r.stability.to_string(), fmt_f64(r.leading_real)]),
        );
    }
    out
}

pub fn equilibria_csv(rows: &[EquilibriumRow]) -> String {
    let n_i = rows.first().map_or(0, |r| r.reduced_x.len());
    let n_o = rows.first().map_or(1, |r| r.projected.len()) - 1;
    let mut out = String::new();
    push_row(
        &mut out,
        ["id".to_string(), "branches".into()]
            .into_iter()
            .chain((1..=n_i).map(|i| format!("x_{i}")))
            .chain(["stability".to_string()])
            .chain((1..=n_o).map(|i| format!("m_o_{i}")))
            .chain(["m_o_U".to_string()])
            .chain((1..=n_i).map(|i| format!("full_x_{i}")))
            .chain(["full_stability".to_string(), "gap".into(), "error".into()]),
    );
    for r in rows {
        let tags: Vec<&str> = r.branches.iter().map(|b| b.as_str()).collect();
        let full_x: Vec<String> = match &r.full_x {
            Some(x) => x.iter().map(|&v| fmt_f64(v)).collect(),
            None => vec![String::new(); n_i],
        };
        let mut err = r.error.clone().unwrap_or_default().replace(['"', ','], " ");
        if !err.is_empty() {
            err = format!("\"{err}\"");
        }
        push_row(
            &mut out,
            [r.id.to_string(), tags.join(" ")]
                .into_iter()
                .chain(r.reduced_x.iter().map(|&x| fmt_f64(x)))
                .chain([r.reduced_stability.to_string()])
                .chain(r.projected.iter().map(|&x| fmt_f64(x)))
                .chain(full_x)
                .chain([
                    r.full_stability.map(|s| s.to_string()).unwrap_or_default(),
                    r.gap.map(fmt_f64).unwrap_or_default(),
                    err,
                ]),
        );
    }
    out
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    let _ = writeln!(s);
    Ok(s)
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json(value)?.as_bytes())
}
