use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid_pde::ScalarField2D;
use crate::pipeline::Solution;

/// Seventeen significant digits.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes a header and rows of already formatted fields.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Integrity(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// `t, y, f_1, f_2, ...` for every grid node, `t` slowest.
fn write_fields(path: &Path, header: &[&str], fields: &[&ScalarField2D]) -> Result<()> {
    let g = fields[0].grid().clone();
    let rows = (0..g.n_t()).flat_map(|n| {
        let g = g.clone();
        (0..g.n_y()).map(move |i| {
            let mut row = vec![fmt(g.t(n)), fmt(g.y(i))];
            row.extend(fields.iter().map(|f| fmt(f.get(n, i))));
            row
        })
    });
    write_csv(path, header, rows)
}

/// Writes `rho_bar.csv`, `pbar.csv`, `strategy.csv` and `value.csv` into `dir`.
pub fn write_solution(
    dir: &Path,
    sol: &Solution,
    x_range: (f64, f64),
    value_times: usize,
    value_wealths: usize,
) -> Result<()> {
    write_fields(&dir.join("rho_bar.csv"), &["t", "y", "rho_bar"], &[&sol.rho.phi])?;
    write_fields(
        &dir.join("pbar.csv"),
        &["t", "y", "pbar", "pbar_y"],
        &[&sol.pbar.pbar, &sol.pbar.pbar_y],
    )?;
    write_fields(
        &dir.join("strategy.csv"),
        &["t", "y", "pbar", "pi_star", "c_star"],
        &[&sol.pbar.pbar, &sol.strategy.pi_star, &sol.strategy.c_star],
    )?;

    let horizon = sol.ctx.grid().horizon();
    let nt = value_times.max(2);
    let ts: Vec<f64> = (0..nt).map(|k| horizon * k as f64 / (nt - 1) as f64).collect();
    let xs = crate::verify::geometric_probes(x_range.0, x_range.1, value_wealths.max(1));
    let table = sol.value.probe_table(&ts, &xs)?;
    write_csv(
        &dir.join("value.csv"),
        &["t", "x", "y", "g", "v"],
        table
            .iter()
            .map(|r| vec![fmt(r.t), fmt(r.x), fmt(r.y), fmt(r.g), fmt(r.v)]),
    )
}
