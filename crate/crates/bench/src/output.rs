use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::metrics::{MetricSeries, RunRecord, StepRecord};
use crate::BenchError;

#[derive(Debug, Serialize, Deserialize)]
struct RawRow {
    t: usize,
    run: usize,
    filter: String,
    x_true: f64,
    y_true: f64,
    x_est: f64,
    y_est: f64,
    omega_true: f64,
    omega_est: f64,
    eta2_est: f64,
    sigma_r2_est: f64,
    sigma_b2_est: f64,
    collapsed: bool,
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    t: usize,
    filter: &'a str,
    rmse_pos: f64,
    rmse_omega: f64,
    rel_rmse: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SweepRow {
    t: usize,
    beta: f64,
    rmse_omega: f64,
    rmse_pos: f64,
}

/// Writes one row per step per run.
pub fn write_raw<W: Write>(w: W, runs: &[RunRecord]) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    for r in runs {
        for s in &r.steps {
            out.serialize(RawRow {
                t: s.t,
                run: r.run,
                filter: r.filter.clone(),
                x_true: s.x_true,
                y_true: s.y_true,
                x_est: s.x_est,
                y_est: s.y_est,
                omega_true: s.omega_true,
                omega_est: s.omega_est,
                eta2_est: s.eta2_est,
                sigma_r2_est: s.sigma_r2_est,
                sigma_b2_est: s.sigma_b2_est,
                collapsed: s.collapsed,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads records written by [`write_raw`], grouped by filter then run.
///
/// A run with fewer than `horizon` rows stopped on a filter error and is
/// marked collapsed at the first missing step; error messages are not
/// stored in the file.
pub fn read_raw<R: Read>(r: R, horizon: usize) -> Result<Vec<RunRecord>, BenchError> {
    let mut grouped: BTreeMap<(String, usize), Vec<StepRecord>> = BTreeMap::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let row: RawRow = row?;
        grouped.entry((row.filter, row.run)).or_default().push(StepRecord {
            t: row.t,
            x_true: row.x_true,
            y_true: row.y_true,
            x_est: row.x_est,
            y_est: row.y_est,
            omega_true: row.omega_true,
            omega_est: row.omega_est,
            eta2_est: row.eta2_est,
            sigma_r2_est: row.sigma_r2_est,
            sigma_b2_est: row.sigma_b2_est,
            collapsed: row.collapsed,
        });
    }
    Ok(grouped
        .into_iter()
        .map(|((filter, run), steps)| {
            let collapse_step = steps
                .iter()
                .find(|s| s.collapsed)
                .map(|s| s.t)
                .or_else(|| (steps.len() < horizon).then_some(steps.len() + 1));
            RunRecord { run, filter, steps, collapse_step, error: None }
        })
        .collect())
}

/// Writes the per-step aggregate of each filter.
pub fn write_summary<W: Write>(w: W, series: &[(String, MetricSeries)]) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    for (filter, m) in series {
        for (i, (p, o)) in m.rmse_pos.iter().zip(&m.rmse_omega).enumerate() {
            let rel = m.rel_rmse.as_ref().map(|r| r[i]);
            out.serialize(SummaryRow { t: i + 1, filter, rmse_pos: *p, rmse_omega: *o, rel_rmse: rel })?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes a beta sweep: one row per beta per step.
pub fn write_sweep<W: Write>(w: W, sweep: &[(f64, MetricSeries)]) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    for (beta, m) in sweep {
        for (i, (o, p)) in m.rmse_omega.iter().zip(&m.rmse_pos).enumerate() {
            out.serialize(SweepRow { t: i + 1, beta: *beta, rmse_omega: *o, rmse_pos: *p })?;
        }
    }
    out.flush()?;
    Ok(())
}
