use crate::BenchError;

/// Estimate and truth for one step of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub x_true: f64,
    pub y_true: f64,
    pub x_est: f64,
    pub y_est: f64,
    pub omega_true: f64,
    pub omega_est: f64,
    pub eta2_est: f64,
    pub sigma_r2_est: f64,
    pub sigma_b2_est: f64,
    /// Set from the collapse onset onwards.
    pub collapsed: bool,
}

impl StepRecord {
    pub fn squared_position_error(&self) -> f64 {
        (self.x_est - self.x_true).powi(2) + (self.y_est - self.y_true).powi(2)
    }

    pub fn squared_omega_error(&self) -> f64 {
        (self.omega_est - self.omega_true).powi(2)
    }
}

/// One Monte Carlo run of one filter.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub filter: String,
    /// Steps the filter produced; shorter than the horizon when it failed.
    pub steps: Vec<StepRecord>,
    pub collapse_step: Option<usize>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn collapsed(&self) -> bool {
        self.collapse_step.is_some()
    }

    /// Root mean square position error over the steps this run produced.
    pub fn position_rmse(&self) -> f64 {
        if self.steps.is_empty() {
            return f64::NAN;
        }
        (self.steps.iter().map(StepRecord::squared_position_error).sum::<f64>() / self.steps.len() as f64).sqrt()
    }

    /// Root mean square position error over steps in `[from, to]`.
    pub fn position_rmse_between(&self, from: usize, to: usize) -> f64 {
        let sel: Vec<f64> =
            self.steps.iter().filter(|s| s.t >= from && s.t <= to).map(StepRecord::squared_position_error).collect();
        if sel.is_empty() {
            return f64::NAN;
        }
        (sel.iter().sum::<f64>() / sel.len() as f64).sqrt()
    }
}

/// Per-step error series aggregated over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    /// `rmse_pos[t - 1]`: RMS over runs of the position error at step `t`, m.
    pub rmse_pos: Vec<f64>,
    /// Same for the turn rate, rad/s.
    pub rmse_omega: Vec<f64>,
    /// Mean of `rmse_pos` over the trajectory, m.
    pub avg_rmse_pos: f64,
    /// Reference RMS / subject RMS per step, when a reference was given.
    pub rel_rmse: Option<Vec<f64>>,
    pub n_runs: usize,
    pub n_collapsed: usize,
}

impl MetricSeries {
    pub fn collapse_rate(&self) -> f64 {
        self.n_collapsed as f64 / self.n_runs as f64
    }

    /// Mean turn-rate RMSE over the trajectory.
    pub fn avg_rmse_omega(&self) -> f64 {
        mean(&self.rmse_omega)
    }

    pub fn with_reference(mut self, reference: &MetricSeries) -> Result<Self, BenchError> {
        self.rel_rmse = Some(relative_series(&reference.rmse_pos, &self.rmse_pos)?);
        Ok(self)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Per-step position RMS over runs from equally shaped `[x, y]` series.
pub fn positional_rmse(estimates: &[Vec<[f64; 2]>], truth: &[Vec<[f64; 2]>]) -> Result<MetricSeries, BenchError> {
    if estimates.is_empty() || estimates.len() != truth.len() {
        return Err(BenchError::Shape(format!("{} estimate runs vs {} truth runs", estimates.len(), truth.len())));
    }
    let horizon = truth[0].len();
    if estimates.iter().chain(truth).any(|r| r.len() != horizon) {
        return Err(BenchError::Shape("runs differ in horizon".into()));
    }
    let n = estimates.len() as f64;
    let rmse_pos: Vec<f64> = (0..horizon)
        .map(|t| {
            let ss: f64 = estimates
                .iter()
                .zip(truth)
                .map(|(e, x)| (e[t][0] - x[t][0]).powi(2) + (e[t][1] - x[t][1]).powi(2))
                .sum();
            (ss / n).sqrt()
        })
        .collect();
    Ok(MetricSeries {
        avg_rmse_pos: mean(&rmse_pos),
        rmse_omega: vec![0.0; horizon],
        rmse_pos,
        rel_rmse: None,
        n_runs: estimates.len(),
        n_collapsed: 0,
    })
}

/// `reference / subject` elementwise. Both zero gives 1.
pub fn relative_series(reference: &[f64], subject: &[f64]) -> Result<Vec<f64>, BenchError> {
    if reference.len() != subject.len() {
        return Err(BenchError::Shape(format!("reference {} vs subject {} steps", reference.len(), subject.len())));
    }
    Ok(reference
        .iter()
        .zip(subject)
        .map(|(r, s)| if *r == 0.0 && *s == 0.0 { 1.0 } else { r / s })
        .collect())
}

/// Aggregates run records of one filter. Each step averages over the runs
/// that reached it.
pub fn aggregate(runs: &[RunRecord], horizon: usize) -> Result<MetricSeries, BenchError> {
    if runs.is_empty() {
        return Err(BenchError::Shape("no runs to aggregate".into()));
    }
    let mut pos = vec![0.0; horizon];
    let mut om = vec![0.0; horizon];
    let mut count = vec![0usize; horizon];
    for r in runs {
        for s in &r.steps {
            if s.t == 0 || s.t > horizon {
                return Err(BenchError::Shape(format!("step {} outside horizon {horizon}", s.t)));
            }
            pos[s.t - 1] += s.squared_position_error();
            om[s.t - 1] += s.squared_omega_error();
            count[s.t - 1] += 1;
        }
    }
    let per_step = |sum: &[f64]| -> Vec<f64> {
        sum.iter().zip(&count).map(|(s, c)| if *c == 0 { f64::NAN } else { (s / *c as f64).sqrt() }).collect()
    };
    let rmse_pos = per_step(&pos);
    let reached: Vec<f64> = rmse_pos.iter().copied().filter(|v| v.is_finite()).collect();
    Ok(MetricSeries {
        avg_rmse_pos: if reached.is_empty() { f64::NAN } else { mean(&reached) },
        rmse_omega: per_step(&om),
        rmse_pos,
        rel_rmse: None,
        n_runs: runs.len(),
        n_collapsed: runs.iter().filter(|r| r.collapsed()).count(),
    })
}

/// Mean and standard error of a sample.
pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = mean(v);
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}
