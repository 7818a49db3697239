//! Pathwise statistics of a single realization.

use serde::{Deserialize, Serialize};

use crate::exposure::Schedule;
use crate::summation::CompensatedSum;
use crate::{Error, Result};

/// Horizon above which sums switch to compensated accumulation.
const COMPENSATED_ABOVE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    /// Cumulative return `sum_j a_j r_j`.
    pub u: f64,
    /// Cumulative squared deviation `sum_j a_j^2 (r_j - mu)^2` around the process mean.
    pub v_mu: f64,
    /// `u / e1`
    pub u_norm: f64,
    /// `v_mu / e2`
    pub v_norm: f64,
    /// Unweighted realized mean of the path.
    pub m: f64,
    /// `sum_j (r_j - m)^2`, i.e. `(t - 1)` times the unbiased sample variance.
    pub v_sample: f64,
}

/// Which [`PathStats`] field to average across an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathField {
    U,
    VMu,
    UNorm,
    VNorm,
}

impl PathField {
    fn get(self, s: &PathStats) -> f64 {
        match self {
            PathField::U => s.u,
            PathField::VMu => s.v_mu,
            PathField::UNorm => s.u_norm,
            PathField::VNorm => s.v_norm,
        }
    }
}

enum Acc {
    Plain(f64),
    Compensated(CompensatedSum),
}

impl Acc {
    fn new(n: usize) -> Self {
        if n > COMPENSATED_ABOVE {
            Acc::Compensated(CompensatedSum::default())
        } else {
            Acc::Plain(0.0)
        }
    }

    fn add(&mut self, x: f64) {
        match self {
            Acc::Plain(s) => *s += x,
            Acc::Compensated(c) => c.add(x),
        }
    }

    fn value(&self) -> f64 {
        match self {
            Acc::Plain(s) => *s,
            Acc::Compensated(c) => c.value(),
        }
    }
}

/// Weighted cumulative return and squared deviation of `path` under `schedule`.
///
/// Returns `(u, v_mu)`; the hot path of the ensemble engine.
pub(crate) fn weighted_sums(path: &[f64], exposures: &[f64], mu: f64) -> (f64, f64) {
    let mut u = Acc::new(path.len());
    let mut v = Acc::new(path.len());
    for (&r, &a) in path.iter().zip(exposures) {
        let d = r - mu;
        u.add(a * r);
        v.add(a * a * d * d);
    }
    (u.value(), v.value())
}

pub fn path_stats(path: &[f64], schedule: &Schedule, mu: f64) -> Result<PathStats> {
    if path.len() != schedule.horizon() {
        return Err(Error::validation(format!(
            "path has {} returns but schedule `{}` spans {} periods",
            path.len(),
            schedule.label(),
            schedule.horizon()
        )));
    }
    let measures = schedule.measures();
    let (u, v_mu) = weighted_sums(path, schedule.exposures(), mu);

    let n = path.len();
    let mut total = Acc::new(n);
    path.iter().for_each(|&r| total.add(r));
    let m = total.value() / n as f64;
    let mut v_sample = Acc::new(n);
    path.iter().for_each(|&r| v_sample.add((r - m) * (r - m)));

    Ok(PathStats {
        u,
        v_mu,
        u_norm: u / measures.e1,
        v_norm: v_mu / measures.e2,
        m,
        v_sample: v_sample.value(),
    })
}

/// Cross-path mean and unbiased (`N - 1`) variance of one field.
///
/// The variance is `None` for a single path.
pub fn ensemble_average(stats: &[PathStats], field: PathField) -> Result<(f64, Option<f64>)> {
    if stats.is_empty() {
        return Err(Error::validation("ensemble average of an empty list"));
    }
    let n = stats.len() as f64;
    let mean = stats.iter().map(|s| field.get(s)).sum::<f64>() / n;
    let var = (stats.len() >= 2).then(|| {
        stats
            .iter()
            .map(|s| (field.get(s) - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    });
    Ok((mean, var))
}
