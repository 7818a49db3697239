//! Investment timing schedules and their exposure measures.
//!
//! A schedule is stored as the cumulative invested fraction `a_j` held during
//! period `j`; the per-period investment weights are `w_j = a_j - a_{j-1}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::exact::{self, Rational};
use crate::summation::CompensatedSum;
use crate::{Error, Result};

const BUDGET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    a: Vec<f64>,
    label: String,
}

impl Schedule {
    /// Everything invested at the first period.
    pub fn lump_sum(horizon: usize) -> Result<Self> {
        check_horizon(horizon)?;
        Ok(Schedule {
            a: vec![1.0; horizon],
            label: format!("lump:{horizon}"),
        })
    }

    /// Evenly spaced investment, `a_j = j / t`.
    pub fn dca(horizon: usize) -> Result<Self> {
        check_horizon(horizon)?;
        let t = horizon as f64;
        Ok(Schedule {
            a: (1..=horizon).map(|j| j as f64 / t).collect(),
            label: format!("dca:{horizon}"),
        })
    }

    /// Constant exposure `(t + 1) / (2t)`, matching the return exposure of
    /// [`Schedule::dca`] over the same horizon. Invests less than the full
    /// budget for `t > 1`.
    pub fn uniform_exposure(horizon: usize) -> Result<Self> {
        check_horizon(horizon)?;
        let t = horizon as f64;
        Ok(Schedule {
            a: vec![(t + 1.0) / (2.0 * t); horizon],
            label: format!("unit:{horizon}"),
        })
    }

    /// Nothing invested until the final period.
    pub fn last_period(horizon: usize) -> Result<Self> {
        check_horizon(horizon)?;
        let mut a = vec![0.0; horizon];
        a[horizon - 1] = 1.0;
        Ok(Schedule {
            a,
            label: format!("last:{horizon}"),
        })
    }

    /// Schedule from per-period investment weights.
    pub fn custom(weights: &[f64]) -> Result<Self> {
        check_horizon(weights.len())?;
        let mut acc = CompensatedSum::default();
        let mut a = Vec::with_capacity(weights.len());
        for &w in weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::validation(format!(
                    "investment weights must be finite and >= 0, got {w}"
                )));
            }
            acc.add(w);
            a.push(acc.value());
        }
        let label = format!(
            "custom:{}",
            weights
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        Ok(Schedule { a, label })
    }

    /// Schedule from cumulative exposures; they must be finite, non-negative
    /// and non-decreasing.
    pub fn from_cumulative(a: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        check_horizon(a.len())?;
        let mut prev = 0.0;
        for &x in &a {
            if !x.is_finite() || x < prev {
                return Err(Error::validation(
                    "cumulative exposures must be finite, non-negative and non-decreasing",
                ));
            }
            prev = x;
        }
        Ok(Schedule {
            a,
            label: label.into(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.a.len()
    }

    /// Cumulative invested fractions `a_1..a_t`.
    pub fn exposures(&self) -> &[f64] {
        &self.a
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn weights(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.a
            .iter()
            .map(|&x| {
                let w = x - prev;
                prev = x;
                w
            })
            .collect()
    }

    /// `true` when the whole unit budget is eventually invested.
    pub fn is_budgeted(&self) -> bool {
        (self.a[self.a.len() - 1] - 1.0).abs() <= BUDGET_TOL
    }

    pub fn max_exposure(&self) -> f64 {
        self.a.iter().copied().fold(0.0, f64::max)
    }

    /// `true` when exposure exceeds the unit budget at some period.
    pub fn is_leveraged(&self) -> bool {
        self.max_exposure() > 1.0 + BUDGET_TOL
    }

    pub fn measures(&self) -> ExposureMeasures {
        measures(self)
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        Err(Error::validation("horizon must be at least 1"))
    } else {
        Ok(())
    }
}

/// Summaries of a schedule's exposure profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExposureMeasures {
    /// Time-integrated invested capital, `sum_i w_i (t - i + 1)`.
    pub e_time: f64,
    /// Return exposure, `sum_j a_j`.
    pub e1: f64,
    /// Risk exposure, `sum_j a_j^2`.
    pub e2: f64,
    /// `sum_j a_j^4`, which scales the dispersion of the risk statistic.
    pub e4: f64,
}

pub fn measures(s: &Schedule) -> ExposureMeasures {
    let t = s.horizon();
    let mut e_time = CompensatedSum::default();
    let mut e1 = CompensatedSum::default();
    let mut e2 = CompensatedSum::default();
    let mut e4 = CompensatedSum::default();
    let mut prev = 0.0;
    for (j, &a) in s.a.iter().enumerate() {
        e_time.add((a - prev) * (t - j) as f64);
        prev = a;
        let a2 = a * a;
        e1.add(a);
        e2.add(a2);
        e4.add(a2 * a2);
    }
    ExposureMeasures {
        e_time: e_time.value(),
        e1: e1.value(),
        e2: e2.value(),
        e4: e4.value(),
    }
}

/// [`ExposureMeasures`] in exact arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactExposureMeasures {
    pub e_time: Rational,
    pub e1: Rational,
    pub e2: Rational,
    pub e4: Rational,
}

/// Exposure measures of the rational schedule whose entries round to `a_j`.
pub fn exact_measures(s: &Schedule) -> ExactExposureMeasures {
    let t = s.horizon();
    let zero = exact::ratio(0, 1);
    let (mut e_time, mut e1, mut e2, mut e4) = (zero.clone(), zero.clone(), zero.clone(), zero);
    let mut prev = exact::ratio(0, 1);
    for (j, &a) in s.a.iter().enumerate() {
        let a = exact::rationalize(a).expect("schedule entries are finite");
        e_time += (&a - &prev) * exact::ratio((t - j) as i64, 1);
        let a2 = &a * &a;
        e1 += &a;
        e4 += &a2 * &a2;
        e2 += a2;
        prev = a;
    }
    ExactExposureMeasures { e_time, e1, e2, e4 }
}

/// Schedule family as written on the command line, independent of horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScheduleSpec {
    Lump(Option<usize>),
    Dca(Option<usize>),
    Unit(Option<usize>),
    Last(Option<usize>),
    Custom(Vec<f64>),
}

impl ScheduleSpec {
    /// Horizon fixed by the spec itself, if any.
    pub fn horizon(&self) -> Option<usize> {
        match self {
            ScheduleSpec::Lump(t)
            | ScheduleSpec::Dca(t)
            | ScheduleSpec::Unit(t)
            | ScheduleSpec::Last(t) => *t,
            ScheduleSpec::Custom(w) => Some(w.len()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ScheduleSpec::Lump(_) => "lump",
            ScheduleSpec::Dca(_) => "dca",
            ScheduleSpec::Unit(_) => "unit",
            ScheduleSpec::Last(_) => "last",
            ScheduleSpec::Custom(_) => "custom",
        }
    }

    /// Same family at another horizon. Custom schedules keep their weights.
    pub fn with_horizon(&self, horizon: usize) -> ScheduleSpec {
        match self {
            ScheduleSpec::Lump(_) => ScheduleSpec::Lump(Some(horizon)),
            ScheduleSpec::Dca(_) => ScheduleSpec::Dca(Some(horizon)),
            ScheduleSpec::Unit(_) => ScheduleSpec::Unit(Some(horizon)),
            ScheduleSpec::Last(_) => ScheduleSpec::Last(Some(horizon)),
            ScheduleSpec::Custom(w) => ScheduleSpec::Custom(w.clone()),
        }
    }

    /// Builds the schedule; `fallback_horizon` is used when the spec has none.
    pub fn build(&self, fallback_horizon: Option<usize>) -> Result<Schedule> {
        let horizon = || {
            self.horizon().or(fallback_horizon).ok_or_else(|| {
                Error::Config(format!("schedule `{}` needs a horizon", self.kind()))
            })
        };
        match self {
            ScheduleSpec::Lump(_) => Schedule::lump_sum(horizon()?),
            ScheduleSpec::Dca(_) => Schedule::dca(horizon()?),
            ScheduleSpec::Unit(_) => Schedule::uniform_exposure(horizon()?),
            ScheduleSpec::Last(_) => Schedule::last_period(horizon()?),
            ScheduleSpec::Custom(w) => Schedule::custom(w),
        }
    }
}

impl fmt::Display for ScheduleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleSpec::Custom(w) => {
                let parts: Vec<String> = w.iter().map(|x| x.to_string()).collect();
                write!(f, "custom:{}", parts.join(","))
            }
            other => match other.horizon() {
                Some(t) => write!(f, "{}:{t}", other.kind()),
                None => f.write_str(other.kind()),
            },
        }
    }
}

/// `lump:t`, `dca:t`, `unit:t`, `last:t` (horizon optional) or
/// `custom:w1,w2,...`.
impl FromStr for ScheduleSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (kind, arg) = match text.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (text, None),
        };
        let horizon = || -> Result<Option<usize>> {
            arg.map(|a| {
                a.parse::<usize>()
                    .ok()
                    .filter(|&t| t >= 1)
                    .ok_or_else(|| Error::Config(format!("invalid horizon `{a}` in `{text}`")))
            })
            .transpose()
        };
        Ok(match kind {
            "lump" | "ls" => ScheduleSpec::Lump(horizon()?),
            "dca" => ScheduleSpec::Dca(horizon()?),
            "unit" | "uniform" => ScheduleSpec::Unit(horizon()?),
            "last" => ScheduleSpec::Last(horizon()?),
            "custom" => {
                let arg = arg.ok_or_else(|| Error::Config("custom schedule needs weights".into()))?;
                let weights = arg
                    .split(',')
                    .map(|w| {
                        exact::parse_number(w)
                            .ok_or_else(|| Error::Config(format!("invalid weight `{w}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if weights.is_empty() || weights.iter().any(|&w| w < 0.0) {
                    return Err(Error::Config(format!(
                        "custom weights must be non-empty and >= 0 in `{text}`"
                    )));
                }
                ScheduleSpec::Custom(weights)
            }
            other => return Err(Error::Config(format!("unknown schedule `{other}`"))),
        })
    }
}

/// Parses a comma-separated list of schedule specs. Bare numbers continue the
/// weight list of a preceding `custom:` entry.
pub fn parse_schedule_list(text: &str) -> Result<Vec<ScheduleSpec>> {
    let mut items: Vec<String> = Vec::new();
    for token in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let continues_custom = items.last().is_some_and(|s| s.starts_with("custom:"))
            && exact::parse_number(token).is_some();
        match items.last_mut() {
            Some(last) if continues_custom => {
                last.push(',');
                last.push_str(token);
            }
            _ => items.push(token.to_string()),
        }
    }
    items.iter().map(|s| s.parse()).collect()
}
