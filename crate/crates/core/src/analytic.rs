//! Closed-form moments of the cumulative return `U` and the cumulative
//! squared deviation `V` for a (process, schedule) pair.
//!
//! Three families of formulas are dispatched on explicitly:
//!
//! * i.i.d. with finite fourth moment: `Var(V) = Var((R - mu)^2) * sum a_j^4`,
//! * i.i.d. Gaussian: the same with `Var((R - mu)^2) = 2 sigma^4`,
//! * stationary Gaussian AR(1): quadratic forms in the autocovariance, with
//!   `Cov((R_i - mu)^2, (R_j - mu)^2) = 2 gamma(i - j)^2`.
//!
//! The assumptions each value rests on are recorded in [`MomentReport`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::exposure::{self, Schedule};
use crate::process::{self, ProcessSpec};
use crate::summation::CompensatedSum;
use crate::{Error, Result};

/// Horizon above which AR(1) quadratic forms use the O(t) recursion.
pub const AR1_DIRECT_MAX_HORIZON: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Assumption {
    Iid,
    Gaussian,
    FiniteFourthMoment,
    Ar1,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Assumption::Iid => "iid",
            Assumption::Gaussian => "gaussian",
            Assumption::FiniteFourthMoment => "finite-fourth-moment",
            Assumption::Ar1 => "ar1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    Enumeration,
    MonteCarlo,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::ClosedForm => "closed-form",
            Provenance::Enumeration => "enumeration",
            Provenance::MonteCarlo => "monte-carlo",
        })
    }
}

/// The moments that analytic, simulated and enumerated reports share.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    MeanU,
    VarU,
    MeanV,
    VarV,
    /// Variance of the exposure-normalized return `U / e1`.
    VarUNorm,
}

impl Quantity {
    pub const ALL: [Quantity; 5] = [
        Quantity::MeanU,
        Quantity::VarU,
        Quantity::MeanV,
        Quantity::VarV,
        Quantity::VarUNorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::MeanU => "E[U]",
            Quantity::VarU => "Var(U)",
            Quantity::MeanV => "E[V]",
            Quantity::VarV => "Var(V)",
            Quantity::VarUNorm => "Var(U/e1)",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Standard errors attached to an empirical [`MomentReport`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StdErrors {
    pub mean_u: Option<f64>,
    pub var_u: Option<f64>,
    pub mean_v: Option<f64>,
    pub var_v: Option<f64>,
    pub var_u_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub mean_u: Option<f64>,
    pub var_u: Option<f64>,
    pub mean_v: Option<f64>,
    pub var_v: Option<f64>,
    pub var_u_norm: Option<f64>,
    pub std_errors: Option<StdErrors>,
    /// Number of paths behind an empirical report, or the ensemble size an
    /// analytic report describes.
    pub n_paths: Option<u64>,
    pub provenance: Provenance,
    pub assumptions: BTreeSet<Assumption>,
}

impl MomentReport {
    pub fn get(&self, q: Quantity) -> Option<f64> {
        match q {
            Quantity::MeanU => self.mean_u,
            Quantity::VarU => self.var_u,
            Quantity::MeanV => self.mean_v,
            Quantity::VarV => self.var_v,
            Quantity::VarUNorm => self.var_u_norm,
        }
    }

    pub fn std_error(&self, q: Quantity) -> Option<f64> {
        let se = self.std_errors.as_ref()?;
        match q {
            Quantity::MeanU => se.mean_u,
            Quantity::VarU => se.var_u,
            Quantity::MeanV => se.mean_v,
            Quantity::VarV => se.var_v,
            Quantity::VarUNorm => se.var_u_norm,
        }
    }
}

/// Assumptions the closed form for `q` relies on.
pub fn assumptions_for(spec: &ProcessSpec, q: Quantity) -> BTreeSet<Assumption> {
    let mut set = BTreeSet::new();
    match spec {
        ProcessSpec::Ar1 { .. } => {
            set.insert(Assumption::Ar1);
            if q == Quantity::VarV {
                set.insert(Assumption::Gaussian);
            }
        }
        ProcessSpec::Gaussian { .. } => {
            set.insert(Assumption::Iid);
            if q == Quantity::VarV {
                set.insert(Assumption::Gaussian);
            }
        }
        _ => {
            set.insert(Assumption::Iid);
            if q == Quantity::VarV {
                set.insert(Assumption::FiniteFourthMoment);
            }
        }
    }
    set
}

/// `E[U] = mu * sum a_j`
pub fn expected_return(spec: &ProcessSpec, schedule: &Schedule) -> Result<f64> {
    let mu = process::moments(spec).require_mu()?;
    Ok(mu * schedule.measures().e1)
}

/// `E[V] = sigma^2 * sum a_j^2`, for any stationary process.
pub fn expected_risk(spec: &ProcessSpec, schedule: &Schedule) -> Result<f64> {
    let sigma2 = process::moments(spec).require_sigma2()?;
    Ok(sigma2 * schedule.measures().e2)
}

/// `Var(U) = sum_j sum_l a_j a_l gamma(j - l)`.
pub fn var_cum_return(spec: &ProcessSpec, schedule: &Schedule) -> Result<f64> {
    let sigma2 = process::moments(spec).require_sigma2()?;
    match *spec {
        ProcessSpec::Ar1 { phi, .. } => {
            Ok(sigma2 * geometric_quadratic_form(schedule.exposures(), phi))
        }
        _ => Ok(sigma2 * schedule.measures().e2),
    }
}

/// Variance of the cumulative squared deviation.
pub fn var_cum_risk(spec: &ProcessSpec, schedule: &Schedule) -> Result<f64> {
    let m = process::moments(spec);
    match *spec {
        ProcessSpec::Gaussian { .. } => {
            let sigma2 = m.require_sigma2()?;
            Ok(2.0 * sigma2 * sigma2 * schedule.measures().e4)
        }
        ProcessSpec::Ar1 { phi, .. } => {
            let sigma2 = m.require_sigma2()?;
            let squares: Vec<f64> = schedule.exposures().iter().map(|a| a * a).collect();
            Ok(2.0 * sigma2 * sigma2 * geometric_quadratic_form(&squares, phi * phi))
        }
        _ => {
            let var_y = m.var_y.ok_or_else(|| {
                Error::unavailable("Var(V)", "fourth moment unavailable for this process")
            })?;
            Ok(var_y * schedule.measures().e4)
        }
    }
}

/// Lump-sum `Var(V)` for a Gaussian process grouped by lag:
/// `2 t sigma^4 + 4 sum_{k=1}^{t-1} (t - k) gamma(k)^2`.
pub fn var_cum_risk_lump_by_lag(spec: &ProcessSpec, horizon: usize) -> Result<f64> {
    if !spec.is_gaussian() {
        return Err(Error::Unsupported(
            "the lag-grouped risk variance requires a Gaussian process".into(),
        ));
    }
    let sigma2 = process::moments(spec).require_sigma2()?;
    let mut acc = CompensatedSum::default();
    acc.add(2.0 * horizon as f64 * sigma2 * sigma2);
    for k in 1..horizon {
        let g = process::autocovariance(spec, k as u64)?;
        acc.add(4.0 * (horizon - k) as f64 * g * g);
    }
    Ok(acc.value())
}

/// `sum_j sum_l b_j b_l rho^|j - l|`.
///
/// Direct double sum up to [`AR1_DIRECT_MAX_HORIZON`], then the recursion
/// `h_j = rho (h_{j-1} + b_{j-1})`, which is the same sum in O(t).
pub fn geometric_quadratic_form(b: &[f64], rho: f64) -> f64 {
    if b.len() <= AR1_DIRECT_MAX_HORIZON {
        geometric_quadratic_form_direct(b, rho)
    } else {
        geometric_quadratic_form_recursive(b, rho)
    }
}

pub(crate) fn geometric_quadratic_form_direct(b: &[f64], rho: f64) -> f64 {
    let n = b.len();
    let mut powers = Vec::with_capacity(n);
    let mut p = 1.0;
    for _ in 0..n {
        powers.push(p);
        p *= rho;
    }
    let mut acc = CompensatedSum::default();
    for (j, &bj) in b.iter().enumerate() {
        let mut row = 0.0;
        for (l, &bl) in b.iter().enumerate() {
            row += bl * powers[j.abs_diff(l)];
        }
        acc.add(bj * row);
    }
    acc.value()
}

pub(crate) fn geometric_quadratic_form_recursive(b: &[f64], rho: f64) -> f64 {
    let mut diag = CompensatedSum::default();
    let mut cross = CompensatedSum::default();
    let mut h = 0.0;
    let mut prev = 0.0;
    for (j, &bj) in b.iter().enumerate() {
        if j > 0 {
            h = rho * (h + prev);
        }
        diag.add(bj * bj);
        cross.add(bj * h);
        prev = bj;
    }
    diag.value() + 2.0 * cross.value()
}

/// `Var(U / e1) = Var(U) / e1^2`.
pub fn var_normalized_return(spec: &ProcessSpec, schedule: &Schedule) -> Result<f64> {
    let e1 = schedule.measures().e1;
    if e1 <= 0.0 {
        return Err(Error::validation("schedule has zero return exposure"));
    }
    Ok(var_cum_return(spec, schedule)? / (e1 * e1))
}

/// Per-period return, volatility and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annualized {
    pub a_return: f64,
    pub a_risk: f64,
    pub rr: f64,
}

/// `Return(t) / t`, `sqrt(Risk(t) / t)` and their ratio for a lump-sum
/// position held over `horizon` periods.
pub fn annualized(spec: &ProcessSpec, horizon: usize) -> Result<Annualized> {
    let lump = Schedule::lump_sum(horizon)?;
    let t = horizon as f64;
    let a_return = expected_return(spec, &lump)? / t;
    let a_risk = (expected_risk(spec, &lump)? / t).sqrt();
    Ok(Annualized {
        a_return,
        a_risk,
        rr: a_return / a_risk,
    })
}

/// Relative excess of DCA's expected risk over uniform exposure at equal
/// return exposure: `(t - 1) / (3 (t + 1))`.
pub fn dca_unit_risk_gap(horizon: usize) -> f64 {
    let t = horizon as f64;
    (t - 1.0) / (3.0 * (t + 1.0))
}

/// Absolute excess `sigma^2 (t + 1)(t - 1) / (12 t)`.
pub fn dca_unit_risk_difference(sigma2: f64, horizon: usize) -> f64 {
    let t = horizon as f64;
    sigma2 * (t + 1.0) * (t - 1.0) / (12.0 * t)
}

/// The same gap computed from the two schedules' expected risks.
pub fn dca_unit_risk_gap_from_schedules(spec: &ProcessSpec, horizon: usize) -> Result<f64> {
    let dca = expected_risk(spec, &Schedule::dca(horizon)?)?;
    let unit = expected_risk(spec, &Schedule::uniform_exposure(horizon)?)?;
    Ok((dca - unit) / unit)
}

/// `Var(U / A)` for a cross-section of positions `a` with covariance `cov`:
/// `(sum_a a^2 s_a^2 + 2 sum_{a<b} a_a a_b C_ab) / A^2`.
pub fn cross_sectional_variance(exposures: &[f64], cov: &[Vec<f64>], total: f64) -> Result<f64> {
    let n = exposures.len();
    if cov.len() != n || cov.iter().any(|row| row.len() != n) {
        return Err(Error::validation(format!(
            "covariance must be {n}x{n} to match the exposures"
        )));
    }
    if total.is_nan() || total <= 0.0 {
        return Err(Error::validation("total capital must be > 0"));
    }
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        if cov[i][i].is_nan() || cov[i][i] < 0.0 {
            return Err(Error::validation("covariance diagonal must be non-negative"));
        }
        for j in 0..i {
            if (cov[i][j] - cov[j][i]).abs() > 1e-9 {
                return Err(Error::validation("covariance matrix is not symmetric"));
            }
        }
    }
    let mut acc = CompensatedSum::default();
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        acc.add(exposures[i] * exposures[i] * cov[i][i]);
        for j in (i + 1)..n {
            acc.add(2.0 * exposures[i] * exposures[j] * cov[i][j]);
        }
    }
    Ok(acc.value() / (total * total))
}

/// Closed-form per-path report. Unavailable moments are left empty.
pub fn moment_report(spec: &ProcessSpec, schedule: &Schedule) -> MomentReport {
    let mut assumptions = BTreeSet::new();
    let mut take = |q: Quantity, r: Result<f64>| {
        r.ok().inspect(|_| assumptions.extend(assumptions_for(spec, q)))
    };
    MomentReport {
        mean_u: take(Quantity::MeanU, expected_return(spec, schedule)),
        var_u: take(Quantity::VarU, var_cum_return(spec, schedule)),
        mean_v: take(Quantity::MeanV, expected_risk(spec, schedule)),
        var_v: take(Quantity::VarV, var_cum_risk(spec, schedule)),
        var_u_norm: take(Quantity::VarUNorm, var_normalized_return(spec, schedule)),
        std_errors: None,
        n_paths: None,
        provenance: Provenance::ClosedForm,
        assumptions,
    }
}

/// Closed form for a single quantity.
pub fn quantity(spec: &ProcessSpec, schedule: &Schedule, q: Quantity) -> Result<f64> {
    match q {
        Quantity::MeanU => expected_return(spec, schedule),
        Quantity::VarU => var_cum_return(spec, schedule),
        Quantity::MeanV => expected_risk(spec, schedule),
        Quantity::VarV => var_cum_risk(spec, schedule),
        Quantity::VarUNorm => var_normalized_return(spec, schedule),
    }
}

/// Moments of the averages of `U` and `V` over `n_paths` independent paths:
/// means unchanged, variances divided by `n_paths`.
pub fn ensemble_moments(spec: &ProcessSpec, schedule: &Schedule, n_paths: u64) -> Result<MomentReport> {
    if n_paths == 0 {
        return Err(Error::validation("ensemble size must be at least 1"));
    }
    let n = n_paths as f64;
    let mut report = moment_report(spec, schedule);
    report.var_u = report.var_u.map(|v| v / n);
    report.var_v = report.var_v.map(|v| v / n);
    report.var_u_norm = report.var_u_norm.map(|v| v / n);
    report.n_paths = Some(n_paths);
    Ok(report)
}

/// Exact rational counterparts for i.i.d. processes with rational inputs.
pub mod exact {
    use super::*;
    use crate::exact::Rational;
    use crate::exposure::exact_measures;
    use crate::process::exact_moments;
    use num_traits::Zero;

    fn unavailable(what: &str) -> Error {
        Error::Unsupported(format!("no exact value for {what} with this process"))
    }

    pub fn quantity(spec: &ProcessSpec, schedule: &Schedule, q: Quantity) -> Result<Rational> {
        if !spec.is_iid() {
            return Err(unavailable(q.name()));
        }
        let m = exact_moments(spec).ok_or_else(|| unavailable(q.name()))?;
        let e = exact_measures(schedule);
        match q {
            Quantity::MeanU => Ok(m.mu * e.e1),
            Quantity::VarU => Ok(m.sigma2 * e.e2),
            Quantity::MeanV => Ok(m.sigma2 * e.e2),
            Quantity::VarV => m
                .var_y
                .map(|v| v * e.e4)
                .ok_or_else(|| Error::unavailable("Var(V)", "fourth moment unavailable")),
            Quantity::VarUNorm => {
                if e.e1.is_zero() {
                    return Err(Error::validation("schedule has zero return exposure"));
                }
                Ok(m.sigma2 * e.e2 / (&e.e1 * &e.e1))
            }
        }
    }

    /// Exact `(E[V^dca] - E[V^unit]) / E[V^unit]` from the two schedules.
    pub fn dca_unit_risk_gap_from_schedules(horizon: usize) -> Result<Rational> {
        let dca = exposure::exact_measures(&Schedule::dca(horizon)?).e2;
        let unit = exposure::exact_measures(&Schedule::uniform_exposure(horizon)?).e2;
        Ok((dca - &unit) / unit)
    }

    pub fn dca_unit_risk_gap(horizon: usize) -> Rational {
        let t = horizon as i64;
        crate::exact::ratio(t - 1, 3 * (t + 1))
    }

    /// `(a_return, a_risk^2, rr^2)` for a lump-sum position; the square root
    /// is left to the caller since it is generally irrational.
    pub fn annualized_squares(spec: &ProcessSpec, horizon: usize) -> Result<(Rational, Rational, Rational)> {
        let lump = Schedule::lump_sum(horizon)?;
        let t = crate::exact::ratio(horizon as i64, 1);
        let ret = quantity(spec, &lump, Quantity::MeanU)? / &t;
        let risk2 = quantity(spec, &lump, Quantity::MeanV)? / &t;
        let rr2 = &ret * &ret / &risk2;
        Ok((ret, risk2, rr2))
    }
}
