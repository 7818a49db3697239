//! Stationary return-generating processes.
//!
//! A [`ProcessSpec`] knows its exact marginal moments, its autocovariance
//! function and how to draw a path from a per-path random stream.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::exact::{self, Rational};
use crate::{Error, Result};

/// Default upper bound on the number of paths [`enumerate_paths`] will visit.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Tolerance on the total probability of a discrete process.
const PROB_SUM_TOL: f64 = 1e-12;

/// A stationary return process.
///
/// Construct through the validating constructors; the enum is public so
/// downstream code can match on the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProcessSpec {
    /// i.i.d. `N(mu, sigma^2)`.
    Gaussian { mu: f64, sigma: f64 },
    /// i.i.d. `mu + scale * T_nu`.
    #[serde(rename = "studentt")]
    StudentT { mu: f64, scale: f64, nu: f64 },
    /// i.i.d. draws from a finite distribution.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    /// Stationary Gaussian AR(1) with marginal variance `sigma^2`.
    Ar1 { mu: f64, sigma: f64, phi: f64 },
}

impl ProcessSpec {
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        let spec = ProcessSpec::Gaussian { mu, sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn student_t(mu: f64, scale: f64, nu: f64) -> Result<Self> {
        let spec = ProcessSpec::StudentT { mu, scale, nu };
        spec.validate()?;
        Ok(spec)
    }

    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let spec = ProcessSpec::Discrete { values, probs };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ar1(mu: f64, sigma: f64, phi: f64) -> Result<Self> {
        let spec = ProcessSpec::Ar1 { mu, sigma, phi };
        spec.validate()?;
        Ok(spec)
    }

    /// A fair six-sided die.
    pub fn die() -> Self {
        ProcessSpec::Discrete {
            values: (1..=6).map(f64::from).collect(),
            probs: vec![1.0 / 6.0; 6],
        }
    }

    /// A fair coin with outcomes `lo` and `hi`.
    pub fn coin(lo: f64, hi: f64) -> Self {
        ProcessSpec::Discrete {
            values: vec![lo, hi],
            probs: vec![0.5, 0.5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, x: f64| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!("{name} must be finite, got {x}")))
            }
        };
        let positive = |name: &str, x: f64| {
            finite(name, x)?;
            if x > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(format!("{name} must be > 0, got {x}")))
            }
        };
        match self {
            ProcessSpec::Gaussian { mu, sigma } => {
                finite("mu", *mu)?;
                positive("sigma", *sigma)
            }
            ProcessSpec::StudentT { mu, scale, nu } => {
                finite("mu", *mu)?;
                positive("scale", *scale)?;
                positive("nu", *nu)
            }
            ProcessSpec::Ar1 { mu, sigma, phi } => {
                finite("mu", *mu)?;
                positive("sigma", *sigma)?;
                finite("phi", *phi)?;
                if phi.abs() < 1.0 {
                    Ok(())
                } else {
                    Err(Error::validation(format!(
                        "ar1 requires |phi| < 1 for stationarity, got {phi}"
                    )))
                }
            }
            ProcessSpec::Discrete { values, probs } => {
                if values.is_empty() {
                    return Err(Error::validation("discrete process needs at least one value"));
                }
                if values.len() != probs.len() {
                    return Err(Error::validation(format!(
                        "{} values but {} probabilities",
                        values.len(),
                        probs.len()
                    )));
                }
                for &v in values {
                    finite("value", v)?;
                }
                for &p in probs {
                    finite("probability", p)?;
                    if p < 0.0 {
                        return Err(Error::validation(format!("negative probability {p}")));
                    }
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::validation(format!(
                        "probabilities sum to {total}, expected 1"
                    )));
                }
                if moments(self).sigma2.is_none() {
                    return Err(Error::validation("discrete process has zero variance"));
                }
                Ok(())
            }
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, ProcessSpec::Gaussian { .. } | ProcessSpec::Ar1 { .. })
    }

    pub fn is_iid(&self) -> bool {
        !matches!(self, ProcessSpec::Ar1 { .. })
    }

    /// Whether `E[|R|^order]` is finite.
    pub fn has_finite_moment(&self, order: u32) -> bool {
        match *self {
            ProcessSpec::StudentT { nu, .. } => f64::from(order) < nu,
            _ => true,
        }
    }
}

/// Marginal moments of a process. Absent fields do not exist for the process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mu: Option<f64>,
    pub sigma2: Option<f64>,
    /// `E[(R - mu)^4]`
    pub fourth_central: Option<f64>,
    /// `Var((R - mu)^2) = fourth_central - sigma2^2`
    pub var_y: Option<f64>,
}

impl Moments {
    fn complete(mu: f64, sigma2: f64, fourth_central: f64) -> Self {
        Moments {
            mu: Some(mu),
            sigma2: Some(sigma2),
            fourth_central: Some(fourth_central),
            var_y: Some(fourth_central - sigma2 * sigma2),
        }
    }

    pub fn require_mu(&self) -> Result<f64> {
        self.mu
            .ok_or_else(|| Error::unavailable("mean", "process has no finite mean"))
    }

    pub fn require_sigma2(&self) -> Result<f64> {
        self.sigma2
            .ok_or_else(|| Error::unavailable("variance", "process has no finite variance"))
    }

    pub fn require_var_y(&self) -> Result<f64> {
        self.var_y
            .ok_or_else(|| Error::unavailable("fourth moment", "fourth moment unavailable"))
    }
}

/// Closed-form marginal moments.
pub fn moments(spec: &ProcessSpec) -> Moments {
    match *spec {
        ProcessSpec::Gaussian { mu, sigma } | ProcessSpec::Ar1 { mu, sigma, .. } => {
            let s2 = sigma * sigma;
            Moments::complete(mu, s2, 3.0 * s2 * s2)
        }
        ProcessSpec::StudentT { mu, scale, nu } => {
            let s2 = scale * scale;
            let sigma2 = (nu > 2.0).then(|| s2 * nu / (nu - 2.0));
            let fourth_central =
                (nu > 4.0).then(|| 3.0 * s2 * s2 * nu * nu / ((nu - 2.0) * (nu - 4.0)));
            Moments {
                mu: (nu > 1.0).then_some(mu),
                sigma2,
                fourth_central,
                var_y: sigma2.zip(fourth_central).map(|(v, f)| f - v * v),
            }
        }
        ProcessSpec::Discrete {
            ref values,
            ref probs,
        } => {
            let mu: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum();
            let (mut m2, mut m4) = (0.0, 0.0);
            for (v, p) in values.iter().zip(probs) {
                let d2 = (v - mu) * (v - mu);
                m2 += p * d2;
                m4 += p * d2 * d2;
            }
            Moments {
                mu: Some(mu),
                sigma2: (m2 > 0.0).then_some(m2),
                fourth_central: Some(m4),
                var_y: (m2 > 0.0).then_some(m4 - m2 * m2),
            }
        }
    }
}

/// Moments in exact rational arithmetic, available when the inputs are
/// rational and the moments are rational functions of them.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoments {
    pub mu: Rational,
    pub sigma2: Rational,
    pub fourth_central: Option<Rational>,
    pub var_y: Option<Rational>,
}

pub fn exact_moments(spec: &ProcessSpec) -> Option<ExactMoments> {
    let r = exact::rationalize;
    match *spec {
        ProcessSpec::Gaussian { mu, sigma } => {
            let s2 = r(sigma)? * r(sigma)?;
            let fourth = Rational::from_integer(3.into()) * &s2 * &s2;
            let var_y = &fourth - &s2 * &s2;
            Some(ExactMoments {
                mu: r(mu)?,
                sigma2: s2,
                fourth_central: Some(fourth),
                var_y: Some(var_y),
            })
        }
        ProcessSpec::StudentT { mu, scale, nu } => {
            if nu <= 2.0 {
                return None;
            }
            let s2 = r(scale)? * r(scale)?;
            let nu = r(nu)?;
            let two = exact::ratio(2, 1);
            let four = exact::ratio(4, 1);
            let sigma2 = &s2 * &nu / (&nu - &two);
            let fourth = (nu > four).then(|| {
                exact::ratio(3, 1) * &s2 * &s2 * &nu * &nu / ((&nu - &two) * (&nu - &four))
            });
            let var_y = fourth.as_ref().map(|f| f - &sigma2 * &sigma2);
            Some(ExactMoments {
                mu: r(mu)?,
                sigma2,
                fourth_central: fourth,
                var_y,
            })
        }
        ProcessSpec::Discrete {
            ref values,
            ref probs,
        } => {
            let vs: Vec<Rational> = values.iter().map(|&v| r(v)).collect::<Option<_>>()?;
            let ps: Vec<Rational> = probs.iter().map(|&p| r(p)).collect::<Option<_>>()?;
            let mu: Rational = vs.iter().zip(&ps).map(|(v, p)| v * p).sum();
            let mut m2 = exact::ratio(0, 1);
            let mut m4 = exact::ratio(0, 1);
            for (v, p) in vs.iter().zip(&ps) {
                let d = v - &mu;
                let d2 = &d * &d;
                m2 += p * &d2;
                m4 += p * &d2 * &d2;
            }
            let var_y = &m4 - &m2 * &m2;
            Some(ExactMoments {
                mu,
                sigma2: m2,
                fourth_central: Some(m4),
                var_y: Some(var_y),
            })
        }
        ProcessSpec::Ar1 { .. } => None,
    }
}

/// `gamma(k) = Cov(R_t, R_{t+k})`.
pub fn autocovariance(spec: &ProcessSpec, lag: u64) -> Result<f64> {
    let sigma2 = moments(spec).require_sigma2()?;
    Ok(match *spec {
        ProcessSpec::Ar1 { phi, .. } => sigma2 * phi.powi(lag.min(i32::MAX as u64) as i32),
        _ if lag == 0 => sigma2,
        _ => 0.0,
    })
}

/// Draws one path of `horizon` returns from `rng`.
///
/// The AR(1) recursion starts from its stationary marginal, so every step of
/// the path has the same distribution.
pub fn sample_path<R: Rng + ?Sized>(spec: &ProcessSpec, horizon: usize, rng: &mut R) -> Vec<f64> {
    let mut path = Vec::with_capacity(horizon);
    let mut sampler = PathSampler::new(spec);
    sampler.fill(rng, horizon, &mut path);
    path
}

/// Reusable sampler that avoids rebuilding distribution tables per path.
pub(crate) struct PathSampler<'a> {
    spec: &'a ProcessSpec,
    kind: SamplerKind,
}

enum SamplerKind {
    Gaussian,
    StudentT(StudentT<f64>),
    Discrete(WeightedIndex<f64>),
    Ar1 { innovation_sd: f64 },
}

impl<'a> PathSampler<'a> {
    pub(crate) fn new(spec: &'a ProcessSpec) -> Self {
        let kind = match *spec {
            ProcessSpec::Gaussian { .. } => SamplerKind::Gaussian,
            ProcessSpec::StudentT { nu, .. } => {
                SamplerKind::StudentT(StudentT::new(nu).expect("validated nu > 0"))
            }
            ProcessSpec::Discrete { ref probs, .. } => SamplerKind::Discrete(
                WeightedIndex::new(probs.iter().copied()).expect("validated probabilities"),
            ),
            ProcessSpec::Ar1 { sigma, phi, .. } => SamplerKind::Ar1 {
                innovation_sd: sigma * (1.0 - phi * phi).sqrt(),
            },
        };
        PathSampler { spec, kind }
    }

    pub(crate) fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R, horizon: usize, out: &mut Vec<f64>) {
        out.clear();
        match (&self.kind, self.spec) {
            (SamplerKind::Gaussian, &ProcessSpec::Gaussian { mu, sigma }) => {
                out.extend((0..horizon).map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    mu + sigma * z
                }));
            }
            (SamplerKind::StudentT(dist), &ProcessSpec::StudentT { mu, scale, .. }) => {
                out.extend((0..horizon).map(|_| mu + scale * dist.sample(rng)));
            }
            (SamplerKind::Discrete(index), ProcessSpec::Discrete { values, .. }) => {
                out.extend((0..horizon).map(|_| values[index.sample(rng)]));
            }
            (&SamplerKind::Ar1 { innovation_sd }, &ProcessSpec::Ar1 { mu, sigma, phi }) => {
                let mut x = 0.0;
                for step in 0..horizon {
                    let z: f64 = StandardNormal.sample(rng);
                    x = if step == 0 {
                        sigma * z
                    } else {
                        phi * x + innovation_sd * z
                    };
                    out.push(mu + x);
                }
            }
            _ => unreachable!("sampler built for a different process"),
        }
    }
}

/// Iterator over every path of a discrete process with its probability.
#[derive(Debug, Clone)]
pub struct PathEnumerator {
    values: Vec<f64>,
    probs: Vec<f64>,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for PathEnumerator {
    type Item = (Vec<f64>, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let path = self.digits.iter().map(|&d| self.values[d]).collect();
        let prob = self.digits.iter().map(|&d| self.probs[d]).product();
        // odometer increment, last step fastest
        self.done = true;
        for d in self.digits.iter_mut().rev() {
            *d += 1;
            if *d < self.values.len() {
                self.done = false;
                break;
            }
            *d = 0;
        }
        Some((path, prob))
    }
}

/// Enumerates all `|values|^horizon` paths of a discrete process.
pub fn enumerate_paths(spec: &ProcessSpec, horizon: usize, cap: u64) -> Result<PathEnumerator> {
    let ProcessSpec::Discrete { values, probs } = spec else {
        return Err(Error::Unsupported(
            "exact enumeration requires a discrete process".into(),
        ));
    };
    let count = enumeration_size(values.len(), horizon);
    match count {
        Some(n) if n <= cap => {}
        _ => {
            return Err(Error::EnumerationTooLarge {
                states: format!("{}^{}", values.len(), horizon),
                cap,
            })
        }
    }
    Ok(PathEnumerator {
        values: values.clone(),
        probs: probs.clone(),
        digits: vec![0; horizon],
        done: false,
    })
}

/// `n^horizon`, or `None` on overflow.
pub fn enumeration_size(n: usize, horizon: usize) -> Option<u64> {
    let exp = u32::try_from(horizon).ok()?;
    (n as u64).checked_pow(exp)
}

impl fmt::Display for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessSpec::Gaussian { mu, sigma } => write!(f, "gaussian:mu={mu},sigma={sigma}"),
            ProcessSpec::StudentT { mu, scale, nu } => {
                write!(f, "studentt:mu={mu},scale={scale},nu={nu}")
            }
            ProcessSpec::Ar1 { mu, sigma, phi } => write!(f, "ar1:mu={mu},sigma={sigma},phi={phi}"),
            ProcessSpec::Discrete { values, probs } => {
                let join = |xs: &[f64]| {
                    xs.iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join(";")
                };
                write!(f, "discrete:values={},probs={}", join(values), join(probs))
            }
        }
    }
}

/// Parses `die`, `coin`, `gaussian[:mu=..,sigma=..]`,
/// `studentt[:mu=..,scale=..,nu=..]`, `ar1[:mu=..,sigma=..,phi=..]` and
/// `discrete:values=v1;v2;..,probs=p1;p2;..`. Numbers may be fractions.
impl FromStr for ProcessSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (kind, params) = text.split_once(':').unwrap_or((text, ""));
        let mut fields = ProcessFields::default();
        for item in params.split(',').filter(|s| !s.trim().is_empty()) {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                Error::Config(format!("expected key=value in process spec, got `{item}`"))
            })?;
            let key = key.trim();
            match key {
                "values" | "probs" => {
                    let list = value
                        .split(';')
                        .map(|v| parse_num(key, v))
                        .collect::<Result<Vec<_>>>()?;
                    if key == "values" {
                        fields.values = Some(list);
                    } else {
                        fields.probs = Some(list);
                    }
                }
                _ => fields.set_scalar(key, parse_num(key, value)?)?,
            }
        }
        fields.kind = Some(kind.trim().to_ascii_lowercase());
        fields.build()
    }
}

fn parse_num(key: &str, text: &str) -> Result<f64> {
    exact::parse_number(text)
        .ok_or_else(|| Error::Config(format!("`{text}` is not a number (key `{key}`)")))
}

/// Loosely-typed process description as it appears in config files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcessFields {
    pub kind: Option<String>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub scale: Option<f64>,
    pub nu: Option<f64>,
    pub phi: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub probs: Option<Vec<f64>>,
}

impl ProcessFields {
    fn set_scalar(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "mu" => &mut self.mu,
            "sigma" => &mut self.sigma,
            "scale" => &mut self.scale,
            "nu" => &mut self.nu,
            "phi" => &mut self.phi,
            other => return Err(Error::Config(format!("unknown process parameter `{other}`"))),
        };
        *slot = Some(value);
        Ok(())
    }

    pub fn build(&self) -> Result<ProcessSpec> {
        let kind = self
            .kind
            .as_deref()
            .ok_or_else(|| Error::Config("process kind missing".into()))?;
        let mu = self.mu.unwrap_or(0.0);
        let spec = match kind {
            "die" => ProcessSpec::die(),
            "coin" => match self.values.as_deref() {
                None => ProcessSpec::coin(0.0, 1.0),
                Some(&[lo, hi]) => ProcessSpec::coin(lo, hi),
                Some(_) => return Err(Error::Config("coin takes exactly two values".into())),
            },
            "gaussian" | "normal" => ProcessSpec::Gaussian {
                mu,
                sigma: self.sigma.unwrap_or(1.0),
            },
            "studentt" | "student-t" | "t" => ProcessSpec::StudentT {
                mu,
                scale: self.scale.or(self.sigma).unwrap_or(1.0),
                nu: self
                    .nu
                    .ok_or_else(|| Error::Config("studentt requires nu".into()))?,
            },
            "ar1" => ProcessSpec::Ar1 {
                mu,
                sigma: self.sigma.unwrap_or(1.0),
                phi: self
                    .phi
                    .ok_or_else(|| Error::Config("ar1 requires phi".into()))?,
            },
            "discrete" => {
                let values = self
                    .values
                    .clone()
                    .ok_or_else(|| Error::Config("discrete requires values".into()))?;
                let probs = match &self.probs {
                    Some(p) => p.clone(),
                    None => vec![1.0 / values.len() as f64; values.len()],
                };
                ProcessSpec::Discrete { values, probs }
            }
            other => return Err(Error::Config(format!("unknown process kind `{other}`"))),
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}
