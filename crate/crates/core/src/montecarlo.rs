//! Reproducible ensemble simulation and verification against closed forms.
//!
//! Path `i` draws from its own ChaCha8 stream: the key is derived from the
//! master seed and the stream id is `i`. Paths are grouped into fixed-size
//! chunks, each chunk is reduced independently, and chunk results are merged
//! in index order, so the output does not depend on the worker count.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, MomentReport, Provenance, Quantity, StdErrors};
use crate::exposure::Schedule;
use crate::process::{self, PathSampler, ProcessSpec};
use crate::stats::weighted_sums;
use crate::summation::CompensatedSum;
use crate::{Error, Result};

/// Paths per reduction chunk. Part of the reproducibility contract: changing
/// it changes the floating-point reduction order.
const CHUNK_PATHS: u64 = 4096;

pub const DEFAULT_Z_MAX: f64 = 4.0;

/// Absolute tolerance for enumeration-versus-closed-form comparisons.
pub const EXACT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_paths: u64,
    pub horizon: usize,
    pub seed: u64,
    /// Parallelism hint; `0` uses all available cores. Never affects results.
    pub workers: usize,
}

impl EnsembleConfig {
    pub fn new(n_paths: u64, horizon: usize, seed: u64) -> Self {
        EnsembleConfig {
            n_paths,
            horizon,
            seed,
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn validate(&self, schedule: &Schedule) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::validation(
                "variance estimates need at least 2 paths",
            ));
        }
        if self.horizon != schedule.horizon() {
            return Err(Error::validation(format!(
                "horizon {} does not match schedule `{}`",
                self.horizon,
                schedule.label()
            )));
        }
        Ok(())
    }
}

/// Streaming accumulator for the first four central moments.
///
/// Single-value updates follow Welford/Terriberry; [`merge`](Self::merge)
/// combines two partial accumulators exactly (Pébay's pairwise formulas).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;

        let mean = self.mean + delta * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d3 * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;

        *self = MomentAccumulator {
            n: self.n + other.n,
            mean,
            m2,
            m3,
            m4,
        };
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| self.m2 / (self.n - 1) as f64)
    }

    pub fn std_error_of_mean(&self) -> Option<f64> {
        self.variance().map(|v| (v / self.n as f64).sqrt())
    }

    /// Delta-method standard error of [`variance`](Self::variance):
    /// `sqrt((m4 - s^4 (n - 3) / (n - 1)) / n)`.
    pub fn std_error_of_variance(&self) -> Option<f64> {
        if self.n < 4 {
            return None;
        }
        let n = self.n as f64;
        let s2 = self.variance()?;
        let fourth = self.m4 / n;
        let var = (fourth - s2 * s2 * (n - 3.0) / (n - 1.0)) / n;
        Some(var.max(0.0).sqrt())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PathAccumulator {
    u: MomentAccumulator,
    v: MomentAccumulator,
}

impl PathAccumulator {
    fn merge(&mut self, other: &PathAccumulator) {
        self.u.merge(&other.u);
        self.v.merge(&other.v);
    }
}

/// The random stream of path `index` under `seed`.
pub fn path_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn simulate_chunk(
    spec: &ProcessSpec,
    exposures: &[f64],
    mu: f64,
    base: &ChaCha8Rng,
    range: std::ops::Range<u64>,
) -> PathAccumulator {
    let mut sampler = PathSampler::new(spec);
    let mut path = Vec::with_capacity(exposures.len());
    let mut acc = PathAccumulator::default();
    for index in range {
        let mut rng = base.clone();
        rng.set_stream(index);
        sampler.fill(&mut rng, exposures.len(), &mut path);
        let (u, v) = weighted_sums(&path, exposures, mu);
        acc.u.push(u);
        acc.v.push(v);
    }
    acc
}

fn run_accumulate(spec: &ProcessSpec, schedule: &Schedule, config: &EnsembleConfig) -> Result<PathAccumulator> {
    spec.validate()?;
    config.validate(schedule)?;
    let mu = process::moments(spec).require_mu()?;
    let base = ChaCha8Rng::seed_from_u64(config.seed);
    let exposures = schedule.exposures();
    let chunks: Vec<std::ops::Range<u64>> = (0..config.n_paths.div_ceil(CHUNK_PATHS))
        .map(|c| c * CHUNK_PATHS..((c + 1) * CHUNK_PATHS).min(config.n_paths))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let partials: Vec<PathAccumulator> = pool.install(|| {
        chunks
            .into_par_iter()
            .map(|range| simulate_chunk(spec, exposures, mu, &base, range))
            .collect()
    });

    let mut total = PathAccumulator::default();
    for p in &partials {
        total.merge(p);
    }
    Ok(total)
}

/// Simulates `config.n_paths` paths and estimates the moments of `U` and `V`.
pub fn run_ensemble(spec: &ProcessSpec, schedule: &Schedule, config: &EnsembleConfig) -> Result<MomentReport> {
    let acc = run_accumulate(spec, schedule, config)?;
    let e1 = schedule.measures().e1;
    let norm = |x: Option<f64>| x.filter(|_| e1 > 0.0).map(|v| v / (e1 * e1));
    let mut assumptions = std::collections::BTreeSet::new();
    for q in Quantity::ALL {
        assumptions.extend(analytic::assumptions_for(spec, q));
    }
    Ok(MomentReport {
        mean_u: Some(acc.u.mean()),
        var_u: acc.u.variance(),
        mean_v: Some(acc.v.mean()),
        var_v: acc.v.variance(),
        var_u_norm: norm(acc.u.variance()),
        std_errors: Some(StdErrors {
            mean_u: acc.u.std_error_of_mean(),
            var_u: acc.u.std_error_of_variance(),
            mean_v: acc.v.std_error_of_mean(),
            var_v: acc.v.std_error_of_variance(),
            var_u_norm: norm(acc.u.std_error_of_variance()),
        }),
        n_paths: Some(acc.u.count()),
        provenance: Provenance::MonteCarlo,
        assumptions,
    })
}

/// Writes every simulated path as CSV rows `path_index,step,return`.
///
/// Regenerates the same per-path streams as [`run_ensemble`], serially.
pub fn dump_paths<W: Write>(spec: &ProcessSpec, config: &EnsembleConfig, mut out: W) -> Result<()> {
    writeln!(out, "path_index,step,return")?;
    let base = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sampler = PathSampler::new(spec);
    let mut path = Vec::with_capacity(config.horizon);
    for index in 0..config.n_paths {
        let mut rng = base.clone();
        rng.set_stream(index);
        sampler.fill(&mut rng, config.horizon, &mut path);
        for (step, r) in path.iter().enumerate() {
            writeln!(out, "{index},{},{r}", step + 1)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub quantity: Quantity,
    pub analytic: Option<f64>,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    /// `(estimate - analytic) / std_error`
    pub z_score: Option<f64>,
    pub verdict: Verdict,
}

impl VerificationResult {
    fn skipped(quantity: Quantity, reason: impl Into<String>) -> Self {
        VerificationResult {
            quantity,
            analytic: None,
            estimate: None,
            std_error: None,
            z_score: None,
            verdict: Verdict::Skipped(reason.into()),
        }
    }

    /// `true` unless the comparison ran and failed.
    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

fn analytic_or_skip(
    spec: &ProcessSpec,
    schedule: &Schedule,
    q: Quantity,
) -> std::result::Result<f64, VerificationResult> {
    match analytic::quantity(spec, schedule, q) {
        Ok(v) => Ok(v),
        Err(Error::MomentUnavailable { reason, .. }) => Err(VerificationResult::skipped(q, reason)),
        Err(e) => Err(VerificationResult::skipped(q, e.to_string())),
    }
}

/// Moment order of `R` the standard error of the estimate of `q` depends on.
/// `Var(V)` is an estimated variance of squares, so its error needs `E[R^8]`.
pub fn std_error_moment_order(q: Quantity) -> u32 {
    match q {
        Quantity::MeanU => 2,
        Quantity::VarU | Quantity::MeanV | Quantity::VarUNorm => 4,
        Quantity::VarV => 8,
    }
}

/// Compares simulated estimates with closed forms, one z-test per quantity.
///
/// A quantity whose standard error rests on an infinite moment of the
/// process is reported but not tested.
pub fn verify(
    spec: &ProcessSpec,
    schedule: &Schedule,
    config: &EnsembleConfig,
    z_max: f64,
) -> Result<Vec<VerificationResult>> {
    let report = run_ensemble(spec, schedule, config)?;
    Ok(Quantity::ALL
        .iter()
        .map(|&q| {
            let analytic = match analytic_or_skip(spec, schedule, q) {
                Ok(v) => v,
                Err(skipped) => return skipped,
            };
            let (Some(estimate), Some(se)) = (report.get(q), report.std_error(q)) else {
                return VerificationResult::skipped(q, "no estimate available");
            };
            let order = std_error_moment_order(q);
            if !spec.has_finite_moment(order) {
                return VerificationResult {
                    analytic: Some(analytic),
                    estimate: Some(estimate),
                    std_error: None,
                    ..VerificationResult::skipped(
                        q,
                        format!("standard error needs a finite moment of order {order}"),
                    )
                };
            }
            let diff = estimate - analytic;
            let z = if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            };
            VerificationResult {
                quantity: q,
                analytic: Some(analytic),
                estimate: Some(estimate),
                std_error: Some(se),
                z_score: Some(z),
                verdict: if z.abs() <= z_max { Verdict::Pass } else { Verdict::Fail },
            }
        })
        .collect())
}

/// Exact moments of `U` and `V` by enumerating every path of a discrete process.
pub fn enumeration_report(spec: &ProcessSpec, schedule: &Schedule, cap: u64) -> Result<MomentReport> {
    spec.validate()?;
    let mu = process::moments(spec).require_mu()?;
    let horizon = schedule.horizon();
    let exposures = schedule.exposures();
    let stats = || -> Result<_> {
        Ok(process::enumerate_paths(spec, horizon, cap)?.map(|(path, p)| {
            let (u, v) = weighted_sums(&path, exposures, mu);
            (u, v, p)
        }))
    };
    let (mut eu, mut ev) = (CompensatedSum::default(), CompensatedSum::default());
    for (u, v, p) in stats()? {
        eu.add(p * u);
        ev.add(p * v);
    }
    let (mean_u, mean_v) = (eu.value(), ev.value());
    let (mut vu, mut vv) = (CompensatedSum::default(), CompensatedSum::default());
    for (u, v, p) in stats()? {
        vu.add(p * (u - mean_u) * (u - mean_u));
        vv.add(p * (v - mean_v) * (v - mean_v));
    }
    let e1 = schedule.measures().e1;
    let n_paths = process::enumeration_size(
        match spec {
            ProcessSpec::Discrete { values, .. } => values.len(),
            _ => unreachable!("enumerate_paths accepted the spec"),
        },
        horizon,
    );
    Ok(MomentReport {
        mean_u: Some(mean_u),
        var_u: Some(vu.value()),
        mean_v: Some(mean_v),
        var_v: Some(vv.value()),
        var_u_norm: (e1 > 0.0).then(|| vu.value() / (e1 * e1)),
        std_errors: None,
        n_paths,
        provenance: Provenance::Enumeration,
        assumptions: [analytic::Assumption::Iid].into_iter().collect(),
    })
}

/// Compares exact enumeration moments with closed forms at [`EXACT_TOLERANCE`].
pub fn enumerate_verify(spec: &ProcessSpec, schedule: &Schedule, cap: u64) -> Result<Vec<VerificationResult>> {
    let report = enumeration_report(spec, schedule, cap)?;
    Ok(Quantity::ALL
        .iter()
        .map(|&q| {
            let analytic = match analytic_or_skip(spec, schedule, q) {
                Ok(v) => v,
                Err(skipped) => return skipped,
            };
            let Some(estimate) = report.get(q) else {
                return VerificationResult::skipped(q, "not defined for this schedule");
            };
            let diff = estimate - analytic;
            let pass = diff.abs() <= EXACT_TOLERANCE;
            VerificationResult {
                quantity: q,
                analytic: Some(analytic),
                estimate: Some(estimate),
                std_error: Some(0.0),
                z_score: Some(if pass { 0.0 } else { diff.signum() * f64::INFINITY }),
                verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::DEFAULT_ENUMERATION_CAP;
    use proptest::prelude::*;

    fn naive_moments(xs: &[f64]) -> (f64, f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>();
        (mean, m2, m4)
    }

    proptest! {
        #[test]
        fn accumulator_matches_two_pass(xs in prop::collection::vec(-100.0f64..100.0, 2..200), split in 0usize..200) {
            let split = split.min(xs.len());
            let mut whole = MomentAccumulator::default();
            xs.iter().for_each(|&x| whole.push(x));
            let mut left = MomentAccumulator::default();
            let mut right = MomentAccumulator::default();
            xs[..split].iter().for_each(|&x| left.push(x));
            xs[split..].iter().for_each(|&x| right.push(x));
            left.merge(&right);

            let (mean, m2, m4) = naive_moments(&xs);
            for acc in [whole, left] {
                prop_assert!((acc.mean - mean).abs() < 1e-9);
                prop_assert!((acc.m2 - m2).abs() < 1e-7 * m2.max(1.0));
                prop_assert!((acc.m4 - m4).abs() < 1e-7 * m4.max(1.0));
            }
        }
    }

    #[test]
    fn die_lump_sum_ensemble() {
        let die = ProcessSpec::die();
        let ls = Schedule::lump_sum(6).unwrap();
        let r = run_ensemble(&die, &ls, &EnsembleConfig::new(100_000, 6, 42)).unwrap();
        assert!((r.mean_u.unwrap() - 21.0).abs() < 4.0 * (17.5f64 / 1e5).sqrt());
        assert_eq!(r.provenance, Provenance::MonteCarlo);
        assert_eq!(r.n_paths, Some(100_000));
    }

    #[test]
    fn gaussian_mean_risk() {
        let g = ProcessSpec::gaussian(0.0, 1.0).unwrap();
        let ls = Schedule::lump_sum(10).unwrap();
        let r = run_ensemble(&g, &ls, &EnsembleConfig::new(100_000, 10, 7)).unwrap();
        assert!((r.mean_v.unwrap() - 10.0).abs() < 4.0 * (20.0f64 / 1e5).sqrt());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let g = ProcessSpec::student_t(0.1, 1.0, 5.0).unwrap();
        let s = Schedule::dca(7).unwrap();
        let cfg = EnsembleConfig::new(50_001, 7, 99);
        let one = run_ensemble(&g, &s, &cfg.with_workers(1)).unwrap();
        let eight = run_ensemble(&g, &s, &cfg.with_workers(8)).unwrap();
        assert_eq!(one, eight);
    }

    #[test]
    fn paths_are_keyed_by_index() {
        let g = ProcessSpec::gaussian(0.0, 1.0).unwrap();
        let mut rng = path_stream(5, 17);
        let a = process::sample_path(&g, 4, &mut rng);
        let mut rng = path_stream(5, 17);
        assert_eq!(a, process::sample_path(&g, 4, &mut rng));
        let mut other = path_stream(5, 18);
        assert_ne!(a, process::sample_path(&g, 4, &mut other));
    }

    #[test]
    fn rejects_invalid_configs() {
        let g = ProcessSpec::gaussian(0.0, 1.0).unwrap();
        let s = Schedule::lump_sum(3).unwrap();
        assert!(run_ensemble(&g, &s, &EnsembleConfig::new(1, 3, 0)).is_err());
        assert!(run_ensemble(&g, &s, &EnsembleConfig::new(10, 4, 0)).is_err());
        let cauchy = ProcessSpec::student_t(0.0, 1.0, 1.0).unwrap();
        assert!(run_ensemble(&cauchy, &s, &EnsembleConfig::new(10, 3, 0)).is_err());
    }

    #[test]
    fn heavy_tails_skip_risk_variance() {
        let t3 = ProcessSpec::student_t(0.0, 1.0, 3.0).unwrap();
        let s = Schedule::lump_sum(5).unwrap();
        let results = verify(&t3, &s, &EnsembleConfig::new(20_000, 5, 1), DEFAULT_Z_MAX).unwrap();
        let var_v = results.iter().find(|r| r.quantity == Quantity::VarV).unwrap();
        match &var_v.verdict {
            Verdict::Skipped(reason) => assert!(reason.contains("fourth moment unavailable")),
            other => panic!("expected skip, got {other:?}"),
        }
    }

    #[test]
    fn untestable_standard_errors_are_skipped() {
        let t6 = ProcessSpec::student_t(0.0, 1.0, 6.0).unwrap();
        let s = Schedule::dca(4).unwrap();
        let results = verify(&t6, &s, &EnsembleConfig::new(20_000, 4, 3), DEFAULT_Z_MAX).unwrap();
        for r in &results {
            if r.quantity == Quantity::VarV {
                assert!(r.analytic.is_some() && r.estimate.is_some() && r.z_score.is_none());
                assert!(matches!(&r.verdict, Verdict::Skipped(why) if why.contains("order 8")));
            } else {
                assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
            }
        }
        assert!(t6.has_finite_moment(5) && !t6.has_finite_moment(6));
    }

    #[test]
    fn enumeration_matches_closed_forms() {
        let die = ProcessSpec::die();
        let ls2 = Schedule::lump_sum(2).unwrap();
        let r = enumeration_report(&die, &ls2, DEFAULT_ENUMERATION_CAP).unwrap();
        assert!((r.mean_u.unwrap() - 7.0).abs() < 1e-12);
        assert!((r.var_u.unwrap() - 35.0 / 6.0).abs() < 1e-12);
        assert!((r.mean_v.unwrap() - 35.0 / 6.0).abs() < 1e-12);
        assert!((r.var_v.unwrap() - 112.0 / 9.0).abs() < 1e-12);
        assert_eq!(r.n_paths, Some(36));

        let dca3 = Schedule::dca(3).unwrap();
        let r = enumeration_report(&die, &dca3, DEFAULT_ENUMERATION_CAP).unwrap();
        assert!((r.mean_v.unwrap() - 35.0 / 12.0 * 14.0 / 9.0).abs() < 1e-12);
        assert!(enumerate_verify(&die, &dca3, DEFAULT_ENUMERATION_CAP)
            .unwrap()
            .iter()
            .all(|v| v.verdict == Verdict::Pass && v.std_error == Some(0.0)));

        let coin = ProcessSpec::coin(-1.0, 1.0);
        let r = enumeration_report(&coin, &Schedule::lump_sum(4).unwrap(), DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(r.mean_u, Some(0.0));
        assert_eq!(r.var_u, Some(4.0));

        assert!(matches!(
            enumerate_verify(&die, &Schedule::lump_sum(12).unwrap(), DEFAULT_ENUMERATION_CAP),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn dump_has_documented_header() {
        let mut buf = Vec::new();
        dump_paths(&ProcessSpec::die(), &EnsembleConfig::new(2, 3, 4), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "path_index,step,return");
        assert_eq!(lines.len(), 1 + 2 * 3);
        assert!(lines[1].starts_with("0,1,"));
        assert!(lines[6].starts_with("1,3,"));
    }
}
