//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance`. The process exits non-zero when a
//! criterion fails, except for the sub-checks listed in `KNOWN_FAILURES`,
//! which are printed as FAIL but do not fail the run.

use std::time::{Duration, Instant};

use horizon_core::analytic::{self, Quantity};
use horizon_core::cli::report::rational_sqrt;
use horizon_core::exact::{ratio, Rational};
use horizon_core::exposure::Schedule;
use horizon_core::montecarlo::{self, path_stream, EnsembleConfig, Verdict, VerificationResult};
use horizon_core::process::{self, exact_moments, ProcessSpec, DEFAULT_ENUMERATION_CAP};
use horizon_core::stats::path_stats;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sub-checks expected to fail, with the reason.
const KNOWN_FAILURES: &[(u32, &str, &str)] = &[(
    8,
    "hand value 4.25 at phi=0.5, t=2",
    "the closed form gives 4 + 4 * gamma(1)^2 = 5 (gamma(1) = 0.5); 4.25 squares gamma(1) twice",
)];

const MC_PATHS: u64 = 1_000_000;
const SEED: u64 = 20_240_601;

#[derive(Default)]
struct Criterion {
    checks: Vec<(String, bool, String)>,
}

impl Criterion {
    fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push((name.into(), pass, detail.into()));
    }

    fn close(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        self.check(
            name,
            (got - want).abs() <= tol,
            format!("got {got}, want {want} (tol {tol:e})"),
        );
    }

    fn exact(&mut self, name: &str, got: Option<Rational>, want: Rational) {
        let detail = match &got {
            Some(g) => format!("got {g}, want {want}"),
            None => format!("no exact value, want {want}"),
        };
        self.check(name, got.as_ref() == Some(&want), detail);
    }

    fn within(&mut self, elapsed: Duration, limit: Duration) {
        self.check(
            format!("runtime < {limit:?}"),
            elapsed < limit,
            format!("took {elapsed:.2?}"),
        );
    }

    fn verification(&mut self, label: &str, results: &[VerificationResult], z_max: f64) {
        for r in results {
            let name = format!("{label} {}", r.quantity.name());
            match &r.verdict {
                Verdict::Skipped(why) => self.check(format!("{name} (skipped)"), true, why.clone()),
                verdict => {
                    let z = r.z_score.unwrap_or(f64::NAN);
                    self.check(
                        name,
                        *verdict == Verdict::Pass && z.abs() <= z_max,
                        format!(
                            "analytic {:.6}, estimate {:.6}, z {z:.3}",
                            r.analytic.unwrap_or(f64::NAN),
                            r.estimate.unwrap_or(f64::NAN)
                        ),
                    )
                }
            }
        }
    }
}

fn timed(f: impl FnOnce(&mut Criterion)) -> (Criterion, Duration) {
    let mut c = Criterion::default();
    let start = Instant::now();
    f(&mut c);
    (c, start.elapsed())
}

fn dice_fixtures() -> Criterion {
    let (mut c, elapsed) = timed(|c| {
        let die = ProcessSpec::die();
        let lump6 = Schedule::lump_sum(6).unwrap();
        let m = process::moments(&die);
        let em = exact_moments(&die).unwrap();
        c.close("mu", m.mu.unwrap(), 3.5, 1e-12);
        c.close("sigma^2", m.sigma2.unwrap(), 35.0 / 12.0, 1e-12);
        c.close("Var(Y1)", m.var_y.unwrap(), 56.0 / 9.0, 1e-12);
        c.close("E[Y1^2]", m.fourth_central.unwrap(), 707.0 / 48.0, 1e-12);
        c.exact("mu exact", Some(em.mu), ratio(7, 2));
        c.exact("sigma^2 exact", Some(em.sigma2), ratio(35, 12));
        c.exact("Var(Y1) exact", em.var_y, ratio(56, 9));
        c.exact("E[Y1^2] exact", em.fourth_central, ratio(707, 48));
        for (q, want, (n, d)) in [
            (Quantity::MeanU, 21.0, (21, 1)),
            (Quantity::VarU, 17.5, (35, 2)),
            (Quantity::MeanV, 17.5, (35, 2)),
            (Quantity::VarV, 112.0 / 3.0, (112, 3)),
        ] {
            c.close(q.name(), analytic::quantity(&die, &lump6, q).unwrap(), want, 1e-12);
            c.exact(
                &format!("{} exact", q.name()),
                analytic::exact::quantity(&die, &lump6, q).ok(),
                ratio(n, d),
            );
        }
    });
    c.within(elapsed, Duration::from_secs(1));
    c
}

fn realized_path() -> Criterion {
    let (mut c, elapsed) = timed(|c| {
        let s = path_stats(&[1.0, 5.0, 6.0, 6.0, 4.0, 2.0], &Schedule::lump_sum(6).unwrap(), 3.5).unwrap();
        c.check("u6 = 24", s.u == 24.0, format!("got {}", s.u));
        c.check("m6 = 4", s.m == 4.0, format!("got {}", s.m));
        c.check("v6 = 22", s.v_sample == 22.0, format!("got {}", s.v_sample));
    });
    c.within(elapsed, Duration::from_secs(1));
    c
}

fn enumeration_equivalence() -> Criterion {
    let (mut c, elapsed) = timed(|c| {
        let die = ProcessSpec::die();
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        for t in 1..=4 {
            let raw: Vec<f64> = (0..t).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
            let schedules = [
                Schedule::lump_sum(t).unwrap(),
                Schedule::dca(t).unwrap(),
                Schedule::uniform_exposure(t).unwrap(),
                Schedule::last_period(t).unwrap(),
                Schedule::custom(&weights).unwrap(),
            ];
            for s in &schedules {
                let results = montecarlo::enumerate_verify(&die, s, DEFAULT_ENUMERATION_CAP).unwrap();
                for r in results {
                    let diff = (r.estimate.unwrap() - r.analytic.unwrap()).abs();
                    c.check(
                        format!("{} {}", s.label(), r.quantity.name()),
                        diff <= 1e-9,
                        format!("|enumerated - closed form| = {diff:e}"),
                    );
                }
            }
        }
    });
    c.within(elapsed, Duration::from_secs(30));
    c
}

fn horizon_invariance() -> Criterion {
    let mut c = Criterion::default();
    let g = ProcessSpec::gaussian(0.05, 0.2).unwrap();
    for t in [1, 4, 12, 120] {
        let a = analytic::annualized(&g, t).unwrap();
        c.close(&format!("t={t} return/t"), a.a_return, 0.05, 1e-15);
        c.close(&format!("t={t} sqrt(risk/t)"), a.a_risk, 0.2, 1e-15);
        c.close(&format!("t={t} rr"), a.rr, 0.25, 1e-14);
        let (ret, risk2, _) = analytic::exact::annualized_squares(&g, t).unwrap();
        let risk = rational_sqrt(&risk2);
        c.exact(&format!("t={t} return/t exact"), Some(ret.clone()), ratio(1, 20));
        c.exact(&format!("t={t} sqrt(risk/t) exact"), risk.clone(), ratio(1, 5));
        c.exact(&format!("t={t} rr exact"), risk.map(|r| ret / r), ratio(1, 4));
    }
    c
}

fn dca_unit_gap() -> Criterion {
    let mut c = Criterion::default();
    let mut mismatches = Vec::new();
    for t in 1..=1000usize {
        let got = analytic::exact::dca_unit_risk_gap_from_schedules(t).unwrap();
        let want = ratio(t as i64 - 1, 3 * (t as i64 + 1));
        if got != want {
            mismatches.push(t);
        }
    }
    c.check(
        "exact for t in 1..=1000",
        mismatches.is_empty(),
        format!("mismatches at {mismatches:?}"),
    );
    let g = ProcessSpec::gaussian(0.0, 1.0).unwrap();
    let gap = analytic::dca_unit_risk_gap_from_schedules(&g, 1_000_000).unwrap();
    c.close("t=1e6 within 1e-6 of 1/3", gap, 1.0 / 3.0, 1e-6);
    c
}

fn normalized_ordering() -> Criterion {
    let mut c = Criterion::default();
    let sigma = 0.2;
    let sigma2 = sigma * sigma;
    let g = ProcessSpec::gaussian(0.05, sigma).unwrap();
    let mut lump_ok = true;
    let mut order_ok = true;
    for t in 1..=1000usize {
        let ls = analytic::var_normalized_return(&g, &Schedule::lump_sum(t).unwrap()).unwrap();
        let dca = analytic::var_normalized_return(&g, &Schedule::dca(t).unwrap()).unwrap();
        lump_ok &= ((ls - sigma2 / t as f64) / ls).abs() <= 1e-12;
        if t > 1 {
            order_ok &= dca > ls;
        }
    }
    c.check("Var(U/e1) lump = sigma^2/t for t in 1..=1000", lump_ok, "");
    c.check("Var(U/e1) dca > lump for t in 2..=1000", order_ok, "");
    let t = 1000usize;
    let dca = analytic::var_normalized_return(&g, &Schedule::dca(t).unwrap()).unwrap();
    let scaled = dca * 3.0 * t as f64 / (4.0 * sigma2);
    c.close("t=1000 Var(U/e1) dca * 3t / (4 sigma^2)", scaled, 1.0, 0.002);
    c
}

fn monte_carlo_grid() -> Criterion {
    let (mut c, elapsed) = timed(|c| {
        let processes = [
            ("gaussian", ProcessSpec::gaussian(0.05, 0.2).unwrap()),
            ("die", ProcessSpec::die()),
            ("studentt(nu=6)", ProcessSpec::student_t(0.0, 1.0, 6.0).unwrap()),
        ];
        for (name, spec) in &processes {
            for s in [
                Schedule::lump_sum(10).unwrap(),
                Schedule::dca(10).unwrap(),
                Schedule::uniform_exposure(10).unwrap(),
            ] {
                let cfg = EnsembleConfig::new(MC_PATHS, 10, SEED);
                let results = montecarlo::verify(spec, &s, &cfg, 4.0).unwrap();
                c.verification(&format!("{name} {}", s.label()), &results, 4.0);
            }
        }
    });
    c.within(elapsed, Duration::from_secs(60));
    c
}

fn ar1_isserlis() -> Criterion {
    let mut c = Criterion::default();
    for phi in [-0.5, 0.5] {
        for t in [2, 10] {
            let spec = ProcessSpec::ar1(0.0, 1.0, phi).unwrap();
            let s = Schedule::lump_sum(t).unwrap();
            let mean_v = analytic::expected_risk(&spec, &s).unwrap();
            c.check(
                format!("phi={phi} t={t} E[V] = t"),
                mean_v == t as f64,
                format!("got {mean_v}"),
            );
            let cfg = EnsembleConfig::new(MC_PATHS, t, SEED);
            let results = montecarlo::verify(&spec, &s, &cfg, 4.0).unwrap();
            c.verification(&format!("phi={phi} t={t}"), &results, 4.0);
        }
    }
    let spec = ProcessSpec::ar1(0.0, 1.0, 0.5).unwrap();
    let var_v = analytic::var_cum_risk(&spec, &Schedule::lump_sum(2).unwrap()).unwrap();
    c.close("hand value 4.25 at phi=0.5, t=2", var_v, 4.25, 1e-12);
    c
}

fn ensemble_law() -> Criterion {
    let mut c = Criterion::default();
    let die = ProcessSpec::die();
    let s = Schedule::lump_sum(6).unwrap();
    let replicates = 1000u64;
    for n in [10u64, 100] {
        let mut means_u = Vec::with_capacity(replicates as usize);
        let mut means_v = Vec::with_capacity(replicates as usize);
        for rep in 0..replicates {
            let (mut su, mut sv) = (0.0, 0.0);
            for i in 0..n {
                let mut rng = path_stream(SEED, rep * n + i);
                let stats = path_stats(&process::sample_path(&die, 6, &mut rng), &s, 3.5).unwrap();
                su += stats.u;
                sv += stats.v_mu;
            }
            means_u.push(su / n as f64);
            means_v.push(sv / n as f64);
        }
        let target = analytic::ensemble_moments(&die, &s, n).unwrap();
        for (label, xs, want) in [
            ("Var(mean U)", &means_u, target.var_u.unwrap()),
            ("Var(mean V)", &means_v, target.var_v.unwrap()),
        ] {
            let ratio = sample_variance(xs) / want;
            c.check(
                format!("N={n} {label}"),
                (0.8..=1.2).contains(&ratio),
                format!("empirical / theoretical = {ratio:.4}"),
            );
        }
    }
    c
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

fn determinism() -> Criterion {
    let mut c = Criterion::default();
    let run = |workers: usize| {
        let args = [
            "horizon", "simulate", "--process", "studentt:mu=0.01,scale=0.2,nu=6", "--schedule", "dca:12",
            "--paths", "100000", "--seed", "7", "--workers",
        ];
        let mut argv: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        argv.push(workers.to_string());
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = horizon_core::cli::run(argv, &mut out, &mut err);
        (code, out)
    };
    let (code, reference) = run(1);
    c.check("workers=1 exit 0", code == 0, format!("exit {code}"));
    for workers in [4, 8] {
        let (code, out) = run(workers);
        c.check(
            format!("workers={workers} byte-identical"),
            code == 0 && out == reference,
            format!("exit {code}, {} vs {} bytes", out.len(), reference.len()),
        );
    }
    c
}

fn main() {
    type Run = fn() -> Criterion;
    let criteria: [(u32, &str, Run); 10] = [
        (1, "dice fixtures exact", dice_fixtures),
        (2, "realized-path fixture", realized_path),
        (3, "enumeration oracle equivalence", enumeration_equivalence),
        (4, "horizon invariance", horizon_invariance),
        (5, "DCA/unit gap", dca_unit_gap),
        (6, "normalized-uncertainty ordering", normalized_ordering),
        (7, "Monte Carlo statistical verification", monte_carlo_grid),
        (8, "AR(1) Isserlis formula", ar1_isserlis),
        (9, "ensemble 1/N law", ensemble_law),
        (10, "determinism", determinism),
    ];

    let mut unexpected = 0;
    let mut passed = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let failed: Vec<_> = result.checks.iter().filter(|(_, ok, _)| !ok).collect();
        let skipped = result.checks.iter().filter(|(n, _, _)| n.ends_with("(skipped)")).count();
        if failed.is_empty() {
            passed += 1;
            let note = if skipped > 0 {
                format!(", {skipped} skipped")
            } else {
                String::new()
            };
            println!(
                "PASS  {id:>2}. {name} ({} checks{note}, {elapsed:.2?})",
                result.checks.len()
            );
            for (check, _, why) in result.checks.iter().filter(|(n, _, _)| n.ends_with("(skipped)")) {
                println!("        skipped {}: {why}", check.trim_end_matches(" (skipped)"));
            }
            continue;
        }
        println!(
            "FAIL  {id:>2}. {name} ({} of {} checks failed, {elapsed:.2?})",
            failed.len(),
            result.checks.len()
        );
        for (check, _, detail) in failed {
            match KNOWN_FAILURES.iter().find(|(k, n, _)| *k == id && n == check) {
                Some((_, _, reason)) => println!("        known: {check}: {detail}; {reason}"),
                None => {
                    unexpected += 1;
                    println!("        {check}: {detail}");
                }
            }
        }
    }
    println!("{passed}/10 criteria passed");
    if unexpected > 0 {
        println!("{unexpected} unexpected check failure(s)");
        std::process::exit(1);
    }
}
