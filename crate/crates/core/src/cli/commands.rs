use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;

use super::config::RunConfig;
use super::report::{rational_sqrt, Cell, Table};
use super::Outcome;
use crate::analytic::{self, Assumption, Quantity};
use crate::exact::Rational;
use crate::exposure::{exact_measures, Schedule, ScheduleSpec};
use crate::montecarlo::{self, EnsembleConfig, Verdict, VerificationResult};
use crate::process::{enumeration_size, ProcessSpec, DEFAULT_ENUMERATION_CAP};
use crate::{Error, Result};

fn assumption_text(set: &BTreeSet<Assumption>) -> String {
    set.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";")
}

fn ok(table: Table) -> Result<Outcome> {
    Ok(Outcome { table, passed: true })
}

pub(super) fn analytic(config: &RunConfig) -> Result<Outcome> {
    let spec = &config.process;
    let schedule = config.schedule()?;
    let mut table = Table::new(vec!["quantity", "value", "assumptions", "note"]);

    for q in [
        Quantity::MeanU,
        Quantity::MeanV,
        Quantity::VarU,
        Quantity::VarV,
        Quantity::VarUNorm,
    ] {
        let assumptions = assumption_text(&analytic::assumptions_for(spec, q));
        match analytic::quantity(spec, &schedule, q) {
            Ok(v) => {
                let exact = config
                    .rational
                    .then(|| analytic::exact::quantity(spec, &schedule, q).ok())
                    .flatten();
                table.push(vec![
                    Cell::text(q.name()),
                    Cell::exact(v, exact),
                    Cell::text(assumptions),
                    Cell::text(""),
                ]);
            }
            Err(e) => table.push(vec![
                Cell::text(q.name()),
                Cell::Na,
                Cell::text(assumptions),
                Cell::text(e.to_string()),
            ]),
        }
    }

    let m = schedule.measures();
    let em = config.rational.then(|| exact_measures(&schedule));
    let measures = [
        ("e_time", m.e_time, em.as_ref().map(|e| e.e_time.clone())),
        ("e1", m.e1, em.as_ref().map(|e| e.e1.clone())),
        ("e2", m.e2, em.as_ref().map(|e| e.e2.clone())),
        ("e4", m.e4, em.as_ref().map(|e| e.e4.clone())),
    ];
    for (name, value, exact) in measures {
        table.push(vec![Cell::text(name), Cell::exact(value, exact), Cell::text(""), Cell::text("")]);
    }

    let horizon = schedule.horizon();
    let squares = config
        .rational
        .then(|| analytic::exact::annualized_squares(spec, horizon).ok())
        .flatten();
    let exact_risk = squares.as_ref().and_then(|(_, r2, _)| rational_sqrt(r2));
    let exact_rr: Option<Rational> = squares
        .as_ref()
        .zip(exact_risk.as_ref())
        .map(|((ret, _, _), risk)| ret / risk);
    let per_period = "per period, lump-sum over t";
    match analytic::annualized(spec, horizon) {
        Ok(a) => {
            let rows = [
                ("a_return", a.a_return, squares.as_ref().map(|s| s.0.clone())),
                ("a_risk", a.a_risk, exact_risk),
                ("rr", a.rr, exact_rr),
            ];
            for (name, value, exact) in rows {
                table.push(vec![
                    Cell::text(name),
                    Cell::exact(value, exact),
                    Cell::text(assumption_text(&analytic::assumptions_for(spec, Quantity::MeanV))),
                    Cell::text(per_period),
                ]);
            }
        }
        Err(e) => {
            for name in ["a_return", "a_risk", "rr"] {
                table.push(vec![Cell::text(name), Cell::Na, Cell::text(""), Cell::text(e.to_string())]);
            }
        }
    }
    ok(table)
}

fn ensemble_config(config: &RunConfig, schedule: &Schedule) -> EnsembleConfig {
    EnsembleConfig::new(config.paths, schedule.horizon(), config.seed).with_workers(config.workers)
}

pub(super) fn simulate(config: &RunConfig) -> Result<Outcome> {
    let spec = &config.process;
    let schedule = config.schedule()?;
    let ens = ensemble_config(config, &schedule);
    let report = montecarlo::run_ensemble(spec, &schedule, &ens)?;
    if let Some(path) = &config.dump_paths {
        let file = File::create(path)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
        montecarlo::dump_paths(spec, &ens, BufWriter::new(file))?;
    }
    let mut table = Table::new(vec!["quantity", "estimate", "std_error"]);
    for q in Quantity::ALL {
        table.push(vec![
            Cell::text(q.name()),
            report.get(q).map(Cell::num).unwrap_or(Cell::Na),
            report.std_error(q).map(Cell::num).unwrap_or(Cell::Na),
        ]);
    }
    ok(table)
}

fn discrete_size(spec: &ProcessSpec, horizon: usize) -> Option<u64> {
    match spec {
        ProcessSpec::Discrete { values, .. } => enumeration_size(values.len(), horizon),
        _ => None,
    }
}

pub(super) fn verify(config: &RunConfig) -> Result<Outcome> {
    let spec = &config.process;
    let schedule = config.schedule()?;
    let size = discrete_size(spec, schedule.horizon());
    if config.exact && !matches!(spec, ProcessSpec::Discrete { .. }) {
        return Err(Error::Config("--exact needs a discrete process".into()));
    }
    let enumerable = size.is_some_and(|n| n <= DEFAULT_ENUMERATION_CAP);
    let (method, results) = if config.exact || enumerable {
        (
            "enumeration",
            montecarlo::enumerate_verify(spec, &schedule, DEFAULT_ENUMERATION_CAP)?,
        )
    } else {
        let ens = ensemble_config(config, &schedule);
        ("monte-carlo", montecarlo::verify(spec, &schedule, &ens, config.z_max)?)
    };

    let mut table = Table::new(vec![
        "method", "quantity", "analytic", "estimate", "std_error", "z", "pass", "note",
    ]);
    let opt = |x: Option<f64>| x.map(Cell::num).unwrap_or(Cell::Na);
    for r in &results {
        let VerificationResult {
            quantity,
            analytic,
            estimate,
            std_error,
            z_score,
            verdict,
        } = r;
        let (pass, note) = match verdict {
            Verdict::Pass => ("true", String::new()),
            Verdict::Fail => ("false", String::new()),
            Verdict::Skipped(reason) => ("skipped", reason.clone()),
        };
        table.push(vec![
            Cell::text(method),
            Cell::text(quantity.name()),
            opt(*analytic),
            opt(*estimate),
            opt(*std_error),
            opt(*z_score),
            Cell::text(pass),
            Cell::text(note),
        ]);
    }
    Ok(Outcome {
        table,
        passed: results.iter().all(VerificationResult::passed),
    })
}

pub(super) fn enumerate(config: &RunConfig) -> Result<Outcome> {
    let spec = &config.process;
    let schedule = config.schedule()?;
    if !matches!(spec, ProcessSpec::Discrete { .. }) {
        return Err(Error::Config("enumerate needs a discrete process".into()));
    }
    let report = montecarlo::enumeration_report(spec, &schedule, DEFAULT_ENUMERATION_CAP)?;
    let mut table = Table::new(vec!["quantity", "value", "paths"]);
    let paths = report.n_paths.map(|n| Cell::num(n as f64)).unwrap_or(Cell::Na);
    for q in Quantity::ALL {
        table.push(vec![
            Cell::text(q.name()),
            report.get(q).map(Cell::num).unwrap_or(Cell::Na),
            paths.clone(),
        ]);
    }
    ok(table)
}

pub(super) fn compare(config: &RunConfig) -> Result<Outcome> {
    let spec = &config.process;
    let specs = config.schedule_specs()?;
    let with_gap = specs.iter().any(|s| matches!(s, ScheduleSpec::Dca(_)))
        && specs.iter().any(|s| matches!(s, ScheduleSpec::Unit(_)));
    let mut columns = vec![
        "t", "schedule", "e1", "e2", "mean_v", "mean_v_per_e2", "var_u_norm", "rr",
    ];
    if with_gap {
        columns.push("dca_unit_gap");
    }
    let mut table = Table::new(columns);
    let exact = |schedule: &Schedule, q: Quantity| -> Option<Rational> {
        config
            .rational
            .then(|| analytic::exact::quantity(spec, schedule, q).ok())
            .flatten()
    };

    for t in config.horizons()? {
        let gap = with_gap.then(|| {
            let exact = config
                .rational
                .then(|| analytic::exact::dca_unit_risk_gap_from_schedules(t).ok())
                .flatten();
            match analytic::dca_unit_risk_gap_from_schedules(spec, t) {
                Ok(v) => Cell::exact(v, exact),
                Err(_) => Cell::exact(analytic::dca_unit_risk_gap(t), exact),
            }
        });
        for s in &specs {
            if let ScheduleSpec::Custom(w) = s {
                if w.len() != t {
                    continue;
                }
            }
            let schedule = s.with_horizon(t).build(Some(t))?;
            config.check_leverage(&schedule)?;
            let m = schedule.measures();
            let em = config.rational.then(|| exact_measures(&schedule));

            let mean_u = analytic::expected_return(spec, &schedule);
            let mean_v = analytic::expected_risk(spec, &schedule);
            let mean_v_exact = exact(&schedule, Quantity::MeanV);
            let per_e2 = mean_v.as_ref().ok().map(|v| v / m.e2);
            let per_e2_exact = mean_v_exact.as_ref().zip(em.as_ref()).map(|(v, e)| v / &e.e2);
            let rr = match (&mean_u, per_e2) {
                (Ok(u), Some(r)) if m.e1 > 0.0 && r > 0.0 => Some((u / m.e1) / r.sqrt()),
                _ => None,
            };
            let rr_exact = exact(&schedule, Quantity::MeanU)
                .zip(em.as_ref())
                .zip(per_e2_exact.as_ref().and_then(rational_sqrt))
                .map(|((u, e), s)| u / &e.e1 / s);

            let mut row = vec![
                Cell::num(t as f64),
                Cell::text(schedule.label()),
                Cell::exact(m.e1, em.as_ref().map(|e| e.e1.clone())),
                Cell::exact(m.e2, em.as_ref().map(|e| e.e2.clone())),
                mean_v.map(|v| Cell::exact(v, mean_v_exact)).unwrap_or(Cell::Na),
                per_e2.map(|v| Cell::exact(v, per_e2_exact)).unwrap_or(Cell::Na),
                analytic::var_normalized_return(spec, &schedule)
                    .map(|v| Cell::exact(v, exact(&schedule, Quantity::VarUNorm)))
                    .unwrap_or(Cell::Na),
                rr.map(|v| Cell::exact(v, rr_exact)).unwrap_or(Cell::Na),
            ];
            if let Some(gap) = &gap {
                row.push(gap.clone());
            }
            table.push(row);
        }
    }
    ok(table)
}
