//! Run configuration: command-line flags layered over an optional config file.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use super::report::OutputFormat;
use crate::exposure::{parse_schedule_list, Schedule, ScheduleSpec};
use crate::montecarlo::DEFAULT_Z_MAX;
use crate::process::{ProcessFields, ProcessSpec};
use crate::{Error, Result};

pub const DEFAULT_PATHS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 0;
const DEFAULT_SCHEDULES: &str = "lump,dca,unit";

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Return process, e.g. `die`, `gaussian:mu=0.05,sigma=0.2`, `studentt:nu=6`,
    /// `ar1:phi=0.5`, `discrete:values=-1;1,probs=1/2;1/2`.
    #[arg(long)]
    pub process: Option<String>,
    /// Investment schedule: `lump:t`, `dca:t`, `unit:t`, `last:t` or `custom:w1,w2,...`.
    #[arg(long)]
    pub schedule: Option<String>,
    /// Comma-separated schedule families for `compare`.
    #[arg(long)]
    pub schedules: Option<String>,
    /// Horizon, or an inclusive range `a..b[:step]` for `compare`.
    #[arg(long = "t")]
    pub t: Option<String>,
    #[arg(long)]
    pub paths: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum)]
    pub output: Option<OutputFormat>,
    /// Write the report to FILE instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "z-max")]
    pub z_max: Option<f64>,
    /// Verify by exact enumeration (discrete processes only).
    #[arg(long)]
    pub exact: bool,
    /// Accept schedules whose exposure exceeds the unit budget.
    #[arg(long = "allow-leverage")]
    pub allow_leverage: bool,
    /// Also write every simulated path to FILE as `path_index,step,return`.
    #[arg(long = "dump-paths")]
    pub dump_paths: Option<PathBuf>,
    /// Print exact fractions where the inputs are rational.
    #[arg(long)]
    pub rational: bool,
    /// TOML file with the same keys as the flags (flags take precedence).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Config-file contents. Process parameters may be given either as a
/// `process` string or as the individual keys `kind`, `mu`, `sigma`, ...
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub process: Option<String>,
    pub kind: Option<String>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub scale: Option<f64>,
    pub nu: Option<f64>,
    pub phi: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub probs: Option<Vec<f64>>,
    pub schedule: Option<String>,
    pub schedules: Option<StringOrList>,
    pub t: Option<StringOrInt>,
    pub paths: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output: Option<OutputFormat>,
    pub out: Option<PathBuf>,
    #[serde(alias = "z-max")]
    pub z_max: Option<f64>,
    pub exact: Option<bool>,
    #[serde(alias = "allow-leverage")]
    pub allow_leverage: Option<bool>,
    #[serde(alias = "dump-paths")]
    pub dump_paths: Option<PathBuf>,
    pub rational: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum StringOrList {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum StringOrInt {
    Text(String),
    Int(u64),
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    fn process_spec(&self) -> Result<Option<ProcessSpec>> {
        if let Some(p) = &self.process {
            return p.parse().map(Some);
        }
        let fields = ProcessFields {
            kind: self.kind.clone(),
            mu: self.mu,
            sigma: self.sigma,
            scale: self.scale,
            nu: self.nu,
            phi: self.phi,
            values: self.values.clone(),
            probs: self.probs.clone(),
        };
        if fields.kind.is_some() {
            return fields.build().map(Some);
        }
        if fields != ProcessFields::default() {
            return Err(Error::Config("process parameters given without `kind`".into()));
        }
        Ok(None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Analytic,
    Simulate,
    Verify,
    Compare,
    Enumerate,
}

/// Fully resolved configuration, echoed at the top of every report.
///
/// `workers` and `out` are not echoed: neither changes the reported numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub process: ProcessSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedules: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<String>,
    pub paths: u64,
    pub seed: u64,
    pub output: OutputFormat,
    pub z_max: f64,
    pub exact: bool,
    pub allow_leverage: bool,
    pub rational: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_paths: Option<PathBuf>,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Merges flags over the config file and validates the result.
    pub fn resolve(command: CommandKind, flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Self::resolve_with(command, flags, &file)
    }

    pub fn resolve_with(command: CommandKind, flags: &Flags, file: &FileConfig) -> Result<Self> {
        let process = match &flags.process {
            Some(p) => p.parse::<ProcessSpec>()?,
            None => file
                .process_spec()?
                .ok_or_else(|| Error::Config("--process is required".into()))?,
        };
        let t = flags.t.clone().or_else(|| {
            file.t.as_ref().map(|t| match t {
                StringOrInt::Text(s) => s.clone(),
                StringOrInt::Int(n) => n.to_string(),
            })
        });
        let mut config = RunConfig {
            command,
            process,
            schedule: None,
            schedules: None,
            t: None,
            paths: flags.paths.or(file.paths).unwrap_or(DEFAULT_PATHS),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            output: flags.output.or(file.output).unwrap_or_default(),
            z_max: flags.z_max.or(file.z_max).unwrap_or(DEFAULT_Z_MAX),
            exact: flags.exact || file.exact.unwrap_or(false),
            allow_leverage: flags.allow_leverage || file.allow_leverage.unwrap_or(false),
            rational: flags.rational || file.rational.unwrap_or(false),
            dump_paths: flags.dump_paths.clone().or_else(|| file.dump_paths.clone()),
            workers: flags.workers.or(file.workers).unwrap_or(0),
            out: flags.out.clone().or_else(|| file.out.clone()),
        };

        if config.z_max.is_nan() || config.z_max <= 0.0 {
            return Err(Error::Config("--z-max must be positive".into()));
        }

        if command == CommandKind::Compare {
            let text = flags
                .schedules
                .clone()
                .or_else(|| {
                    file.schedules.as_ref().map(|s| match s {
                        StringOrList::One(s) => s.clone(),
                        StringOrList::Many(v) => v.join(","),
                    })
                })
                .unwrap_or_else(|| DEFAULT_SCHEDULES.to_string());
            let specs = parse_schedule_list(&text)?;
            if specs.is_empty() {
                return Err(Error::Config("--schedules is empty".into()));
            }
            let range = t.ok_or_else(|| Error::Config("compare needs --t a..b".into()))?;
            let range: HorizonRange = range.parse()?;
            config.schedules = Some(
                specs
                    .iter()
                    .map(|s| match s {
                        ScheduleSpec::Custom(_) => s.to_string(),
                        other => other.kind().to_string(),
                    })
                    .collect(),
            );
            config.t = Some(range.to_string());
            for spec in &specs {
                if let ScheduleSpec::Custom(_) = spec {
                    config.check_leverage(&spec.build(None)?)?;
                }
            }
        } else {
            let text = flags
                .schedule
                .clone()
                .or_else(|| file.schedule.clone())
                .ok_or_else(|| Error::Config("--schedule is required".into()))?;
            let spec: ScheduleSpec = text.parse()?;
            let fallback = t
                .as_deref()
                .map(|s| {
                    s.parse::<usize>()
                        .ok()
                        .filter(|&n| n >= 1)
                        .ok_or_else(|| Error::Config(format!("invalid horizon `{s}`")))
                })
                .transpose()?;
            if let (Some(own), Some(flag)) = (spec.horizon(), fallback) {
                if own != flag {
                    return Err(Error::Config(format!(
                        "schedule `{text}` spans {own} periods but --t is {flag}"
                    )));
                }
            }
            let schedule = spec.build(fallback)?;
            config.check_leverage(&schedule)?;
            config.schedule = Some(spec.with_horizon(schedule.horizon()).to_string());
        }
        Ok(config)
    }

    pub fn check_leverage(&self, schedule: &Schedule) -> Result<()> {
        if schedule.is_leveraged() && !self.allow_leverage {
            return Err(Error::Config(format!(
                "schedule `{}` exceeds the unit budget; pass --allow-leverage to accept it",
                schedule.label()
            )));
        }
        Ok(())
    }

    /// The single schedule of a non-`compare` command.
    pub fn schedule(&self) -> Result<Schedule> {
        let text = self
            .schedule
            .as_deref()
            .ok_or_else(|| Error::Config("no schedule configured".into()))?;
        text.parse::<ScheduleSpec>()?.build(None)
    }

    pub fn schedule_specs(&self) -> Result<Vec<ScheduleSpec>> {
        self.schedules
            .iter()
            .flatten()
            .map(|s| s.parse())
            .collect()
    }

    pub fn horizons(&self) -> Result<Vec<usize>> {
        parse_horizon_range(
            self.t
                .as_deref()
                .ok_or_else(|| Error::Config("no horizon range configured".into()))?,
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Inclusive horizon range `a..b` with an optional `:step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HorizonRange {
    pub start: usize,
    pub end: usize,
    pub step: usize,
}

impl HorizonRange {
    pub fn horizons(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step).collect()
    }
}

impl std::fmt::Display for HorizonRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.start == self.end {
            write!(f, "{}", self.start)
        } else if self.step == 1 {
            write!(f, "{}..{}", self.start, self.end)
        } else {
            write!(f, "{}..{}:{}", self.start, self.end, self.step)
        }
    }
}

impl std::str::FromStr for HorizonRange {
    type Err = Error;

    /// `n`, or `a..b` / `a..=b` with optional `:step`.
    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid horizon range `{text}`"));
        let number = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
        let (span, step) = match text.trim().split_once(':') {
            Some((span, step)) => (span, number(step)?),
            None => (text.trim(), 1),
        };
        let (start, end) = match span.split_once("..") {
            Some((lo, hi)) => (number(lo)?, number(hi.trim_start_matches('='))?),
            None => (number(span)?, number(span)?),
        };
        if step == 0 || start == 0 || end < start {
            return Err(bad());
        }
        Ok(HorizonRange { start, end, step })
    }
}

pub fn parse_horizon_range(text: &str) -> Result<Vec<usize>> {
    Ok(text.parse::<HorizonRange>()?.horizons())
}
