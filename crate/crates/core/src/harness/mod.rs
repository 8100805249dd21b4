//! Experiment specs, paired Monte-Carlo sweeps and CSV output.

pub mod check;
mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

pub use check::{self_check, CheckOutcome};
pub use config::{load_config, parse_config};

use crate::schemes::{run_scheme, SchemeId, SchemeResult, SchemeSettings, TrialSeeds};
use crate::topology::{db_to_linear, draw_realization, NetworkRealization, SystemConfig};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepVariable {
    /// Pilot length `T`.
    PilotLen,
    /// `-10 log10(noise_var)`.
    NoiseInvDb,
    NIrs,
}

impl SweepVariable {
    /// First CSV column name.
    pub fn column(self) -> &'static str {
        match self {
            Self::PilotLen => "N_samples",
            Self::NoiseInvDb => "one_over_sigma_n_sq",
            Self::NIrs => "N_IRS",
        }
    }

    fn integral(self) -> bool {
        !matches!(self, Self::NoiseInvDb)
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" | "pilot_len" => Ok(Self::PilotLen),
            "noise_inv_db" => Ok(Self::NoiseInvDb),
            "N_IRS" | "n_irs" => Ok(Self::NIrs),
            other => Err(Error::Unsupported(format!(
                "unknown sweep variable `{other}` (expected T, noise_inv_db or N_IRS)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.values.is_empty() {
            return Err("sweep values are empty".into());
        }
        if let Some(w) = self.values.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(format!(
                "sweep values must be strictly ascending, but {} is followed by {}",
                w[0], w[1]
            ));
        }
        if self.variable.integral() {
            if let Some(v) = self.values.iter().find(|v| v.fract() != 0.0 || **v < 0.0) {
                return Err(format!("{} takes non-negative integers, got {v}", self.variable.column()));
            }
        }
        Ok(())
    }
}

/// Which rate the table reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Downlink,
    Uplink,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dl" => Ok(Self::Downlink),
            "ul" => Ok(Self::Uplink),
            other => Err(Error::Unsupported(format!("unknown metric `{other}` (expected dl or ul)"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Downlink => "dl",
            Self::Uplink => "ul",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    pub settings: SchemeSettings,
    pub sweep: Sweep,
    pub schemes: Vec<SchemeId>,
    pub n_trials: usize,
    pub metric: Metric,
    pub output_path: PathBuf,
}

impl ExperimentSpec {
    /// Minimal spec: defaults everywhere, one sweep point.
    pub fn new(base: SystemConfig, variable: SweepVariable, values: Vec<f64>, schemes: Vec<SchemeId>) -> Self {
        Self {
            base,
            settings: SchemeSettings::default(),
            sweep: Sweep { variable, values },
            schemes,
            n_trials: 100,
            metric: Metric::Downlink,
            output_path: PathBuf::from("results.csv"),
        }
    }

    /// System configuration at one sweep value.
    pub fn config_at(&self, value: f64) -> Result<SystemConfig> {
        let mut cfg = self.base.clone();
        match self.sweep.variable {
            SweepVariable::PilotLen => cfg.pilot_len = value as usize,
            SweepVariable::NoiseInvDb => cfg.noise_var = db_to_linear(-value),
            SweepVariable::NIrs => cfg.n_irs = value as usize,
        }
        cfg.validate()?;
        if cfg.n_irs > 0 && self.settings.codebook == crate::codebook::CodebookKind::Hadamard {
            crate::codebook::build_codebook(cfg.n_irs, self.settings.codebook)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sweep.validate().map_err(Error::InvalidConfig)?;
        if self.n_trials == 0 {
            return Err(Error::InvalidConfig("n_trials must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("no schemes selected".into()));
        }
        self.settings.validate()?;
        for &v in &self.sweep.values {
            self.config_at(v)?;
        }
        Ok(())
    }
}

/// Aggregates of one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub value: f64,
    /// Per scheme, in spec order.
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub failures: Vec<usize>,
    /// `samples[s][t]`: metric of scheme `s` in trial `t`, `None` on failure.
    pub samples: Vec<Vec<Option<f64>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub variable: SweepVariable,
    pub metric: Metric,
    pub schemes: Vec<SchemeId>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn column_of(&self, id: SchemeId) -> Option<usize> {
        self.schemes.iter().position(|&s| s == id)
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Signature of a per-scheme runner, replaceable for instrumentation.
pub type SchemeRunner<'a> =
    dyn Fn(SchemeId, &NetworkRealization, &SystemConfig, &SchemeSettings, &TrialSeeds) -> Result<SchemeResult> + Sync + 'a;

/// Runs every scheme of one trial on a shared realization and seed set.
pub fn run_trial(spec: &ExperimentSpec, cfg: &SystemConfig, trial: u64, runner: &SchemeRunner<'_>) -> Vec<Result<SchemeResult>> {
    let seeds = TrialSeeds::new(spec.base.rng_seed, trial);
    let real = draw_realization(cfg, seeds.realization);
    spec.schemes
        .iter()
        .map(|&id| runner(id, &real, cfg, &spec.settings, &seeds))
        .collect()
}

/// [`run_experiment`] with a custom scheme runner.
pub fn run_experiment_with(spec: &ExperimentSpec, runner: &SchemeRunner<'_>) -> Result<ResultTable> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.sweep.values.len());
    for &value in &spec.sweep.values {
        let cfg = spec.config_at(value)?;
        let trials: Vec<Vec<Option<f64>>> = (0..spec.n_trials as u64)
            .into_par_iter()
            .map(|t| {
                run_trial(spec, &cfg, t, runner)
                    .into_iter()
                    .map(|r| {
                        r.ok().map(|r| match spec.metric {
                            Metric::Downlink => r.dl_sum_rate,
                            Metric::Uplink => r.ul_sum_rate,
                        })
                    })
                    .collect()
            })
            .collect();
        let samples: Vec<Vec<Option<f64>>> = (0..spec.schemes.len())
            .map(|s| trials.iter().map(|t| t[s]).collect())
            .collect();
        let mut mean = Vec::new();
        let mut se = Vec::new();
        let mut failures = Vec::new();
        for col in &samples {
            let ok: Vec<f64> = col.iter().flatten().copied().collect();
            let (m, e) = mean_se(&ok);
            mean.push(m);
            se.push(e);
            failures.push(col.len() - ok.len());
        }
        rows.push(ResultRow {
            value,
            mean,
            se,
            failures,
            samples,
        });
    }
    Ok(ResultTable {
        variable: spec.sweep.variable,
        metric: spec.metric,
        schemes: spec.schemes.clone(),
        rows,
    })
}

/// Runs the sweep: every trial draws a fresh realization from its index and
/// all schemes share it (paired comparison).
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    run_experiment_with(spec, &run_scheme)
}

/// Rounds to six significant digits and prints without exponent when
/// reasonable.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&mag) {
        return format!("{x:.5e}");
    }
    let scale = 10f64.powi(mag - 5);
    let rounded = (x / scale).round() * scale;
    let decimals = (5 - mag).max(0) as usize;
    format!("{rounded:.decimals$}")
}

fn format_sweep(variable: SweepVariable, v: f64) -> String {
    if variable.integral() {
        format!("{}", v as i64)
    } else {
        format_sig6(v)
    }
}

/// Writes the table: sweep column, one mean column per scheme, then one
/// `_se` column per scheme.
pub fn emit_csv(table: &ResultTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if table.rows.is_empty() {
        return Err(Error::InvalidConfig("refusing to write an empty table".into()));
    }
    let io_err = |source: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec![table.variable.column().to_string()];
    header.extend(table.schemes.iter().map(|s| s.csv_label().to_string()));
    header.extend(table.schemes.iter().map(|s| format!("{}_se", s.csv_label())));
    w.write_record(&header)?;
    for row in &table.rows {
        let mut rec = vec![format_sweep(table.variable, row.value)];
        rec.extend(row.mean.iter().map(|&x| format_sig6(x)));
        rec.extend(row.se.iter().map(|&x| format_sig6(x)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

#[cfg(test)]
mod tests;
