//! Line-oriented experiment files.
//!
//! ```text
//! # comment
//! [system]
//! n_irs = 16
//! noise_var_db = 10
//!
//! [sweep]
//! variable = T
//! values = 1, 2, 4, 8
//! ```
//!
//! Sections: `system`, `experiment`, `sweep`, `optimizer`, `training`.
//! Every key except `sweep.variable` and `sweep.values` has a default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::schemes::{SchemeId, SchemeSettings};
use crate::topology::{db_to_linear, SystemConfig};
use crate::{Error, Result};

use super::{ExperimentSpec, Metric, Sweep, SweepVariable};

const KEYS: &[(&str, &[&str])] = &[
    (
        "system",
        &[
            "num_cells",
            "users_per_cell",
            "n_irs",
            "bts_antennas",
            "ue_antennas",
            "rician_factor",
            "cross_gain",
            "cross_gain_db",
            "tx_power",
            "tx_power_db",
            "noise_var",
            "noise_var_db",
            "pilot_len",
            "n_fb",
            "seed",
        ],
    ),
    ("experiment", &["schemes", "n_trials", "output", "metric"]),
    ("sweep", &["variable", "values"]),
    (
        "optimizer",
        &[
            "grid_points",
            "max_iters",
            "grad_tol",
            "armijo_c1",
            "armijo_beta",
            "max_backtracks",
            "fd_step",
            "n_starts",
            "analytic_gradient",
        ],
    ),
    ("training", &["n_alt", "noise_mismatch_db", "codebook", "pilots", "joint_csi"]),
];

struct Entry {
    value: String,
    line: usize,
}

/// Parsed `section.key -> value` pairs.
struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section: Option<&str> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| Error::ConfigLine {
                    line,
                    message: format!("malformed section header `{content}`"),
                })?;
                let name = name.trim();
                let known = KEYS.iter().find(|(s, _)| *s == name).ok_or_else(|| Error::ConfigLine {
                    line,
                    message: format!("unknown section `[{name}]`"),
                })?;
                section = Some(known.0);
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigLine {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let sec = section.ok_or_else(|| Error::ConfigLine {
                line,
                message: format!("key `{key}` appears before any [section]"),
            })?;
            let allowed = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&key) {
                return Err(Error::ConfigLine {
                    line,
                    message: format!("unknown key `{key}` in [{sec}]"),
                });
            }
            let full = format!("{sec}.{key}");
            if let Some(prev) = entries.get(&full) {
                let prev: &Entry = prev;
                return Err(Error::ConfigLine {
                    line,
                    message: format!("duplicate key `{full}` (first set on line {})", prev.line),
                });
            }
            entries.insert(
                full,
                Entry {
                    value: value.trim().to_string(),
                    line,
                },
            );
        }
        Ok(Self { entries })
    }

    fn key_error(&self, key: &str, message: String) -> Error {
        let message = match self.entries.get(key) {
            Some(e) => format!("{message} (line {})", e.line),
            None => message,
        };
        Error::ConfigKey {
            key: key.to_string(),
            message,
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| self.key_error(key, format!("cannot parse `{}`: {err}", e.value))),
        }
    }

    fn set<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>()
                    .map_err(|err| self.key_error(key, format!("cannot parse list item `{s}`: {err}")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

/// Power-like keys come either linear (`key`) or in dB (`key_db`).
fn linear_or_db(raw: &RawConfig, key: &str, default: f64) -> Result<f64> {
    let db_key = format!("{key}_db");
    match (raw.get::<f64>(key)?, raw.get::<f64>(&db_key)?) {
        (Some(_), Some(_)) => Err(raw.key_error(key, format!("set either `{key}` or `{db_key}`, not both"))),
        (Some(lin), None) => {
            if lin > 0.0 && lin.is_finite() {
                Ok(lin)
            } else {
                Err(raw.key_error(key, format!("must be positive, got {lin}")))
            }
        }
        (None, Some(db)) => Ok(db_to_linear(db)),
        (None, None) => Ok(default),
    }
}

/// Parses experiment text; `base_dir` resolves a relative output path.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ExperimentSpec> {
    let raw = RawConfig::parse(text)?;

    let mut sys = SystemConfig::default();
    raw.set("system.num_cells", &mut sys.num_cells)?;
    raw.set("system.users_per_cell", &mut sys.users_per_cell)?;
    raw.set("system.n_irs", &mut sys.n_irs)?;
    raw.set("system.bts_antennas", &mut sys.bts_antennas)?;
    raw.set("system.ue_antennas", &mut sys.ue_antennas)?;
    raw.set("system.rician_factor", &mut sys.rician_factor)?;
    raw.set("system.pilot_len", &mut sys.pilot_len)?;
    raw.set("system.n_fb", &mut sys.n_fb)?;
    raw.set("system.seed", &mut sys.rng_seed)?;
    sys.cross_gain = linear_or_db(&raw, "system.cross_gain", sys.cross_gain)?;
    sys.tx_power = linear_or_db(&raw, "system.tx_power", sys.tx_power)?;
    sys.noise_var = linear_or_db(&raw, "system.noise_var", sys.noise_var)?;
    sys.validate().map_err(|e| raw.key_error("system", e.to_string()))?;

    let mut settings = SchemeSettings::default();
    let o = &mut settings.optimizer;
    raw.set("optimizer.grid_points", &mut o.grid_points)?;
    raw.set("optimizer.max_iters", &mut o.max_iters)?;
    raw.set("optimizer.grad_tol", &mut o.grad_tol)?;
    raw.set("optimizer.armijo_c1", &mut o.armijo_c1)?;
    raw.set("optimizer.armijo_beta", &mut o.armijo_beta)?;
    raw.set("optimizer.max_backtracks", &mut o.max_backtracks)?;
    raw.set("optimizer.fd_step", &mut o.fd_step)?;
    raw.set("optimizer.n_starts", &mut o.n_starts)?;
    raw.set("optimizer.analytic_gradient", &mut o.analytic_gradient)?;
    raw.set("training.n_alt", &mut settings.n_alt)?;
    raw.set("training.noise_mismatch_db", &mut settings.noise_mismatch_db)?;
    raw.set("training.codebook", &mut settings.codebook)?;
    raw.set("training.pilots", &mut settings.pilot_kind)?;
    raw.set("training.joint_csi", &mut settings.joint_csi)?;
    settings.validate().map_err(|e| raw.key_error("optimizer/training", e.to_string()))?;

    let variable: SweepVariable = raw
        .get("sweep.variable")?
        .ok_or_else(|| raw.key_error("sweep.variable", "missing required key".into()))?;
    let values: Vec<f64> = raw
        .list("sweep.values")?
        .ok_or_else(|| raw.key_error("sweep.values", "missing required key".into()))?;
    let sweep = Sweep { variable, values };
    sweep.validate().map_err(|msg| raw.key_error("sweep.values", msg))?;

    let schemes = raw.list::<SchemeId>("experiment.schemes")?.unwrap_or_else(|| SchemeId::ALL.to_vec());
    if schemes.is_empty() {
        return Err(raw.key_error("experiment.schemes", "list is empty".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = schemes.iter().find(|s| !seen.insert(**s)) {
        return Err(raw.key_error("experiment.schemes", format!("`{dup}` listed twice")));
    }
    let n_trials: usize = raw.get("experiment.n_trials")?.unwrap_or(100);
    if n_trials == 0 {
        return Err(raw.key_error("experiment.n_trials", "must be at least 1".into()));
    }
    let metric: Metric = raw.get("experiment.metric")?.unwrap_or(Metric::Downlink);
    let output: String = raw.get("experiment.output")?.unwrap_or_else(|| "results.csv".into());
    let output_path = {
        let p = PathBuf::from(output);
        if p.is_absolute() {
            p
        } else {
            base_dir.join(p)
        }
    };

    let spec = ExperimentSpec {
        base: sys,
        settings,
        sweep,
        schemes,
        n_trials,
        metric,
        output_path,
    };
    for &v in &spec.sweep.values {
        spec.config_at(v).map_err(|e| raw.key_error("sweep.values", e.to_string()))?;
    }
    Ok(spec)
}

/// Reads and validates an experiment file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text, path.parent().unwrap_or_else(|| Path::new(".")))
}
