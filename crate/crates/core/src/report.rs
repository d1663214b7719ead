//! Metrics, multi-run experiments, parameter sweeps and result files.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{RunTrace, Simulation};
use crate::error::{Error, Result};
use crate::events::EventStatus;
use crate::scenario::{run_seed, PolicyKind, ScenarioConfig};

/// Number of bins in the reported MSE curve.
pub const MSE_BINS: usize = 100;

/// Fraction of detected, terminated events delivered within the deadline.
/// `None` when no such event exists.
pub fn in_time_probability(trace: &RunTrace) -> Option<f64> {
    let mut delivered = 0usize;
    let mut total = 0usize;
    for e in trace.terminal_events() {
        total += 1;
        delivered += usize::from(e.in_time());
    }
    (total > 0).then(|| delivered as f64 / total as f64)
}

/// Mean of the active agents' minibatch losses.
pub fn system_mse(losses: &[f64]) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::Empty("losses"));
    }
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub slots: u64,
    pub in_time: Option<f64>,
    pub delivered: u64,
    pub expired: u64,
    pub undetected: u64,
    pub updates: u64,
}

impl RunSummary {
    pub fn from_trace(trace: &RunTrace) -> Self {
        let count = |s: EventStatus| trace.events.iter().filter(|e| e.status == s).count() as u64;
        Self {
            seed: trace.seed,
            slots: trace.n_slots,
            in_time: in_time_probability(trace),
            delivered: count(EventStatus::Delivered),
            expired: count(EventStatus::Expired),
            undetected: count(EventStatus::Undetected),
            updates: trace.mse.len() as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseBin {
    pub slot_start: u64,
    pub mean: f64,
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub fingerprint: String,
    pub policy: PolicyKind,
    pub runs: Vec<RunSummary>,
    /// Mean of the per-run in-time probabilities over runs that had events.
    pub mean: Option<f64>,
    /// Standard error of `mean`; absent with fewer than two estimates.
    pub stderr: Option<f64>,
    pub mse: Vec<MseBin>,
    pub delivered: u64,
    pub expired: u64,
    pub undetected: u64,
}

impl ExperimentResult {
    pub fn from_traces(config: &ScenarioConfig, traces: &[RunTrace]) -> Self {
        let runs: Vec<RunSummary> = traces.iter().map(RunSummary::from_trace).collect();
        let estimates: Vec<f64> = runs.iter().filter_map(|r| r.in_time).collect();
        let (mean, stderr) = mean_stderr(&estimates);
        Self {
            fingerprint: config.fingerprint(),
            policy: config.policy_kind,
            mean,
            stderr,
            mse: bin_mse(traces),
            delivered: runs.iter().map(|r| r.delivered).sum(),
            expired: runs.iter().map(|r| r.expired).sum(),
            undetected: runs.iter().map(|r| r.undetected).sum(),
            runs,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn runs_csv(&self) -> String {
        let mut out = String::from("seed,slots,in_time,delivered,expired,undetected,updates\n");
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.seed,
                r.slots,
                opt(r.in_time),
                r.delivered,
                r.expired,
                r.undetected,
                r.updates
            );
        }
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean_stderr(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

fn bin_mse(traces: &[RunTrace]) -> Vec<MseBin> {
    let horizon = traces.iter().map(|t| t.n_slots).max().unwrap_or(0);
    if horizon == 0 {
        return Vec::new();
    }
    let width = horizon.div_ceil(MSE_BINS as u64);
    let n_bins = horizon.div_ceil(width) as usize;
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0u64; n_bins];
    for t in traces {
        for s in &t.mse {
            let b = (s.slot / width) as usize;
            sums[b] += s.value;
            counts[b] += 1;
        }
    }
    (0..n_bins)
        .filter(|&b| counts[b] > 0)
        .map(|b| MseBin {
            slot_start: b as u64 * width,
            mean: sums[b] / counts[b] as f64,
            samples: counts[b],
        })
        .collect()
}

/// Runs replication `r` of `config` with seed `run_seed(config.rng_seed, r)`.
pub fn run_replication(config: &ScenarioConfig, r: u64) -> Result<RunTrace> {
    Simulation::new(config, run_seed(config.rng_seed, r))?.run_to_end()
}

/// Runs `config.n_runs` independent replications in parallel.
pub fn run_experiment(config: &ScenarioConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let traces = (0..config.n_runs as u64)
        .into_par_iter()
        .map(|r| run_replication(config, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult::from_traces(config, &traces))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NSubnets,
    NChannels,
    Eta,
    DnnShape,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::NSubnets => "n_subnets",
            SweepAxis::NChannels => "n_channels",
            SweepAxis::Eta => "eta",
            SweepAxis::DnnShape => "dnn_shape",
        }
    }

    /// Copy of `base` with this axis set to `value`.
    ///
    /// `dnn_shape` values list the hidden widths joined by `x`, e.g. `4x4`;
    /// all widths must agree. `0` means no hidden layer.
    pub fn apply(self, base: &ScenarioConfig, value: &str) -> Result<ScenarioConfig> {
        let bad = || Error::InvalidAxis(format!("{}={value}", self.as_str()));
        let mut c = base.clone();
        match self {
            SweepAxis::NSubnets => c.n_subnets = value.parse().map_err(|_| bad())?,
            SweepAxis::NChannels => c.n_channels = value.parse().map_err(|_| bad())?,
            SweepAxis::Eta => c.eta_per_m = value.parse().map_err(|_| bad())?,
            SweepAxis::DnnShape => {
                if value == "0" {
                    c.dnn_hidden_layers = 0;
                } else {
                    let widths = value
                        .split('x')
                        .map(|w| w.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad())?;
                    if widths.iter().any(|&w| w != widths[0]) {
                        return Err(bad());
                    }
                    c.dnn_hidden_layers = widths.len();
                    c.dnn_hidden_size = widths[0];
                }
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_subnets" | "n" => Ok(SweepAxis::NSubnets),
            "n_channels" | "m" => Ok(SweepAxis::NChannels),
            "eta" | "eta_per_m" => Ok(SweepAxis::Eta),
            "dnn_shape" => Ok(SweepAxis::DnnShape),
            _ => Err(Error::InvalidAxis(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis_value: String,
    pub result: ExperimentResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis_value,policy,mean,stderr,runs\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                p.axis_value,
                p.result.policy,
                opt(p.result.mean),
                opt(p.result.stderr),
                p.result.runs.len()
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One experiment per `(value, policy)`. Every policy at a point reuses the
/// same replication seeds.
pub fn sweep(base: &ScenarioConfig, axis: SweepAxis, values: &[String], policies: &[PolicyKind]) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::Empty("sweep values"));
    }
    if policies.is_empty() {
        return Err(Error::Empty("policies"));
    }
    let mut points = Vec::with_capacity(values.len() * policies.len());
    for v in values {
        let at = axis.apply(base, v)?;
        for &kind in policies {
            let c = ScenarioConfig {
                policy_kind: kind,
                ..at.clone()
            };
            points.push(SweepPoint {
                axis_value: v.clone(),
                result: run_experiment(&c)?,
            });
        }
    }
    Ok(SweepResult { axis, points })
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// `summary.json` and `runs.csv`. Both are a pure function of the config.
pub fn write_experiment(dir: &Path, result: &ExperimentResult) -> Result<()> {
    write_atomic(&dir.join("summary.json"), result.to_json()?.as_bytes())?;
    write_atomic(&dir.join("runs.csv"), result.runs_csv().as_bytes())
}

/// `sweep.json` and `sweep.csv`.
pub fn write_sweep(dir: &Path, result: &SweepResult) -> Result<()> {
    write_atomic(&dir.join("sweep.json"), result.to_json()?.as_bytes())?;
    write_atomic(&dir.join("sweep.csv"), result.to_csv().as_bytes())
}

/// Wall-clock time, kept apart from the deterministic result files.
pub fn write_timing(dir: &Path, elapsed: std::time::Duration) -> Result<()> {
    let doc = serde_json::json!({ "wall_clock_s": elapsed.as_secs_f64() });
    write_atomic(&dir.join("timing.json"), serde_json::to_string_pretty(&doc)?.as_bytes())
}
