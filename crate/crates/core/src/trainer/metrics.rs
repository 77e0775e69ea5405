//! Per-iteration metrics log: comma-separated rows with a header line.
//!
//! Columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `iteration` | update index, starting at 1 |
//! | `env_steps` | cumulative environment steps |
//! | `mean_reward` | mean dt-scaled step reward over the rollout |
//! | `mean_tracking` | mean linear-velocity tracking reward over the rollout |
//! | `episodes`, `falls`, `timeouts`, `faults` | episode ends during the rollout |
//! | `gate_value` | windowed mean episode tracking reward, blank when the gate was not evaluated |
//! | `gate_met` | 1 if the gate was evaluated and met, else 0 |
//! | `v_max`, `cycle_time` | curriculum state after the gate |
//! | `policy_loss`, `value_loss`, `entropy`, `approx_kl`, `clip_fraction`, `grad_norm` | update statistics |
//! | `ratio_deviation` | largest `abs(ratio - 1)` on the first minibatch |
//! | `mean_abs_yaw_momentum` | mean `abs(L_z)` over the rollout |
//! | `term_<name>` | mean weighted reward term, one column per term |
//!
//! Floats use the shortest representation that parses back to the same value.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rewards::TERM_NAMES;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsRow {
    pub iteration: u64,
    pub env_steps: u64,
    pub mean_reward: f64,
    pub mean_tracking: f64,
    pub episodes: u64,
    pub falls: u64,
    pub timeouts: u64,
    pub faults: u64,
    pub gate_value: Option<f64>,
    pub gate_met: bool,
    pub v_max: f64,
    pub cycle_time: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
    pub ratio_deviation: f64,
    pub mean_abs_yaw_momentum: f64,
    /// Mean weighted term contributions in [`TERM_NAMES`] order.
    pub terms: Vec<f64>,
}

const FIXED: [&str; 20] = [
    "iteration",
    "env_steps",
    "mean_reward",
    "mean_tracking",
    "episodes",
    "falls",
    "timeouts",
    "faults",
    "gate_value",
    "gate_met",
    "v_max",
    "cycle_time",
    "policy_loss",
    "value_loss",
    "entropy",
    "approx_kl",
    "clip_fraction",
    "grad_norm",
    "ratio_deviation",
    "mean_abs_yaw_momentum",
];

pub fn header() -> Vec<String> {
    FIXED
        .iter()
        .map(|s| s.to_string())
        .chain(TERM_NAMES.iter().map(|t| format!("term_{t}")))
        .collect()
}

impl MetricsRow {
    pub fn record(&self) -> Vec<String> {
        let f = |v: f64| format!("{v}");
        let mut out = vec![
            self.iteration.to_string(),
            self.env_steps.to_string(),
            f(self.mean_reward),
            f(self.mean_tracking),
            self.episodes.to_string(),
            self.falls.to_string(),
            self.timeouts.to_string(),
            self.faults.to_string(),
            self.gate_value.map(f).unwrap_or_default(),
            u8::from(self.gate_met).to_string(),
            f(self.v_max),
            f(self.cycle_time),
            f(self.policy_loss),
            f(self.value_loss),
            f(self.entropy),
            f(self.approx_kl),
            f(self.clip_fraction),
            f(self.grad_norm),
            f(self.ratio_deviation),
            f(self.mean_abs_yaw_momentum),
        ];
        out.extend((0..TERM_NAMES.len()).map(|i| f(self.terms.get(i).copied().unwrap_or(0.0))));
        out
    }

    pub fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        let want = header().len();
        if rec.len() != want {
            return Err(Error::InvalidInput(format!("metrics row has {} fields, expected {want}", rec.len())));
        }
        let fl = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::InvalidInput(format!("metrics column `{}`: bad number `{}`", header()[i], &rec[i])))
        };
        let int = |i: usize| -> Result<u64> {
            rec[i].parse().map_err(|_| Error::InvalidInput(format!("metrics column `{}`: bad integer `{}`", header()[i], &rec[i])))
        };
        Ok(Self {
            iteration: int(0)?,
            env_steps: int(1)?,
            mean_reward: fl(2)?,
            mean_tracking: fl(3)?,
            episodes: int(4)?,
            falls: int(5)?,
            timeouts: int(6)?,
            faults: int(7)?,
            gate_value: if rec[8].is_empty() { None } else { Some(fl(8)?) },
            gate_met: int(9)? != 0,
            v_max: fl(10)?,
            cycle_time: fl(11)?,
            policy_loss: fl(12)?,
            value_loss: fl(13)?,
            entropy: fl(14)?,
            approx_kl: fl(15)?,
            clip_fraction: fl(16)?,
            grad_norm: fl(17)?,
            ratio_deviation: fl(18)?,
            mean_abs_yaw_momentum: fl(19)?,
            terms: (FIXED.len()..want).map(fl).collect::<Result<_>>()?,
        })
    }
}

/// Appends rows to a metrics file, flushing after each one.
pub struct MetricsWriter {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl MetricsWriter {
    /// Creates (truncating) `path` and writes the header.
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        writer.write_record(header())?;
        writer.flush()?;
        Ok(Self { path: path.to_path_buf(), writer })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, row: &MetricsRow) -> Result<()> {
        self.writer.write_record(row.record())?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Reads a metrics file. A file without data rows is an error naming the file.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let head = reader.headers()?.clone();
    if head.iter().collect::<Vec<_>>() != header() {
        return Err(Error::InvalidInput(format!("{}: unexpected metrics header", path.display())));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        rows.push(MetricsRow::from_record(&rec?).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!("{}: metrics log has no rows", path.display())));
    }
    Ok(rows)
}
