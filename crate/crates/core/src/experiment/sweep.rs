//! Primary-load sweep: train then evaluate one learner per cell, collect the
//! results into a table, and read/write that table as CSV.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{ArtifactError, RlError};
use crate::experiment::config::{ExperimentConfig, Mode};
use crate::experiment::metrics::{evaluate, MetricsRecord};
use crate::rl::{train, RewardParams, TrainSetup};
use crate::simcore::PerQueue;
use crate::stochastic::derive_seed;

/// Coordinates of one sweep cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub lambda_index: usize,
    pub omega_index: usize,
    pub mode: Mode,
    pub replication: u32,
}

/// Seed shared by every cell with the same primary load and replication.
///
/// Modes and weights at the same coordinates see identical arrival and link
/// realizations, so their differences are not diluted by sampling noise.
pub fn cell_seed(base_seed: u64, lambda_index: usize, replication: u32) -> u64 {
    derive_seed(base_seed, &[lambda_index as u64, u64::from(replication)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mode: Mode,
    pub omega: f64,
    pub lambda_p: f64,
    pub replication: u32,
    pub seed: u64,
    pub metrics: MetricsRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub key: CellKey,
    pub lambda_p: f64,
    pub omega: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    /// Successful cells in grid order (lambda, omega, mode, replication).
    pub rows: Vec<SweepRow>,
    pub failures: Vec<CellFailure>,
}

impl SweepResult {
    pub fn cell_count(&self) -> usize {
        self.rows.len() + self.failures.len()
    }
}

/// All cells in grid order.
pub fn sweep_cells(config: &ExperimentConfig) -> Vec<CellKey> {
    let s = &config.sweep;
    let mut cells = Vec::new();
    for lambda_index in 0..s.lambda_p.len() {
        for omega_index in 0..s.omegas.len() {
            for &mode in &s.modes {
                for replication in 0..s.replications {
                    cells.push(CellKey { lambda_index, omega_index, mode, replication });
                }
            }
        }
    }
    cells
}

/// Trains a fresh learner on one cell and evaluates its greedy policy.
pub fn run_cell(config: &ExperimentConfig, key: CellKey) -> Result<SweepRow, RlError> {
    let lambda_p = config.sweep.lambda_p[key.lambda_index];
    let omega = config.sweep.omegas[key.omega_index];
    let model = config.model.clone().with_primary_load(lambda_p);
    let reward = RewardParams { omega, ..config.reward };
    let seed = cell_seed(config.run.base_seed, key.lambda_index, key.replication);
    model.validate()?;
    reward.validate()?;
    let setup = TrainSetup {
        model: &model,
        reward: &reward,
        scheme: &config.levels,
        learning: &config.learning,
        mask: key.mode.mask(),
        horizon: config.run.train_horizon,
    };
    let trained = train(&setup, seed)?;
    let metrics = evaluate(&trained.policy, &model, &reward, config.run.eval_horizon, seed);
    Ok(SweepRow { mode: key.mode, omega, lambda_p, replication: key.replication, seed, metrics })
}

/// Runs every cell, in parallel on at most `threads` threads (all cores when
/// `None`). A failing cell is reported with its coordinates; the others
/// still run. The result is independent of the thread count.
pub fn run_sweep(config: &ExperimentConfig, threads: Option<usize>) -> SweepResult {
    let cells = sweep_cells(config);
    let run_all = || cells.par_iter().map(|&key| (key, run_cell(config, key))).collect::<Vec<_>>();
    let outcomes = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(run_all),
            Err(_) => run_all(),
        },
        None => run_all(),
    };
    let mut result = SweepResult::default();
    for (key, outcome) in outcomes {
        match outcome {
            Ok(row) => result.rows.push(row),
            Err(e) => result.failures.push(CellFailure {
                key,
                lambda_p: config.sweep.lambda_p[key.lambda_index],
                omega: config.sweep.omegas[key.omega_index],
                message: e.to_string(),
            }),
        }
    }
    result
}

pub const CSV_HEADER: [&str; 19] = [
    "mode",
    "omega",
    "lambda_p",
    "replication",
    "seed",
    "primary_throughput",
    "secondary_throughput",
    "relayed_throughput",
    "mean_q_p",
    "mean_q_pe",
    "mean_q_s",
    "mean_q_ps",
    "mean_q_se",
    "drops_p",
    "drops_s",
    "drops_ps",
    "energy_wasted_rate",
    "collision_rate",
    "mean_reward",
];

/// Formats like C's `%g`: six significant digits, trailing zeros trimmed,
/// exponent notation outside `[1e-4, 1e6)`.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), ArtifactError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let m = &r.metrics;
        let q = &m.mean_queue;
        w.write_record([
            r.mode.as_str().to_string(),
            fmt_sig6(r.omega),
            fmt_sig6(r.lambda_p),
            r.replication.to_string(),
            r.seed.to_string(),
            fmt_sig6(m.primary_throughput),
            fmt_sig6(m.secondary_throughput),
            fmt_sig6(m.relayed_throughput),
            fmt_sig6(q.p),
            fmt_sig6(q.pe),
            fmt_sig6(q.s),
            fmt_sig6(q.ps),
            fmt_sig6(q.se),
            m.drops.p.to_string(),
            m.drops.s.to_string(),
            m.drops.ps.to_string(),
            fmt_sig6(m.energy_wasted_rate),
            fmt_sig6(m.collision_rate),
            fmt_sig6(m.mean_reward),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_sweep_csv`]. Fields not stored in the
/// CSV (slot count, energy-queue drops) read back as zero.
pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>, ArtifactError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(ArtifactError::Format { line: 1, message: "unexpected CSV header".into() });
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let f = |k: usize| -> Result<f64, ArtifactError> {
            record[k].parse().map_err(|_| ArtifactError::Format { line, message: format!("bad number in column {}", CSV_HEADER[k]) })
        };
        let u = |k: usize| -> Result<u64, ArtifactError> {
            record[k].parse().map_err(|_| ArtifactError::Format { line, message: format!("bad integer in column {}", CSV_HEADER[k]) })
        };
        let mode = record[0].parse::<Mode>().map_err(|message| ArtifactError::Format { line, message })?;
        rows.push(SweepRow {
            mode,
            omega: f(1)?,
            lambda_p: f(2)?,
            replication: u(3)? as u32,
            seed: u(4)?,
            metrics: MetricsRecord {
                slots: 0,
                primary_throughput: f(5)?,
                secondary_throughput: f(6)?,
                relayed_throughput: f(7)?,
                mean_queue: PerQueue { p: f(8)?, pe: f(9)?, s: f(10)?, ps: f(11)?, se: f(12)? },
                drops: PerQueue { p: u(13)?, pe: 0, s: u(14)?, ps: u(15)?, se: 0 },
                energy_wasted_rate: f(16)?,
                collision_rate: f(17)?,
                mean_reward: f(18)?,
            },
        });
    }
    Ok(rows)
}

/// Sample mean and spread across replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator; 0 for n = 1).
    pub std_dev: f64,
    pub std_err: f64,
}

impl Stats {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, std_dev: f64::NAN, std_err: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std_dev = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { n, mean, std_dev, std_err: std_dev / (n as f64).sqrt() }
    }
}

/// Group key for aggregation across replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub mode: Mode,
    omega_bits: u64,
    lambda_bits: u64,
}

impl GroupKey {
    pub fn new(mode: Mode, omega: f64, lambda_p: f64) -> Self {
        Self { mode, omega_bits: omega.to_bits(), lambda_bits: lambda_p.to_bits() }
    }

    pub fn omega(&self) -> f64 {
        f64::from_bits(self.omega_bits)
    }

    pub fn lambda_p(&self) -> f64 {
        f64::from_bits(self.lambda_bits)
    }
}

/// Per (mode, omega, lambda_p) statistics of `metric` across replications.
pub fn aggregate(rows: &[SweepRow], metric: impl Fn(&MetricsRecord) -> f64) -> BTreeMap<GroupKey, Stats> {
    let mut groups: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry(GroupKey::new(r.mode, r.omega, r.lambda_p)).or_default().push(metric(&r.metrics));
    }
    groups.into_iter().map(|(k, xs)| (k, Stats::of(&xs))).collect()
}
