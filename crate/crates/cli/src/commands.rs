use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use cogrelay_core::experiment::config::{interior_grid, ExperimentConfig, Mode};
use cogrelay_core::experiment::oracle::{run_oracle, write_values_csv};
use cogrelay_core::experiment::plot::sweep_figures;
use cogrelay_core::experiment::sweep::{fmt_sig6, read_sweep_csv, run_sweep, write_sweep_csv, SweepRow};
use cogrelay_core::experiment::evaluate;
use cogrelay_core::rl::{read_qtable, train as train_learner, write_qtable, TrainSetup};
use cogrelay_core::simcore::ActionMask;
use cogrelay_core::OracleError;

use crate::output::OutDir;
use crate::{CliError, Common};

/// Reads the configuration (or the built-in defaults) and applies the
/// command-line overrides.
fn load_config(c: &Common) -> Result<ExperimentConfig, CliError> {
    let mut config = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            ExperimentConfig::from_toml_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = c.seed {
        config.run.base_seed = seed;
    }
    if let Some(mode) = &c.mode {
        let mode: Mode = mode.parse().map_err(CliError::Usage)?;
        config.run.mode = mode;
        config.sweep.modes = vec![mode];
    }
    if let Some(omegas) = &c.omega {
        let first = *omegas.first().ok_or_else(|| CliError::Usage("--omega needs at least one value".into()))?;
        config.reward.omega = first;
        config.oracle.omega = first;
        config.sweep.omegas = omegas.clone();
    }
    if let Some(n) = c.grid {
        if n == 0 {
            return Err(CliError::Usage("--grid must be at least 1".into()));
        }
        config.sweep.lambda_p = interior_grid(n);
    }
    if let Some(reps) = c.reps {
        config.sweep.replications = reps;
    }
    if c.threads == Some(0) {
        return Err(CliError::Usage("COGRELAY_THREADS must be at least 1".into()));
    }
    let problems = config.validate();
    if !problems.is_empty() {
        let list: Vec<String> = problems.iter().map(|d| format!("  {d}")).collect();
        return Err(CliError::Usage(format!("invalid settings after overrides:\n{}", list.join("\n"))));
    }
    Ok(config)
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn validate(c: &Common) -> Result<(), CliError> {
    let config = load_config(c)?;
    if !c.quiet {
        let source = c.config.as_ref().map_or("built-in defaults".to_string(), |p| p.display().to_string());
        println!("{source}: valid (schema version {})", config.schema_version);
    }
    Ok(())
}

pub fn train(c: &Common) -> Result<(), CliError> {
    let config = load_config(c)?;
    let out = OutDir::create(&c.out, c.quiet)?;
    let setup = TrainSetup {
        model: &config.model,
        reward: &config.reward,
        scheme: &config.levels,
        learning: &config.learning,
        mask: config.run.mode.mask(),
        horizon: config.run.train_horizon,
    };
    out.note(format_args!("training {} for {} slots (seed {})", config.run.mode, config.run.train_horizon, config.run.base_seed));
    let trained = train_learner(&setup, config.run.base_seed).map_err(runtime)?;
    out.write("qtable.txt", |w| write_qtable(&trained.table, w).map_err(|e| e.to_string()))?;
    let mut curve = String::from("slot,mean_reward\n");
    for p in &trained.curve {
        let _ = writeln!(curve, "{},{}", p.slot, fmt_sig6(p.mean_reward));
    }
    out.write_text("learning_curve.csv", &curve)?;
    Ok(())
}

pub fn eval(c: &Common, qtable: Option<PathBuf>) -> Result<(), CliError> {
    let config = load_config(c)?;
    let out = OutDir::create(&c.out, c.quiet)?;
    let path = qtable.unwrap_or_else(|| out.path("qtable.txt"));
    let file = fs::File::open(&path).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    let table = read_qtable(BufReader::new(file)).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let policy = table.greedy_policy();
    let mode = match table.mask() {
        ActionMask::FULL => Mode::Cooperative,
        ActionMask::NON_COOPERATIVE => Mode::NonCooperative,
        _ => config.run.mode,
    };
    let seed = config.run.base_seed;
    out.note(format_args!("evaluating {} for {} slots (seed {seed})", path.display(), config.run.eval_horizon));
    let metrics = evaluate(&policy, &config.model, &config.reward, config.run.eval_horizon, seed);
    let row = SweepRow {
        mode,
        omega: config.reward.omega,
        lambda_p: config.model.arrivals.p.lambda,
        replication: 0,
        seed,
        metrics,
    };
    out.write("metrics.csv", |w| write_sweep_csv(std::slice::from_ref(&row), w).map_err(|e| e.to_string()))?;
    Ok(())
}

pub fn sweep(c: &Common) -> Result<(), CliError> {
    let config = load_config(c)?;
    let out = OutDir::create(&c.out, c.quiet)?;
    let s = &config.sweep;
    out.note(format_args!(
        "sweep: {} lambda_p x {} omega x {} mode x {} replications, {} train + {} eval slots per cell",
        s.lambda_p.len(),
        s.omegas.len(),
        s.modes.len(),
        s.replications,
        config.run.train_horizon,
        config.run.eval_horizon
    ));
    let result = run_sweep(&config, c.threads);
    out.write("sweep.csv", |w| write_sweep_csv(&result.rows, w).map_err(|e| e.to_string()))?;

    let mut manifest = String::new();
    let _ = writeln!(manifest, "cells = {}", result.cell_count());
    let _ = writeln!(manifest, "succeeded = {}", result.rows.len());
    let _ = writeln!(manifest, "failed = {}", result.failures.len());
    for f in &result.failures {
        let _ = writeln!(
            manifest,
            "failed cell: lambda_p={} omega={} mode={} replication={}: {}",
            f.lambda_p, f.omega, f.key.mode, f.key.replication, f.message
        );
    }
    out.write_text("sweep_manifest.txt", &manifest)?;
    if result.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("{} of {} sweep cells failed; see sweep_manifest.txt", result.failures.len(), result.cell_count())))
    }
}

pub fn oracle(c: &Common) -> Result<(), CliError> {
    let config = load_config(c)?;
    let out = OutDir::create(&c.out, c.quiet)?;
    out.note(format_args!("solving the shrunk instance (capacity {})", config.oracle.capacity));
    let run = run_oracle(&config, config.run.base_seed).map_err(|e| match e {
        OracleError::StateSpaceTooLarge { .. } | OracleError::Model(_) => CliError::Usage(e.to_string()),
        OracleError::Rl(_) => CliError::Runtime(e.to_string()),
    })?;
    out.write("oracle_values.csv", |w| write_values_csv(&run.instance, &run.solution, w).map_err(|e| e.to_string()))?;
    let r = &run.report;
    let mut report = String::new();
    let _ = writeln!(report, "states = {}", run.instance.state_count());
    let _ = writeln!(report, "sweeps = {}", run.solution.sweeps);
    let _ = writeln!(report, "converged = {}", run.solution.converged);
    let _ = writeln!(report, "residual = {:e}", run.solution.residual);
    let _ = writeln!(report, "optimality_gap_bound = {:e}", run.solution.optimality_gap_bound);
    let _ = writeln!(report, "max_row_sum_error = {:e}", run.row_sum_error);
    let _ = writeln!(report, "eval_slots = {}", config.oracle.eval_slots);
    let seeds: Vec<String> = config.oracle.seeds.iter().map(u64::to_string).collect();
    let _ = writeln!(report, "seeds = {}", seeds.join(","));
    let _ = writeln!(report, "oracle_mean_reward = {}", r.oracle_mean_reward);
    let _ = writeln!(report, "learned_mean_reward = {}", r.learned_mean_reward);
    let _ = writeln!(report, "gap = {}", r.gap);
    out.write_text("oracle_report.txt", &report)?;
    out.note(format_args!("oracle {:.5}, learned {:.5}, relative gap {:.4}", r.oracle_mean_reward, r.learned_mean_reward, r.gap));
    Ok(())
}

pub fn plot(c: &Common, input: Option<PathBuf>) -> Result<(), CliError> {
    // Plotting needs no model settings, but a bad --config is still reported.
    load_config(c)?;
    let out = OutDir::create(&c.out, c.quiet)?;
    let path = input.unwrap_or_else(|| out.path("sweep.csv"));
    let file = fs::File::open(&path).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
    let rows = read_sweep_csv(file).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    if rows.is_empty() {
        return Err(CliError::Runtime(format!("{} has no rows", path.display())));
    }
    for (name, svg) in sweep_figures(&rows) {
        out.write_text(name, &svg)?;
    }
    Ok(())
}
