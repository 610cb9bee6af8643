//! Command-line front end: calibrate a model from data, solve it into a
//! policy artifact, backtest strategies, and run scenario sweeps, all from
//! one JSON config. Outputs are deterministic functions of (inputs, config,
//! seed); wall-clock timestamps go only to the `run.log` sidecar.

mod config;
mod io;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use config::RunConfig;
use lobmm_core::backtest::{run_monte_carlo, Strategy};
use lobmm_core::calib::{calibrate, CalibParams};
use lobmm_core::model::MarketModel;
use lobmm_core::solver::{decode_policy, encode_policy, solve_policy};
use lobmm_core::sweep::{
    sweep_drift, sweep_sensitivity, sweep_stamp_duty, sweep_volatility,
};
use lobmm_core::synth;

#[derive(Parser)]
#[command(name = "lobmm", about = "Optimal market making: calibrate, solve, backtest, sweep")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master random seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyKind {
    Policy,
    Constant,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model document and print its validation report.
    Validate {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Estimate a model from snapshot and own-quote CSVs.
    Calibrate {
        /// CSV `time_s,best_bid,best_ask`.
        #[arg(long)]
        snapshots: PathBuf,
        /// CSV `time_s,side,level,spread_state,event`.
        #[arg(long)]
        quotes: PathBuf,
        /// Resample interval for drift/volatility estimation, seconds.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Solve the model into a policy artifact.
    Solve {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Artifact path (default `<out-dir>/policy.bin`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo backtest of a strategy.
    Backtest {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        strategy: StrategyKind,
        /// Policy artifact (default `<out-dir>/policy.bin`; solved on the
        /// fly when absent).
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Path count (overrides the config).
        #[arg(long)]
        paths: Option<usize>,
        /// Retain this many full path records in `sampled_paths.csv`.
        #[arg(long)]
        emit_paths: Option<usize>,
        /// Also write per-path terminals to `per_path.csv`.
        #[arg(long)]
        emit_terminals: bool,
        /// Accept a policy solved for a different model fingerprint.
        #[arg(long)]
        allow_mismatch: bool,
    },
    /// Parameter sweep over an axis from the config.
    Sweep {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Overrides the config's sweep axis.
        #[arg(long)]
        axis: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// 2 data/config error, 3 resource, 4 artifact mismatch.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<lobmm_core::Error>() {
        Some(lobmm_core::Error::Resource(_)) => 3,
        Some(lobmm_core::Error::Artifact(_)) => 4,
        _ => 2,
    }
}

struct Run {
    config: RunConfig,
    out_dir: PathBuf,
    seed: u64,
    started: Instant,
    log_lines: Vec<String>,
}

impl Run {
    fn new(cli: &Cli) -> Result<Run> {
        if let Some(threads) = cli.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .context("configuring the thread pool")?;
        }
        let config = match &cli.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let out_dir = cli
            .out_dir
            .clone()
            .or_else(|| config.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        let seed = cli.seed.or(config.seed).unwrap_or(0);
        Ok(Run { config, out_dir, seed, started: Instant::now(), log_lines: Vec::new() })
    }

    fn log(&mut self, line: impl Into<String>) {
        let line = line.into();
        println!("{line}");
        self.log_lines.push(line);
    }

    fn resolve_model(&mut self, flag: Option<&Path>) -> Result<MarketModel> {
        let (model, warnings) = self.config.resolve_model(flag)?;
        for w in warnings {
            self.log(format!("model warning: {w}"));
        }
        Ok(model)
    }

    /// Timestamps live here and only here; artifacts stay byte-reproducible.
    fn finish(self, command: &str) -> Result<()> {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
        let mut log = format!(
            "command: {command}\nseed: {}\nfinished_unix_s: {}\nelapsed_s: {:.3}\n",
            self.seed,
            now.as_secs(),
            self.started.elapsed().as_secs_f64()
        );
        for line in &self.log_lines {
            log.push_str(line);
            log.push('\n');
        }
        fs::write(self.out_dir.join("run.log"), log)?;
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut run = Run::new(&cli)?;
    match &cli.command {
        Command::Validate { model } => {
            let model = run.resolve_model(model.as_deref())?;
            let report = model.validate();
            let text = serde_json::to_string_pretty(&report)?;
            run.log(text);
            if !report.is_ok() {
                bail!(lobmm_core::Error::InvalidModel(report.errors.join("; ")));
            }
            run.finish("validate")
        }
        Command::Calibrate { snapshots, quotes, dt } => {
            let series = io::read_snapshots(snapshots)?;
            let log = io::read_own_quotes(quotes)?;
            // Fees and order bounds are not estimable from market data;
            // take them from the configured model, else the baseline.
            let reference = run
                .config
                .resolve_model(None)
                .map(|(m, _)| m)
                .unwrap_or_else(|_| synth::baseline_model());
            let mut params = CalibParams::with_defaults(reference.fees, reference.bounds);
            if let Some(dt) = dt {
                params.dt = *dt;
            }
            let outcome = calibrate(&series, &log, &params)?;
            for w in &outcome.report.warnings {
                run.log(format!("calibration warning: {w}"));
            }
            fs::write(run.out_dir.join("model.json"), outcome.model.to_json_string() + "\n")?;
            fs::write(
                run.out_dir.join("calibration_report.json"),
                serde_json::to_string_pretty(&outcome.report)? + "\n",
            )?;
            run.config.echo_effective(&run.out_dir, &outcome.model, run.seed)?;
            run.log(format!(
                "calibrated {} spread states from {} snapshots, {} jumps",
                outcome.model.spread.n_states, outcome.report.n_snapshots, outcome.report.n_jumps
            ));
            run.finish("calibrate")
        }
        Command::Solve { model, out } => {
            let model = run.resolve_model(model.as_deref())?;
            let scheme = run.config.scheme();
            let t0 = Instant::now();
            let artifact = solve_policy(&model, &scheme)?;
            let elapsed = t0.elapsed().as_secs_f64();
            let g = &artifact.header.grid;
            let bytes = encode_policy(&artifact.header, &artifact.policy)?;
            let out_path = out.clone().unwrap_or_else(|| run.out_dir.join("policy.bin"));
            fs::write(&out_path, &bytes)
                .with_context(|| format!("writing {}", out_path.display()))?;
            run.config.echo_effective(&run.out_dir, &model, run.seed)?;
            run.log(format!(
                "solved {} steps x {} states x {} inventory x {} price nodes in {elapsed:.2} s -> {}",
                g.n_steps,
                g.n_states,
                (g.y_max - g.y_min) / g.lot + 1,
                g.n_p,
                out_path.display()
            ));
            run.finish("solve")
        }
        Command::Backtest {
            model,
            strategy,
            policy,
            paths,
            emit_paths,
            emit_terminals,
            allow_mismatch,
        } => {
            let model = run.resolve_model(model.as_deref())?;
            let mut params = run.config.backtest_params(run.seed);
            if let Some(n) = paths {
                params.n_paths = *n;
            }
            if let Some(k) = emit_paths {
                params.sample_paths = *k;
            }
            params.allow_mismatch = *allow_mismatch;

            let mut rows: Vec<(&str, lobmm_core::backtest::MetricsSummary)> = Vec::new();
            let mut sampled = None;
            if matches!(strategy, StrategyKind::Policy | StrategyKind::Both) {
                let artifact = match policy {
                    Some(path) => {
                        let bytes = fs::read(path)
                            .with_context(|| format!("reading policy {}", path.display()))?;
                        decode_policy(&bytes)?
                    }
                    None => {
                        let default = run.out_dir.join("policy.bin");
                        if default.is_file() {
                            decode_policy(&fs::read(&default)?)?
                        } else {
                            run.log("no policy artifact given; solving now");
                            solve_policy(&model, &run.config.scheme())?
                        }
                    }
                };
                let result = run_monte_carlo(&model, &Strategy::Policy(artifact), &params)?;
                rows.push(("policy", result.metrics.clone()));
                sampled = Some(result);
            }
            if matches!(strategy, StrategyKind::Constant | StrategyKind::Both) {
                let result =
                    run_monte_carlo(&model, &Strategy::constant_best(&model), &params)?;
                rows.push(("constant", result.metrics.clone()));
                if sampled.is_none() {
                    sampled = Some(result);
                }
            }
            let metric_refs: Vec<(&str, &lobmm_core::backtest::MetricsSummary)> =
                rows.iter().map(|(n, m)| (*n, m)).collect();
            io::write_metrics(&run.out_dir.join("metrics.csv"), &metric_refs)?;
            let result = sampled.expect("at least one strategy ran");
            if *emit_terminals {
                io::write_terminals(&run.out_dir.join("per_path.csv"), &result)?;
            }
            if params.sample_paths > 0 {
                io::write_sampled_paths(
                    &run.out_dir.join("sampled_paths.csv"),
                    &model,
                    &result.sampled,
                )?;
            }
            run.config.echo_effective(&run.out_dir, &model, run.seed)?;
            for (name, m) in &rows {
                run.log(format!(
                    "{name}: mean profit {:.3}, std {:.3}, IR {}",
                    m.mean_profit,
                    m.std_profit,
                    m.information_ratio.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into())
                ));
            }
            run.finish("backtest")
        }
        Command::Sweep { model, axis } => {
            let model = run.resolve_model(model.as_deref())?;
            let sweep_cfg = run
                .config
                .sweep
                .clone()
                .context("config error: sweep section missing")?;
            let axis_name = axis.clone().unwrap_or_else(|| sweep_cfg.axis.clone());
            let scheme = run.config.scheme();
            let mut bt = run.config.backtest_params(run.seed);
            if let Some(n) = sweep_cfg.n_paths {
                bt.n_paths = n;
            }
            let values = &sweep_cfg.values;
            let result = match axis_name.as_str() {
                "volatility" => sweep_volatility(&model, values, &scheme, &bt)?,
                "solver_sigma_mismatch" => sweep_sensitivity(&model, values, &scheme, &bt)?,
                "stamp_duty" => {
                    let sigmas = sweep_cfg
                        .sigmas
                        .clone()
                        .unwrap_or_else(|| vec![model.midquote.vol]);
                    sweep_stamp_duty(&model, values, &sigmas, &scheme, &bt)?
                }
                "drift" => {
                    let (result, slices) = sweep_drift(&model, values, &scheme, &bt)?;
                    io::write_policy_slices(&run.out_dir.join("policy_slices.csv"), &slices)?;
                    result
                }
                other => bail!(
                    "config error: unknown sweep axis `{other}` \
                     (want volatility|stamp_duty|drift|solver_sigma_mismatch)"
                ),
            };
            io::write_sweep(&run.out_dir.join("sweep.csv"), &result)?;
            run.config.echo_effective(&run.out_dir, &model, run.seed)?;
            run.log(format!("swept {} cells along {axis_name}", result.cells.len()));
            run.finish("sweep")
        }
    }
}
