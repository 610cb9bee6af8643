//! Scenario sweeps: re-solve and/or re-backtest the model over a parameter
//! axis (volatility, stamp duty, drift, or a solver/environment volatility
//! mismatch) under common random numbers, so paired-seed comparisons across
//! cells are low-variance.

use serde::Serialize;

use crate::backtest::{run_monte_carlo, BacktestParams, MetricsSummary, Strategy};
use crate::error::{Error, Result};
use crate::model::{MarketModel, QuoteLevel, Side};
use crate::solver::{solve_policy, Action, PolicyArtifact, SchemeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Volatility,
    StampDuty,
    Drift,
    SolverSigmaMismatch,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Volatility => "volatility",
            SweepAxis::StampDuty => "stamp_duty",
            SweepAxis::Drift => "drift",
            SweepAxis::SolverSigmaMismatch => "solver_sigma_mismatch",
        }
    }
}

/// One (axis value, environment sigma) cell's aggregated outcome.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub axis: SweepAxis,
    pub value: f64,
    pub sigma: f64,
    pub metrics: MetricsSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
}

/// One row of a t = 0 policy slice at the initial price, for the drift
/// sweep's action maps.
#[derive(Debug, Clone, Serialize)]
pub struct PolicySliceRow {
    pub mu: f64,
    pub spread_state: usize,
    pub y: i64,
    pub action_code: String,
}

fn check_values(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Data(format!("{what} sweep needs at least one value")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Data(format!("{what} sweep values must be strictly increasing")));
    }
    Ok(())
}

fn backtest_cell(
    model: &MarketModel,
    strategy: &Strategy,
    bt: &BacktestParams,
    allow_mismatch: bool,
) -> Result<MetricsSummary> {
    let mut params = bt.clone();
    params.allow_mismatch = allow_mismatch;
    params.sample_paths = 0;
    Ok(run_monte_carlo(model, strategy, &params)?.metrics)
}

/// Re-solve and backtest per volatility level.
pub fn sweep_volatility(
    base: &MarketModel,
    sigmas: &[f64],
    scheme: &SchemeParams,
    bt: &BacktestParams,
) -> Result<SweepResult> {
    check_values(sigmas, "volatility")?;
    if sigmas.iter().any(|&s| s <= 0.0) {
        return Err(Error::Data("volatility values must be positive".into()));
    }
    let mut cells = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let mut model = base.clone();
        model.midquote.vol = sigma;
        let artifact = solve_policy(&model, scheme)?;
        let metrics = backtest_cell(&model, &Strategy::Policy(artifact), bt, false)?;
        cells.push(SweepCell { axis: SweepAxis::Volatility, value: sigma, sigma, metrics });
    }
    Ok(SweepResult { cells })
}

/// Solve once at the base model's volatility, then replay that fixed policy
/// under each environment volatility (the deliberate mismatch study).
pub fn sweep_sensitivity(
    base: &MarketModel,
    sigmas: &[f64],
    scheme: &SchemeParams,
    bt: &BacktestParams,
) -> Result<SweepResult> {
    check_values(sigmas, "sensitivity")?;
    let artifact = solve_policy(base, scheme)?;
    let strategy = Strategy::Policy(artifact);
    let mut cells = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let mut model = base.clone();
        model.midquote.vol = sigma;
        let metrics = backtest_cell(&model, &strategy, bt, true)?;
        cells.push(SweepCell {
            axis: SweepAxis::SolverSigmaMismatch,
            value: sigma,
            sigma: base.midquote.vol,
            metrics,
        });
    }
    Ok(SweepResult { cells })
}

/// Re-solve and backtest over a (stamp duty, volatility) grid.
pub fn sweep_stamp_duty(
    base: &MarketModel,
    rhos: &[f64],
    sigmas: &[f64],
    scheme: &SchemeParams,
    bt: &BacktestParams,
) -> Result<SweepResult> {
    check_values(rhos, "stamp duty")?;
    check_values(sigmas, "volatility")?;
    if rhos.iter().any(|&r| !(0.0..=0.002).contains(&r)) {
        return Err(Error::Data("stamp duty values must lie in [0, 0.002]".into()));
    }
    let mut cells = Vec::with_capacity(rhos.len() * sigmas.len());
    for &sigma in sigmas {
        for &rho in rhos {
            let mut model = base.clone();
            model.midquote.vol = sigma;
            model.fees.stamp_rate = rho;
            let artifact = solve_policy(&model, scheme)?;
            let metrics = backtest_cell(&model, &Strategy::Policy(artifact), bt, false)?;
            cells.push(SweepCell { axis: SweepAxis::StampDuty, value: rho, sigma, metrics });
        }
    }
    Ok(SweepResult { cells })
}

/// Human-readable encoding of one policy action for slice CSVs.
pub fn action_code(action: Action) -> String {
    match action {
        Action::Take { size } => format!("take:{size}"),
        Action::Make { bid, ask, bid_size, ask_size } => {
            let b = QuoteLevel { side: Side::Bid, level: bid }.label();
            let a = QuoteLevel { side: Side::Ask, level: ask }.label();
            format!("make:{b}:{bid_size}/{a}:{ask_size}")
        }
    }
}

/// The artifact's t = 0 actions over (spread state, inventory) at the price
/// node nearest `p0`.
pub fn policy_slice_at_start(artifact: &PolicyArtifact, mu: f64, p0: f64) -> Vec<PolicySliceRow> {
    let grid = artifact.grid();
    let p_idx = grid.nearest_p_index(p0);
    let slice = artifact.policy.slice(0);
    let mut rows = Vec::with_capacity(grid.n_states * grid.n_y());
    for state in 0..grid.n_states {
        for (y_idx, &y) in grid.y_levels.iter().enumerate() {
            let action = slice[grid.node_index(state, y_idx, p_idx)];
            rows.push(PolicySliceRow {
                mu,
                spread_state: state,
                y,
                action_code: action_code(action),
            });
        }
    }
    rows
}

/// Re-solve and backtest per drift level; also returns the t = 0 action
/// maps at the initial price for each drift.
pub fn sweep_drift(
    base: &MarketModel,
    mus: &[f64],
    scheme: &SchemeParams,
    bt: &BacktestParams,
) -> Result<(SweepResult, Vec<PolicySliceRow>)> {
    check_values(mus, "drift")?;
    let mut cells = Vec::with_capacity(mus.len());
    let mut slices = Vec::new();
    for &mu in mus {
        let mut model = base.clone();
        model.midquote.drift = mu;
        let artifact = solve_policy(&model, scheme)?;
        slices.extend(policy_slice_at_start(&artifact, mu, model.midquote.p0));
        let metrics = backtest_cell(&model, &Strategy::Policy(artifact), bt, false)?;
        cells.push(SweepCell { axis: SweepAxis::Drift, value: mu, sigma: model.midquote.vol, metrics });
    }
    Ok((SweepResult { cells }, slices))
}

impl SweepResult {
    /// Long-format rows `(axis, value, sigma, metric, mean, std)` for CSV
    /// emission; optional ratios appear only when defined.
    pub fn long_rows(&self) -> Vec<(String, f64, f64, String, f64, f64)> {
        let mut rows = Vec::new();
        for cell in &self.cells {
            let m = &cell.metrics;
            let mut push = |metric: &str, mean: f64, std: f64| {
                rows.push((
                    cell.axis.label().to_string(),
                    cell.value,
                    cell.sigma,
                    metric.to_string(),
                    mean,
                    std,
                ));
            };
            push("profit", m.mean_profit, m.std_profit);
            push("volume", m.mean_volume, 0.0);
            push("market_volume", m.mean_market_volume, 0.0);
            push("abs_inventory", m.mean_abs_inventory, m.std_abs_inventory);
            push("tax", m.mean_tax, m.std_tax);
            if let Some(ir) = m.information_ratio {
                push("information_ratio", ir, 0.0);
            }
            if let Some(ppt) = m.profit_per_trade {
                push("profit_per_trade", ppt, 0.0);
            }
        }
        rows
    }
}
