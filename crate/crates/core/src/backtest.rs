//! Monte Carlo backtesting: replays a strategy (solved policy or constant
//! benchmark) through simulated markets and aggregates terminal metrics.
//!
//! Determinism contract: every path owns four counter-derived RNG streams
//! (price, spread, bid fill, ask fill), each consuming a fixed number of
//! draws per step, so results depend only on (master seed, path index) —
//! never on thread count or scheduling. Per-path outputs land in a
//! pre-indexed slot and are reduced in path order with pairwise summation.
//!
//! Intra-step order is fixed: strategy lookup at the step's left limit,
//! market order if the action is a take, Bernoulli limit fills, Euler price
//! move, spread jump. At the horizon the book is force-liquidated in one
//! market order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::pairwise_sum;
use crate::model::{
    ask_price, bid_price, liquidation_value, market_cash, stamp_tax, Level, MarketModel, Side,
};
use crate::solver::{Action, PolicyArtifact};

// ---------------------------------------------------------------------------
// RNG plan
// ---------------------------------------------------------------------------

/// Randomness sources within one path, one stream each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Price = 0,
    Spread = 1,
    BidFill = 2,
    AskFill = 3,
}

/// Counter-derived substreams: stream index = path * 4 + channel, so any
/// (master seed, path, channel) triple yields the same draws no matter
/// which worker executes the path.
#[derive(Debug, Clone, Copy)]
pub struct RngPlan {
    pub master_seed: u64,
}

impl RngPlan {
    pub fn stream(&self, path: u64, channel: Channel) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(path * 4 + channel as u64);
        rng
    }
}

// ---------------------------------------------------------------------------
// Strategy
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum Strategy {
    /// Always quote one fixed pair of levels at a fixed size; never send
    /// market orders before the horizon.
    Constant { bid: Level, ask: Level, size: i64 },
    /// Follow a solved policy artifact.
    Policy(PolicyArtifact),
}

impl Strategy {
    /// Best-quotes benchmark at the model's limit order size.
    pub fn constant_best(model: &MarketModel) -> Strategy {
        Strategy::Constant { bid: Level::Best, ask: Level::Best, size: model.bounds.max_limit }
    }
}

#[derive(Debug, Clone)]
pub struct BacktestParams {
    pub horizon: f64,
    pub step: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    /// How many full path records to retain (the first `sample_paths` path
    /// indices).
    pub sample_paths: usize,
    /// Accept a policy artifact whose model fingerprint differs from the
    /// backtest model (sensitivity runs replay a policy in a perturbed
    /// environment on purpose).
    pub allow_mismatch: bool,
    /// Start the spread chain here instead of drawing from its stationary
    /// distribution.
    pub initial_spread_state: Option<usize>,
}

impl BacktestParams {
    pub fn baseline(n_paths: usize, master_seed: u64) -> Self {
        BacktestParams {
            horizon: 300.0,
            step: 0.3,
            n_paths,
            master_seed,
            sample_paths: 10,
            allow_mismatch: false,
            initial_spread_state: None,
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// Full per-step trace of one path. Series vectors have n + 1 entries; the
/// terminal entry is post-liquidation (cash includes the unwind, inventory
/// is zero). `mean_abs_inventory` averages the post-step |Y| over the n
/// steps, taking the pre-liquidation inventory at the horizon.
#[derive(Debug, Clone, Default)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub price: Vec<f64>,
    pub spread_state: Vec<usize>,
    pub cash: Vec<f64>,
    pub inventory: Vec<i64>,
    pub wealth: Vec<f64>,
    pub volume: Vec<i64>,
    pub market_volume: Vec<i64>,
    pub actions: Vec<Action>,
    pub bid_fills: Vec<i64>,
    pub ask_fills: Vec<i64>,
    /// Every cash-moving event in order (fills, market orders, terminal
    /// liquidation); sums to the terminal cash.
    pub cash_flows: Vec<f64>,
    pub summary: PathSummary,
}

/// Terminal scalars of one path.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct PathSummary {
    pub terminal_cash: f64,
    pub total_volume: i64,
    pub market_volume: i64,
    pub mean_abs_inventory: f64,
    pub tax_paid: f64,
    pub fill_count: u64,
}

/// Table-style aggregate over terminal path values.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsSummary {
    pub n_paths: usize,
    pub mean_profit: f64,
    pub std_profit: f64,
    pub skew_profit: f64,
    /// Non-excess kurtosis m4 / m2^2 (Gaussian = 3).
    pub kurt_profit: f64,
    /// mean / std; absent when the sample variance is zero.
    pub information_ratio: Option<f64>,
    pub mean_volume: f64,
    pub mean_market_volume: f64,
    /// mean profit / mean volume; absent when no volume traded.
    pub profit_per_trade: Option<f64>,
    pub risk_per_trade: Option<f64>,
    pub market_over_total: Option<f64>,
    pub mean_abs_inventory: f64,
    pub std_abs_inventory: f64,
    pub mean_tax: f64,
    pub std_tax: f64,
}

#[derive(Debug, Clone)]
pub struct BacktestResult {
    pub metrics: MetricsSummary,
    pub summaries: Vec<PathSummary>,
    pub sampled: Vec<PathRecord>,
}

// ---------------------------------------------------------------------------
// Path simulation
// ---------------------------------------------------------------------------

fn draw_categorical(weights: &[f64], u: f64) -> usize {
    let mut v = u;
    for (j, &w) in weights.iter().enumerate() {
        if v < w {
            return j;
        }
        v -= w;
    }
    weights.len() - 1
}

fn strategy_action(strategy: &Strategy, k: usize, state: usize, y: i64, p: f64) -> Action {
    match strategy {
        Strategy::Constant { bid, ask, size } => {
            Action::Make { bid: *bid, ask: *ask, bid_size: *size, ask_size: *size }
        }
        Strategy::Policy(artifact) => {
            let grid = artifact.grid();
            let k_idx = k.min(grid.n_steps.saturating_sub(1));
            let y_idx = grid
                .y_index(y)
                .unwrap_or_else(|| panic!("inventory {y} off the policy lattice"));
            let p_idx = grid.nearest_p_index(p);
            artifact.policy.slice(k_idx)[grid.node_index(state, y_idx, p_idx)]
        }
    }
}

/// Run one path, recording the full series when `record` is set (summary
/// scalars are always filled in).
pub fn simulate_path(
    model: &MarketModel,
    strategy: &Strategy,
    params: &BacktestParams,
    path: u64,
    record: bool,
) -> PathRecord {
    let plan = RngPlan { master_seed: params.master_seed };
    let mut rng_price = plan.stream(path, Channel::Price);
    let mut rng_spread = plan.stream(path, Channel::Spread);
    let mut rng_bid = plan.stream(path, Channel::BidFill);
    let mut rng_ask = plan.stream(path, Channel::AskFill);

    let h = params.step;
    let n = params.n_steps();
    let fees = &model.fees;
    let b = &model.bounds;

    // The stationary draw always consumes one uniform so forcing the start
    // state elsewhere does not shift later spread draws.
    let u0: f64 = rng_spread.gen();
    let mut state = params
        .initial_spread_state
        .unwrap_or_else(|| draw_categorical(&model.spread_stationary(), u0));
    let mut p = model.midquote.p0;
    let mut x = 0.0;
    let mut y: i64 = 0;
    let mut q: i64 = 0;
    let mut qm: i64 = 0;
    let mut tax = 0.0;
    let mut fills: u64 = 0;
    let mut abs_y_sum = 0.0;

    let mut rec = PathRecord::default();
    if record {
        let cap = n + 1;
        rec.times = Vec::with_capacity(cap);
        rec.price = Vec::with_capacity(cap);
        rec.spread_state = Vec::with_capacity(cap);
        rec.cash = Vec::with_capacity(cap);
        rec.inventory = Vec::with_capacity(cap);
        rec.wealth = Vec::with_capacity(cap);
        rec.volume = Vec::with_capacity(cap);
        rec.market_volume = Vec::with_capacity(cap);
        let s = model.spread_of_state(state);
        rec.times.push(0.0);
        rec.price.push(p);
        rec.spread_state.push(state);
        rec.cash.push(x);
        rec.inventory.push(y);
        rec.wealth.push(liquidation_value(x, y as f64, p, s, fees));
        rec.volume.push(q);
        rec.market_volume.push(qm);
    }

    let spread_jump_p = 1.0 - (-model.spread.jump_rate * h).exp();

    for k in 0..n {
        let s = model.spread_of_state(state);
        let action = strategy_action(strategy, k, state, y, p);

        // (2) market order, if the action is a take.
        let mut quotes: Option<(Level, Level, i64, i64)> = None;
        match action {
            Action::Take { size } if size != 0 => {
                let cost = market_cash(size as f64, p, s, fees);
                x -= cost;
                if record {
                    rec.cash_flows.push(-cost);
                }
                tax += stamp_tax(size as f64, p - s / 2.0, fees);
                y += size;
                q += size.abs();
                qm += size.abs();
            }
            Action::Take { .. } => {}
            Action::Make { bid, ask, bid_size, ask_size } => {
                quotes = Some((bid, ask, bid_size, ask_size));
            }
        }

        // (3) limit fills: one uniform per side per step, used or not.
        let u_bid: f64 = rng_bid.gen();
        let u_ask: f64 = rng_ask.gen();
        let mut bid_fill = 0i64;
        let mut ask_fill = 0i64;
        if let Some((bid, ask, bid_size, ask_size)) = quotes {
            if bid_size > 0 {
                let lam = model.fills.intensity(Side::Bid, bid, state);
                if u_bid < 1.0 - (-lam * h).exp() && y + bid_size <= b.y_max {
                    if let Ok(px) = bid_price(bid, p, s, fees) {
                        let cost = px * bid_size as f64;
                        x -= cost;
                        if record {
                            rec.cash_flows.push(-cost);
                        }
                        y += bid_size;
                        q += bid_size;
                        fills += 1;
                        bid_fill = bid_size;
                    }
                }
            }
            if ask_size > 0 {
                let lam = model.fills.intensity(Side::Ask, ask, state);
                if u_ask < 1.0 - (-lam * h).exp() && y - ask_size >= b.y_min {
                    if let Ok(px) = ask_price(ask, p, s, fees) {
                        let raw = p + s / 2.0 + ask.offset() as f64 * fees.tick;
                        let proceeds = px * ask_size as f64;
                        x += proceeds;
                        if record {
                            rec.cash_flows.push(proceeds);
                        }
                        tax += fees.stamp_rate * raw * ask_size as f64;
                        y -= ask_size;
                        q += ask_size;
                        fills += 1;
                        ask_fill = ask_size;
                    }
                }
            }
        }

        abs_y_sum += y.abs() as f64;

        // (4) Euler price move.
        let z: f64 = StandardNormal.sample(&mut rng_price);
        p += model.midquote.drift * h + model.midquote.vol * h.sqrt() * z;

        // (5) spread jump: two uniforms per step, used or not.
        let u_jump: f64 = rng_spread.gen();
        let u_dest: f64 = rng_spread.gen();
        if u_jump < spread_jump_p {
            state = draw_categorical(&model.spread.transition[state], u_dest);
        }

        if record {
            let s_new = model.spread_of_state(state);
            rec.times.push((k + 1) as f64 * h);
            rec.price.push(p);
            rec.spread_state.push(state);
            rec.cash.push(x);
            rec.inventory.push(y);
            rec.wealth.push(liquidation_value(x, y as f64, p, s_new, fees));
            rec.volume.push(q);
            rec.market_volume.push(qm);
            rec.actions.push(action);
            rec.bid_fills.push(bid_fill);
            rec.ask_fills.push(ask_fill);
        }
    }

    // Forced terminal liquidation in one market order.
    let s = model.spread_of_state(state);
    if y != 0 {
        let e = -y;
        let cost = market_cash(e as f64, p, s, fees);
        x -= cost;
        if record {
            rec.cash_flows.push(-cost);
        }
        tax += stamp_tax(e as f64, p - s / 2.0, fees);
        q += e.abs();
        qm += e.abs();
        y = 0;
    }

    if record {
        let last = rec.cash.len() - 1;
        rec.cash[last] = x;
        rec.inventory[last] = y;
        rec.wealth[last] = liquidation_value(x, 0.0, p, s, fees);
        rec.volume[last] = q;
        rec.market_volume[last] = qm;
    }

    rec.summary = PathSummary {
        terminal_cash: x,
        total_volume: q,
        market_volume: qm,
        mean_abs_inventory: abs_y_sum / n as f64,
        tax_paid: tax,
        fill_count: fills,
    };
    rec
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

fn central_moments(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let d2: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let d3: Vec<f64> = xs.iter().map(|x| (x - mean).powi(3)).collect();
    let d4: Vec<f64> = xs.iter().map(|x| (x - mean).powi(4)).collect();
    (mean, pairwise_sum(&d2) / n, pairwise_sum(&d3) / n, pairwise_sum(&d4) / n)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let d2: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    (mean, (pairwise_sum(&d2) / (n - 1.0)).sqrt())
}

/// Table-style metrics from terminal arrays. Ratios with zero denominators
/// come back absent rather than infinite.
pub fn compute_metrics(summaries: &[PathSummary]) -> Result<MetricsSummary> {
    if summaries.is_empty() {
        return Err(Error::Data("metrics need at least one path".into()));
    }
    let xs: Vec<f64> = summaries.iter().map(|s| s.terminal_cash).collect();
    let qs: Vec<f64> = summaries.iter().map(|s| s.total_volume as f64).collect();
    let qms: Vec<f64> = summaries.iter().map(|s| s.market_volume as f64).collect();
    let abs_y: Vec<f64> = summaries.iter().map(|s| s.mean_abs_inventory).collect();
    let taxes: Vec<f64> = summaries.iter().map(|s| s.tax_paid).collect();

    let n = xs.len() as f64;
    let (mean, m2, m3, m4) = central_moments(&xs);
    let var_sample = if xs.len() >= 2 { m2 * n / (n - 1.0) } else { 0.0 };
    let std = var_sample.sqrt();
    let (skew, kurt) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };
    let ir = (std > 0.0).then(|| mean / std);

    let mean_q = pairwise_sum(&qs) / n;
    let mean_qm = pairwise_sum(&qms) / n;
    let per_trade = (mean_q > 0.0).then(|| mean / mean_q);
    let risk_per_trade = (mean_q > 0.0).then(|| std / mean_q);
    let market_ratio = (mean_q > 0.0).then(|| mean_qm / mean_q);

    let (mean_abs_y, std_abs_y) = mean_std(&abs_y);
    let (mean_tax, std_tax) = mean_std(&taxes);

    Ok(MetricsSummary {
        n_paths: summaries.len(),
        mean_profit: mean,
        std_profit: std,
        skew_profit: skew,
        kurt_profit: kurt,
        information_ratio: ir,
        mean_volume: mean_q,
        mean_market_volume: mean_qm,
        profit_per_trade: per_trade,
        risk_per_trade,
        market_over_total: market_ratio,
        mean_abs_inventory: mean_abs_y,
        std_abs_inventory: std_abs_y,
        mean_tax,
        std_tax,
    })
}

/// Run `n_paths` independent paths in parallel and aggregate. Results are
/// keyed by path index, so the outcome is identical for any thread count.
pub fn run_monte_carlo(
    model: &MarketModel,
    strategy: &Strategy,
    params: &BacktestParams,
) -> Result<BacktestResult> {
    if params.n_paths == 0 {
        return Err(Error::Data("n_paths must be at least 1".into()));
    }
    if let Strategy::Policy(artifact) = strategy {
        if artifact.header.model_fingerprint != model.fingerprint() && !params.allow_mismatch {
            return Err(Error::Artifact(format!(
                "policy was solved for model {} but the backtest model is {}; \
                 pass allow_mismatch to replay it anyway",
                artifact.header.model_fingerprint,
                model.fingerprint()
            )));
        }
    }
    let records: Vec<PathRecord> = (0..params.n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let record = (path as usize) < params.sample_paths;
            simulate_path(model, strategy, params, path, record)
        })
        .collect();
    let summaries: Vec<PathSummary> = records.iter().map(|r| r.summary).collect();
    let sampled: Vec<PathRecord> =
        records.into_iter().take(params.sample_paths).filter(|r| !r.times.is_empty()).collect();
    let metrics = compute_metrics(&summaries)?;
    Ok(BacktestResult { metrics, summaries, sampled })
}
