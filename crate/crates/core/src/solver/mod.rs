//! Backward dynamic-programming solver for the market maker's
//! quasi-variational inequality.
//!
//! The scheme carries the value in reduced log form. With exponential
//! utility and no running inventory penalty, the value function factorizes
//! exactly over cash:
//!
//!   v_i(t, x, y, p) = -exp(-eta * x + psi_i(t, y, p)),
//!
//! because limit fills and market orders shift cash additively. The solver
//! stores and recurses on psi = log phi; maximizing v is minimizing psi.
//! Every expectation is evaluated in the log domain (log-sum-exp), since the
//! baseline risk aversion against Yuan-scale cash produces exponents far
//! beyond double range.
//!
//! Per backward step, each node combines:
//!   - a Gauss-Hermite price expectation over the kappa*h window,
//!   - a one-jump spread mixture with probability 1 - exp(-lambda*kappa*h),
//!   - best-response Bernoulli fill terms for the bid and the ask quote,
//!   - the impulse (market order) obstacle,
//! taking the log-domain average of the first four and the pointwise best
//! of that against the obstacle.

mod artifact;

pub use artifact::{decode_policy, encode_policy, ArtifactHeader, GridSpec, PolicyArtifact};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{logaddexp, GaussHermite};
use crate::model::{ask_price, bid_price, market_cash, Level, MarketModel, Side};

/// Version of the deterministic tie-breaking rules, recorded in artifacts.
pub const TIE_BREAK_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Parameters and grid
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    /// Trading horizon T, seconds.
    pub horizon: f64,
    /// Time step h, seconds; T/h must be an integer.
    pub step: f64,
    /// Expectation-window multiplier: expectations are taken over kappa * h.
    pub kappa: f64,
    /// Gauss-Hermite node count for the price expectation (odd, >= 3).
    pub quad_nodes: usize,
    /// Half-extent of the price grid around p0, Yuan. Default
    /// |mu| T + 6 sigma sqrt(T), rounded up to the grid spacing.
    pub p_halfwidth: Option<f64>,
    /// Price grid spacing, a multiple of the tick. Default one tick.
    pub p_step: Option<f64>,
    /// CARA risk aversion eta, 1/Yuan.
    pub risk_aversion: f64,
    /// Running inventory penalty weight; must be zero (the cash
    /// factorization the solver relies on breaks otherwise).
    pub gamma: f64,
    /// Cash rescaling divisor applied inside the utility exponent.
    pub cash_scale: f64,
    /// Memory budget for the value and policy tensors, bytes.
    pub memory_budget: u64,
}

impl SchemeParams {
    pub fn baseline() -> Self {
        SchemeParams {
            horizon: 300.0,
            step: 0.3,
            kappa: 4.0,
            quad_nodes: 7,
            p_halfwidth: None,
            p_step: None,
            risk_aversion: 0.5,
            gamma: 0.0,
            cash_scale: 1.0,
            memory_budget: 4 << 30,
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.horizon >= self.step) {
            return Err(Error::Domain(format!(
                "need 0 < h <= T, got h = {}, T = {}",
                self.step, self.horizon
            )));
        }
        let ratio = self.horizon / self.step;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::Domain(format!("T/h = {ratio} is not an integer")));
        }
        if self.kappa < 1.0 {
            return Err(Error::Domain(format!("kappa must be >= 1, got {}", self.kappa)));
        }
        if self.quad_nodes < 3 || self.quad_nodes % 2 == 0 {
            return Err(Error::Domain(format!(
                "quad_nodes must be odd and >= 3, got {}",
                self.quad_nodes
            )));
        }
        if !(self.risk_aversion > 0.0) {
            return Err(Error::Domain(format!("risk_aversion must be positive, got {}", self.risk_aversion)));
        }
        if self.gamma != 0.0 {
            return Err(Error::Domain(
                "gamma must be 0: a running inventory penalty breaks the exact \
                 cash factorization this solver is built on"
                    .into(),
            ));
        }
        if !(self.cash_scale > 0.0) {
            return Err(Error::Domain(format!("cash_scale must be positive, got {}", self.cash_scale)));
        }
        Ok(())
    }
}

/// The (time, spread, inventory, price) lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    pub n_steps: usize,
    pub n_states: usize,
    /// Inventory levels, shares, ascending, containing 0.
    pub y_levels: Vec<i64>,
    /// Price levels in integer ticks, ascending, containing p0.
    pub p_ticks: Vec<i64>,
    pub tick: f64,
    pub step: f64,
    pub lot: i64,
}

impl StateGrid {
    pub fn new(model: &MarketModel, params: &SchemeParams) -> Result<StateGrid> {
        params.validate()?;
        let b = &model.bounds;
        let tick = model.fees.tick;

        let mut y_levels = Vec::new();
        let mut y = b.y_min;
        while y <= b.y_max {
            y_levels.push(y);
            y += b.lot;
        }
        if y_levels.len() < 2 {
            return Err(Error::Domain("inventory lattice needs more than one level".into()));
        }
        if !y_levels.contains(&0) {
            return Err(Error::Domain("inventory lattice must contain 0".into()));
        }

        let p_step = params.p_step.unwrap_or(tick);
        let step_ticks_f = p_step / tick;
        if (step_ticks_f - step_ticks_f.round()).abs() > 1e-9 || step_ticks_f < 0.5 {
            return Err(Error::Domain(format!("p_step {p_step} is not a positive multiple of the tick")));
        }
        let step_ticks = step_ticks_f.round() as i64;

        let p0_ticks_f = model.midquote.p0 / tick;
        if (p0_ticks_f - p0_ticks_f.round()).abs() > 1e-9 {
            return Err(Error::Domain(format!("p0 = {} is not on the tick lattice", model.midquote.p0)));
        }
        let p0_ticks = p0_ticks_f.round() as i64;

        let halfwidth = params.p_halfwidth.unwrap_or_else(|| {
            let t = params.horizon;
            model.midquote.drift.abs() * t + 6.0 * model.midquote.vol * t.sqrt()
        });
        let half_steps = ((halfwidth / p_step) - 1e-9).ceil().max(1.0) as i64;
        let p_ticks: Vec<i64> = (-half_steps..=half_steps)
            .map(|j| p0_ticks + j * step_ticks)
            .collect();
        if p_ticks[0] <= 0 {
            return Err(Error::Domain(format!(
                "price grid reaches non-positive prices (min {} ticks); shrink p_halfwidth",
                p_ticks[0]
            )));
        }

        Ok(StateGrid {
            n_steps: params.n_steps(),
            n_states: model.spread.n_states,
            y_levels,
            p_ticks,
            tick,
            step: params.step,
            lot: b.lot,
        })
    }

    pub fn n_y(&self) -> usize {
        self.y_levels.len()
    }

    pub fn n_p(&self) -> usize {
        self.p_ticks.len()
    }

    /// Nodes per time slice.
    pub fn slice_len(&self) -> usize {
        self.n_states * self.n_y() * self.n_p()
    }

    pub fn node_index(&self, state: usize, y_idx: usize, p_idx: usize) -> usize {
        (state * self.n_y() + y_idx) * self.n_p() + p_idx
    }

    pub fn price(&self, p_idx: usize) -> f64 {
        self.p_ticks[p_idx] as f64 * self.tick
    }

    pub fn y_index(&self, y: i64) -> Option<usize> {
        let lot = self.lot;
        let base = self.y_levels[0];
        if (y - base) % lot != 0 {
            return None;
        }
        let idx = ((y - base) / lot) as usize;
        (idx < self.y_levels.len()).then_some(idx)
    }

    /// Nearest price node, ties toward p0 (the grid center).
    pub fn nearest_p_index(&self, p: f64) -> usize {
        let p_min = self.p_ticks[0] as f64 * self.tick;
        let step = (self.p_ticks[1] - self.p_ticks[0]) as f64 * self.tick;
        let u = (p - p_min) / step;
        let center = (self.n_p() - 1) as f64 / 2.0;
        let lo = u.floor();
        let frac = u - lo;
        let idx = if (frac - 0.5).abs() < 1e-12 {
            // Tie: round toward the center node.
            if lo < center {
                lo + 1.0
            } else {
                lo
            }
        } else {
            u.round()
        };
        (idx.max(0.0) as usize).min(self.n_p() - 1)
    }
}

// ---------------------------------------------------------------------------
// Tensors and actions
// ---------------------------------------------------------------------------

/// psi[t, i, y, p] with v_i(t, x, y, p) = -exp(-eta x + psi_i(t, y, p)).
#[derive(Debug, Clone)]
pub struct LogValueTensor {
    pub n_steps: usize,
    pub slice_len: usize,
    pub data: Vec<f64>,
}

impl LogValueTensor {
    pub fn slice(&self, t: usize) -> &[f64] {
        &self.data[t * self.slice_len..(t + 1) * self.slice_len]
    }
}

/// One node's decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// Post limit orders; a size of zero means no order on that side.
    Make { bid: Level, ask: Level, bid_size: i64, ask_size: i64 },
    /// Submit a market order of signed size (buy > 0, sell < 0).
    Take { size: i64 },
}

#[derive(Debug, Clone)]
pub struct PolicyTensor {
    pub n_steps: usize,
    pub slice_len: usize,
    pub data: Vec<Action>,
}

impl PolicyTensor {
    pub fn slice(&self, t: usize) -> &[Action] {
        &self.data[t * self.slice_len..(t + 1) * self.slice_len]
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub value: LogValueTensor,
    pub policy: PolicyTensor,
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

pub struct Solver<'a> {
    pub model: &'a MarketModel,
    pub params: &'a SchemeParams,
    pub grid: StateGrid,
    /// Effective exponent coefficient eta / cash_scale.
    eta: f64,
    /// Expectation window kappa * h.
    window: f64,
    gh: GaussHermite,
    /// log(1 - q_jump) or +inf marker when q_jump = 1; None when lambda = 0.
    stay_ln: f64,
    /// log(q_jump * rho_ij) per (i, j).
    jump_ln: Vec<Vec<f64>>,
    /// Fill probability terms per [side][level ordinal][state].
    fill_ln_p1: Vec<Vec<Vec<f64>>>,
    fill_ln_1mp1: Vec<Vec<Vec<f64>>>,
}

fn side_ord(side: Side) -> usize {
    match side {
        Side::Bid => 0,
        Side::Ask => 1,
    }
}

fn level_ord(level: Level) -> usize {
    match level {
        Level::Minus => 0,
        Level::Best => 1,
        Level::Plus => 2,
    }
}

/// Quote enumeration order per side; first minimum wins on ties.
pub fn quote_order(side: Side) -> [Level; 3] {
    match side {
        Side::Bid => [Level::Minus, Level::Best, Level::Plus],
        Side::Ask => [Level::Plus, Level::Best, Level::Minus],
    }
}

impl<'a> Solver<'a> {
    pub fn new(model: &'a MarketModel, params: &'a SchemeParams) -> Result<Solver<'a>> {
        let rep = model.validate();
        if !rep.is_ok() {
            return Err(Error::InvalidModel(rep.errors.join("; ")));
        }
        let grid = StateGrid::new(model, params)?;

        let nodes = grid.slice_len() as u64 * (grid.n_steps as u64 + 1);
        let bytes = nodes * (8 + std::mem::size_of::<Action>() as u64);
        if bytes > params.memory_budget {
            return Err(Error::Resource(format!(
                "grid needs about {bytes} bytes for {nodes} nodes, budget is {}",
                params.memory_budget
            )));
        }

        let eta = params.risk_aversion / params.cash_scale;
        let window = params.kappa * params.step;

        let lambda = model.spread.jump_rate;
        let q_jump = 1.0 - (-lambda * window).exp();
        let stay_ln = (1.0 - q_jump).ln();
        let m = model.spread.n_states;
        let mut jump_ln = vec![vec![f64::NEG_INFINITY; m]; m];
        for i in 0..m {
            for j in 0..m {
                let p = q_jump * model.spread.transition[i][j];
                if p > 0.0 {
                    jump_ln[i][j] = p.ln();
                }
            }
        }

        let mut fill_ln_p1 = vec![vec![vec![f64::NEG_INFINITY; m]; 3]; 2];
        let mut fill_ln_1mp1 = vec![vec![vec![0.0; m]; 3]; 2];
        for side in [Side::Bid, Side::Ask] {
            for level in Level::ALL {
                for s in 0..m {
                    let lam = model.fills.intensity(side, level, s);
                    let p1 = 1.0 - (-lam * window).exp();
                    if p1 > 0.0 {
                        fill_ln_p1[side_ord(side)][level_ord(level)][s] = p1.ln();
                    }
                    fill_ln_1mp1[side_ord(side)][level_ord(level)][s] = (1.0 - p1).ln();
                }
            }
        }

        Ok(Solver {
            model,
            params,
            grid,
            eta,
            window,
            gh: GaussHermite::new(params.quad_nodes),
            stay_ln,
            jump_ln,
            fill_ln_p1,
            fill_ln_1mp1,
        })
    }

    pub fn eta_effective(&self) -> f64 {
        self.eta
    }

    /// psi at the horizon: eta * c(-y, p, i delta), the reduced form of
    /// U(L(x, y, p, s)).
    pub fn terminal_slice(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.slice_len()];
        for i in 0..g.n_states {
            let s = self.model.spread_of_state(i);
            for (y_idx, &y) in g.y_levels.iter().enumerate() {
                for p_idx in 0..g.n_p() {
                    let p = g.price(p_idx);
                    out[g.node_index(i, y_idx, p_idx)] =
                        self.eta * market_cash(-(y as f64), p, s, &self.model.fees);
                }
            }
        }
        out
    }

    /// Linear interpolation of psi in price, clamped at the grid edges.
    fn interp_psi(&self, next: &[f64], i: usize, y_idx: usize, p: f64) -> f64 {
        let g = &self.grid;
        let p_min = g.p_ticks[0] as f64 * g.tick;
        let step = (g.p_ticks[1] - g.p_ticks[0]) as f64 * g.tick;
        let u = (p - p_min) / step;
        if u <= 0.0 {
            return next[g.node_index(i, y_idx, 0)];
        }
        let last = g.n_p() - 1;
        if u >= last as f64 {
            return next[g.node_index(i, y_idx, last)];
        }
        let lo = u.floor() as usize;
        let frac = u - lo as f64;
        let a = next[g.node_index(i, y_idx, lo)];
        let b = next[g.node_index(i, y_idx, lo + 1)];
        a + frac * (b - a)
    }

    /// log E[exp(psi_i(t+h, y, P'))], P' ~ Normal(p + mu kappa h, sigma^2 kappa h).
    pub fn price_expectation(&self, next: &[f64], i: usize, y_idx: usize, p_idx: usize) -> f64 {
        let p = self.grid.price(p_idx);
        let mean = p + self.model.midquote.drift * self.window;
        let sd = self.model.midquote.vol * self.window.sqrt();
        if sd == 0.0 {
            return self.interp_psi(next, i, y_idx, mean);
        }
        let mut acc = f64::NEG_INFINITY;
        for (z, w) in self.gh.nodes.iter().zip(&self.gh.weights) {
            let psi = self.interp_psi(next, i, y_idx, mean + sd * z);
            acc = logaddexp(acc, w.ln() + psi);
        }
        acc
    }

    /// One-jump spread mixture over the window:
    /// log[(1 - q) e^{psi_i} + q sum_j rho_ij e^{psi_j}].
    pub fn spread_expectation(&self, next: &[f64], i: usize, y_idx: usize, p_idx: usize) -> f64 {
        let g = &self.grid;
        let here = next[g.node_index(i, y_idx, p_idx)];
        if self.model.spread.jump_rate == 0.0 {
            return here;
        }
        let mut acc = if self.stay_ln == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.stay_ln + here
        };
        for j in 0..g.n_states {
            let lw = self.jump_ln[i][j];
            if lw != f64::NEG_INFINITY {
                acc = logaddexp(acc, lw + next[g.node_index(j, y_idx, p_idx)]);
            }
        }
        acc
    }

    /// Candidate sizes for one side at inventory y: zero and the largest
    /// admissible lot multiple up to max_limit.
    fn size_candidates(&self, side: Side, y: i64) -> [i64; 2] {
        let b = &self.model.bounds;
        let headroom = match side {
            Side::Bid => b.y_max - y,
            Side::Ask => y - b.y_min,
        };
        let cap = b.max_limit.min(headroom.max(0));
        let snapped = (cap / b.lot) * b.lot;
        [0, snapped]
    }

    /// Value of one (quote, size) candidate: the two-outcome Bernoulli fill
    /// mixture in the log domain. `side` fixes the cash-shift sign.
    pub fn fill_candidate_value(
        &self,
        next: &[f64],
        i: usize,
        y_idx: usize,
        p_idx: usize,
        side: Side,
        level: Level,
        size: i64,
    ) -> Option<f64> {
        let g = &self.grid;
        let stay = next[g.node_index(i, y_idx, p_idx)];
        if size == 0 {
            return Some(stay);
        }
        let y = g.y_levels[y_idx];
        let y_after = match side {
            Side::Bid => y + size,
            Side::Ask => y - size,
        };
        let y_after_idx = g.y_index(y_after)?;
        let p = g.price(p_idx);
        let s = self.model.spread_of_state(i);
        let fees = &self.model.fees;
        let shift = match side {
            Side::Bid => self.eta * bid_price(level, p, s, fees).ok()? * size as f64,
            Side::Ask => -self.eta * ask_price(level, p, s, fees).ok()? * size as f64,
        };
        let ln_p1 = self.fill_ln_p1[side_ord(side)][level_ord(level)][i];
        let ln_1mp1 = self.fill_ln_1mp1[side_ord(side)][level_ord(level)][i];
        let filled = ln_p1 + shift + next[g.node_index(i, y_after_idx, p_idx)];
        Some(logaddexp(ln_1mp1 + stay, filled))
    }

    /// Best (quote, size) for one side: minimizes psi over the admissible
    /// set. Ties keep the earlier candidate (sizes ascending, quotes in
    /// `quote_order`).
    pub fn fill_best_response(
        &self,
        next: &[f64],
        i: usize,
        y_idx: usize,
        p_idx: usize,
        side: Side,
    ) -> (f64, Level, i64) {
        let y = self.grid.y_levels[y_idx];
        let mut best_val = f64::INFINITY;
        let mut best = (quote_order(side)[0], 0i64);
        for size in self.size_candidates(side, y) {
            for level in quote_order(side) {
                if let Some(v) = self.fill_candidate_value(next, i, y_idx, p_idx, side, level, size)
                {
                    if v < best_val {
                        best_val = v;
                        best = (level, size);
                    }
                }
                if size == 0 {
                    // The quote level is irrelevant without an order.
                    break;
                }
            }
        }
        (best_val, best.0, best.1)
    }

    /// Obstacle: best immediate market order,
    /// min_e [eta c(e, p, i delta) + psi_i(t+h, y+e, p)].
    /// Enumeration order 0, -lot, +lot, -2 lot, ... so ties keep the
    /// smallest |e|, negative first.
    pub fn impulse_value(&self, next: &[f64], i: usize, y_idx: usize, p_idx: usize) -> (f64, i64) {
        let g = &self.grid;
        let b = &self.model.bounds;
        let y = g.y_levels[y_idx];
        let p = g.price(p_idx);
        let s = self.model.spread_of_state(i);
        let mut best_val = f64::INFINITY;
        let mut best_e = 0i64;
        let max_lots = b.max_market / b.lot;
        for k in 0..=max_lots {
            for sign in [-1i64, 1] {
                if k == 0 && sign == 1 {
                    continue;
                }
                let e = sign * k * b.lot;
                let y_after = y + e;
                if y_after < b.y_min || y_after > b.y_max {
                    continue;
                }
                let y_after_idx = match g.y_index(y_after) {
                    Some(idx) => idx,
                    None => continue,
                };
                let v = self.eta * market_cash(e as f64, p, s, &self.model.fees)
                    + next[g.node_index(i, y_after_idx, p_idx)];
                if v < best_val {
                    best_val = v;
                    best_e = e;
                }
            }
        }
        (best_val, best_e)
    }

    /// One backward step at one node: psi(t) and the chosen action.
    pub fn step_node(&self, next: &[f64], i: usize, y_idx: usize, p_idx: usize) -> (f64, Action) {
        let pe = self.price_expectation(next, i, y_idx, p_idx);
        let se = self.spread_expectation(next, i, y_idx, p_idx);
        let (bv, bq, bl) = self.fill_best_response(next, i, y_idx, p_idx, Side::Bid);
        let (av, aq, al) = self.fill_best_response(next, i, y_idx, p_idx, Side::Ask);
        // Equal-weight average of the four expectation terms, in log space.
        let quarter = (0.25f64).ln();
        let mut t_val = logaddexp(pe, se);
        t_val = logaddexp(t_val, bv);
        t_val = logaddexp(t_val, av);
        t_val += quarter;

        let (m_val, e) = self.impulse_value(next, i, y_idx, p_idx);
        if m_val < t_val {
            (m_val, Action::Take { size: e })
        } else {
            (t_val, Action::Make { bid: bq, ask: aq, bid_size: bl, ask_size: al })
        }
    }

    /// Evaluate a specific action's psi at a node against the next slice;
    /// used by symmetry diagnostics.
    pub fn evaluate_action(
        &self,
        next: &[f64],
        i: usize,
        y_idx: usize,
        p_idx: usize,
        action: Action,
    ) -> Option<f64> {
        match action {
            Action::Take { size } => {
                let g = &self.grid;
                let y_after = g.y_levels[y_idx] + size;
                let y_after_idx = g.y_index(y_after)?;
                let p = g.price(p_idx);
                let s = self.model.spread_of_state(i);
                Some(
                    self.eta * market_cash(size as f64, p, s, &self.model.fees)
                        + next[g.node_index(i, y_after_idx, p_idx)],
                )
            }
            Action::Make { bid, ask, bid_size, ask_size } => {
                let pe = self.price_expectation(next, i, y_idx, p_idx);
                let se = self.spread_expectation(next, i, y_idx, p_idx);
                let bv =
                    self.fill_candidate_value(next, i, y_idx, p_idx, Side::Bid, bid, bid_size)?;
                let av =
                    self.fill_candidate_value(next, i, y_idx, p_idx, Side::Ask, ask, ask_size)?;
                let mut t_val = logaddexp(pe, se);
                t_val = logaddexp(t_val, bv);
                t_val = logaddexp(t_val, av);
                Some(t_val + (0.25f64).ln())
            }
        }
    }

    /// Full backward recursion. Within one step all nodes read only the
    /// t+h slice, so nodes are data-parallel; results are positioned by
    /// node index, making the solve deterministic for any thread count.
    pub fn solve(&self) -> Result<Solution> {
        let g = &self.grid;
        let n = g.n_steps;
        let slice_len = g.slice_len();
        let mut value = LogValueTensor {
            n_steps: n,
            slice_len,
            data: vec![0.0; (n + 1) * slice_len],
        };
        let default_action = Action::Make {
            bid: quote_order(Side::Bid)[0],
            ask: quote_order(Side::Ask)[0],
            bid_size: 0,
            ask_size: 0,
        };
        let mut policy = PolicyTensor {
            n_steps: n,
            slice_len,
            data: vec![default_action; (n + 1) * slice_len],
        };

        let terminal = self.terminal_slice();
        value.data[n * slice_len..].copy_from_slice(&terminal);

        let n_y = g.n_y();
        let n_p = g.n_p();
        for t in (0..n).rev() {
            let (head, tail) = value.data.split_at_mut((t + 1) * slice_len);
            let next = &tail[..slice_len];
            let out = &mut head[t * slice_len..];
            let pol_out = &mut policy.data[t * slice_len..(t + 1) * slice_len];
            out.par_iter_mut()
                .zip(pol_out.par_iter_mut())
                .enumerate()
                .for_each(|(node, (v, a))| {
                    let p_idx = node % n_p;
                    let y_idx = (node / n_p) % n_y;
                    let i = node / (n_p * n_y);
                    let (val, act) = self.step_node(next, i, y_idx, p_idx);
                    *v = val;
                    *a = act;
                });
        }
        // Terminal actions: liquidation is forced outside the policy; store
        // inert makes for the t = n slice.
        Ok(Solution { value, policy })
    }
}

/// Solve a model and wrap the policy in a self-describing artifact.
pub fn solve_policy(model: &MarketModel, params: &SchemeParams) -> Result<PolicyArtifact> {
    let solver = Solver::new(model, params)?;
    let solution = solver.solve()?;
    Ok(PolicyArtifact {
        header: ArtifactHeader {
            model_fingerprint: model.fingerprint(),
            grid: GridSpec::from_grid(&solver.grid),
            scheme: params.clone(),
            tie_break_version: TIE_BREAK_VERSION,
        },
        policy: solution.policy,
    })
}

#[cfg(test)]
mod tests;
