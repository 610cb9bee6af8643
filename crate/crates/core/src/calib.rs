//! Consistent estimators for the market model: spread-chain transition matrix
//! and jump intensity from snapshot data, mid-quote drift and volatility from
//! uniformly resampled mids, and fill intensities from an own-quote log.
//!
//! Spread states are 0-based indices throughout this crate; the CSV and JSON
//! wire formats use 1-based indices (state i means spread i*tick).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{FeeSchedule, FillModel, Level, MarketModel, MidQuoteModel, OrderBounds, Side, SpreadModel};

// ---------------------------------------------------------------------------
// Input series
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotRow {
    pub time_s: f64,
    pub best_bid: f64,
    pub best_ask: f64,
}

impl SnapshotRow {
    pub fn mid(&self) -> f64 {
        (self.best_bid + self.best_ask) / 2.0
    }
}

/// Flattened top-of-book series, strictly increasing in time.
#[derive(Debug, Clone)]
pub struct SnapshotSeries {
    rows: Vec<SnapshotRow>,
    horizon: f64,
}

impl SnapshotSeries {
    /// Validates ordering and bid/ask sanity. The horizon defaults to the
    /// last observation time.
    pub fn new(rows: Vec<SnapshotRow>, horizon: Option<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("empty snapshot series".into()));
        }
        for w in rows.windows(2) {
            if !(w[1].time_s > w[0].time_s) {
                return Err(Error::Data(format!(
                    "snapshot times not strictly increasing at t={}",
                    w[1].time_s
                )));
            }
        }
        for r in &rows {
            if !(r.best_ask > r.best_bid) {
                return Err(Error::Data(format!(
                    "best_ask <= best_bid at t={}",
                    r.time_s
                )));
            }
        }
        let horizon = horizon.unwrap_or(rows.last().unwrap().time_s);
        Ok(SnapshotSeries { rows, horizon })
    }

    pub fn rows(&self) -> &[SnapshotRow] {
        &self.rows
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Resample mids onto a uniform grid with spacing `dt` by carrying the
    /// last observation forward. The result starts at the first observation.
    pub fn resample(&self, dt: f64) -> Result<SnapshotSeries> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("resample dt must be positive, got {dt}")));
        }
        let t0 = self.rows[0].time_s;
        let n = ((self.horizon - t0) / dt).floor() as usize;
        let mut out = Vec::with_capacity(n + 1);
        let mut idx = 0;
        for k in 0..=n {
            let t = t0 + k as f64 * dt;
            while idx + 1 < self.rows.len() && self.rows[idx + 1].time_s <= t + 1e-12 {
                idx += 1;
            }
            let r = self.rows[idx];
            out.push(SnapshotRow { time_s: t, ..r });
        }
        SnapshotSeries::new(out, None)
    }

    fn uniform_dt(&self) -> Result<f64> {
        if self.rows.len() < 2 {
            return Err(Error::InsufficientData("need at least 2 observations".into()));
        }
        let dt = self.rows[1].time_s - self.rows[0].time_s;
        for w in self.rows.windows(2) {
            if ((w[1].time_s - w[0].time_s) - dt).abs() > 1e-9 {
                return Err(Error::Data(
                    "non-uniform snapshot sampling; resample upstream".into(),
                ));
            }
        }
        Ok(dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuoteEvent {
    QuoteOn,
    QuoteOff,
    Fill,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OwnQuoteRow {
    pub time_s: f64,
    pub side: Side,
    pub level: Level,
    /// 0-based spread state in effect from this row until the next one.
    pub state: usize,
    pub event: QuoteEvent,
}

/// Time-sorted log of the maker's own quoting activity. At identical
/// timestamps a fill sorts before a quote_off (the fill is what removed the
/// quote from the book).
#[derive(Debug, Clone)]
pub struct OwnQuoteLog {
    rows: Vec<OwnQuoteRow>,
    horizon: f64,
}

impl OwnQuoteLog {
    pub fn new(mut rows: Vec<OwnQuoteRow>, horizon: Option<f64>) -> Result<Self> {
        rows.sort_by(|a, b| {
            a.time_s
                .partial_cmp(&b.time_s)
                .unwrap()
                .then_with(|| event_rank(a.event).cmp(&event_rank(b.event)))
        });
        let horizon = horizon.unwrap_or_else(|| rows.last().map(|r| r.time_s).unwrap_or(0.0));
        Ok(OwnQuoteLog { rows, horizon })
    }

    pub fn rows(&self) -> &[OwnQuoteRow] {
        &self.rows
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

fn event_rank(e: QuoteEvent) -> u8 {
    match e {
        QuoteEvent::Fill => 0,
        QuoteEvent::QuoteOn => 1,
        QuoteEvent::QuoteOff => 2,
    }
}

// ---------------------------------------------------------------------------
// Spread-process estimators
// ---------------------------------------------------------------------------

/// Jump times and visited states of the observed spread process.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadJumps {
    /// theta_0 = 0 (first observation), then the first observation times at
    /// which the spread differs from its previous value.
    pub times: Vec<f64>,
    /// 0-based spread state at each theta_n.
    pub states: Vec<usize>,
    /// Number of jumps in (0, T_p].
    pub n_jumps: usize,
}

/// Read the spread state off each snapshot and locate jump times.
/// States beyond `max_state` (0-based bound m-1) are clipped with a warning.
pub fn extract_spread_jumps(
    series: &SnapshotSeries,
    tick: f64,
    n_states: usize,
) -> Result<(SpreadJumps, Vec<String>)> {
    let mut warnings = Vec::new();
    let mut clipped = 0usize;
    let mut state_of = |row: &SnapshotRow| -> Result<usize> {
        let spread = row.best_ask - row.best_bid;
        let ticks = spread / tick;
        let rounded = ticks.round();
        if (ticks - rounded).abs() > 1e-6 || rounded < 1.0 {
            return Err(Error::Data(format!(
                "spread {spread} at t={} is not a positive multiple of the tick",
                row.time_s
            )));
        }
        let mut s = rounded as usize - 1;
        if s >= n_states {
            clipped += 1;
            s = n_states - 1;
        }
        Ok(s)
    };

    let rows = series.rows();
    let mut times = vec![0.0];
    let mut states = vec![state_of(&rows[0])?];
    for r in &rows[1..] {
        let s = state_of(r)?;
        if s != *states.last().unwrap() {
            times.push(r.time_s);
            states.push(s);
        }
    }
    if clipped > 0 {
        warnings.push(format!(
            "{clipped} observations had spread beyond {n_states} ticks; clipped to state {n_states}"
        ));
    }
    let n_jumps = times.len() - 1;
    Ok((SpreadJumps { times, states, n_jumps }, warnings))
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitionEstimate {
    pub matrix: Vec<Vec<f64>>,
    /// Departures observed from each state.
    pub departures: Vec<u64>,
    pub warnings: Vec<String>,
}

/// Maximum-likelihood transition matrix of the embedded jump chain:
/// rho_ij = (# transitions i -> j) / (# departures from i).
pub fn estimate_transition_matrix(states: &[usize], n_states: usize) -> Result<TransitionEstimate> {
    if states.len() < 2 {
        return Err(Error::InsufficientData(
            "transition estimation needs at least 2 observed states".into(),
        ));
    }
    let m = n_states;
    let mut counts = vec![vec![0u64; m]; m];
    for w in states.windows(2) {
        counts[w[0]][w[1]] += 1;
    }
    let mut warnings = Vec::new();
    let mut matrix = vec![vec![0.0; m]; m];
    let mut departures = vec![0u64; m];
    for i in 0..m {
        let total: u64 = counts[i].iter().sum();
        departures[i] = total;
        if total == 0 {
            if m > 1 {
                warnings.push(format!(
                    "no departures observed from state {}; row filled uniformly",
                    i + 1
                ));
                for j in 0..m {
                    if j != i {
                        matrix[i][j] = 1.0 / (m - 1) as f64;
                    }
                }
            } else {
                matrix[i][i] = 1.0;
            }
        } else {
            for j in 0..m {
                matrix[i][j] = counts[i][j] as f64 / total as f64;
            }
        }
    }
    Ok(TransitionEstimate { matrix, departures, warnings })
}

/// lambda_hat = N_T / T_p, with standard error sqrt(N_T) / T_p.
pub fn estimate_jump_intensity(n_jumps: usize, t_p: f64) -> Result<(f64, f64)> {
    if !(t_p > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {t_p}")));
    }
    let rate = n_jumps as f64 / t_p;
    let se = (n_jumps as f64).sqrt() / t_p;
    Ok((rate, se))
}

// ---------------------------------------------------------------------------
// Mid-quote estimators
// ---------------------------------------------------------------------------

/// mu_hat = (P_T - P_0) / T_p over the observed window.
pub fn estimate_drift(series: &SnapshotSeries) -> Result<f64> {
    let rows = series.rows();
    if rows.len() < 2 {
        return Err(Error::InsufficientData("drift needs at least 2 observations".into()));
    }
    let t_p = rows.last().unwrap().time_s - rows[0].time_s;
    if !(t_p > 0.0) {
        return Err(Error::Domain("zero-length observation window".into()));
    }
    Ok((rows.last().unwrap().mid() - rows[0].mid()) / t_p)
}

/// sigma_hat over a uniformly sampled series:
/// sigma^2 = sum_n (P_{t_n} - P_{t_{n-1}} - mu_hat * dt)^2 / T_p.
/// The per-increment drift correction uses mu_hat * dt (per-second drift
/// scaled to the sampling interval).
pub fn estimate_volatility(series: &SnapshotSeries) -> Result<f64> {
    let rows = series.rows();
    if rows.len() < 3 {
        return Err(Error::InsufficientData("volatility needs at least 3 observations".into()));
    }
    let dt = series.uniform_dt()?;
    let mu = estimate_drift(series)?;
    let t_p = rows.last().unwrap().time_s - rows[0].time_s;
    let ss: f64 = rows
        .windows(2)
        .map(|w| {
            let inc = w[1].mid() - w[0].mid() - mu * dt;
            inc * inc
        })
        .sum();
    Ok((ss / t_p).sqrt())
}

/// Approximate standard error of sigma_hat from R increments.
pub fn volatility_se(sigma: f64, n_increments: usize) -> f64 {
    sigma / (2.0 * n_increments as f64).sqrt()
}

/// Standard error of the endpoint drift estimator.
pub fn drift_se(sigma: f64, t_p: f64) -> f64 {
    sigma / t_p.sqrt()
}

// ---------------------------------------------------------------------------
// Fill-intensity estimators
// ---------------------------------------------------------------------------

/// Fill counts and occupancy times per (side, level, state).
#[derive(Debug, Clone)]
pub struct FillStats {
    pub n_states: usize,
    /// Indexed [side 0=bid 1=ask][level ordinal][state].
    pub fills: Vec<Vec<Vec<u64>>>,
    pub occupancy: Vec<Vec<Vec<f64>>>,
}

fn side_ordinal(side: Side) -> usize {
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

/// Integrate occupancy and count fills over the log. The spread state and
/// per-side quote level are piecewise constant between rows; a fill is
/// attributed to the quote active at its timestamp.
pub fn fill_occupancy_stats(log: &OwnQuoteLog, n_states: usize) -> Result<FillStats> {
    let mut stats = FillStats {
        n_states,
        fills: vec![vec![vec![0; n_states]; 3]; 2],
        occupancy: vec![vec![vec![0.0; n_states]; 3]; 2],
    };
    // Active quote level per side, current state.
    let mut active: [Option<Level>; 2] = [None, None];
    let mut state: Option<usize> = None;
    let mut last_t = 0.0;

    for row in log.rows() {
        if row.state >= n_states {
            return Err(Error::Data(format!(
                "spread state {} out of range 1..{} at t={}",
                row.state + 1,
                n_states,
                row.time_s
            )));
        }
        // Accumulate occupancy over [last_t, row.time_s).
        if let Some(s) = state {
            let span = row.time_s - last_t;
            for side in [Side::Bid, Side::Ask] {
                if let Some(level) = active[side_ordinal(side)] {
                    stats.occupancy[side_ordinal(side)][level_ord(level)][s] += span;
                }
            }
        }
        match row.event {
            QuoteEvent::QuoteOn => active[side_ordinal(row.side)] = Some(row.level),
            QuoteEvent::QuoteOff => active[side_ordinal(row.side)] = None,
            QuoteEvent::Fill => {
                let level = active[side_ordinal(row.side)].ok_or_else(|| {
                    Error::Data(format!(
                        "fill at t={} with no active {} quote",
                        row.time_s,
                        match row.side {
                            Side::Bid => "bid",
                            Side::Ask => "ask",
                        }
                    ))
                })?;
                stats.fills[side_ordinal(row.side)][level_ord(level)][row.state] += 1;
            }
        }
        state = Some(row.state);
        last_t = row.time_s;
    }
    // Tail out to the horizon.
    if let Some(s) = state {
        let span = log.horizon() - last_t;
        if span > 0.0 {
            for side in [Side::Bid, Side::Ask] {
                if let Some(level) = active[side_ordinal(side)] {
                    stats.occupancy[side_ordinal(side)][level_ord(level)][s] += span;
                }
            }
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FillEstimate {
    pub rate: f64,
    pub fills: u64,
    pub occupancy: f64,
    pub se: f64,
}

/// lambda_hat(q, s) = fills / occupancy for one cell.
pub fn estimate_fill_intensity(
    stats: &FillStats,
    side: Side,
    level: Level,
    state: usize,
) -> Result<FillEstimate> {
    let occ = stats.occupancy[side_ordinal(side)][level_ord(level)][state];
    let n = stats.fills[side_ordinal(side)][level_ord(level)][state];
    if !(occ > 0.0) {
        return Err(Error::UndefinedCell(format!(
            "no occupancy for ({:?} {:?}, state {})",
            side,
            level,
            state + 1
        )));
    }
    Ok(FillEstimate {
        rate: n as f64 / occ,
        fills: n,
        occupancy: occ,
        se: (n as f64).sqrt() / occ,
    })
}

/// Signed distance of a quote from the mid, in ticks, for spread state
/// `state` (0-based). Smaller distance means a more aggressive quote.
pub fn quote_distance_ticks(side: Side, level: Level, state: usize) -> f64 {
    let half_spread = (state + 1) as f64 / 2.0;
    match side {
        Side::Bid => half_spread - level.offset() as f64,
        Side::Ask => half_spread + level.offset() as f64,
    }
}

/// Least-squares fit of log lambda = log A - k d over the observed cells,
/// used to fill cells with no occupancy. Needs at least two observed cells
/// with distinct distances and positive rates.
pub fn fit_parametric_intensities(
    observed: &[(Side, Level, usize, f64)],
    n_states: usize,
) -> Result<FillModel> {
    let pts: Vec<(f64, f64)> = observed
        .iter()
        .filter(|(_, _, _, rate)| *rate > 0.0)
        .map(|&(side, level, state, rate)| (quote_distance_ticks(side, level, state), rate.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData(
            "parametric intensity fit needs at least 2 positive observed cells".into(),
        ));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(Error::InsufficientData(
            "parametric intensity fit needs cells at distinct distances".into(),
        ));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let a = intercept.exp();
    let k = -slope;

    let mut bid: [Vec<f64>; 3] = [vec![0.0; n_states], vec![0.0; n_states], vec![0.0; n_states]];
    let mut ask = bid.clone();
    for state in 0..n_states {
        for level in Level::ALL {
            bid[level_ord(level)][state] =
                a * (-k * quote_distance_ticks(Side::Bid, level, state)).exp();
            ask[level_ord(level)][state] =
                a * (-k * quote_distance_ticks(Side::Ask, level, state)).exp();
        }
    }
    FillModel::new(n_states, bid, ask)
}

// ---------------------------------------------------------------------------
// Full calibration
// ---------------------------------------------------------------------------

/// Non-estimated inputs to calibration.
#[derive(Debug, Clone)]
pub struct CalibParams {
    /// Resample interval for drift/volatility estimation, seconds.
    pub dt: f64,
    /// Number of spread states m; wider spreads are clipped.
    pub max_spread_ticks: usize,
    pub fees: FeeSchedule,
    pub bounds: OrderBounds,
}

impl CalibParams {
    pub fn with_defaults(fees: FeeSchedule, bounds: OrderBounds) -> Self {
        CalibParams { dt: 3.0, max_spread_ticks: 3, fees, bounds }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FillCellReport {
    pub level: String,
    pub state: usize,
    pub rate: f64,
    pub fills: u64,
    pub occupancy: f64,
    pub se: Option<f64>,
    pub source: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorReport {
    pub n_snapshots: usize,
    pub n_jumps: usize,
    pub horizon: f64,
    pub jump_intensity: f64,
    pub jump_intensity_se: f64,
    pub drift: f64,
    pub drift_se: f64,
    pub vol: f64,
    pub vol_se: f64,
    pub transition_departures: Vec<u64>,
    pub fill_cells: Vec<FillCellReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub model: MarketModel,
    pub report: EstimatorReport,
}

/// Run all five estimators and assemble a model. Fill cells that were never
/// occupied are filled from the exponential-distance parametric fit; if every
/// fitted model cell stays positive the result passes `validate`.
pub fn calibrate(
    snapshots: &SnapshotSeries,
    own_log: &OwnQuoteLog,
    params: &CalibParams,
) -> Result<CalibrationReport> {
    let tick = params.fees.tick;
    let m = params.max_spread_ticks;
    let mut warnings = Vec::new();

    let (jumps, mut w) = extract_spread_jumps(snapshots, tick, m)?;
    warnings.append(&mut w);
    let transition = estimate_transition_matrix(&jumps.states, m)?;
    warnings.extend(transition.warnings.iter().cloned());
    let (jump_rate, jump_se) = estimate_jump_intensity(jumps.n_jumps, snapshots.horizon())?;

    let resampled = snapshots.resample(params.dt)?;
    let drift = estimate_drift(&resampled)?;
    let vol = estimate_volatility(&resampled)?;
    let vol_se = volatility_se(vol, resampled.rows().len() - 1);
    let mu_se = drift_se(vol, snapshots.horizon());

    let stats = fill_occupancy_stats(own_log, m)?;
    let mut observed = Vec::new();
    let mut cells = Vec::new();
    for side in [Side::Bid, Side::Ask] {
        for level in Level::ALL {
            for state in 0..m {
                match estimate_fill_intensity(&stats, side, level, state) {
                    Ok(est) => {
                        observed.push((side, level, state, est.rate));
                        cells.push((side, level, state, Some(est)));
                    }
                    Err(Error::UndefinedCell(_)) => cells.push((side, level, state, None)),
                    Err(e) => return Err(e),
                }
            }
        }
    }
    let fallback = fit_parametric_intensities(&observed, m)?;
    let mut bid: [Vec<f64>; 3] = [vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    let mut ask = bid.clone();
    let mut cell_reports = Vec::new();
    for (side, level, state, est) in &cells {
        let (rate, source, fills, occupancy, se) = match est {
            Some(e) => (e.rate, "observed", e.fills, e.occupancy, Some(e.se)),
            None => {
                warnings.push(format!(
                    "no occupancy for ({}, state {}); parametric fallback",
                    crate::model::QuoteLevel { side: *side, level: *level }.label(),
                    state + 1
                ));
                (fallback.intensity(*side, *level, *state), "fallback", 0, 0.0, None)
            }
        };
        match side {
            Side::Bid => bid[level_ord(*level)][*state] = rate,
            Side::Ask => ask[level_ord(*level)][*state] = rate,
        }
        cell_reports.push(FillCellReport {
            level: crate::model::QuoteLevel { side: *side, level: *level }.label().to_string(),
            state: state + 1,
            rate,
            fills,
            occupancy,
            se,
            source,
        });
    }

    // Noisy low-occupancy cells can invert the aggressiveness ordering the
    // model requires; repair any such (side, state) triple from the
    // parametric surface, which is monotone by construction.
    for side in [Side::Bid, Side::Ask] {
        for state in 0..m {
            let table = match side {
                Side::Bid => &bid,
                Side::Ask => &ask,
            };
            let by_aggression: Vec<f64> = match side {
                Side::Bid => vec![table[0][state], table[1][state], table[2][state]],
                Side::Ask => vec![table[2][state], table[1][state], table[0][state]],
            };
            if by_aggression.windows(2).all(|w| w[0] < w[1]) {
                continue;
            }
            warnings.push(format!(
                "fill intensities for the {} side in state {} are not increasing \
                 in aggressiveness; replaced with the parametric fit",
                match side {
                    Side::Bid => "bid",
                    Side::Ask => "ask",
                },
                state + 1
            ));
            for level in Level::ALL {
                let rate = fallback.intensity(side, level, state);
                match side {
                    Side::Bid => bid[level_ord(level)][state] = rate,
                    Side::Ask => ask[level_ord(level)][state] = rate,
                }
                let label =
                    crate::model::QuoteLevel { side, level }.label().to_string();
                for report in cell_reports.iter_mut() {
                    if report.level == label && report.state == state + 1 {
                        report.rate = rate;
                        report.source = "fallback";
                        report.se = None;
                    }
                }
            }
        }
    }

    // A mid over an odd-tick spread sits on a half-tick; snap the starting
    // price to the lattice the solver grids on.
    let first_mid = snapshots.rows()[0].mid();
    let p0 = (first_mid / tick).round() * tick;
    if (p0 - first_mid).abs() > 1e-9 {
        warnings.push(format!("initial mid {first_mid} snapped to the tick lattice as {p0}"));
    }

    let model = MarketModel {
        fees: params.fees.clone(),
        midquote: MidQuoteModel { p0, drift, vol },
        spread: SpreadModel { n_states: m, tick, jump_rate, transition: transition.matrix },
        fills: FillModel::new(m, bid, ask)?,
        bounds: params.bounds.clone(),
    };

    let report = EstimatorReport {
        n_snapshots: snapshots.rows().len(),
        n_jumps: jumps.n_jumps,
        horizon: snapshots.horizon(),
        jump_intensity: jump_rate,
        jump_intensity_se: jump_se,
        drift,
        drift_se: mu_se,
        vol,
        vol_se,
        transition_departures: transition.departures,
        fill_cells: cell_reports,
        warnings,
    };
    Ok(CalibrationReport { model, report })
}
