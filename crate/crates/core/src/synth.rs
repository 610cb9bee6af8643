//! Synthetic market generation: the baseline model preset and simulators of
//! its constituent processes, used to produce calibration fixtures and for
//! statistical recovery tests.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::calib::{OwnQuoteLog, OwnQuoteRow, QuoteEvent, SnapshotRow, SnapshotSeries};
use crate::model::{
    FeeSchedule, FillModel, Level, MarketModel, MidQuoteModel, OrderBounds, Side, SpreadModel,
};

/// Amplitude of the exponential-distance fill intensity surface used by the
/// baseline preset, 1/second at zero distance from the mid. Chosen dense
/// enough that market making stays (thinly) profitable across the whole
/// supported stamp-duty range instead of shutting down at the top of it.
pub const BASELINE_FILL_AMPLITUDE: f64 = 0.3;
/// Decay of fill intensity per tick of distance from the mid.
pub const BASELINE_FILL_DECAY: f64 = 1.0;

/// Fill tables from lambda(d) = A exp(-k d), d the quote's signed distance
/// from the mid in ticks. Symmetric across bid and ask.
pub fn exponential_fill_model(n_states: usize, amplitude: f64, decay: f64) -> FillModel {
    let cell = |side: Side, level: Level, state: usize| -> f64 {
        amplitude * (-decay * crate::calib::quote_distance_ticks(side, level, state)).exp()
    };
    let table = |side: Side| -> [Vec<f64>; 3] {
        let mut out: [Vec<f64>; 3] = [vec![0.0; n_states], vec![0.0; n_states], vec![0.0; n_states]];
        for (ord, level) in Level::ALL.iter().enumerate() {
            for state in 0..n_states {
                out[ord][state] = cell(side, *level, state);
            }
        }
        out
    };
    FillModel::new(n_states, table(Side::Bid), table(Side::Ask)).expect("consistent tables")
}

/// The calibrated three-state transition matrix, with the short row
/// renormalized to sum to one.
pub fn baseline_transition() -> Vec<Vec<f64>> {
    let mut rows = vec![
        vec![0.0, 0.9404, 0.0596],
        vec![0.9557, 0.0, 0.0443],
        vec![0.4074, 0.5925, 0.0],
    ];
    for row in &mut rows {
        let sum: f64 = row.iter().sum();
        for p in row.iter_mut() {
            *p /= sum;
        }
    }
    rows
}

/// Fee-free baseline: P0 = 14, mu = 0, sigma = 0.005, three-state spread
/// chain with unit jump intensity, lot 100, inventory in [-500, 500].
pub fn baseline_model() -> MarketModel {
    MarketModel {
        fees: FeeSchedule { tick: 0.01, commission_rate: 0.0, stamp_rate: 0.0 },
        midquote: MidQuoteModel { p0: 14.0, drift: 0.0, vol: 0.005 },
        spread: SpreadModel {
            n_states: 3,
            tick: 0.01,
            jump_rate: 1.0,
            transition: baseline_transition(),
        },
        fills: exponential_fill_model(3, BASELINE_FILL_AMPLITUDE, BASELINE_FILL_DECAY),
        bounds: OrderBounds { max_limit: 100, max_market: 100, lot: 100, y_min: -500, y_max: 500 },
    }
}

/// Piecewise-constant spread path: jump times and the 0-based state holding
/// from each time. Starts at `start_state` at t = 0.
pub fn simulate_spread_path<R: Rng>(
    model: &MarketModel,
    t_max: f64,
    start_state: usize,
    rng: &mut R,
) -> (Vec<f64>, Vec<usize>) {
    let mut times = vec![0.0];
    let mut states = vec![start_state];
    let lambda = model.spread.jump_rate;
    if lambda <= 0.0 {
        return (times, states);
    }
    let mut t = 0.0;
    loop {
        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        t += -u.ln() / lambda;
        if t > t_max {
            break;
        }
        let from = *states.last().unwrap();
        let row = &model.spread.transition[from];
        let mut v: f64 = rng.gen();
        let mut next = model.spread.n_states - 1;
        for (j, &p) in row.iter().enumerate() {
            if v < p {
                next = j;
                break;
            }
            v -= p;
        }
        times.push(t);
        states.push(next);
    }
    (times, states)
}

/// Euler path of the mid-quote at uniform spacing `dt`; returns n + 1 mids.
pub fn simulate_midquote_path<R: Rng>(model: &MarketModel, dt: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let mu = model.midquote.drift;
    let sigma = model.midquote.vol;
    let mut p = model.midquote.p0;
    let mut out = Vec::with_capacity(n + 1);
    out.push(p);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(rng);
        p += mu * dt + sigma * dt.sqrt() * z;
        out.push(p);
    }
    out
}

/// Snapshot series sampled at uniform spacing `dt` from an Euler mid path
/// and a simulated spread path.
pub fn simulate_snapshot_series<R: Rng>(
    model: &MarketModel,
    dt: f64,
    t_max: f64,
    rng: &mut R,
) -> SnapshotSeries {
    let n = (t_max / dt).round() as usize;
    let mids = simulate_midquote_path(model, dt, n, rng);
    let (jump_times, jump_states) = simulate_spread_path(model, t_max, 0, rng);
    let mut rows = Vec::with_capacity(n + 1);
    let mut idx = 0;
    for k in 0..=n {
        let t = k as f64 * dt;
        while idx + 1 < jump_times.len() && jump_times[idx + 1] <= t {
            idx += 1;
        }
        let s = model.spread_of_state(jump_states[idx]);
        rows.push(SnapshotRow { time_s: t, best_bid: mids[k] - s / 2.0, best_ask: mids[k] + s / 2.0 });
    }
    SnapshotSeries::new(rows, Some(t_max)).expect("well-formed synthetic series")
}

/// Own-quote log over [0, t_max] with both sides always quoted, the quote
/// level rotating through minus/best/plus every `rotate_every` seconds, and
/// fills drawn from the model's intensities. Emits a quote_on row at every
/// spread jump and rotation so occupancy integration sees each change.
pub fn simulate_own_quote_log<R: Rng>(
    model: &MarketModel,
    t_max: f64,
    rotate_every: f64,
    rng: &mut R,
) -> OwnQuoteLog {
    let (jump_times, jump_states) = simulate_spread_path(model, t_max, 0, rng);

    // Merge spread jumps and rotation boundaries into breakpoints.
    let mut breaks: Vec<f64> = jump_times.clone();
    let mut t = rotate_every;
    while t < t_max {
        breaks.push(t);
        t += rotate_every;
    }
    breaks.push(t_max);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let state_at = |t: f64| -> usize {
        let idx = jump_times.iter().rposition(|&jt| jt <= t + 1e-12).unwrap_or(0);
        jump_states[idx]
    };
    let level_at = |t: f64| -> Level {
        Level::ALL[((t / rotate_every).floor() as usize) % 3]
    };

    let mut rows = Vec::new();
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let state = state_at(lo);
        let level = level_at(lo);
        for side in [Side::Bid, Side::Ask] {
            rows.push(OwnQuoteRow { time_s: lo, side, level, state, event: QuoteEvent::QuoteOn });
            let lambda = model.fills.intensity(side, level, state);
            if lambda > 0.0 {
                let mut ft = lo;
                loop {
                    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                    ft += -u.ln() / lambda;
                    if ft >= hi {
                        break;
                    }
                    rows.push(OwnQuoteRow { time_s: ft, side, level, state, event: QuoteEvent::Fill });
                }
            }
        }
    }
    OwnQuoteLog::new(rows, Some(t_max)).expect("well-formed synthetic log")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn baseline_validates() {
        assert!(baseline_model().validate().is_ok());
    }

    #[test]
    fn spread_path_jump_count_is_poisson_scale() {
        let model = baseline_model();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let (times, states) = simulate_spread_path(&model, 10_000.0, 0, &mut rng);
        assert_eq!(times.len(), states.len());
        let n = times.len() - 1;
        // lambda = 1 over 1e4 s: within 5 sigma of 1e4.
        assert!((n as f64 - 10_000.0).abs() < 5.0 * 100.0, "n = {n}");
    }

    #[test]
    fn snapshot_series_round_numbers() {
        let model = baseline_model();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let series = simulate_snapshot_series(&model, 0.5, 100.0, &mut rng);
        assert_eq!(series.rows().len(), 201);
        for r in series.rows() {
            let ticks = (r.best_ask - r.best_bid) / model.fees.tick;
            assert!((ticks - ticks.round()).abs() < 1e-9);
        }
    }
}
