//! The exogenous market model: mid-quote diffusion, spread Markov chain,
//! fill intensities, fee schedule and order/inventory bounds, together with
//! the closed-form pricing, cash and liquidation functions shared by the
//! solver and the backtester.
//!
//! All types are immutable after construction and safe to share across
//! threads without synchronization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tick size, commission rate and stamp duty rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeeSchedule {
    /// Minimum price increment, Yuan.
    pub tick: f64,
    /// Two-sided brokerage/exchange commission rate.
    pub commission_rate: f64,
    /// Sell-side-only stamp duty rate.
    pub stamp_rate: f64,
}

/// Drifted diffusion for the mid-quote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidQuoteModel {
    pub p0: f64,
    /// Yuan per second.
    pub drift: f64,
    /// Yuan per sqrt-second.
    pub vol: f64,
}

/// Continuous-time Markov chain for the spread: a Poisson jump clock with a
/// discrete embedded chain over states {1..m}, state i meaning spread i*tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadModel {
    pub n_states: usize,
    pub tick: f64,
    /// Jump intensity of the Poisson clock, 1/second.
    pub jump_rate: f64,
    /// Row-stochastic m x m transition matrix of the embedded chain.
    pub transition: Vec<Vec<f64>>,
}

/// Which side of the book a quote rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bid,
    Ask,
}

/// Price level of a quote relative to the current best quote of its side.
/// `Plus` is one tick more aggressive on the bid side and one tick more
/// passive on the ask side; both map to a +1 tick price offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Minus,
    Best,
    Plus,
}

impl Level {
    /// Signed tick offset added to the side's best quote.
    pub fn offset(self) -> i64 {
        match self {
            Level::Minus => -1,
            Level::Best => 0,
            Level::Plus => 1,
        }
    }

    pub const ALL: [Level; 3] = [Level::Minus, Level::Best, Level::Plus];
}

/// One of the six admissible posting prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuoteLevel {
    pub side: Side,
    pub level: Level,
}

impl QuoteLevel {
    pub fn label(self) -> &'static str {
        match (self.side, self.level) {
            (Side::Bid, Level::Minus) => "Bb-",
            (Side::Bid, Level::Best) => "Bb",
            (Side::Bid, Level::Plus) => "Bb+",
            (Side::Ask, Level::Minus) => "Ba-",
            (Side::Ask, Level::Best) => "Ba",
            (Side::Ask, Level::Plus) => "Ba+",
        }
    }

    pub fn from_label(s: &str) -> Option<QuoteLevel> {
        let (side, level) = match s {
            "Bb-" => (Side::Bid, Level::Minus),
            "Bb" => (Side::Bid, Level::Best),
            "Bb+" => (Side::Bid, Level::Plus),
            "Ba-" => (Side::Ask, Level::Minus),
            "Ba" => (Side::Ask, Level::Best),
            "Ba+" => (Side::Ask, Level::Plus),
            _ => return None,
        };
        Some(QuoteLevel { side, level })
    }
}

/// Fill intensities per (quote level, spread state), 1/second.
/// Dense: every cell must be present; a missing cell is a load error.
#[derive(Debug, Clone, PartialEq)]
pub struct FillModel {
    pub n_states: usize,
    /// Indexed [level as ordinal][state 0-based]; level ordinals follow `Level::ALL`.
    bid: [Vec<f64>; 3],
    ask: [Vec<f64>; 3],
}

impl FillModel {
    pub fn new(n_states: usize, bid: [Vec<f64>; 3], ask: [Vec<f64>; 3]) -> Result<Self> {
        for table in bid.iter().chain(ask.iter()) {
            if table.len() != n_states {
                return Err(Error::Data(format!(
                    "intensity table has {} states, expected {}",
                    table.len(),
                    n_states
                )));
            }
        }
        Ok(FillModel { n_states, bid, ask })
    }

    /// Intensity for a quote level in spread state `state` (0-based).
    pub fn intensity(&self, side: Side, level: Level, state: usize) -> f64 {
        let ord = level_ordinal(level);
        match side {
            Side::Bid => self.bid[ord][state],
            Side::Ask => self.ask[ord][state],
        }
    }

    /// Copy with one cell replaced; used by monotonicity tests.
    pub fn with_cell(&self, side: Side, level: Level, state: usize, value: f64) -> FillModel {
        let mut out = self.clone();
        let ord = level_ordinal(level);
        match side {
            Side::Bid => out.bid[ord][state] = value,
            Side::Ask => out.ask[ord][state] = value,
        }
        out
    }

    /// Mirror bid and ask tables; used by symmetry tests.
    pub fn mirrored(&self) -> FillModel {
        FillModel {
            n_states: self.n_states,
            bid: self.ask.clone(),
            ask: self.bid.clone(),
        }
    }
}

fn level_ordinal(level: Level) -> usize {
    match level {
        Level::Minus => 0,
        Level::Best => 1,
        Level::Plus => 2,
    }
}

/// Order-size and inventory limits, all in shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderBounds {
    /// Maximum limit order size.
    pub max_limit: i64,
    /// Maximum market order size.
    pub max_market: i64,
    /// Share lot; all sizes and inventory levels are lot multiples.
    pub lot: i64,
    pub y_min: i64,
    pub y_max: i64,
}

/// The full exogenous model.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    pub fees: FeeSchedule,
    pub midquote: MidQuoteModel,
    pub spread: SpreadModel,
    pub fills: FillModel,
    pub bounds: OrderBounds,
}

/// Bid posting price for a quote level: (p - s/2 + k*tick) * (1 + commission).
pub fn bid_price(level: Level, p: f64, s: f64, fees: &FeeSchedule) -> Result<f64> {
    let raw = p - s / 2.0 + level.offset() as f64 * fees.tick;
    if raw <= 0.0 {
        return Err(Error::Domain(format!("non-positive raw bid price {raw}")));
    }
    Ok(raw * (1.0 + fees.commission_rate))
}

/// Ask posting price for a quote level: (p + s/2 + k*tick) * (1 - commission - stamp).
pub fn ask_price(level: Level, p: f64, s: f64, fees: &FeeSchedule) -> Result<f64> {
    let raw = p + s / 2.0 + level.offset() as f64 * fees.tick;
    if raw <= 0.0 {
        return Err(Error::Domain(format!("non-positive raw ask price {raw}")));
    }
    Ok(raw * (1.0 - fees.commission_rate - fees.stamp_rate))
}

/// Cash paid for a market order of signed size `e` (buy > 0, sell < 0)
/// executed against the opposite best quote, fees included:
/// c(e, p, s) = (e + eps|e| + rho|e| 1_{e<0}) p + (|e| + eps e + rho e 1_{e<0}) s/2.
pub fn market_cash(e: f64, p: f64, s: f64, fees: &FeeSchedule) -> f64 {
    let eps = fees.commission_rate;
    let rho = fees.stamp_rate;
    let sell = if e < 0.0 { 1.0 } else { 0.0 };
    (e + eps * e.abs() + rho * e.abs() * sell) * p + (e.abs() + eps * e + rho * e * sell) * s / 2.0
}

/// Cash after unwinding the whole position at current quotes:
/// L(x, y, p, s) = x - c(-y, p, s).
pub fn liquidation_value(x: f64, y: f64, p: f64, s: f64, fees: &FeeSchedule) -> f64 {
    x - market_cash(-y, p, s, fees)
}

/// Stamp tax component of a sell execution of |e| shares at raw per-share
/// price `raw_price` (zero for buys).
pub fn stamp_tax(e: f64, raw_price: f64, fees: &FeeSchedule) -> f64 {
    if e < 0.0 {
        fees.stamp_rate * e.abs() * raw_price
    } else {
        0.0
    }
}

/// Outcome of `MarketModel::validate`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

impl MarketModel {
    /// Check every type invariant; returns a report rather than failing fast.
    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        let err = |rep: &mut ValidationReport, msg: String| rep.errors.push(msg);

        if !(self.fees.tick > 0.0) {
            err(&mut rep, format!("tick must be positive, got {}", self.fees.tick));
        }
        if !(0.0..1.0).contains(&self.fees.commission_rate) {
            err(&mut rep, format!("commission_rate out of [0,1): {}", self.fees.commission_rate));
        }
        if !(0.0..1.0).contains(&self.fees.stamp_rate) {
            err(&mut rep, format!("stamp_rate out of [0,1): {}", self.fees.stamp_rate));
        }
        if self.fees.commission_rate + self.fees.stamp_rate >= 1.0 {
            err(&mut rep, "commission_rate + stamp_rate must be < 1".into());
        }
        if !(self.midquote.p0 > 0.0) {
            err(&mut rep, format!("p0 must be positive, got {}", self.midquote.p0));
        }
        if self.midquote.vol < 0.0 {
            err(&mut rep, format!("vol must be non-negative, got {}", self.midquote.vol));
        }

        let m = self.spread.n_states;
        if m < 1 {
            err(&mut rep, "spread chain needs at least one state".into());
        }
        if self.spread.jump_rate < 0.0 {
            err(&mut rep, format!("jump_rate must be non-negative, got {}", self.spread.jump_rate));
        }
        if (self.spread.tick - self.fees.tick).abs() > 1e-12 {
            err(&mut rep, "spread.tick differs from fees.tick".into());
        }
        if self.spread.transition.len() != m {
            err(&mut rep, format!("transition matrix has {} rows, expected {}", self.spread.transition.len(), m));
        } else {
            for (i, row) in self.spread.transition.iter().enumerate() {
                if row.len() != m {
                    err(&mut rep, format!("transition row {} has {} entries, expected {}", i + 1, row.len(), m));
                    continue;
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    err(&mut rep, format!("transition row {} sums to {sum}, expected 1", i + 1));
                }
                if row.iter().any(|&p| p < 0.0) {
                    err(&mut rep, format!("transition row {} has a negative entry", i + 1));
                }
                if m > 1 && row[i] != 0.0 {
                    err(&mut rep, format!("transition diagonal entry ({0},{0}) must be 0", i + 1));
                }
            }
        }

        if self.fills.n_states != m {
            err(&mut rep, format!("fill tables cover {} states, spread chain has {}", self.fills.n_states, m));
        } else {
            for s in 0..m {
                for level in Level::ALL {
                    for side in [Side::Bid, Side::Ask] {
                        let v = self.fills.intensity(side, level, s);
                        if v < 0.0 {
                            err(&mut rep, format!(
                                "negative intensity at ({}, state {})",
                                QuoteLevel { side, level }.label(),
                                s + 1
                            ));
                        }
                    }
                }
                // Aggressiveness strictly increases the fill rate:
                // bid Bb- < Bb < Bb+, ask Ba+ < Ba < Ba-. An all-zero side
                // (fills switched off for an experiment) is exempt.
                let b = |l| self.fills.intensity(Side::Bid, l, s);
                if b(Level::Minus) + b(Level::Best) + b(Level::Plus) > 0.0
                    && !(b(Level::Minus) < b(Level::Best) && b(Level::Best) < b(Level::Plus))
                {
                    err(&mut rep, format!("bid intensity not strictly increasing in aggressiveness at state {}", s + 1));
                }
                let a = |l| self.fills.intensity(Side::Ask, l, s);
                if a(Level::Minus) + a(Level::Best) + a(Level::Plus) > 0.0
                    && !(a(Level::Plus) < a(Level::Best) && a(Level::Best) < a(Level::Minus))
                {
                    err(&mut rep, format!("ask intensity not strictly increasing in aggressiveness at state {}", s + 1));
                }
            }
        }

        let b = &self.bounds;
        if b.lot <= 0 {
            err(&mut rep, format!("lot must be positive, got {}", b.lot));
        } else {
            if b.max_limit <= 0 || b.max_limit % b.lot != 0 {
                err(&mut rep, format!("max_limit must be a positive lot multiple, got {}", b.max_limit));
            }
            if b.max_market <= 0 || b.max_market % b.lot != 0 {
                err(&mut rep, format!("max_market must be a positive lot multiple, got {}", b.max_market));
            }
            if b.y_min % b.lot != 0 || b.y_max % b.lot != 0 {
                err(&mut rep, "inventory bounds must be lot multiples".into());
            }
        }
        if !(b.y_min <= 0 && 0 <= b.y_max) {
            err(&mut rep, format!("inventory bounds must bracket zero, got [{}, {}]", b.y_min, b.y_max));
        }

        rep
    }

    /// Spread value, in Yuan, of 0-based state index.
    pub fn spread_of_state(&self, state: usize) -> f64 {
        (state + 1) as f64 * self.fees.tick
    }

    /// Stationary distribution of the embedded jump chain, by power iteration.
    /// With a constant jump clock this is also the stationary law of the
    /// continuous-time spread.
    pub fn spread_stationary(&self) -> Vec<f64> {
        let m = self.spread.n_states;
        let mut pi = vec![1.0 / m as f64; m];
        for _ in 0..10_000 {
            let mut next = vec![0.0; m];
            for i in 0..m {
                for j in 0..m {
                    next[j] += pi[i] * self.spread.transition[i][j];
                }
            }
            let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if diff < 1e-14 {
                break;
            }
        }
        pi
    }

    /// Canonical JSON serialization; field order is fixed by the schema structs.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ModelDoc::from(self)).expect("model serializes")
    }

    /// Content hash of the canonical JSON; identifies the model in artifacts.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_json_string().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Parse from the JSON document format. Transition rows are renormalized;
    /// rows off by more than 1e-6 produce a warning.
    pub fn from_json_str(s: &str) -> Result<(MarketModel, Vec<String>)> {
        let doc: ModelDoc =
            serde_json::from_str(s).map_err(|e| Error::Data(format!("model JSON: {e}")))?;
        doc.into_model()
    }
}

// ---------------------------------------------------------------------------
// JSON document schema
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SpreadDoc {
    n_states: usize,
    tick: f64,
    jump_rate: f64,
    transition: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FillsDoc {
    /// Keyed "Bb-" | "Bb" | "Bb+" -> { "1": intensity, ... } (1-based states).
    bid_intensity: BTreeMap<String, BTreeMap<String, f64>>,
    ask_intensity: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    fees: FeeSchedule,
    midquote: MidQuoteModel,
    spread: SpreadDoc,
    fills: FillsDoc,
    bounds: OrderBounds,
}

impl From<&MarketModel> for ModelDoc {
    fn from(model: &MarketModel) -> Self {
        let m = model.spread.n_states;
        let table = |side: Side| -> BTreeMap<String, BTreeMap<String, f64>> {
            let mut out = BTreeMap::new();
            for level in Level::ALL {
                let label = QuoteLevel { side, level }.label().to_string();
                let mut states = BTreeMap::new();
                for s in 0..m {
                    states.insert((s + 1).to_string(), model.fills.intensity(side, level, s));
                }
                out.insert(label, states);
            }
            out
        };
        ModelDoc {
            fees: model.fees.clone(),
            midquote: model.midquote.clone(),
            spread: SpreadDoc {
                n_states: m,
                tick: model.spread.tick,
                jump_rate: model.spread.jump_rate,
                transition: model.spread.transition.clone(),
            },
            fills: FillsDoc {
                bid_intensity: table(Side::Bid),
                ask_intensity: table(Side::Ask),
            },
            bounds: model.bounds.clone(),
        }
    }
}

impl ModelDoc {
    fn into_model(self) -> Result<(MarketModel, Vec<String>)> {
        let m = self.spread.n_states;
        let mut warnings = Vec::new();

        let mut transition = self.spread.transition;
        for (i, row) in transition.iter_mut().enumerate() {
            if row.len() != m {
                return Err(Error::Data(format!(
                    "transition row {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    m
                )));
            }
            let sum: f64 = row.iter().sum();
            if !(sum > 0.0) || !sum.is_finite() {
                return Err(Error::Data(format!("transition row {} sums to {sum}", i + 1)));
            }
            if (sum - 1.0).abs() > 1e-6 {
                warnings.push(format!(
                    "transition row {} sums to {sum}; renormalized",
                    i + 1
                ));
            }
            for p in row.iter_mut() {
                *p /= sum;
            }
        }

        let read_table = |doc: &BTreeMap<String, BTreeMap<String, f64>>,
                          side: Side|
         -> Result<[Vec<f64>; 3]> {
            let mut out: [Vec<f64>; 3] = [vec![0.0; m], vec![0.0; m], vec![0.0; m]];
            for level in Level::ALL {
                let label = QuoteLevel { side, level }.label();
                let states = doc.get(label).ok_or_else(|| {
                    Error::Data(format!("missing intensity table for quote level {label}"))
                })?;
                for s in 0..m {
                    let key = (s + 1).to_string();
                    let v = states.get(&key).ok_or_else(|| {
                        Error::Data(format!("missing intensity cell ({label}, state {key})"))
                    })?;
                    out[level_ordinal(level)][s] = *v;
                }
            }
            Ok(out)
        };

        let bid = read_table(&self.fills.bid_intensity, Side::Bid)?;
        let ask = read_table(&self.fills.ask_intensity, Side::Ask)?;

        let model = MarketModel {
            fees: self.fees,
            midquote: self.midquote,
            spread: SpreadModel {
                n_states: m,
                tick: self.spread.tick,
                jump_rate: self.spread.jump_rate,
                transition,
            },
            fills: FillModel::new(m, bid, ask)?,
            bounds: self.bounds,
        };
        Ok((model, warnings))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn zero_fees() -> FeeSchedule {
        FeeSchedule { tick: 0.01, commission_rate: 0.0, stamp_rate: 0.0 }
    }

    #[test]
    fn bid_price_examples() {
        let f = zero_fees();
        assert_abs_diff_eq!(bid_price(Level::Best, 14.00, 0.02, &f).unwrap(), 13.99, epsilon = 1e-12);
        // Fee-free best-bid identity.
        for (p, s) in [(14.0, 0.01), (13.5, 0.03), (100.0, 0.02)] {
            assert_abs_diff_eq!(bid_price(Level::Best, p, s, &f).unwrap(), p - s / 2.0, epsilon = 1e-12);
        }
        let f = FeeSchedule { tick: 0.01, commission_rate: 0.0003, stamp_rate: 0.0 };
        assert_abs_diff_eq!(
            bid_price(Level::Plus, 14.00, 0.02, &f).unwrap(),
            14.00 * 1.0003,
            epsilon = 1e-12
        );
    }

    #[test]
    fn ask_price_examples() {
        let f = FeeSchedule { tick: 0.01, commission_rate: 0.0, stamp_rate: 0.001 };
        assert_abs_diff_eq!(ask_price(Level::Best, 14.00, 0.02, &f).unwrap(), 14.01 * 0.999, epsilon = 1e-12);
        let f0 = zero_fees();
        for (p, s) in [(14.0, 0.01), (13.5, 0.03)] {
            assert_abs_diff_eq!(ask_price(Level::Best, p, s, &f0).unwrap(), p + s / 2.0, epsilon = 1e-12);
        }
        let f = FeeSchedule { tick: 0.01, commission_rate: 0.0003, stamp_rate: 0.001 };
        assert_abs_diff_eq!(
            ask_price(Level::Minus, 14.00, 0.03, &f).unwrap(),
            (14.015 - 0.01) * 0.9987,
            epsilon = 1e-12
        );
    }

    #[test]
    fn bid_price_rejects_non_positive() {
        let f = zero_fees();
        assert!(bid_price(Level::Minus, 0.015, 0.01, &f).is_err());
    }

    #[test]
    fn market_cash_examples() {
        let f0 = zero_fees();
        for (p, s) in [(14.0, 0.02), (1.0, 0.01)] {
            assert_eq!(market_cash(0.0, p, s, &f0), 0.0);
        }
        assert_abs_diff_eq!(market_cash(100.0, 14.00, 0.02, &f0), 1401.0, epsilon = 1e-9);
        let f = FeeSchedule { tick: 0.01, commission_rate: 0.0003, stamp_rate: 0.001 };
        assert_abs_diff_eq!(market_cash(-100.0, 14.00, 0.02, &f), -1397.1813, epsilon = 1e-9);
    }

    #[test]
    fn liquidation_examples() {
        let f0 = zero_fees();
        assert_eq!(liquidation_value(7.5, 0.0, 14.0, 0.02, &f0), 7.5);
        assert_abs_diff_eq!(liquidation_value(0.0, 100.0, 14.00, 0.02, &f0), 1399.0, epsilon = 1e-9);
        assert_abs_diff_eq!(liquidation_value(50.0, -100.0, 14.00, 0.02, &f0), -1351.0, epsilon = 1e-9);
    }

    fn test_model() -> MarketModel {
        crate::synth::baseline_model()
    }

    #[test]
    fn baseline_model_validates_clean() {
        let rep = test_model().validate();
        assert!(rep.is_ok(), "unexpected violations: {:?}", rep.errors);
    }

    #[test]
    fn equal_intensities_violate_monotonicity() {
        let m = test_model();
        let v = m.fills.intensity(Side::Bid, Level::Best, 0);
        let broken = MarketModel { fills: m.fills.with_cell(Side::Bid, Level::Minus, 0, v), ..m };
        let rep = broken.validate();
        assert!(rep.errors.iter().any(|e| e.contains("bid intensity")));
    }

    #[test]
    fn short_transition_row_renormalizes_with_warning() {
        let model = test_model();
        let mut doc: serde_json::Value = serde_json::from_str(&model.to_json_string()).unwrap();
        // Row printed as summing to 0.9999.
        doc["spread"]["transition"][2] = serde_json::json!([0.4074, 0.5925, 0.0]);
        let (loaded, warnings) = MarketModel::from_json_str(&doc.to_string()).unwrap();
        assert!(warnings.iter().any(|w| w.contains("renormalized")), "warnings: {warnings:?}");
        let row = &loaded.spread.transition[2];
        assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(loaded.validate().is_ok());
    }

    #[test]
    fn missing_intensity_cell_is_hard_error() {
        let doc = test_model().to_json_string();
        let broken = doc.replace("\"Bb\"", "\"Bq\"");
        assert!(MarketModel::from_json_str(&broken).is_err());
    }

    #[test]
    fn json_round_trip_preserves_model_and_fingerprint() {
        let model = test_model();
        let (loaded, warnings) = MarketModel::from_json_str(&model.to_json_string()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(model.fingerprint(), loaded.fingerprint());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn quote_ordering_gaps(
                p in 5.0f64..200.0,
                s_ticks in 1i64..6,
                eps in 0.0f64..0.001,
                rho in 0.0f64..0.002,
            ) {
                let f = FeeSchedule { tick: 0.01, commission_rate: eps, stamp_rate: rho };
                let s = s_ticks as f64 * f.tick;
                let b: Vec<f64> = [Level::Minus, Level::Best, Level::Plus]
                    .iter().map(|&l| bid_price(l, p, s, &f).unwrap()).collect();
                let a: Vec<f64> = [Level::Minus, Level::Best, Level::Plus]
                    .iter().map(|&l| ask_price(l, p, s, &f).unwrap()).collect();
                prop_assert!(b[0] < b[1] && b[1] < b[2]);
                prop_assert!(a[0] < a[1] && a[1] < a[2]);
                let bid_gap = f.tick * (1.0 + eps);
                let ask_gap = f.tick * (1.0 - eps - rho);
                prop_assert!((b[1] - b[0] - bid_gap).abs() < 1e-9);
                prop_assert!((b[2] - b[1] - bid_gap).abs() < 1e-9);
                prop_assert!((a[1] - a[0] - ask_gap).abs() < 1e-9);
                prop_assert!((a[2] - a[1] - ask_gap).abs() < 1e-9);
            }

            #[test]
            fn cash_odd_up_to_fees(e in -500.0f64..500.0, p in 5.0f64..200.0, s_ticks in 1i64..6) {
                let f = FeeSchedule { tick: 0.01, commission_rate: 0.0, stamp_rate: 0.0 };
                let s = s_ticks as f64 * f.tick;
                let c_pos = market_cash(e, p, s, &f);
                let c_neg = market_cash(-e, p, s, &f);
                prop_assert!((c_neg - (-e * p + e.abs() * s / 2.0)).abs() < 1e-9);
                prop_assert!((c_pos + c_neg - e.abs() * s).abs() < 1e-9);
            }

            #[test]
            fn round_trip_never_profits(
                l in 1.0f64..500.0,
                p in 5.0f64..200.0,
                s_ticks in 1i64..6,
                eps in 0.0f64..0.001,
                rho in 0.0f64..0.002,
            ) {
                let f = FeeSchedule { tick: 0.01, commission_rate: eps, stamp_rate: rho };
                let s = s_ticks as f64 * f.tick;
                let cost = market_cash(l, p, s, &f);
                let result = liquidation_value(-cost, l, p, s, &f);
                prop_assert!(result <= 1e-9);
            }

            #[test]
            fn fee_free_liquidation_identity(
                x in -1000.0f64..1000.0,
                y in -500.0f64..500.0,
                p in 5.0f64..200.0,
                s_ticks in 1i64..6,
            ) {
                let f = FeeSchedule { tick: 0.01, commission_rate: 0.0, stamp_rate: 0.0 };
                let s = s_ticks as f64 * f.tick;
                let lhs = liquidation_value(x, y, p, s, &f);
                let rhs = x + y * p - y.abs() * s / 2.0;
                prop_assert!((lhs - rhs).abs() < 1e-9);
            }
        }
    }
}
