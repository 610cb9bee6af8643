//! CSV readers and writers. All emitted CSVs are RFC-4180, UTF-8, with `.`
//! as the decimal separator (the csv crate's defaults plus plain float
//! formatting).

use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use lobmm_core::backtest::{BacktestResult, MetricsSummary, PathRecord};
use lobmm_core::calib::{OwnQuoteLog, OwnQuoteRow, QuoteEvent, SnapshotRow, SnapshotSeries};
use lobmm_core::model::{Level, MarketModel, Side};
use lobmm_core::sweep::{PolicySliceRow, SweepResult};

// ---------------------------------------------------------------------------
// Readers
// ---------------------------------------------------------------------------

/// Read `time_s,best_bid,best_ask` snapshots.
pub fn read_snapshots(path: &Path) -> Result<SnapshotSeries> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening snapshots {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let expected = ["time_s", "best_bid", "best_ask"];
    if headers.iter().ne(expected) {
        bail!("snapshot header must be `time_s,best_bid,best_ask`, got `{}`", headers.as_slice());
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(SnapshotRow {
            time_s: record[0].parse().with_context(|| format!("bad time_s `{}`", &record[0]))?,
            best_bid: record[1].parse().with_context(|| format!("bad best_bid `{}`", &record[1]))?,
            best_ask: record[2].parse().with_context(|| format!("bad best_ask `{}`", &record[2]))?,
        });
    }
    if rows.is_empty() {
        bail!("snapshot file {} has no data rows", path.display());
    }
    Ok(SnapshotSeries::new(rows, None)?)
}

/// Read `time_s,side,level,spread_state,event` own-quote logs. Sides are
/// `bid`/`ask`, levels `minus`/`best`/`plus`, spread states 1-based, events
/// `quote_on`/`quote_off`/`fill`.
pub fn read_own_quotes(path: &Path) -> Result<OwnQuoteLog> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening own-quote log {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let expected = ["time_s", "side", "level", "spread_state", "event"];
    if headers.iter().ne(expected) {
        bail!(
            "own-quote header must be `time_s,side,level,spread_state,event`, got `{}`",
            headers.as_slice()
        );
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let side = match &record[1] {
            "bid" => Side::Bid,
            "ask" => Side::Ask,
            other => bail!("bad side `{other}` (want bid|ask)"),
        };
        let level = match &record[2] {
            "minus" => Level::Minus,
            "best" => Level::Best,
            "plus" => Level::Plus,
            other => bail!("bad level `{other}` (want minus|best|plus)"),
        };
        let state_1: usize =
            record[3].parse().with_context(|| format!("bad spread_state `{}`", &record[3]))?;
        if state_1 == 0 {
            bail!("spread_state is 1-based; got 0");
        }
        let event = match &record[4] {
            "quote_on" => QuoteEvent::QuoteOn,
            "quote_off" => QuoteEvent::QuoteOff,
            "fill" => QuoteEvent::Fill,
            other => bail!("bad event `{other}` (want quote_on|quote_off|fill)"),
        };
        rows.push(OwnQuoteRow {
            time_s: record[0].parse().with_context(|| format!("bad time_s `{}`", &record[0]))?,
            side,
            level,
            state: state_1 - 1,
            event,
        });
    }
    if rows.is_empty() {
        bail!("own-quote file {} has no data rows", path.display());
    }
    Ok(OwnQuoteLog::new(rows, None)?)
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One metrics row per strategy, Table-style columns.
pub fn write_metrics(path: &Path, rows: &[(&str, &MetricsSummary)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record([
        "strategy",
        "n_paths",
        "mean_profit",
        "std_profit",
        "skew",
        "kurtosis",
        "information_ratio",
        "mean_volume",
        "mean_market_volume",
        "profit_per_trade",
        "risk_per_trade",
        "market_over_total",
        "mean_abs_inventory",
        "mean_tax",
    ])?;
    for (name, m) in rows {
        w.write_record([
            name.to_string(),
            m.n_paths.to_string(),
            m.mean_profit.to_string(),
            m.std_profit.to_string(),
            m.skew_profit.to_string(),
            m.kurt_profit.to_string(),
            opt(m.information_ratio),
            m.mean_volume.to_string(),
            m.mean_market_volume.to_string(),
            opt(m.profit_per_trade),
            opt(m.risk_per_trade),
            opt(m.market_over_total),
            m.mean_abs_inventory.to_string(),
            m.mean_tax.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-path terminal values: `path,X_T,Q_T,Qm_T,meanAbsY`.
pub fn write_terminals(path: &Path, result: &BacktestResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["path", "X_T", "Q_T", "Qm_T", "meanAbsY"])?;
    for (i, s) in result.summaries.iter().enumerate() {
        w.write_record([
            i.to_string(),
            s.terminal_cash.to_string(),
            s.total_volume.to_string(),
            s.market_volume.to_string(),
            s.mean_abs_inventory.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Sampled full path series: `path,t,P,S,X,Y,U,Q`.
pub fn write_sampled_paths(
    path: &Path,
    model: &MarketModel,
    records: &[PathRecord],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["path", "t", "P", "S", "X", "Y", "U", "Q"])?;
    for (i, rec) in records.iter().enumerate() {
        for k in 0..rec.times.len() {
            w.write_record([
                i.to_string(),
                rec.times[k].to_string(),
                rec.price[k].to_string(),
                model.spread_of_state(rec.spread_state[k]).to_string(),
                rec.cash[k].to_string(),
                rec.inventory[k].to_string(),
                rec.wealth[k].to_string(),
                rec.volume[k].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long-format sweep rows: `axis,value,sigma,metric,mean,std`.
pub fn write_sweep(path: &Path, result: &SweepResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["axis", "value", "sigma", "metric", "mean", "std"])?;
    for (axis, value, sigma, metric, mean, std) in result.long_rows() {
        w.write_record([
            axis,
            value.to_string(),
            sigma.to_string(),
            metric,
            mean.to_string(),
            std.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Policy slice rows: `mu,spread_state,y,action_code` (states 1-based on
/// disk, matching the model document convention).
pub fn write_policy_slices(path: &Path, rows: &[PolicySliceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(["mu", "spread_state", "y", "action_code"])?;
    for row in rows {
        w.write_record([
            row.mu.to_string(),
            (row.spread_state + 1).to_string(),
            row.y.to_string(),
            row.action_code.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
