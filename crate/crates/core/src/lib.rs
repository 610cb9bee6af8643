//! Optimal market making on a limit order book with a discrete spread.
//!
//! The library models a single-asset market maker facing a mid-quote
//! diffusion, a Markov-modulated bid-ask spread on a tick grid, and
//! Poisson fills whose intensity depends on the quote's placement and the
//! prevailing spread. It provides:
//!
//! - [`model`]: the market description (fees, mid-quote, spread chain,
//!   fill intensities, order bounds) with validation, canonical JSON and
//!   fingerprinting;
//! - [`calib`]: estimators that fit the model from order-book snapshots
//!   and the maker's own quote/fill log;
//! - [`synth`]: the baseline preset and simulators used to produce
//!   calibration fixtures;
//! - [`solver`]: the backward dynamic-programming scheme that computes the
//!   optimal quoting/impulse policy under exponential utility;
//! - [`backtest`]: a Monte Carlo engine replaying a policy (or a constant
//!   benchmark) through simulated markets with common random numbers;
//! - [`sweep`]: parameter sweeps (volatility, stamp duty, drift) built on
//!   the solver and backtester.

pub mod backtest;
pub mod calib;
pub mod error;
pub mod math;
pub mod model;
pub mod solver;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};
pub use model::MarketModel;
