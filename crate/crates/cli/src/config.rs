//! Run configuration: one JSON document describing the model, scheme,
//! backtest and sweep settings. Command-line flags override config keys;
//! each run echoes the fully resolved configuration beside its outputs so
//! the run can be reproduced from that file alone.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lobmm_core::backtest::BacktestParams;
use lobmm_core::model::MarketModel;
use lobmm_core::solver::SchemeParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Inline model document (same schema as `model.json`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<serde_json::Value>,
    /// Path to a model document; ignored when `model` is inline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backtest: Option<BacktestConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestConfig {
    pub n_paths: usize,
    #[serde(default = "default_sample_paths")]
    pub sample_paths: usize,
    /// Default to the scheme's horizon and step when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

fn default_sample_paths() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// One of volatility | stamp_duty | drift | solver_sigma_mismatch.
    pub axis: String,
    pub values: Vec<f64>,
    /// Environment volatilities for the stamp-duty grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(scheme) = &config.scheme {
            if scheme.gamma != 0.0 {
                bail!("config error: gamma must be 0 (the solver's cash factorization requires it)");
            }
        }
        Ok(config)
    }

    pub fn scheme(&self) -> SchemeParams {
        self.scheme.clone().unwrap_or_else(SchemeParams::baseline)
    }

    /// Resolve the model. A `--model` flag wins over the config's inline
    /// document, which wins over `model_path`.
    pub fn resolve_model(&self, flag: Option<&Path>) -> Result<(MarketModel, Vec<String>)> {
        let text = if let Some(path) = flag {
            fs::read_to_string(path)
                .with_context(|| format!("reading model {}", path.display()))?
        } else if let Some(doc) = &self.model {
            serde_json::to_string(doc).expect("inline model re-serializes")
        } else {
            let path = self
                .model_path
                .clone()
                .context("no model: provide --model, or `model`/`model_path` in the config")?;
            fs::read_to_string(&path)
                .with_context(|| format!("reading model {}", path.display()))?
        };
        let (model, warnings) = MarketModel::from_json_str(&text)?;
        Ok((model, warnings))
    }

    pub fn backtest_params(&self, seed: u64) -> BacktestParams {
        let scheme = self.scheme();
        let bt = self.backtest.clone().unwrap_or(BacktestConfig {
            n_paths: 10_000,
            sample_paths: 10,
            horizon: None,
            step: None,
        });
        BacktestParams {
            horizon: bt.horizon.unwrap_or(scheme.horizon),
            step: bt.step.unwrap_or(scheme.step),
            n_paths: bt.n_paths,
            master_seed: seed,
            sample_paths: bt.sample_paths,
            allow_mismatch: false,
            initial_spread_state: None,
        }
    }

    /// Write the fully resolved configuration next to the run outputs.
    pub fn echo_effective(
        &self,
        out_dir: &Path,
        model: &MarketModel,
        seed: u64,
    ) -> Result<()> {
        let mut effective = self.clone();
        effective.model =
            Some(serde_json::from_str(&model.to_json_string()).expect("model JSON parses"));
        effective.model_path = None;
        effective.scheme = Some(self.scheme());
        effective.seed = Some(seed);
        effective.out_dir = Some(out_dir.to_path_buf());
        let text = serde_json::to_string_pretty(&effective)?;
        fs::write(out_dir.join("effective_config.json"), text + "\n")?;
        Ok(())
    }
}
