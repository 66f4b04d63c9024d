use std::path::Path;

use attnet_core::data::ImuModel;
use attnet_core::filters::FilterParams;
use attnet_core::nn::{NetConfig, TrainConfig};
use attnet_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Everything a run can be configured with; every section is optional in the
/// JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub net: NetConfig,
    pub train: TrainConfig,
    /// Baseline parameters for `filter` when not tuned.
    pub filter: FilterParams,
    pub filter_grid: FilterGrid,
    pub imu: ImuModel,
    /// Base configurations for the ablation's TCN arm.
    pub tcn: NetConfig,
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterGrid {
    pub tau_base: Vec<f64>,
    pub adapt_gain: Vec<f64>,
}

impl Default for FilterGrid {
    fn default() -> Self {
        Self {
            tau_base: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
            adapt_gain: vec![0.0, 0.01, 0.05, 0.1, 0.3],
        }
    }
}

impl FilterGrid {
    pub fn expand(&self, base: FilterParams) -> Vec<FilterParams> {
        FilterParams::grid(base, &self.tau_base, &self.adapt_gain)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut net = NetConfig::rnn(25);
        net.grouped_input = true;
        Self {
            net,
            train: TrainConfig::default(),
            filter: FilterParams::default(),
            filter_grid: FilterGrid::default(),
            imu: ImuModel::default(),
            tcn: NetConfig::tcn(25),
            sizes: vec![10, 25, 50, 100, 200],
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg: RunConfig = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                serde_json::from_str(&text)?
            }
        };
        cfg.net.validate()?;
        cfg.tcn.validate()?;
        cfg.train.validate()?;
        cfg.filter.validate()?;
        Ok(cfg)
    }
}
