//! Run configuration: a JSON document whose every field has a default, so a
//! config file only needs the fields it changes.

use std::path::{Path, PathBuf};

use jsqps::pipeline::SpectralConfig;
use jsqps::simulator::{self, Engine, SimConfig};
use jsqps::talbot::DEFAULT_NODES;
use jsqps::ModelParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid {
            start: 0.01,
            stop: 20.0,
            count: 200,
            spacing: Spacing::Linear,
        }
    }
}

impl TimeGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let steps = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let f = i as f64 / steps;
                match self.spacing {
                    Spacing::Linear => self.start + f * (self.stop - self.start),
                    Spacing::Log => self.start * (self.stop / self.start).powf(f),
                }
            })
            .collect()
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.start > 0.0 && self.stop >= self.start && self.count >= 1) {
            return Err(format!(
                "time grid needs 0 < start <= stop and count >= 1 (got {} .. {}, {})",
                self.start, self.stop, self.count
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    pub cycles: usize,
    pub seed: u64,
    pub bin_width: f64,
    pub hist_max: f64,
    pub engine: Engine,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            cycles: simulator::DEFAULT_CYCLES,
            seed: 1,
            bin_width: simulator::DEFAULT_BIN_WIDTH,
            hist_max: simulator::DEFAULT_HIST_MAX,
            engine: Engine::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub params: ModelParams,
    pub spectral: SpectralConfig,
    /// Number of moments reported.
    pub order: usize,
    pub tpoints: TimeGrid,
    pub talbot_nodes: usize,
    pub sim: SimSettings,
    pub out_dir: PathBuf,
    /// Directory of the operator cache; no caching when absent.
    pub cache_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ModelParams {
                lambda: 1.0,
                mu1: 0.9,
                mu2: 1.1,
                a1: 0.0,
            },
            spectral: SpectralConfig::default(),
            order: 4,
            tpoints: TimeGrid::default(),
            talbot_nodes: DEFAULT_NODES,
            sim: SimSettings::default(),
            out_dir: PathBuf::from("."),
            cache_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::config(format!("bad config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Short digest of the configuration, written into every output file.
    /// File locations are left out: they do not change any number.
    pub fn hash(&self) -> String {
        let mut numeric = self.clone();
        numeric.out_dir = PathBuf::new();
        numeric.cache_dir = None;
        let digest = Sha256::digest(serde_json::to_vec(&numeric).expect("config serializes"));
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            params: self.params,
            cycles: self.sim.cycles,
            seed: self.sim.seed,
            bin_width: self.sim.bin_width,
            hist_max: self.sim.hist_max,
            engine: self.sim.engine,
            routing: Default::default(),
        }
    }

    /// Checks what every command needs before any work starts.
    pub fn validate(&self) -> Result<(), Failure> {
        self.params.validate().map_err(|e| Failure::core("config", e))?;
        self.spectral
            .grid(&self.params)
            .map_err(|e| Failure::core("config", e))?;
        if self.order == 0 {
            return Err(Failure::config("moment order must be at least 1".into()));
        }
        self.tpoints.validate().map_err(Failure::config)?;
        if self.talbot_nodes < jsqps::talbot::MIN_NODES {
            return Err(Failure::config(format!(
                "talbot_nodes must be at least {}",
                jsqps::talbot::MIN_NODES
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        let mut cfg = RunConfig::default();
        cfg.params.a1 = 0.3;
        cfg.spectral.r2 = Some(1.7);
        cfg.tpoints.spacing = Spacing::Log;
        cfg.cache_dir = Some(PathBuf::from("/tmp/ops"));
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn partial_documents_use_defaults() {
        let cfg = RunConfig::from_json(r#"{"params": {"lambda": 1, "mu1": 0.4, "mu2": 0.8, "a1": 0.5}, "spectral": {"n": 120}}"#).unwrap();
        assert_eq!(cfg.spectral.n, 120);
        assert_eq!(cfg.order, 4);
        assert!(cfg.validate().is_ok());
        assert!(RunConfig::from_json(r#"{"order": "four"}"#).is_err());
    }

    #[test]
    fn time_grids() {
        let lin = TimeGrid { start: 1.0, stop: 3.0, count: 3, spacing: Spacing::Linear };
        assert_eq!(lin.points(), vec![1.0, 2.0, 3.0]);
        let log = TimeGrid { start: 1.0, stop: 100.0, count: 3, spacing: Spacing::Log };
        let p = log.points();
        assert!((p[1] - 10.0).abs() < 1e-12);
        let bad = TimeGrid { start: 0.0, ..lin };
        assert!(bad.validate().is_err());
    }
}
