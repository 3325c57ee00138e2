//! Pipeline configuration: one structured file with sections mirroring the
//! per-module configs. Environment variables may override file paths only,
//! never numeric parameters, so a config file fully determines the analytics.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use iflow_core::leakage::ScopeConfig;
use iflow_core::micro::WindowSpec;
use iflow_core::scoring::LabelThresholds;
use iflow_core::time::parse_duration;
use iflow_core::wallet::NoveltyConfig;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct InputPaths {
    pub markets: PathBuf,
    pub trades: PathBuf,
    pub anchors: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wallets: Option<PathBuf>,
}

/// Human-readable window section; durations are strings like "5m" or "1h".
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowsConfig {
    pub oi: Vec<String>,
    pub vpin_bucket_volume: Option<f64>,
    pub vpin_trailing_buckets: usize,
    pub lambda_window: usize,
    pub vr_k: usize,
    pub vr_delta: String,
    pub hawkes_window: String,
}

impl Default for WindowsConfig {
    fn default() -> Self {
        WindowsConfig {
            oi: vec!["5m".into(), "15m".into(), "1h".into()],
            vpin_bucket_volume: None,
            vpin_trailing_buckets: 50,
            lambda_window: 200,
            vr_k: 6,
            vr_delta: "5m".into(),
            hawkes_window: "1h".into(),
        }
    }
}

impl WindowsConfig {
    pub fn to_spec(&self) -> Result<WindowSpec> {
        let oi = self
            .oi
            .iter()
            .map(|s| parse_duration(s).map_err(anyhow::Error::from))
            .collect::<Result<Vec<_>>>()?;
        let spec = WindowSpec {
            oi_windows_secs: oi,
            vpin_bucket_volume: self.vpin_bucket_volume,
            vpin_trailing_buckets: self.vpin_trailing_buckets,
            lambda_window: self.lambda_window,
            vr_k: self.vr_k,
            vr_delta_secs: parse_duration(&self.vr_delta)?,
            hawkes_window_secs: parse_duration(&self.hawkes_window)?,
        };
        spec.validate().map_err(anyhow::Error::msg)?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub schema_version: String,
    pub inputs: InputPaths,
    pub volume_cutoff_usdc: f64,
    pub top_k: usize,
    /// Multi-window offsets for the leakage timing profile.
    pub ils_windows: Vec<String>,
    pub scope: ScopeConfig,
    pub windows: WindowsConfig,
    pub novelty: NoveltyConfig,
    pub thresholds: LabelThresholds,
    /// Rule-set file; the packaged default rules apply when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rules: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: iflow_core::SCHEMA_VERSION.to_string(),
            inputs: InputPaths::default(),
            volume_cutoff_usdc: iflow_core::market::DEFAULT_VOLUME_CUTOFF_USDC,
            top_k: iflow_core::leakage::DEFAULT_TOP_K,
            ils_windows: vec![
                "30m".into(),
                "2h".into(),
                "6h".into(),
                "24h".into(),
                "7d".into(),
            ],
            scope: ScopeConfig::default(),
            windows: WindowsConfig::default(),
            novelty: NoveltyConfig::default(),
            thresholds: LabelThresholds::default(),
            rules: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    /// Load, apply path-only environment overrides, and validate parameters.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: PipelineConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.apply_env_overrides();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.canonical_toml()?)
            .with_context(|| format!("writing config {}", path.display()))?;
        Ok(())
    }

    /// Canonical serialized form; also the hashing input for the run manifest.
    pub fn canonical_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Path overrides from the environment (never numeric parameters):
    /// IFLOW_MARKETS, IFLOW_TRADES, IFLOW_ANCHORS, IFLOW_WALLETS, IFLOW_RULES,
    /// IFLOW_OUT_DIR.
    pub fn apply_env_overrides(&mut self) {
        let get = |name: &str| std::env::var(name).ok().filter(|v| !v.is_empty());
        if let Some(v) = get("IFLOW_MARKETS") {
            self.inputs.markets = PathBuf::from(v);
        }
        if let Some(v) = get("IFLOW_TRADES") {
            self.inputs.trades = PathBuf::from(v);
        }
        if let Some(v) = get("IFLOW_ANCHORS") {
            self.inputs.anchors = PathBuf::from(v);
        }
        if let Some(v) = get("IFLOW_WALLETS") {
            self.inputs.wallets = Some(PathBuf::from(v));
        }
        if let Some(v) = get("IFLOW_RULES") {
            self.rules = Some(PathBuf::from(v));
        }
        if let Some(v) = get("IFLOW_OUT_DIR") {
            self.output_dir = PathBuf::from(v);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scope.validate().map_err(anyhow::Error::msg)?;
        self.novelty.validate().map_err(anyhow::Error::msg)?;
        self.windows.to_spec()?;
        self.ils_window_secs()?;
        if self.top_k == 0 {
            anyhow::bail!("top_k must be positive");
        }
        if self.volume_cutoff_usdc < 0.0 {
            anyhow::bail!("volume_cutoff_usdc must be non-negative");
        }
        Ok(())
    }

    pub fn ils_window_secs(&self) -> Result<Vec<i64>> {
        self.ils_windows
            .iter()
            .map(|s| parse_duration(s).map_err(anyhow::Error::from))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        let mut cfg = PipelineConfig::default();
        cfg.inputs.markets = PathBuf::from("markets.jsonl");
        cfg.inputs.trades = PathBuf::from("trades.jsonl");
        cfg.inputs.anchors = PathBuf::from("anchors.jsonl");
        cfg.save(&path).unwrap();
        let back = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.canonical_toml().unwrap(), back.canonical_toml().unwrap());
        // Load -> save -> load is a fixed point.
        let path2 = dir.path().join("cfg2.toml");
        back.save(&path2).unwrap();
        let again = PipelineConfig::load(&path2).unwrap();
        assert_eq!(back.canonical_toml().unwrap(), again.canonical_toml().unwrap());
    }

    #[test]
    fn env_overrides_paths_only() {
        let mut cfg = PipelineConfig::default();
        let before_eps = cfg.scope.epsilon;
        std::env::set_var("IFLOW_MARKETS", "/elsewhere/m.jsonl");
        cfg.apply_env_overrides();
        std::env::remove_var("IFLOW_MARKETS");
        assert_eq!(cfg.inputs.markets, PathBuf::from("/elsewhere/m.jsonl"));
        assert_eq!(cfg.scope.epsilon, before_eps);
    }

    #[test]
    fn bad_windows_are_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.windows.vr_delta = "sometimes".into();
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.scope.epsilon = 0.0;
        assert!(cfg.validate().is_err());
    }
}
