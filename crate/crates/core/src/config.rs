//! Run configuration: one JSON document, every field defaulted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::VectorSource;
use crate::louvain::LouvainConfig;
use crate::simgraph::{TransformKind, WeightTransform};
use crate::window::WindowConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Days,
    Hours,
    Minutes,
    Seconds,
    Milliseconds,
}

impl TimeUnit {
    pub fn millis(self) -> i64 {
        match self {
            TimeUnit::Days => 86_400_000,
            TimeUnit::Hours => 3_600_000,
            TimeUnit::Minutes => 60_000,
            TimeUnit::Seconds => 1_000,
            TimeUnit::Milliseconds => 1,
        }
    }
}

/// Window lengths in whole `unit`s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSettings {
    pub unit: TimeUnit,
    pub span: i64,
    pub interval: i64,
    pub lateness: i64,
}

impl Default for WindowSettings {
    fn default() -> Self {
        Self {
            unit: TimeUnit::Days,
            span: 4,
            interval: 1,
            lateness: 0,
        }
    }
}

/// Upper bound on any window length, so millisecond arithmetic on
/// timestamps cannot overflow.
const MAX_WINDOW_MS: i64 = 1_000 * 366 * 86_400_000;

impl WindowSettings {
    pub fn to_window_config(&self) -> Result<WindowConfig, ConfigError> {
        let ms = |v: i64, name: &str| {
            v.checked_mul(self.unit.millis())
                .filter(|x| (0..=MAX_WINDOW_MS).contains(x))
                .ok_or_else(|| ConfigError::Invalid(format!("window {name} {v} out of range")))
        };
        let cfg = WindowConfig {
            span_ms: ms(self.span, "span")?,
            interval_ms: ms(self.interval, "interval")?,
            lateness_ms: ms(self.lateness, "lateness")?,
        };
        cfg.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cadence {
    PerSlide,
    FinalOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnapshotSettings {
    /// Relative to the output directory unless absolute.
    pub dir: String,
    pub cadence: Cadence,
}

impl Default for SnapshotSettings {
    fn default() -> Self {
        Self {
            dir: "snapshots".into(),
            cadence: Cadence::PerSlide,
        }
    }
}

/// Default story-graph transform. Summed story vectors share a background
/// similarity that a zero threshold would turn into one dense clique, which
/// modularity then collapses into a single community.
pub fn default_story_transform() -> WeightTransform {
    WeightTransform {
        kind: TransformKind::Clamp,
        epsilon: 0.5,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub vectors: VectorSource,
    pub window: WindowSettings,
    /// Edge weights between articles inside the window.
    pub article_graph: WeightTransform,
    /// Edge weights between stories and topics during integration.
    pub story_graph: WeightTransform,
    pub louvain: LouvainConfig,
    pub snapshots: SnapshotSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            vectors: VectorSource::FallbackEmbedder {
                dimension: 256,
                seed: 0,
            },
            window: WindowSettings::default(),
            article_graph: WeightTransform::default(),
            story_graph: default_story_transform(),
            louvain: LouvainConfig::default(),
            snapshots: SnapshotSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. A relative vector-file path is
    /// resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        if let VectorSource::PrecomputedFile { path: file, .. } = &mut cfg.vectors {
            let p = Path::new(file.as_str());
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                *file = base.join(p).to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        if self.vectors.dimension() < 2 {
            return Err(ConfigError::Invalid("vector dimension must be >= 2".into()));
        }
        if let VectorSource::PrecomputedFile { path, .. } = &self.vectors {
            if path.is_empty() {
                return Err(ConfigError::Invalid("vector file path is empty".into()));
            }
        }
        self.window.to_window_config()?;
        self.article_graph.validate().map_err(|e| invalid(&e))?;
        self.story_graph.validate().map_err(|e| invalid(&e))?;
        self.louvain.validate().map_err(|e| invalid(&e))?;
        if self.snapshots.dir.is_empty() {
            return Err(ConfigError::Invalid("snapshot directory is empty".into()));
        }
        Ok(())
    }

    pub fn window_config(&self) -> WindowConfig {
        self.window
            .to_window_config()
            .expect("validated on construction")
    }
}
