//! Engine configuration.
//!
//! The JSON file mirrors [`EngineConfig`]; every key is optional and missing
//! keys take the defaults below.
//!
//! ```json
//! {
//!   "mode": "auf_arc",
//!   "learning_rate": 0.001,
//!   "warmup_learning_rate": 0.0001,
//!   "acquisition": { "gamma": 0.975, "warmup_min_total": 10000,
//!                    "warmup_min_ratio": 0.003, "arc_enabled": true,
//!                    "rare_category_tracking": "live" },
//!   "teacher": { "alpha1": 0.996, "alpha2": 0.9, "confidence_threshold": 0.9,
//!                "kl_direction": "student_teacher" },
//!   "model": { "feature_dim": 8, "embedding_dim": 8, "num_categories": 4,
//!              "encoder_seed": 7 },
//!   "augment": { "weak_sigma": 0.01, "strong_sigma": 0.1,
//!                "strong_mask_prob": 0.2, "rng_seed": 0 }
//! }
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionConfig;
use crate::error::{Error, Result};
use crate::teacher::TeacherConfig;
use crate::toy::{AugmentConfig, ToyModelConfig};

/// Which frames trigger adaptation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Adapt on every frame; acquisition is bypassed.
    NoAcquire,
    /// First-stage selection only.
    Auf,
    /// Both stages.
    #[default]
    AufArc,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::NoAcquire, Mode::Auf, Mode::AufArc];

    pub fn label(self) -> &'static str {
        match self {
            Mode::NoAcquire => "No acquire",
            Mode::Auf => "AUF",
            Mode::AufArc => "AUF+ARC",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::NoAcquire => "no_acquire",
            Mode::Auf => "auf",
            Mode::AufArc => "auf_arc",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no_acquire" | "no-acquire" => Ok(Mode::NoAcquire),
            "auf" => Ok(Mode::Auf),
            "auf_arc" | "auf-arc" => Ok(Mode::AufArc),
            other => Err(Error::config(
                "mode",
                format!("unknown mode `{other}` (expected no_acquire, auf or auf_arc)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub mode: Mode,
    /// Student step size once warm-up is over.
    pub learning_rate: f64,
    /// Student step size during warm-up.
    pub warmup_learning_rate: f64,
    pub acquisition: AcquisitionConfig,
    pub teacher: TeacherConfig,
    pub model: ToyModelConfig,
    pub augment: AugmentConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::AufArc,
            learning_rate: 0.001,
            warmup_learning_rate: 0.0001,
            acquisition: AcquisitionConfig::default(),
            teacher: TeacherConfig::default(),
            model: ToyModelConfig::default(),
            augment: AugmentConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("warmup_learning_rate", self.warmup_learning_rate),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(name, "must be a finite value >= 0"));
            }
        }
        self.acquisition.validate()?;
        self.teacher.validate()?;
        self.model.validate()?;
        self.augment.validate()
    }

    /// Acquisition settings with the second stage switched on or off to
    /// match [`Self::mode`].
    pub fn effective_acquisition(&self) -> AcquisitionConfig {
        AcquisitionConfig {
            arc_enabled: self.mode == Mode::AufArc && self.acquisition.arc_enabled,
            ..self.acquisition.clone()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
