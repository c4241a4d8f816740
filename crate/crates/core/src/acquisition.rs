//! Two-stage keyframe acquisition.
//!
//! Every frame first goes through the *unsimilar-frame* stage: its embedding
//! is observed by the first cluster bank and the frame is a keyframe when it
//! founds a new cluster. Frames that the first stage rejects get a second
//! chance in the *rare-category* stage, but only after warm-up and only when
//! their pseudo-labels contain the category with the fewest pseudo-labels so
//! far. The second stage owns an independent cluster bank and uses the same
//! threshold.
//!
//! Pseudo-label statistics are collected from every frame, keyframe or not.

use serde::{Deserialize, Serialize};

use crate::cluster::{norm, ClusterBank, Observation};
use crate::error::{Error, Result};
use crate::stream::{check_vector, Detection};

/// How the rare category is chosen once warm-up has finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RareCategoryTracking {
    /// Recompute the arg-min at every frame.
    #[default]
    Live,
    /// Keep the arg-min observed when warm-up latched.
    FrozenAtWarmup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    /// Cosine similarity threshold shared by both stages.
    pub gamma: f64,
    /// Warm-up needs strictly more pseudo-labels than this.
    pub warmup_min_total: u64,
    /// Warm-up needs `min count / max count` of at least this.
    pub warmup_min_ratio: f64,
    pub arc_enabled: bool,
    pub rare_category_tracking: RareCategoryTracking,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            gamma: 0.975,
            warmup_min_total: 10_000,
            warmup_min_ratio: 0.003,
            arc_enabled: true,
            rare_category_tracking: RareCategoryTracking::Live,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        // Any finite threshold is meaningful: below -1 nothing ever spawns
        // after the first frame, above 1 everything does.
        if !self.gamma.is_finite() {
            return Err(Error::config("gamma", "must be finite"));
        }
        if self.warmup_min_total < 1 {
            return Err(Error::config("warmup_min_total", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.warmup_min_ratio) {
            return Err(Error::config("warmup_min_ratio", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Running count of accepted pseudo-labels per category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryHistogram {
    counts: Vec<u64>,
}

impl CategoryHistogram {
    pub fn new(num_categories: usize) -> Self {
        Self {
            counts: vec![0; num_categories],
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn num_categories(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one count per detection. Nothing is recorded if any category is
    /// out of range.
    pub fn record(&mut self, labels: &[Detection]) -> Result<()> {
        for label in labels {
            label.check_category(self.counts.len())?;
        }
        for label in labels {
            self.counts[label.category] += 1;
        }
        Ok(())
    }

    /// Category with the smallest count, lowest id on ties.
    pub fn rare_category(&self) -> Option<usize> {
        self.counts
            .iter()
            .enumerate()
            .min_by_key(|&(i, &c)| (c, i))
            .map(|(i, _)| i)
    }

    /// Whether both warm-up gates hold: enough labels in total and a
    /// rare-to-popular ratio that has stabilised above the minimum.
    pub fn warmup_complete(&self, cfg: &AcquisitionConfig) -> bool {
        if self.counts.len() < 2 || self.total() <= cfg.warmup_min_total {
            return false;
        }
        let min = *self.counts.iter().min().unwrap_or(&0) as f64;
        let max = *self.counts.iter().max().unwrap_or(&0) as f64;
        max > 0.0 && min / max >= cfg.warmup_min_ratio
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Auf,
    Arc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Keyframe(Stage),
    Skip,
}

impl Verdict {
    pub fn is_keyframe(self) -> bool {
        matches!(self, Verdict::Keyframe(_))
    }
}

/// Outcome for one frame together with the scores that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionDecision {
    pub verdict: Verdict,
    /// Best first-stage similarity; `None` when that bank was empty.
    pub auf_score: Option<f64>,
    /// Best second-stage similarity; `None` unless that stage ran on a
    /// non-empty bank.
    pub arc_score: Option<f64>,
    /// Rare category in effect, once warm-up is over.
    pub rare_category: Option<usize>,
    /// Whether the second stage was consulted for this frame.
    pub arc_consulted: bool,
}

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub frame_id: u64,
    pub verdict: String,
    pub source: Option<Stage>,
    pub auf_score: Option<f64>,
    pub arc_score: Option<f64>,
    pub rare_category: Option<usize>,
}

impl DecisionRecord {
    pub fn new(frame_id: u64, decision: &AcquisitionDecision) -> Self {
        let (verdict, source) = match decision.verdict {
            Verdict::Keyframe(stage) => ("keyframe", Some(stage)),
            Verdict::Skip => ("skip", None),
        };
        Self {
            frame_id,
            verdict: verdict.to_owned(),
            source,
            auf_score: decision.auf_score,
            arc_score: decision.arc_score,
            rare_category: decision.rare_category,
        }
    }
}

/// Per-stream acquisition state: both banks, the label histogram and the
/// warm-up latch.
#[derive(Debug, Clone)]
pub struct Acquirer {
    config: AcquisitionConfig,
    auf_bank: ClusterBank,
    arc_bank: ClusterBank,
    histogram: CategoryHistogram,
    warmup_done: bool,
    frozen_rare: Option<usize>,
}

impl Acquirer {
    pub fn new(config: AcquisitionConfig, dimension: usize, num_categories: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            auf_bank: ClusterBank::new(dimension),
            arc_bank: ClusterBank::new(dimension),
            histogram: CategoryHistogram::new(num_categories),
            warmup_done: false,
            frozen_rare: None,
        })
    }

    pub fn config(&self) -> &AcquisitionConfig {
        &self.config
    }

    pub fn auf_bank(&self) -> &ClusterBank {
        &self.auf_bank
    }

    pub fn arc_bank(&self) -> &ClusterBank {
        &self.arc_bank
    }

    pub fn histogram(&self) -> &CategoryHistogram {
        &self.histogram
    }

    pub fn warmup_done(&self) -> bool {
        self.warmup_done
    }

    /// Rare category currently driving the second stage, or `None` during
    /// warm-up.
    pub fn rare_category(&self) -> Option<usize> {
        if !self.warmup_done {
            return None;
        }
        match self.config.rare_category_tracking {
            RareCategoryTracking::Live => self.histogram.rare_category(),
            RareCategoryTracking::FrozenAtWarmup => self.frozen_rare,
        }
    }

    /// Runs one frame through both stages. On error the state is unchanged.
    pub fn process_frame(
        &mut self,
        embedding: &[f64],
        labels: &[Detection],
    ) -> Result<AcquisitionDecision> {
        check_vector(embedding, self.auf_bank.dimension())?;
        if norm(embedding) == 0.0 {
            return Err(Error::ZeroVector);
        }
        self.histogram.record(labels)?;
        if !self.warmup_done && self.histogram.warmup_complete(&self.config) {
            self.warmup_done = true;
            self.frozen_rare = self.histogram.rare_category();
        }
        let rare = self.rare_category();
        let gamma = self.config.gamma;

        let auf = self.auf_bank.observe(embedding, gamma)?;
        let mut decision = AcquisitionDecision {
            verdict: Verdict::Skip,
            auf_score: auf.best_score,
            arc_score: None,
            rare_category: rare,
            arc_consulted: false,
        };
        if auf.observation.is_spawned() {
            decision.verdict = Verdict::Keyframe(Stage::Auf);
            return Ok(decision);
        }
        let rare_present = rare.is_some_and(|c| labels.iter().any(|l| l.category == c));
        if self.config.arc_enabled && rare_present {
            let arc = self.arc_bank.observe(embedding, gamma)?;
            decision.arc_consulted = true;
            decision.arc_score = arc.best_score;
            if let Observation::Spawned { .. } = arc.observation {
                decision.verdict = Verdict::Keyframe(Stage::Arc);
            }
        }
        Ok(decision)
    }
}
