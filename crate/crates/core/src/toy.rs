//! Reference model: a frozen linear encoder feeding a trainable
//! linear-softmax classifier.
//!
//! The "detector" produces a single detection slot per frame: the class
//! distribution of the frame's dominant object. Parameters are laid out as
//! the row-major `num_categories x embedding_dim` weight matrix followed by
//! the bias vector.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{check_vector, Detection};
use crate::teacher::{AdaptableModel, AugmentMode, ModelParams, SlotPrediction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub weak_sigma: f64,
    pub strong_sigma: f64,
    pub strong_mask_prob: f64,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            weak_sigma: 0.01,
            strong_sigma: 0.1,
            strong_mask_prob: 0.2,
            rng_seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weak_sigma.is_nan() || self.weak_sigma < 0.0 {
            return Err(Error::config("weak_sigma", "must be >= 0"));
        }
        if self.strong_sigma.is_nan() || self.strong_sigma < 0.0 {
            return Err(Error::config("strong_sigma", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.strong_mask_prob) {
            return Err(Error::config("strong_mask_prob", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Shape of a [`ToyDetector`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyModelConfig {
    pub feature_dim: usize,
    /// Equal to `feature_dim` selects the identity encoder.
    pub embedding_dim: usize,
    pub num_categories: usize,
    pub encoder_seed: u64,
}

impl Default for ToyModelConfig {
    fn default() -> Self {
        Self {
            feature_dim: 8,
            embedding_dim: 8,
            num_categories: 4,
            encoder_seed: 7,
        }
    }
}

impl ToyModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::config("feature_dim", "must be at least 1"));
        }
        if self.embedding_dim == 0 {
            return Err(Error::config("embedding_dim", "must be at least 1"));
        }
        if self.num_categories == 0 {
            return Err(Error::config("num_categories", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ToyDetector {
    config: ToyModelConfig,
    augment: AugmentConfig,
    /// Row-major `embedding_dim x feature_dim`; empty for the identity.
    projection: Vec<f64>,
}

impl ToyDetector {
    pub fn new(config: ToyModelConfig, augment: AugmentConfig) -> Result<Self> {
        config.validate()?;
        augment.validate()?;
        let projection = if config.embedding_dim == config.feature_dim {
            Vec::new()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(config.encoder_seed);
            let scale = 1.0 / (config.feature_dim as f64).sqrt();
            let normal = Normal::new(0.0, scale).expect("positive scale");
            (0..config.embedding_dim * config.feature_dim)
                .map(|_| normal.sample(&mut rng))
                .collect()
        };
        Ok(Self {
            config,
            augment,
            projection,
        })
    }

    pub fn config(&self) -> &ToyModelConfig {
        &self.config
    }

    pub fn augment_config(&self) -> &AugmentConfig {
        &self.augment
    }

    fn project(&self, projection: &[f64], features: &[f64]) -> Result<Vec<f64>> {
        check_vector(features, self.config.feature_dim)?;
        if projection.is_empty() {
            return Ok(features.to_vec());
        }
        let d = self.config.feature_dim;
        if projection.len() != self.config.embedding_dim * d {
            return Err(Error::ParameterShape {
                expected: self.config.embedding_dim * d,
                found: projection.len(),
            });
        }
        Ok(projection
            .chunks_exact(d)
            .map(|row| row.iter().zip(features).map(|(p, x)| p * x).sum())
            .collect())
    }

    fn check_params(&self, params: &ModelParams) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ParameterShape {
                expected: self.param_count(),
                found: params.len(),
            });
        }
        Ok(())
    }

    /// `W * encode(x) + b`, with the embedding it was computed from.
    fn logits(&self, params: &ModelParams, features: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_params(params)?;
        let emb = self.project(&self.projection, features)?;
        let e = self.config.embedding_dim;
        let c = self.config.num_categories;
        let (w, b) = params.as_slice().split_at(c * e);
        let logits = w
            .chunks_exact(e)
            .zip(b)
            .map(|(row, bias)| row.iter().zip(&emb).map(|(wi, xi)| wi * xi).sum::<f64>() + bias)
            .collect();
        Ok((logits, emb))
    }

    /// Gradient of the parameters given a gradient on the logits.
    fn backprop(&self, emb: &[f64], grad_logits: &[f64]) -> Vec<f64> {
        let mut grad = Vec::with_capacity(self.param_count());
        for g in grad_logits {
            grad.extend(emb.iter().map(|x| g * x));
        }
        grad.extend_from_slice(grad_logits);
        grad
    }
}

pub(crate) fn log_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    log_softmax(z).into_iter().map(f64::exp).collect()
}

impl AdaptableModel for ToyDetector {
    fn name(&self) -> &str {
        "toy-linear-softmax"
    }

    fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    fn embedding_dim(&self) -> usize {
        self.config.embedding_dim
    }

    fn num_categories(&self) -> usize {
        self.config.num_categories
    }

    fn param_count(&self) -> usize {
        self.config.num_categories * (self.config.embedding_dim + 1)
    }

    fn encoder_params(&self) -> Vec<f64> {
        self.projection.clone()
    }

    fn encode(&self, encoder: &[f64], features: &[f64]) -> Result<Vec<f64>> {
        self.project(encoder, features)
    }

    fn predict(&self, params: &ModelParams, features: &[f64]) -> Result<Vec<SlotPrediction>> {
        let (logits, _) = self.logits(params, features)?;
        Ok(vec![SlotPrediction {
            distribution: softmax(&logits),
        }])
    }

    /// Mean cross-entropy of the single slot against every label.
    fn task_loss_and_gradient(
        &self,
        params: &ModelParams,
        features: &[f64],
        labels: &[Detection],
    ) -> Result<(f64, Vec<f64>)> {
        if labels.is_empty() {
            return Err(Error::Precondition(
                "task loss needs at least one label".into(),
            ));
        }
        for l in labels {
            l.check_category(self.config.num_categories)?;
        }
        let (logits, emb) = self.logits(params, features)?;
        let logp = log_softmax(&logits);
        let n = labels.len() as f64;
        let loss = -labels.iter().map(|l| logp[l.category]).sum::<f64>() / n;
        let mut grad_logits: Vec<f64> = logp.iter().map(|v| v.exp()).collect();
        for l in labels {
            grad_logits[l.category] -= 1.0 / n;
        }
        Ok((loss, self.backprop(&emb, &grad_logits)))
    }

    fn logit_vjp(
        &self,
        params: &ModelParams,
        features: &[f64],
        grad_logits: &[Vec<f64>],
    ) -> Result<Vec<f64>> {
        self.check_params(params)?;
        let [slot] = grad_logits else {
            return Err(Error::Precondition(format!(
                "expected one logit slot, got {}",
                grad_logits.len()
            )));
        };
        if slot.len() != self.config.num_categories {
            return Err(Error::DimensionMismatch {
                line: None,
                expected: self.config.num_categories,
                found: slot.len(),
            });
        }
        let emb = self.project(&self.projection, features)?;
        Ok(self.backprop(&emb, slot))
    }

    fn augment(&self, features: &[f64], mode: AugmentMode, rng: &mut dyn RngCore) -> Vec<f64> {
        augment(features, &self.augment, mode, rng)
    }
}

/// Weak: additive Gaussian noise. Strong: larger noise, then each coordinate
/// is zeroed independently with probability `strong_mask_prob`.
pub fn augment<R: RngCore + ?Sized>(
    features: &[f64],
    config: &AugmentConfig,
    mode: AugmentMode,
    rng: &mut R,
) -> Vec<f64> {
    let sigma = match mode {
        AugmentMode::Weak => config.weak_sigma,
        AugmentMode::Strong => config.strong_sigma,
    };
    let mut out = features.to_vec();
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("validated sigma");
        for v in &mut out {
            *v += normal.sample(rng);
        }
    }
    if mode == AugmentMode::Strong && config.strong_mask_prob > 0.0 {
        for v in &mut out {
            if rng.random_bool(config.strong_mask_prob) {
                *v = 0.0;
            }
        }
    }
    out
}
