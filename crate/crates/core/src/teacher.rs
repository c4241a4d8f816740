//! Teacher/student parameter management.
//!
//! Both models start from the same source parameters. On each keyframe the
//! student takes one gradient step on
//!
//! ```text
//! loss = task_loss(student(strong(x)), pseudo_labels) + KL(student || teacher)
//! ```
//!
//! where the pseudo-labels are teacher predictions on a weakly augmented copy
//! of the frame with confidence strictly above the threshold. The teacher then
//! tracks the student through an exponential moving average with `alpha1`.
//! [`TeacherStudentPair::finalize`] blends the two once more with `alpha2` to
//! produce the deployed model.

use std::io::{BufRead, Write};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::Detection;

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Flat vector of every trainable parameter of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams(pub Vec<f64>);

impl ModelParams {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    fn check_len(&self, expected: usize) -> Result<()> {
        if self.0.len() != expected {
            return Err(Error::ParameterShape {
                expected,
                found: self.0.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMode {
    Weak,
    Strong,
}

/// Class distribution of one detection slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotPrediction {
    pub distribution: Vec<f64>,
}

impl SlotPrediction {
    /// Most probable category and its probability (lowest id on ties).
    pub fn top(&self) -> Detection {
        let (category, &confidence) = self
            .distribution
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, &f64)>, (i, p)| match best {
                Some((_, b)) if b >= p => best,
                _ => Some((i, p)),
            })
            .expect("distribution over at least one category");
        Detection {
            category,
            confidence,
        }
    }
}

/// What the adaptation loop needs from a model.
///
/// Parameters are passed explicitly so the same model description serves
/// both teacher and student. The encoder used for clustering is likewise
/// passed in, as the frozen copy held by the [`TeacherStudentPair`].
pub trait AdaptableModel {
    fn name(&self) -> &str;
    fn feature_dim(&self) -> usize;
    fn embedding_dim(&self) -> usize;
    fn num_categories(&self) -> usize;
    fn param_count(&self) -> usize;

    /// Current encoder parameters; copied once into the pair at construction.
    fn encoder_params(&self) -> Vec<f64>;

    /// Embeds features with the given (frozen) encoder parameters.
    fn encode(&self, encoder: &[f64], features: &[f64]) -> Result<Vec<f64>>;

    /// Per-slot class distributions; each sums to one.
    fn predict(&self, params: &ModelParams, features: &[f64]) -> Result<Vec<SlotPrediction>>;

    /// Supervised loss against pseudo-labels and its gradient with respect
    /// to every parameter.
    fn task_loss_and_gradient(
        &self,
        params: &ModelParams,
        features: &[f64],
        labels: &[Detection],
    ) -> Result<(f64, Vec<f64>)>;

    /// Pulls a gradient with respect to the per-slot classification logits
    /// back to the parameters.
    fn logit_vjp(
        &self,
        params: &ModelParams,
        features: &[f64],
        grad_logits: &[Vec<f64>],
    ) -> Result<Vec<f64>>;

    fn augment(&self, features: &[f64], mode: AugmentMode, rng: &mut dyn RngCore) -> Vec<f64>;
}

/// Keeps detections whose confidence is strictly greater than `threshold`.
pub fn filter_pseudo_labels(predictions: &[Detection], threshold: f64) -> Vec<Detection> {
    predictions
        .iter()
        .filter(|d| d.confidence > threshold)
        .copied()
        .collect()
}

/// Which way round the alignment divergence is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// KL(student || teacher)
    #[default]
    StudentTeacher,
    /// KL(teacher || student)
    TeacherStudent,
}

fn floored(p: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = p.iter().map(|x| x.clamp(PROB_FLOOR, 1.0)).collect();
    let sum: f64 = clamped.iter().sum();
    clamped.into_iter().map(|x| x / sum).collect()
}

fn kl_single(p: &[f64], q: &[f64]) -> f64 {
    let (pf, qf) = (floored(p), floored(q));
    let kl: f64 = p
        .iter()
        .zip(pf.iter().zip(&qf))
        .filter(|(&raw, _)| raw > 0.0)
        .map(|(_, (a, b))| a * (a / b).ln())
        .sum();
    // rounding can leave a value a few ulps below zero
    kl.max(0.0)
}

/// `sum_k p_k ln(p_k / q_k)`, averaged over slots. Terms with `p_k = 0`
/// contribute nothing; both sides are floored at [`PROB_FLOOR`] and
/// renormalized so degenerate inputs never produce infinities.
pub fn kl_divergence(p: &[Vec<f64>], q: &[Vec<f64>]) -> f64 {
    if p.is_empty() {
        return 0.0;
    }
    let total: f64 = p.iter().zip(q).map(|(a, b)| kl_single(a, b)).sum();
    total / p.len() as f64
}

/// Alignment loss between student and teacher classification outputs, in
/// the configured direction, and its gradient with respect to the student's
/// logits. The teacher side is a constant.
pub fn kl_alignment(
    student: &[Vec<f64>],
    teacher: &[Vec<f64>],
    direction: KlDirection,
) -> (f64, Vec<Vec<f64>>) {
    let slots = student.len().max(1) as f64;
    let mut grads = Vec::with_capacity(student.len());
    for (s, t) in student.iter().zip(teacher) {
        let (sf, tf) = (floored(s), floored(t));
        let g = match direction {
            // d/dz_j of sum_k s_k ln(s_k/t_k) with s = softmax(z):
            // s_j (ln(s_j/t_j) - KL)
            KlDirection::StudentTeacher => {
                let kl = kl_single(s, t);
                sf.iter()
                    .zip(&tf)
                    .map(|(a, b)| a * ((a / b).ln() - kl) / slots)
                    .collect()
            }
            // d/dz_j of sum_k t_k ln(t_k/s_k): s_j - t_j
            KlDirection::TeacherStudent => {
                sf.iter().zip(&tf).map(|(a, b)| (a - b) / slots).collect()
            }
        };
        grads.push(g);
    }
    let loss = match direction {
        KlDirection::StudentTeacher => kl_divergence(student, teacher),
        KlDirection::TeacherStudent => kl_divergence(teacher, student),
    };
    (loss, grads)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeacherConfig {
    /// EMA rate for the per-keyframe teacher update.
    pub alpha1: f64,
    /// Blend rate for the final merge.
    pub alpha2: f64,
    pub confidence_threshold: f64,
    pub kl_direction: KlDirection,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        Self {
            alpha1: 0.996,
            alpha2: 0.9,
            confidence_threshold: 0.9,
            kl_direction: KlDirection::StudentTeacher,
        }
    }
}

impl TeacherConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("confidence_threshold", self.confidence_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Losses of one adaptation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptReport {
    pub task_loss: f64,
    pub kl_loss: f64,
    pub labels_used: usize,
}

impl AdaptReport {
    pub fn total_loss(&self) -> f64 {
        self.task_loss + self.kl_loss
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeacherStudentPair {
    teacher: ModelParams,
    student: ModelParams,
    frozen_encoder: Vec<f64>,
    config: TeacherConfig,
}

impl TeacherStudentPair {
    /// Starts teacher and student from the same source parameters and keeps
    /// a private copy of the model's current encoder.
    pub fn new<M: AdaptableModel + ?Sized>(
        model: &M,
        source: ModelParams,
        config: TeacherConfig,
    ) -> Result<Self> {
        config.validate()?;
        source.check_len(model.param_count())?;
        if let Some((index, &value)) = source.0.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self {
            teacher: source.clone(),
            student: source,
            frozen_encoder: model.encoder_params(),
            config,
        })
    }

    pub fn from_parts(
        teacher: ModelParams,
        student: ModelParams,
        frozen_encoder: Vec<f64>,
        config: TeacherConfig,
    ) -> Result<Self> {
        config.validate()?;
        student.check_len(teacher.len())?;
        Ok(Self {
            teacher,
            student,
            frozen_encoder,
            config,
        })
    }

    pub fn teacher(&self) -> &ModelParams {
        &self.teacher
    }

    pub fn student(&self) -> &ModelParams {
        &self.student
    }

    pub fn frozen_encoder(&self) -> &[f64] {
        &self.frozen_encoder
    }

    pub fn config(&self) -> &TeacherConfig {
        &self.config
    }

    /// `teacher <- alpha1 * teacher + (1 - alpha1) * student`
    pub fn ema_step(&mut self) -> Result<()> {
        self.student.check_len(self.teacher.len())?;
        let a = self.config.alpha1;
        for (t, s) in self.teacher.0.iter_mut().zip(&self.student.0) {
            *t = a * *t + (1.0 - a) * s;
        }
        Ok(())
    }

    /// `alpha2 * teacher + (1 - alpha2) * student`; the pair is unchanged.
    pub fn finalize(&self) -> Result<ModelParams> {
        self.student.check_len(self.teacher.len())?;
        let a = self.config.alpha2;
        Ok(ModelParams(
            self.teacher
                .0
                .iter()
                .zip(&self.student.0)
                .map(|(t, s)| a * t + (1.0 - a) * s)
                .collect(),
        ))
    }

    /// Embedding used for clustering, computed with the frozen encoder.
    pub fn embed<M: AdaptableModel + ?Sized>(
        &self,
        model: &M,
        features: &[f64],
    ) -> Result<Vec<f64>> {
        model.encode(&self.frozen_encoder, features)
    }

    /// Teacher predictions on a weakly augmented copy, filtered by confidence.
    pub fn pseudo_labels<M: AdaptableModel + ?Sized>(
        &self,
        model: &M,
        features: &[f64],
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Detection>> {
        let weak = model.augment(features, AugmentMode::Weak, rng);
        let predictions: Vec<Detection> = model
            .predict(&self.teacher, &weak)?
            .iter()
            .map(SlotPrediction::top)
            .collect();
        Ok(filter_pseudo_labels(
            &predictions,
            self.config.confidence_threshold,
        ))
    }

    /// Full keyframe update: pseudo-label with the teacher, then
    /// [`adapt_with_labels`](Self::adapt_with_labels).
    pub fn adapt_on_keyframe<M: AdaptableModel + ?Sized>(
        &mut self,
        model: &M,
        features: &[f64],
        lr: f64,
        rng: &mut dyn RngCore,
    ) -> Result<AdaptReport> {
        let labels = self.pseudo_labels(model, features, rng)?;
        self.adapt_with_labels(model, features, &labels, lr, rng)
    }

    /// One student gradient step against `labels` on a strongly augmented
    /// copy of the frame, followed by an EMA teacher update. Empty `labels`
    /// leave both models untouched. On error nothing is modified.
    pub fn adapt_with_labels<M: AdaptableModel + ?Sized>(
        &mut self,
        model: &M,
        features: &[f64],
        labels: &[Detection],
        lr: f64,
        rng: &mut dyn RngCore,
    ) -> Result<AdaptReport> {
        if labels.is_empty() {
            return Ok(AdaptReport {
                task_loss: 0.0,
                kl_loss: 0.0,
                labels_used: 0,
            });
        }
        let strong = model.augment(features, AugmentMode::Strong, rng);
        let (task_loss, mut grad) = model.task_loss_and_gradient(&self.student, &strong, labels)?;

        let student_cls: Vec<Vec<f64>> = model
            .predict(&self.student, &strong)?
            .into_iter()
            .map(|p| p.distribution)
            .collect();
        let teacher_cls: Vec<Vec<f64>> = model
            .predict(&self.teacher, &strong)?
            .into_iter()
            .map(|p| p.distribution)
            .collect();
        let (kl_loss, grad_logits) =
            kl_alignment(&student_cls, &teacher_cls, self.config.kl_direction);
        let kl_grad = model.logit_vjp(&self.student, &strong, &grad_logits)?;
        for (g, k) in grad.iter_mut().zip(&kl_grad) {
            *g += k;
        }

        if !task_loss.is_finite() || !kl_loss.is_finite() {
            return Err(Error::NumericDivergence(format!(
                "loss is not finite (task {task_loss}, kl {kl_loss})"
            )));
        }
        if grad.len() != self.student.len() {
            return Err(Error::ParameterShape {
                expected: self.student.len(),
                found: grad.len(),
            });
        }
        let stepped: Vec<f64> = self
            .student
            .0
            .iter()
            .zip(&grad)
            .map(|(p, g)| p - lr * g)
            .collect();
        if stepped.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericDivergence(
                "gradient step produced non-finite parameters".into(),
            ));
        }
        self.student = ModelParams(stepped);
        self.ema_step()?;
        Ok(AdaptReport {
            task_loss,
            kl_loss,
            labels_used: labels.len(),
        })
    }
}

/// Header of the binary checkpoint format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model_name: String,
    pub param_count: usize,
    pub alpha1: f64,
    pub alpha2: f64,
}

/// Writes a checkpoint: one line of JSON header, then `param_count`
/// little-endian `f64` values.
pub fn write_checkpoint<W: Write>(
    mut out: W,
    header: &CheckpointHeader,
    params: &ModelParams,
) -> Result<()> {
    params.check_len(header.param_count)?;
    let json = serde_json::to_string(header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
    out.write_all(json.as_bytes()).map_err(io)?;
    out.write_all(b"\n").map_err(io)?;
    for v in &params.0 {
        out.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_checkpoint<R: BufRead>(mut input: R) -> Result<(CheckpointHeader, ModelParams)> {
    let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
    let mut line = Vec::new();
    input.read_until(b'\n', &mut line).map_err(io)?;
    let header: CheckpointHeader =
        serde_json::from_slice(&line).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    let mut body = Vec::new();
    input.read_to_end(&mut body).map_err(io)?;
    if body.len() != header.param_count * 8 {
        return Err(Error::Checkpoint(format!(
            "header declares {} parameters but body holds {} bytes",
            header.param_count,
            body.len()
        )));
    }
    let params = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, ModelParams(params)))
}
