//! The online loop: pseudo-label, select, adapt, one frame at a time.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::acquisition::{Acquirer, AcquisitionDecision, CategoryHistogram};
use crate::config::{EngineConfig, Mode};
use crate::error::Result;
use crate::stream::{validate_frame, Detection, Frame};
use crate::teacher::{
    filter_pseudo_labels, AdaptReport, AdaptableModel, ModelParams, TeacherStudentPair,
};

/// What happened to one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub frame_id: u64,
    /// `None` in [`Mode::NoAcquire`], where selection is bypassed.
    pub decision: Option<AcquisitionDecision>,
    pub keyframe: bool,
    /// Confidence-filtered pseudo-labels of the frame.
    pub labels: Vec<Detection>,
    /// Present when a keyframe was used for adaptation.
    pub adapt: Option<AdaptReport>,
}

/// Streaming engine over one model.
///
/// Frames must be fed in order; each call to [`Engine::process`] completes
/// before the next frame is admitted.
pub struct Engine<'m, M: AdaptableModel + ?Sized> {
    model: &'m M,
    pair: TeacherStudentPair,
    mode: Mode,
    acquirer: Acquirer,
    // Warm-up tracking for the learning-rate schedule when selection is off.
    bypass_histogram: CategoryHistogram,
    bypass_warmup_done: bool,
    learning_rate: f64,
    warmup_learning_rate: f64,
    adapt_enabled: bool,
    rng: ChaCha8Rng,
}

impl<'m, M: AdaptableModel + ?Sized> Engine<'m, M> {
    pub fn new(model: &'m M, source: ModelParams, config: &EngineConfig) -> Result<Self> {
        config.validate()?;
        let pair = TeacherStudentPair::new(model, source, config.teacher.clone())?;
        let acquirer = Acquirer::new(
            config.effective_acquisition(),
            model.embedding_dim(),
            model.num_categories(),
        )?;
        Ok(Self {
            model,
            pair,
            mode: config.mode,
            acquirer,
            bypass_histogram: CategoryHistogram::new(model.num_categories()),
            bypass_warmup_done: false,
            learning_rate: config.learning_rate,
            warmup_learning_rate: config.warmup_learning_rate,
            adapt_enabled: true,
            rng: ChaCha8Rng::seed_from_u64(config.augment.rng_seed),
        })
    }

    /// Selection only: keyframes are reported but never used to update.
    pub fn select_only(mut self) -> Self {
        self.adapt_enabled = false;
        self
    }

    pub fn pair(&self) -> &TeacherStudentPair {
        &self.pair
    }

    pub fn acquirer(&self) -> &Acquirer {
        &self.acquirer
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn warmup_done(&self) -> bool {
        match self.mode {
            Mode::NoAcquire => self.bypass_warmup_done,
            _ => self.acquirer.warmup_done(),
        }
    }

    /// Labels carried by the frame when present, otherwise teacher
    /// predictions on a weak augmentation; filtered by confidence either way.
    fn labels_for(&mut self, frame: &Frame) -> Result<Vec<Detection>> {
        let threshold = self.pair.config().confidence_threshold;
        match &frame.detections {
            Some(external) => {
                for d in external {
                    d.check_category(self.model.num_categories())?;
                }
                Ok(filter_pseudo_labels(external, threshold))
            }
            None => self
                .pair
                .pseudo_labels(self.model, &frame.features, &mut self.rng),
        }
    }

    pub fn process(&mut self, frame: &Frame) -> Result<FrameOutcome> {
        validate_frame(frame, self.model.feature_dim())?;
        let labels = self.labels_for(frame)?;

        let (decision, keyframe) = match self.mode {
            Mode::NoAcquire => {
                self.bypass_histogram.record(&labels)?;
                if !self.bypass_warmup_done
                    && self
                        .bypass_histogram
                        .warmup_complete(self.acquirer.config())
                {
                    self.bypass_warmup_done = true;
                }
                (None, true)
            }
            Mode::Auf | Mode::AufArc => {
                let embedding = match &frame.embedding {
                    Some(e) => e.clone(),
                    None => self.pair.embed(self.model, &frame.features)?,
                };
                let d = self.acquirer.process_frame(&embedding, &labels)?;
                (Some(d), d.verdict.is_keyframe())
            }
        };

        let adapt = if keyframe && self.adapt_enabled {
            let lr = if self.warmup_done() {
                self.learning_rate
            } else {
                self.warmup_learning_rate
            };
            Some(self.pair.adapt_with_labels(
                self.model,
                &frame.features,
                &labels,
                lr,
                &mut self.rng,
            )?)
        } else {
            None
        };

        Ok(FrameOutcome {
            frame_id: frame.id,
            decision,
            keyframe,
            labels,
            adapt,
        })
    }

    /// Final teacher/student blend; the engine can keep running afterwards.
    pub fn finalize(&self) -> Result<ModelParams> {
        self.pair.finalize()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::{AugmentConfig, ToyDetector, ToyModelConfig};

    fn setup(mode: Mode) -> (ToyDetector, EngineConfig) {
        let cfg = EngineConfig {
            mode,
            model: ToyModelConfig {
                feature_dim: 2,
                embedding_dim: 2,
                num_categories: 2,
                encoder_seed: 1,
            },
            ..Default::default()
        };
        let model = ToyDetector::new(cfg.model.clone(), AugmentConfig::default()).unwrap();
        (model, cfg)
    }

    fn confident(model: &ToyDetector) -> ModelParams {
        // class 0 for x0 > x1, scaled to be confident
        let mut p = ModelParams::zeros(model.param_count());
        p.0[..4].copy_from_slice(&[20.0, -20.0, -20.0, 20.0]);
        p
    }

    #[test]
    fn no_acquire_adapts_every_frame() {
        let (model, cfg) = setup(Mode::NoAcquire);
        let mut engine = Engine::new(&model, confident(&model), &cfg).unwrap();
        for i in 0..5 {
            let out = engine.process(&Frame::new(i, vec![1.0, 0.0])).unwrap();
            assert!(out.keyframe);
            assert!(out.decision.is_none());
            assert_eq!(out.adapt.unwrap().labels_used, 1);
        }
        assert!(engine.acquirer().auf_bank().is_empty());
    }

    #[test]
    fn duplicates_adapt_once() {
        let (model, cfg) = setup(Mode::Auf);
        let mut engine = Engine::new(&model, confident(&model), &cfg).unwrap();
        let adapted = (0..20)
            .filter(|&i| {
                engine
                    .process(&Frame::new(i, vec![1.0, 0.2]))
                    .unwrap()
                    .adapt
                    .is_some()
            })
            .count();
        assert_eq!(adapted, 1);
    }

    #[test]
    fn external_detections_are_filtered_not_recomputed() {
        let (model, cfg) = setup(Mode::Auf);
        let mut engine = Engine::new(&model, confident(&model), &cfg).unwrap();
        let frame = Frame::new(0, vec![1.0, 0.0])
            .with_detections(vec![Detection::new(1, 0.97), Detection::new(0, 0.5)]);
        let out = engine.process(&frame).unwrap();
        assert_eq!(out.labels, vec![Detection::new(1, 0.97)]);
    }

    #[test]
    fn select_only_never_touches_parameters() {
        let (model, cfg) = setup(Mode::AufArc);
        let source = confident(&model);
        let mut engine = Engine::new(&model, source.clone(), &cfg)
            .unwrap()
            .select_only();
        for i in 0..10 {
            engine.process(&Frame::new(i, vec![1.0, i as f64])).unwrap();
        }
        assert_eq!(engine.pair().teacher(), &source);
        assert_eq!(engine.pair().student(), &source);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let (model, cfg) = setup(Mode::Auf);
        let mut engine = Engine::new(&model, confident(&model), &cfg).unwrap();
        assert!(engine.process(&Frame::new(0, vec![1.0, 0.0, 3.0])).is_err());
    }
}
