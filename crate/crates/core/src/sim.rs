//! Synthetic domain-shift streams and the ablation runner.
//!
//! A [`StreamSpec`] describes one Gaussian blob per category in a source and
//! a target domain. The generated target stream is a Markov chain: with
//! probability `redundancy_rho` the next frame is a jittered repeat of the
//! current one, otherwise a fresh draw from a freshly sampled category.
//! Ground-truth categories are returned next to the frames, never inside
//! them, so nothing on the adaptation path can see them.
//!
//! [`ablation_compare`] pretrains a source model, runs the online loop in
//! each [`Mode`] on the same stream and summarises held-out target accuracy
//! and rare-category keyframe counts over several seeds.

use std::fmt::Write as _;
use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{EngineConfig, Mode};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::stream::{Detection, Frame};
use crate::teacher::{AdaptableModel, ModelParams};
use crate::toy::ToyDetector;

/// Minimum held-out source accuracy [`pretrain_source`] must reach.
pub const PRETRAIN_MIN_ACCURACY: f64 = 0.95;

/// Confidently wrong external labels attached to repeated frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepeatLabelDrift {
    /// Confidence reported with the wrong label.
    pub confidence: f64,
    /// The label is `(truth + offset) % num_categories`.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub num_categories: usize,
    pub feature_dim: usize,
    pub class_frequencies: Vec<f64>,
    pub source_means: Vec<Vec<f64>>,
    pub target_means: Vec<Vec<f64>>,
    pub class_sigma: f64,
    /// Probability that a frame repeats its predecessor.
    pub redundancy_rho: f64,
    pub jitter_sigma: f64,
    pub length: usize,
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeat_label_drift: Option<RepeatLabelDrift>,
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        let c = self.num_categories;
        if c == 0 {
            return Err(Error::config("num_categories", "must be at least 1"));
        }
        if self.feature_dim == 0 {
            return Err(Error::config("feature_dim", "must be at least 1"));
        }
        if self.class_frequencies.len() != c {
            return Err(Error::config(
                "class_frequencies",
                format!("needs {c} entries"),
            ));
        }
        if self
            .class_frequencies
            .iter()
            .any(|p| p.is_nan() || *p < 0.0)
        {
            return Err(Error::config("class_frequencies", "entries must be >= 0"));
        }
        let sum: f64 = self.class_frequencies.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "class_frequencies",
                format!("sums to {sum}, not 1"),
            ));
        }
        for (name, means) in [
            ("source_means", &self.source_means),
            ("target_means", &self.target_means),
        ] {
            if means.len() != c || means.iter().any(|m| m.len() != self.feature_dim) {
                return Err(Error::config(
                    name,
                    format!("needs {c} vectors of dimension {}", self.feature_dim),
                ));
            }
        }
        if self.class_sigma.is_nan() || self.class_sigma < 0.0 {
            return Err(Error::config("class_sigma", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.redundancy_rho) {
            return Err(Error::config("redundancy_rho", "must lie in [0, 1)"));
        }
        if self.jitter_sigma.is_nan() || self.jitter_sigma < 0.0 {
            return Err(Error::config("jitter_sigma", "must be >= 0"));
        }
        if self.length < 1 {
            return Err(Error::config("length", "must be at least 1"));
        }
        if let Some(drift) = &self.repeat_label_drift {
            if !(0.0..=1.0).contains(&drift.confidence) {
                return Err(Error::config(
                    "repeat_label_drift.confidence",
                    "must lie in [0, 1]",
                ));
            }
        }
        Ok(())
    }

    /// Category with the lowest frequency (lowest id on ties).
    pub fn rare_category(&self) -> usize {
        (0..self.num_categories)
            .min_by(|&a, &b| {
                self.class_frequencies[a]
                    .total_cmp(&self.class_frequencies[b])
                    .then(a.cmp(&b))
            })
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Source,
    Target,
}

/// A generated stream with its ground truth kept alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStream {
    pub frames: Vec<Frame>,
    pub truth: Vec<usize>,
}

fn draw(rng: &mut ChaCha8Rng, mean: &[f64], sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return mean.to_vec();
    }
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    mean.iter().map(|m| m + normal.sample(rng)).collect()
}

/// Draws the target stream described by `spec`.
pub fn generate_stream(spec: &StreamSpec) -> Result<SimStream> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let categories = WeightedIndex::new(&spec.class_frequencies)
        .map_err(|e| Error::config("class_frequencies", e.to_string()))?;
    let mut frames = Vec::with_capacity(spec.length);
    let mut truth = Vec::with_capacity(spec.length);
    let mut current: Option<(usize, Vec<f64>)> = None;
    for id in 0..spec.length as u64 {
        let repeat = current.is_some() && rng.random_bool(spec.redundancy_rho);
        let (category, features) = match current.take() {
            Some((category, prev)) if repeat => {
                (category, draw(&mut rng, &prev, spec.jitter_sigma))
            }
            _ => {
                let category = categories.sample(&mut rng);
                (
                    category,
                    draw(&mut rng, &spec.target_means[category], spec.class_sigma),
                )
            }
        };
        let mut frame = Frame::new(id, features.clone());
        if let (true, Some(drift)) = (repeat, &spec.repeat_label_drift) {
            let wrong = (category + drift.offset) % spec.num_categories;
            frame = frame.with_detections(vec![Detection::new(wrong, drift.confidence)]);
        }
        frames.push(frame);
        truth.push(category);
        current = Some((category, features));
    }
    Ok(SimStream { frames, truth })
}

/// Labelled evaluation set with `per_category` draws of every category.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

pub fn balanced_set(
    spec: &StreamSpec,
    domain: Domain,
    per_category: usize,
    seed: u64,
) -> LabeledSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means = match domain {
        Domain::Source => &spec.source_means,
        Domain::Target => &spec.target_means,
    };
    let mut set = LabeledSet {
        features: Vec::with_capacity(per_category * spec.num_categories),
        labels: Vec::with_capacity(per_category * spec.num_categories),
    };
    for _ in 0..per_category {
        for (c, mean) in means.iter().enumerate() {
            set.features.push(draw(&mut rng, mean, spec.class_sigma));
            set.labels.push(c);
        }
    }
    set
}

/// Fraction of `set` whose top prediction matches the label.
pub fn accuracy<M: AdaptableModel + ?Sized>(
    model: &M,
    params: &ModelParams,
    set: &LabeledSet,
) -> Result<f64> {
    if set.labels.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (x, &y) in set.features.iter().zip(&set.labels) {
        let top = model.predict(params, x)?[0].top();
        correct += usize::from(top.category == y);
    }
    Ok(correct as f64 / set.labels.len() as f64)
}

/// Settings for supervised training on the labelled source domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Held-out source draws per category used to check the result.
    pub holdout_per_category: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            steps: 400,
            batch_size: 32,
            learning_rate: 0.05,
            holdout_per_category: 250,
        }
    }
}

/// Trains the classifier on class-balanced labelled source draws with
/// minibatch gradient descent from zero, then checks held-out source
/// accuracy against [`PRETRAIN_MIN_ACCURACY`].
pub fn pretrain_source(
    model: &ToyDetector,
    spec: &StreamSpec,
    config: &PretrainConfig,
    seed: u64,
) -> Result<ModelParams> {
    spec.validate()?;
    if config.steps < 1 {
        return Err(Error::Precondition(
            "pretraining needs at least one step".into(),
        ));
    }
    if config.batch_size < 1 {
        return Err(Error::config("batch_size", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::zeros(model.param_count());
    let scale = config.learning_rate / config.batch_size as f64;
    for _ in 0..config.steps {
        let mut grad = vec![0.0; params.len()];
        for _ in 0..config.batch_size {
            let c = rng.random_range(0..spec.num_categories);
            let x = draw(&mut rng, &spec.source_means[c], spec.class_sigma);
            let (_, g) = model.task_loss_and_gradient(&params, &x, &[Detection::new(c, 1.0)])?;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        for (p, g) in params.0.iter_mut().zip(&grad) {
            *p -= scale * g;
        }
    }
    let holdout = balanced_set(
        spec,
        Domain::Source,
        config.holdout_per_category,
        seed ^ 0x5eed,
    );
    let acc = accuracy(model, &params, &holdout)?;
    if acc < PRETRAIN_MIN_ACCURACY {
        return Err(Error::PretrainFailure {
            accuracy: acc,
            required: PRETRAIN_MIN_ACCURACY,
        });
    }
    Ok(params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub frames: usize,
    pub keyframes_total: usize,
    /// Keyframes by ground-truth category.
    pub keyframes_per_category: Vec<usize>,
    pub target_accuracy_before: f64,
    pub target_accuracy_after: f64,
    pub per_frame_micros_mean: f64,
    pub clusters_auf: usize,
    pub clusters_arc: usize,
}

/// Runs the online loop over `stream` in `mode`, starting from `source`.
/// Accuracy after the run is measured on the finalized parameters.
pub fn run_mode(
    mode: Mode,
    model: &ToyDetector,
    stream: &SimStream,
    source: &ModelParams,
    config: &EngineConfig,
    eval: &LabeledSet,
) -> Result<RunReport> {
    let config = EngineConfig {
        mode,
        ..config.clone()
    };
    let mut engine = Engine::new(model, source.clone(), &config)?;
    let mut per_category = vec![0usize; model.num_categories()];
    let mut keyframes = 0usize;
    let mut elapsed = 0.0f64;
    for (frame, &truth) in stream.frames.iter().zip(&stream.truth) {
        let start = Instant::now();
        let outcome = engine.process(frame)?;
        elapsed += start.elapsed().as_secs_f64();
        if outcome.keyframe {
            keyframes += 1;
            per_category[truth] += 1;
        }
    }
    let finalized = engine.finalize()?;
    let n = stream.frames.len();
    Ok(RunReport {
        mode,
        frames: n,
        keyframes_total: keyframes,
        keyframes_per_category: per_category,
        target_accuracy_before: accuracy(model, source, eval)?,
        target_accuracy_after: accuracy(model, &finalized, eval)?,
        per_frame_micros_mean: if n == 0 {
            0.0
        } else {
            elapsed * 1e6 / n as f64
        },
        clusters_auf: engine.acquirer().auf_bank().len(),
        clusters_arc: engine.acquirer().arc_bank().len(),
    })
}

/// Everything needed to run one seeded experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub name: String,
    pub stream: StreamSpec,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub pretrain: PretrainConfig,
    /// Held-out target draws per category for accuracy.
    #[serde(default = "default_eval_per_category")]
    pub eval_per_category: usize,
}

fn default_eval_per_category() -> usize {
    250
}

pub const REFERENCE_SPEC: &str = include_str!("../specs/reference.json");
pub const ADVERSARIAL_SPEC: &str = include_str!("../specs/adversarial.json");

impl SimulationSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self =
            serde_json::from_str(text).map_err(|e| Error::config("spec", e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Imbalanced four-category stream with heavy temporal redundancy.
    pub fn reference() -> Self {
        Self::from_json(REFERENCE_SPEC).expect("bundled reference spec is valid")
    }

    /// Redundant stream whose repeats carry confidently wrong labels.
    pub fn adversarial() -> Self {
        Self::from_json(ADVERSARIAL_SPEC).expect("bundled adversarial spec is valid")
    }

    /// Resolves `reference`, `adversarial` or a path to a spec file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        match name_or_path {
            "reference" => Ok(Self::reference()),
            "adversarial" => Ok(Self::adversarial()),
            path => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Self::from_json(&text)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stream.validate()?;
        self.engine.validate()?;
        let m = &self.engine.model;
        if m.feature_dim != self.stream.feature_dim {
            return Err(Error::config(
                "engine.model.feature_dim",
                "must equal stream.feature_dim",
            ));
        }
        if m.num_categories != self.stream.num_categories {
            return Err(Error::config(
                "engine.model.num_categories",
                "must equal stream.num_categories",
            ));
        }
        if self.eval_per_category < 1 {
            return Err(Error::config("eval_per_category", "must be at least 1"));
        }
        Ok(())
    }
}

fn derive_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One seeded instance of a [`SimulationSpec`]: stream, source model and
/// held-out target set, shared by every mode.
pub struct Trial {
    pub model: ToyDetector,
    pub stream: SimStream,
    pub source: ModelParams,
    pub eval: LabeledSet,
    pub engine: EngineConfig,
}

impl Trial {
    pub fn new(spec: &SimulationSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut engine = spec.engine.clone();
        engine.augment.rng_seed = derive_seed(seed, 4);
        let model = ToyDetector::new(engine.model.clone(), engine.augment.clone())?;
        let stream_spec = StreamSpec {
            rng_seed: derive_seed(seed, 1),
            ..spec.stream.clone()
        };
        let stream = generate_stream(&stream_spec)?;
        let source = pretrain_source(&model, &spec.stream, &spec.pretrain, derive_seed(seed, 2))?;
        let eval = balanced_set(
            &spec.stream,
            Domain::Target,
            spec.eval_per_category,
            derive_seed(seed, 3),
        );
        Ok(Self {
            model,
            stream,
            source,
            eval,
            engine,
        })
    }

    pub fn run(&self, mode: Mode) -> Result<RunReport> {
        run_mode(
            mode,
            &self.model,
            &self.stream,
            &self.source,
            &self.engine,
            &self.eval,
        )
    }

    pub fn source_accuracy(&self) -> Result<f64> {
        accuracy(&self.model, &self.source, &self.eval)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// Mean and sample standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: 0.0,
                std: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: Mode,
    pub accuracy: Summary,
    pub rare_keyframes: Summary,
    pub keyframes: Summary,
}

/// Per-mode summaries over seeds. Wall-clock figures are deliberately left
/// out so that the table is reproducible; they live in the run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub spec: String,
    pub seeds: Vec<u64>,
    pub stream_length: usize,
    pub rare_category: usize,
    pub source_only_accuracy: Summary,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, mode: Mode) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    /// Aligned plain-text rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "spec {} | {} seeds | {} frames | rare category {}",
            self.spec,
            self.seeds.len(),
            self.stream_length,
            self.rare_category
        );
        let _ = writeln!(
            out,
            "{:<12} {:>17} {:>17} {:>17}",
            "Method", "Target acc (%)", "Rare keyframes", "Keyframes"
        );
        let cell =
            |s: &Summary, scale: f64| format!("{:.1} ± {:.1}", s.mean * scale, s.std * scale);
        let _ = writeln!(
            out,
            "{:<12} {:>17} {:>17} {:>17}",
            "Source only",
            cell(&self.source_only_accuracy, 100.0),
            "-",
            "-"
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:<12} {:>17} {:>17} {:>17}",
                row.mode.label(),
                cell(&row.accuracy, 100.0),
                cell(&row.rare_keyframes, 1.0),
                cell(&row.keyframes, 1.0)
            );
        }
        out
    }
}

/// Result of [`ablation_compare`]: the summary table and every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub table: AblationTable,
    pub runs: Vec<(u64, RunReport)>,
}

/// Runs every mode on every seed and summarises. Needs at least five seeds.
pub fn ablation_compare(spec: &SimulationSpec, seeds: &[u64]) -> Result<Ablation> {
    if seeds.len() < 5 {
        return Err(Error::Precondition(format!(
            "ablation needs a minimum of 5 seeds, got {}",
            seeds.len()
        )));
    }
    let rare = spec.stream.rare_category();
    let mut source_acc = Vec::new();
    let mut runs = Vec::new();
    for &seed in seeds {
        let trial = Trial::new(spec, seed)?;
        source_acc.push(trial.source_accuracy()?);
        for mode in Mode::ALL {
            runs.push((seed, trial.run(mode)?));
        }
    }
    let rows = Mode::ALL
        .iter()
        .map(|&mode| {
            let of_mode: Vec<&RunReport> = runs
                .iter()
                .map(|(_, r)| r)
                .filter(|r| r.mode == mode)
                .collect();
            let pick = |f: &dyn Fn(&RunReport) -> f64| {
                Summary::of(&of_mode.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            AblationRow {
                mode,
                accuracy: pick(&|r| r.target_accuracy_after),
                rare_keyframes: pick(&|r| r.keyframes_per_category[rare] as f64),
                keyframes: pick(&|r| r.keyframes_total as f64),
            }
        })
        .collect();
    Ok(Ablation {
        table: AblationTable {
            spec: spec.name.clone(),
            seeds: seeds.to_vec(),
            stream_length: spec.stream.length,
            rare_category: rare,
            source_only_accuracy: Summary::of(&source_acc),
            rows,
        },
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> StreamSpec {
        StreamSpec {
            num_categories: 2,
            feature_dim: 2,
            class_frequencies: vec![0.5, 0.5],
            source_means: vec![vec![4.0, 0.0], vec![0.0, 4.0]],
            target_means: vec![vec![4.0, 1.0], vec![1.0, 4.0]],
            class_sigma: 0.3,
            redundancy_rho: 0.0,
            jitter_sigma: 0.0,
            length: 200,
            rng_seed: 9,
            repeat_label_drift: None,
        }
    }

    #[test]
    fn zero_redundancy_draws_are_fresh() {
        let s = generate_stream(&tiny_spec()).unwrap();
        assert_eq!(s.frames.len(), 200);
        for w in s.frames.windows(2) {
            assert_ne!(w[0].features, w[1].features);
        }
    }

    #[test]
    fn high_redundancy_repeats_exactly_without_jitter() {
        let spec = StreamSpec {
            redundancy_rho: 0.99,
            ..tiny_spec()
        };
        let s = generate_stream(&spec).unwrap();
        let repeats = s
            .frames
            .windows(2)
            .filter(|w| w[0].features == w[1].features)
            .count();
        // expected 0.99 * 199 = 197; allow generous slack
        assert!(repeats >= 185, "{repeats}");
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(
            generate_stream(&tiny_spec()).unwrap(),
            generate_stream(&tiny_spec()).unwrap()
        );
    }

    #[test]
    fn drift_labels_only_on_repeats() {
        let spec = StreamSpec {
            redundancy_rho: 0.5,
            repeat_label_drift: Some(RepeatLabelDrift {
                confidence: 0.97,
                offset: 1,
            }),
            ..tiny_spec()
        };
        let s = generate_stream(&spec).unwrap();
        assert!(s.frames[0].detections.is_none());
        let mut labelled = 0;
        for (f, &t) in s.frames.iter().zip(&s.truth) {
            if let Some(d) = &f.detections {
                labelled += 1;
                assert_eq!(d, &vec![Detection::new((t + 1) % 2, 0.97)]);
            }
        }
        assert!(labelled > 50);
    }

    #[test]
    fn spec_validation_names_field() {
        let spec = StreamSpec {
            class_frequencies: vec![0.5, 0.6],
            ..tiny_spec()
        };
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains("class_frequencies"));
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(s.mean, 3.0);
        assert!((s.std - 2.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(Summary::of(&[2.0]).std, 0.0);
    }

    #[test]
    fn rare_category_of_spec() {
        let spec = StreamSpec {
            class_frequencies: vec![0.5, 0.5],
            ..tiny_spec()
        };
        assert_eq!(spec.rare_category(), 0);
        assert_eq!(SimulationSpec::reference().stream.rare_category(), 3);
    }

    #[test]
    fn bundled_specs_parse() {
        let r = SimulationSpec::reference();
        assert_eq!(r.stream.num_categories, 4);
        assert_eq!(r.stream.class_frequencies, vec![0.5, 0.3, 0.18, 0.02]);
        assert_eq!(r.stream.redundancy_rho, 0.9);
        assert_eq!(r.stream.length, 5000);
        assert_eq!(r.engine.acquisition.warmup_min_total, 200);
        let a = SimulationSpec::adversarial();
        assert_eq!(a.stream.redundancy_rho, 0.97);
        assert!(a.stream.repeat_label_drift.is_some());
    }
}
