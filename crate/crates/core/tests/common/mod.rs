//! Independent reference implementations shared by the integration and
//! acceptance tests. Nothing here calls into the code under test except to
//! obtain the values being checked.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use streamadapt::cluster::ClusterBank;
use streamadapt::stream::Detection;
use streamadapt::teacher::{kl_alignment, AdaptableModel, KlDirection, ModelParams};
use streamadapt::toy::{AugmentConfig, ToyDetector, ToyModelConfig};

/// Textbook cosine similarity, no clamping, no caching.
pub fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Arithmetic mean of a member list, summed from scratch.
pub fn brute_mean(members: &[Vec<f64>]) -> Vec<f64> {
    let d = members[0].len();
    let mut sum = vec![0.0; d];
    for m in members {
        for (s, v) in sum.iter_mut().zip(m) {
            *s += v;
        }
    }
    sum.iter().map(|s| s / members.len() as f64).collect()
}

/// Outcome of replaying a stream through a bank against the brute-force
/// reference.
pub struct OracleCheck {
    /// Largest componentwise |centroid - mean(members)|.
    pub max_centroid_error: f64,
    /// Frames where the bank's decision disagreed with the reference and the
    /// reference score was not within `1e-9` of the threshold.
    pub decision_mismatches: usize,
    pub clusters: usize,
}

/// Feeds `stream` to a fresh bank while keeping every member explicitly.
/// Each decision is recomputed from the explicit member means: spawn when
/// the best similarity is below `gamma`, else join the first best cluster.
pub fn check_bank_against_oracle(stream: &[Vec<f64>], gamma: f64) -> OracleCheck {
    let dim = stream[0].len();
    let mut bank = ClusterBank::new(dim);
    let mut members: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut mismatches = 0;
    for e in stream {
        let means: Vec<Vec<f64>> = members.iter().map(|m| brute_mean(m)).collect();
        let mut best: Option<(f64, usize)> = None;
        for (i, m) in means.iter().enumerate() {
            let s = naive_cosine(e, m);
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, i));
            }
        }
        let expect_spawn = best.is_none_or(|(s, _)| s < gamma);

        let observed = bank.observe(e, gamma).expect("valid embedding");
        let index = observed.observation.index();
        if observed.observation.is_spawned() {
            members.push(vec![e.clone()]);
        } else {
            members[index].push(e.clone());
        }

        let agrees = match best {
            None => observed.observation.is_spawned(),
            Some((s, i)) => {
                if observed.observation.is_spawned() {
                    expect_spawn
                } else {
                    !expect_spawn
                        && (index == i || (naive_cosine(e, &means[index]) - s).abs() < 1e-12)
                }
            }
        };
        let near_threshold = best.is_some_and(|(s, _)| (s - gamma).abs() < 1e-9);
        if !agrees && !near_threshold {
            mismatches += 1;
        }
    }
    let mut max_err = 0.0f64;
    for (cluster, m) in bank.clusters().iter().zip(&members) {
        assert_eq!(cluster.member_count as usize, m.len());
        for (c, r) in cluster.centroid.iter().zip(brute_mean(m)) {
            max_err = max_err.max((c - r).abs());
        }
    }
    assert_eq!(bank.len(), members.len());
    OracleCheck {
        max_centroid_error: max_err,
        decision_mismatches: mismatches,
        clusters: bank.len(),
    }
}

/// Random embedding stream drawn around a handful of random centres so that
/// both spawning and assignment occur.
pub fn clustered_stream(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> Vec<Vec<f64>> {
    let centres: Vec<Vec<f64>> = (0..rng.random_range(1..=8))
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let spread = rng.random_range(0.0..0.5);
    let noise = Normal::new(0.0, 1.0).unwrap();
    (0..len)
        .map(|_| {
            let c = &centres[rng.random_range(0..centres.len())];
            loop {
                let v: Vec<f64> = c.iter().map(|x| x + spread * noise.sample(rng)).collect();
                if v.iter().any(|x| *x != 0.0) {
                    break v;
                }
            }
        })
        .collect()
}

/// `alpha^t * t0 + (1 - alpha^t) * s`
pub fn ema_closed_form(t0: &[f64], s: &[f64], alpha: f64, t: i32) -> Vec<f64> {
    let at = alpha.powi(t);
    t0.iter()
        .zip(s)
        .map(|(a, b)| at * a + (1.0 - at) * b)
        .collect()
}

/// Central difference of `f` at `x` along every coordinate.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// One randomly sized toy detector with random parameters, input and labels.
pub struct GradientCase {
    pub model: ToyDetector,
    pub params: ModelParams,
    pub teacher: ModelParams,
    pub features: Vec<f64>,
    pub labels: Vec<Detection>,
}

pub fn gradient_case(seed: u64) -> GradientCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let feature_dim = rng.random_range(1..=12);
    let embedding_dim = if rng.random_bool(0.5) {
        feature_dim
    } else {
        rng.random_range(1..=12)
    };
    let num_categories = rng.random_range(2..=6);
    let model = ToyDetector::new(
        ToyModelConfig {
            feature_dim,
            embedding_dim,
            num_categories,
            encoder_seed: rng.random(),
        },
        AugmentConfig::default(),
    )
    .unwrap();
    let random_params = |rng: &mut ChaCha8Rng| {
        ModelParams(
            (0..model.param_count())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
    };
    let params = random_params(&mut rng);
    let teacher = random_params(&mut rng);
    let features = (0..feature_dim)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let labels = (0..rng.random_range(1..=3))
        .map(|_| {
            Detection::new(
                rng.random_range(0..num_categories),
                rng.random_range(0.9..1.0),
            )
        })
        .collect();
    GradientCase {
        model,
        params,
        teacher,
        features,
        labels,
    }
}

/// Worst relative error of the task gradient and of the alignment
/// gradient (both directions) for one case.
pub fn gradient_errors(case: &GradientCase, h: f64) -> [f64; 3] {
    let GradientCase {
        model,
        params,
        teacher,
        features,
        labels,
    } = case;
    let (_, analytic) = model
        .task_loss_and_gradient(params, features, labels)
        .unwrap();
    let numeric = central_difference(
        |p| {
            model
                .task_loss_and_gradient(&ModelParams(p.to_vec()), features, labels)
                .unwrap()
                .0
        },
        &params.0,
        h,
    );
    let task = relative_error(&analytic, &numeric);

    let dist = |p: &ModelParams| -> Vec<Vec<f64>> {
        model
            .predict(p, features)
            .unwrap()
            .into_iter()
            .map(|s| s.distribution)
            .collect()
    };
    let teacher_dist = dist(teacher);
    let kl_error = |direction: KlDirection| {
        let (_, grad_logits) = kl_alignment(&dist(params), &teacher_dist, direction);
        let analytic = model.logit_vjp(params, features, &grad_logits).unwrap();
        let numeric = central_difference(
            |p| kl_alignment(&dist(&ModelParams(p.to_vec())), &teacher_dist, direction).0,
            &params.0,
            h,
        );
        relative_error(&analytic, &numeric)
    };
    [
        task,
        kl_error(KlDirection::StudentTeacher),
        kl_error(KlDirection::TeacherStudent),
    ]
}

/// Random probability vector of length `n`, occasionally with exact zeros.
pub fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.1) {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let s: f64 = raw.iter().sum();
        if s > 0.0 {
            return raw.iter().map(|v| v / s).collect();
        }
    }
}
