//! Incremental cosine clustering with running-mean centroids.
//!
//! A [`ClusterBank`] never merges, splits or evicts clusters. Each observed
//! embedding either joins its most similar cluster (when the similarity
//! reaches the threshold) or founds a new one. Founding a cluster is what the
//! acquisition stage treats as "this frame is new".

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::check_vector;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity, clamped to `[-1, 1]`.
///
/// ```
/// use streamadapt::cluster::cosine;
/// let s = cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
/// assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
/// ```
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            line: None,
            expected: a.len(),
            found: b.len(),
        });
    }
    cosine_with_norms(a, norm(a), b, norm(b))
}

fn cosine_with_norms(a: &[f64], norm_a: f64, b: &[f64], norm_b: f64) -> Result<f64> {
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (norm_a * norm_b)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub centroid: Vec<f64>,
    pub member_count: u64,
}

/// Result of feeding one embedding to a bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    /// A new cluster was created with the embedding as its centroid.
    Spawned { index: usize },
    /// The embedding joined an existing cluster.
    Assigned { index: usize },
}

impl Observation {
    pub fn index(self) -> usize {
        match self {
            Observation::Spawned { index } | Observation::Assigned { index } => index,
        }
    }

    pub fn is_spawned(self) -> bool {
        matches!(self, Observation::Spawned { .. })
    }
}

/// Outcome of [`ClusterBank::observe`]: what happened plus the best score
/// seen before the update (`None` for an empty bank).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observed {
    pub observation: Observation,
    pub best_score: Option<f64>,
}

/// Ordered set of clusters, kept in creation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "BankSnapshot", into = "BankSnapshot")]
pub struct ClusterBank {
    dimension: usize,
    clusters: Vec<Cluster>,
    // Cached centroid norms, recomputed whenever a centroid moves.
    norms: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BankSnapshot {
    dimension: usize,
    clusters: Vec<Cluster>,
}

impl From<BankSnapshot> for ClusterBank {
    fn from(s: BankSnapshot) -> Self {
        let norms = s.clusters.iter().map(|c| norm(&c.centroid)).collect();
        Self {
            dimension: s.dimension,
            clusters: s.clusters,
            norms,
        }
    }
}

impl From<ClusterBank> for BankSnapshot {
    fn from(b: ClusterBank) -> Self {
        Self {
            dimension: b.dimension,
            clusters: b.clusters,
        }
    }
}

impl ClusterBank {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            clusters: Vec::new(),
            norms: Vec::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    fn check_embedding(&self, e: &[f64]) -> Result<f64> {
        check_vector(e, self.dimension)?;
        let n = norm(e);
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(n)
    }

    /// Highest cosine similarity between `e` and any centroid, with the index
    /// of that centroid. Ties go to the lowest index. `None` when empty.
    pub fn max_similarity(&self, e: &[f64]) -> Result<Option<(f64, usize)>> {
        let norm_e = self.check_embedding(e)?;
        self.best_match(e, norm_e)
    }

    fn best_match(&self, e: &[f64], norm_e: f64) -> Result<Option<(f64, usize)>> {
        let mut best: Option<(f64, usize)> = None;
        for (i, (cluster, &norm_c)) in self.clusters.iter().zip(&self.norms).enumerate() {
            let score = cosine_with_norms(&cluster.centroid, norm_c, e, norm_e)?;
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, i));
            }
        }
        Ok(best)
    }

    /// Feeds one embedding: spawns a cluster when the bank is empty or the
    /// best similarity is below `gamma`, otherwise folds `e` into the best
    /// cluster's running mean.
    pub fn observe(&mut self, e: &[f64], gamma: f64) -> Result<Observed> {
        let norm_e = self.check_embedding(e)?;
        let best = self.best_match(e, norm_e)?;
        let observation = match best {
            Some((score, index)) if score >= gamma => {
                let cluster = &mut self.clusters[index];
                let k = cluster.member_count as f64;
                for (c, x) in cluster.centroid.iter_mut().zip(e) {
                    *c = (*c * k + x) / (k + 1.0);
                }
                cluster.member_count += 1;
                self.norms[index] = norm(&cluster.centroid);
                Observation::Assigned { index }
            }
            _ => {
                self.clusters.push(Cluster {
                    centroid: e.to_vec(),
                    member_count: 1,
                });
                self.norms.push(norm_e);
                Observation::Spawned {
                    index: self.clusters.len() - 1,
                }
            }
        };
        Ok(Observed {
            observation,
            best_score: best.map(|(s, _)| s),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        // 1 / (1 * sqrt 2)
        let expected = 1.0 / 2f64.sqrt();
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - expected).abs() < 1e-15);
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn max_similarity_examples() {
        let mut bank = ClusterBank::new(2);
        assert_eq!(bank.max_similarity(&[1.0, 0.0]).unwrap(), None);
        bank.observe(&[1.0, 0.0], 0.975).unwrap();
        assert_eq!(bank.max_similarity(&[1.0, 0.0]).unwrap(), Some((1.0, 0)));
        bank.observe(&[0.0, 1.0], 0.975).unwrap();
        let (score, index) = bank.max_similarity(&[0.6, 0.8]).unwrap().unwrap();
        // unit centroids: cosines are the dot products 0.6 and 0.8
        assert!((score - 0.8).abs() < 1e-15);
        assert_eq!(index, 1);
        assert!(matches!(
            bank.max_similarity(&[1.0, 0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let mut bank = ClusterBank::new(2);
        bank.observe(&[1.0, 0.0], 2.0).unwrap();
        bank.observe(&[1.0, 0.0], 2.0).unwrap();
        assert_eq!(bank.max_similarity(&[1.0, 0.0]).unwrap(), Some((1.0, 0)));
    }

    #[test]
    fn observe_examples() {
        let mut bank = ClusterBank::new(2);
        let first = bank.observe(&[1.0, 0.0], 0.975).unwrap();
        assert_eq!(first.observation, Observation::Spawned { index: 0 });
        assert_eq!(first.best_score, None);

        let dup = bank.observe(&[1.0, 0.0], 0.975).unwrap();
        assert_eq!(dup.observation, Observation::Assigned { index: 0 });
        assert_eq!(bank.clusters()[0].centroid, vec![1.0, 0.0]);
        assert_eq!(bank.clusters()[0].member_count, 2);

        let orth = bank.observe(&[0.0, 1.0], 0.975).unwrap();
        assert_eq!(orth.observation, Observation::Spawned { index: 1 });
        assert_eq!(orth.best_score, Some(0.0));
        assert_eq!(bank.len(), 2);
    }

    #[test]
    fn zero_embedding_is_rejected() {
        let mut bank = ClusterBank::new(2);
        assert!(matches!(
            bank.observe(&[0.0, 0.0], 0.5),
            Err(Error::ZeroVector)
        ));
        assert!(bank.is_empty());
    }

    #[test]
    fn snapshot_round_trip() {
        let mut bank = ClusterBank::new(3);
        for e in [[1.0, 2.0, 0.5], [1.1, 2.0, 0.4], [-3.0, 0.1, 0.0]] {
            bank.observe(&e, 0.9).unwrap();
        }
        let json = serde_json::to_string(&bank).unwrap();
        let back: ClusterBank = serde_json::from_str(&json).unwrap();
        assert_eq!(back, bank);
    }

    fn embedding(d: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0f64..5.0, d)
            .prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn bank_size_is_monotone(
            stream in prop::collection::vec(embedding(4), 1..80),
            gamma in -1.0f64..1.0,
        ) {
            let mut bank = ClusterBank::new(4);
            for e in &stream {
                let before = bank.len();
                let obs = bank.observe(e, gamma).unwrap();
                let grew = bank.len() - before;
                prop_assert_eq!(grew, usize::from(obs.observation.is_spawned()));
            }
        }

        #[test]
        fn threshold_endpoints(stream in prop::collection::vec(embedding(3), 1..60)) {
            let mut always = ClusterBank::new(3);
            let mut never = ClusterBank::new(3);
            for e in &stream {
                prop_assert!(always.observe(e, 1.0 + 1e-9).unwrap().observation.is_spawned());
                never.observe(e, -1.0).unwrap();
            }
            prop_assert_eq!(always.len(), stream.len());
            prop_assert_eq!(never.len(), 1);
        }

        #[test]
        fn cosine_is_bounded(a in embedding(5), b in embedding(5)) {
            let s = cosine(&a, &b).unwrap();
            prop_assert!((-1.0..=1.0).contains(&s));
        }
    }
}
