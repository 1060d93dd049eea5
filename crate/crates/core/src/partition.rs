use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CorpusError, FitError, NumericError};

/// Hard assignment of observations to clusters, labels in `0..n_clusters`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    n_clusters: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, n_clusters: usize) -> Result<Self, CorpusError> {
        if let Some(&label) = labels.iter().find(|&&l| l >= n_clusters) {
            return Err(CorpusError::LabelOutOfRange { label, n_clusters });
        }
        Ok(Self { labels, n_clusters })
    }

    /// Infers the number of clusters as `max(label) + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let n_clusters = labels.iter().max().map_or(0, |m| m + 1);
        Self { labels, n_clusters }
    }

    /// Random balanced assignment: a shuffled sequence of near-equal blocks,
    /// so cluster sizes differ by at most one.
    pub fn random_balanced<R: Rng + ?Sized>(
        n: usize,
        q: usize,
        rng: &mut R,
    ) -> Result<Self, FitError> {
        if q == 0 {
            return Err(FitError::Config("number of clusters must be >= 1".into()));
        }
        if q > n {
            return Err(FitError::TooManyClusters {
                clusters: q,
                docs: n,
            });
        }
        let mut labels: Vec<usize> = (0..n).map(|i| i % q).collect();
        labels.shuffle(rng);
        Ok(Self {
            labels,
            n_clusters: q,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// True when every cluster holds at least one observation.
    pub fn all_occupied(&self) -> bool {
        self.sizes().iter().all(|&s| s > 0)
    }

    pub(crate) fn set(&mut self, i: usize, cluster: usize) {
        debug_assert!(cluster < self.n_clusters);
        self.labels[i] = cluster;
    }

    /// Relabels clusters through `perm` (old label -> new label).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            labels: self.labels.iter().map(|&l| perm[l]).collect(),
            n_clusters: self.n_clusters,
        }
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }
}

/// Mixture proportions π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureWeights(pub Vec<f64>);

impl MixtureWeights {
    /// Closed-form maximizer of log p(Y | π): π_q = N_q / N.
    pub fn estimate(partition: &Partition) -> Self {
        let n = partition.len() as f64;
        Self(
            partition
                .sizes()
                .into_iter()
                .map(|s| s as f64 / n)
                .collect(),
        )
    }

    pub fn from_sizes(sizes: &[usize]) -> Self {
        let n: usize = sizes.iter().sum();
        Self(sizes.iter().map(|&s| s as f64 / n as f64).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// log p(Y | π) = Σ_q N_q log π_q.
pub fn clustering_term(partition: &Partition, pi: &MixtureWeights) -> Result<f64, NumericError> {
    clustering_term_from_sizes(&partition.sizes(), pi.as_slice())
}

pub(crate) fn clustering_term_from_sizes(sizes: &[usize], pi: &[f64]) -> Result<f64, NumericError> {
    let mut total = 0.0;
    for (q, (&n_q, &p)) in sizes.iter().zip(pi).enumerate() {
        if n_q == 0 {
            continue;
        }
        if p.is_nan() || p <= 0.0 {
            return Err(NumericError::ZeroWeight { cluster: q });
        }
        total += n_q as f64 * p.ln();
    }
    Ok(total)
}

/// Clustering term at the optimal π, Σ_q N_q log(N_q / N).
pub(crate) fn optimal_clustering_term(sizes: &[usize]) -> f64 {
    let n: usize = sizes.iter().sum();
    let n = n as f64;
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| s as f64 * (s as f64 / n).ln())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sorted_sizes(p: &Partition) -> Vec<usize> {
        let mut s = p.sizes();
        s.sort_unstable();
        s
    }

    #[test]
    fn balanced_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Partition::random_balanced(6, 3, &mut rng).unwrap();
        assert_eq!(p.sizes(), vec![2, 2, 2]);
        let p = Partition::random_balanced(7, 3, &mut rng).unwrap();
        assert_eq!(sorted_sizes(&p), vec![2, 2, 3]);
    }

    #[test]
    fn balanced_is_deterministic() {
        let a = Partition::random_balanced(50, 4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = Partition::random_balanced(50, 4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_many_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            Partition::random_balanced(3, 4, &mut rng),
            Err(FitError::TooManyClusters { .. })
        ));
    }

    #[test]
    fn label_range_checked() {
        assert!(Partition::new(vec![0, 2], 2).is_err());
    }

    #[test]
    fn pi_estimates() {
        let p = Partition::new(vec![0, 1, 2, 3, 0, 1, 2, 3], 4).unwrap();
        assert_eq!(MixtureWeights::estimate(&p).0, vec![0.25; 4]);
        let p = Partition::new(vec![1, 0, 1, 1], 2).unwrap();
        assert_eq!(MixtureWeights::estimate(&p).0, vec![0.25, 0.75]);
    }

    #[test]
    fn pi_matches_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let labels: Vec<usize> = (0..97).map(|_| rng.gen_range(0..5)).collect();
        let p = Partition::new(labels.clone(), 5).unwrap();
        let pi = MixtureWeights::estimate(&p);
        for q in 0..5 {
            let count = labels.iter().filter(|&&l| l == q).count();
            assert_eq!(pi.0[q], count as f64 / 97.0);
        }
        assert!((pi.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clustering_term_values() {
        let p = Partition::new(vec![0, 1, 0, 1], 2).unwrap();
        let v = clustering_term(&p, &MixtureWeights::estimate(&p)).unwrap();
        assert!((v - 4.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!((v + 2.772_588_722_239_781).abs() < 1e-12);

        let p = Partition::new(vec![0, 0, 0], 1).unwrap();
        assert_eq!(
            clustering_term(&p, &MixtureWeights::estimate(&p)).unwrap(),
            0.0
        );

        let p = Partition::new(vec![0, 1, 1, 1], 2).unwrap();
        let v = clustering_term(&p, &MixtureWeights::estimate(&p)).unwrap();
        let expected = 0.25f64.ln() + 3.0 * 0.75f64.ln();
        assert!((v - expected).abs() < 1e-12);
        assert!((v + 2.249_340_578_475_233).abs() < 1e-12);
        assert!((optimal_clustering_term(&p.sizes()) - v).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_on_occupied_cluster() {
        let p = Partition::new(vec![0, 1], 2).unwrap();
        let err = clustering_term(&p, &MixtureWeights(vec![1.0, 0.0])).unwrap_err();
        assert_eq!(err, NumericError::ZeroWeight { cluster: 1 });
    }
}
