//! Synthetic corpora drawn from the mixture model, with topic noise and
//! imbalanced cluster proportions.
//!
//! Randomness comes from ChaCha8 seeded with `seed`. Stream 0 draws the
//! word-to-block permutation of [`block_beta`]; document `i` uses stream
//! `i + 1` for both its cluster label and its tokens, so documents can be
//! generated in any order (or in parallel) with identical output.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ColumnRemap, Count, CountMatrix};
use crate::error::FitError;
use crate::lda::TopicMatrix;
use crate::par::{self, Execution};
use crate::partition::{MixtureWeights, Partition};

/// Cluster-by-topic proportions with four peaked and two mixed clusters,
/// rows renormalized to sum to one.
pub fn default_theta_star() -> Vec<Vec<f64>> {
    let raw = [
        [0.50, 0.17, 0.17, 0.17],
        [0.17, 0.50, 0.17, 0.17],
        [0.17, 0.17, 0.50, 0.17],
        [0.17, 0.17, 0.17, 0.50],
        [0.33, 0.17, 0.33, 0.17],
        [0.17, 0.33, 0.17, 0.33],
    ];
    raw.iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            row.iter().map(|x| x / s).collect()
        })
        .collect()
}

/// Cluster-by-topic proportions for any (Q, K) following the pattern of
/// [`default_theta_star`], which it returns for (6, 4): the first clusters
/// put weight 3 on their own topic, later ones weight 2 on a pair of
/// topics, with weight 1 elsewhere before normalizing. Pairs are taken from
/// the widest circular offset down.
pub fn theta_star(n_clusters: usize, n_topics: usize) -> Result<Vec<Vec<f64>>, FitError> {
    if (n_clusters, n_topics) == (6, 4) {
        return Ok(default_theta_star());
    }
    let k = n_topics;
    let mut pairs = Vec::new();
    for offset in (1..=k / 2).rev() {
        for i in 0..k {
            let pair = (i.min((i + offset) % k), i.max((i + offset) % k));
            if pair.0 != pair.1 && !pairs.contains(&pair) {
                pairs.push(pair);
            }
        }
    }
    if n_clusters == 0 || k == 0 || n_clusters > k + pairs.len() {
        return Err(FitError::Config(format!(
            "cannot build {n_clusters} distinct cluster profiles over {k} topics"
        )));
    }
    let rows = (0..n_clusters)
        .map(|q| {
            let mut row = vec![1.0; k];
            if q < k {
                row[q] = 3.0;
            } else {
                let (a, b) = pairs[q - k];
                row[a] = 2.0;
                row[b] = 2.0;
            }
            let s: f64 = row.iter().sum();
            row.iter().map(|x| x / s).collect()
        })
        .collect();
    Ok(rows)
}

/// Disjoint-block topics: topic `k` spreads its mass over its own block of
/// `⌊V/K⌋` words (the last block takes the remainder) with Zipf weights
/// `r^-s` by rank inside the block. `seed` shuffles which words form each block.
pub fn block_beta(
    n_words: usize,
    n_topics: usize,
    zipf_exponent: f64,
    seed: u64,
) -> Result<TopicMatrix, FitError> {
    if n_topics == 0 || n_words < n_topics {
        return Err(FitError::Config(format!(
            "need at least as many words ({n_words}) as topics ({n_topics})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let mut words: Vec<usize> = (0..n_words).collect();
    words.shuffle(&mut rng);

    let block = n_words / n_topics;
    let mut data = vec![0.0; n_words * n_topics];
    for k in 0..n_topics {
        let start = k * block;
        let end = if k + 1 == n_topics {
            n_words
        } else {
            start + block
        };
        let weights: Vec<f64> = (1..=end - start)
            .map(|r| (r as f64).powf(-zipf_exponent))
            .collect();
        let total: f64 = weights.iter().sum();
        for (&w, weight) in words[start..end].iter().zip(weights) {
            data[w * n_topics + k] = weight / total;
        }
    }
    TopicMatrix::new(n_words, n_topics, data)
}

/// π_q ∝ λ^(Q − q) for q = 1..Q.
pub fn cluster_proportions(lambda: f64, n_clusters: usize) -> Result<MixtureWeights, FitError> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(FitError::Config(format!(
            "lambda must lie in (0, 1], got {lambda}"
        )));
    }
    if n_clusters == 0 {
        return Err(FitError::Config("number of clusters must be >= 1".into()));
    }
    let raw: Vec<f64> = (1..=n_clusters)
        .map(|q| lambda.powi((n_clusters - q) as i32))
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(MixtureWeights(raw.into_iter().map(|x| x / total).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_docs: usize,
    pub doc_length: usize,
    pub n_words: usize,
    /// Rows are clusters, columns topics.
    pub theta_star: Vec<Vec<f64>>,
    pub zipf_exponent: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub seed: u64,
    /// Explicit topics; when absent, [`block_beta`] with `n_words` words and
    /// one topic per column of `theta_star`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_star: Option<TopicMatrix>,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_docs: 400,
            doc_length: 250,
            n_words: 900,
            theta_star: default_theta_star(),
            zipf_exponent: 1.0,
            epsilon: 0.0,
            lambda: 1.0,
            seed: 0,
            beta_star: None,
            execution: Execution::default(),
        }
    }
}

impl SimulationConfig {
    pub fn q_star(&self) -> usize {
        self.theta_star.len()
    }

    pub fn k_star(&self) -> usize {
        self.theta_star.first().map_or(0, |r| r.len())
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if self.n_docs == 0 || self.doc_length == 0 {
            return Err(FitError::Config(
                "n_docs and doc_length must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(FitError::Config(format!(
                "epsilon must lie in [0, 1], got {}",
                self.epsilon
            )));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(FitError::Config(format!(
                "lambda must lie in (0, 1], got {}",
                self.lambda
            )));
        }
        let k = self.k_star();
        if self.theta_star.is_empty() || k == 0 {
            return Err(FitError::Config("theta_star must be non-empty".into()));
        }
        for (q, row) in self.theta_star.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if row.len() != k || (s - 1.0).abs() > 1e-12 || row.iter().any(|&x| x < 0.0) {
                return Err(FitError::Config(format!(
                    "theta_star row {q} is not a distribution"
                )));
            }
        }
        if let Some(b) = &self.beta_star {
            if b.n_topics() != k {
                return Err(FitError::Shape {
                    expected: (b.n_words(), k),
                    found: (b.n_words(), b.n_topics()),
                });
            }
        }
        Ok(())
    }

    pub fn topics(&self) -> Result<TopicMatrix, FitError> {
        match &self.beta_star {
            Some(b) => Ok(b.clone()),
            None => block_beta(self.n_words, self.k_star(), self.zipf_exponent, self.seed),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabeledCorpus {
    pub counts: CountMatrix,
    pub labels: Partition,
    /// Columns of the generated matrix in terms of the topic rows (words
    /// never drawn are pruned).
    pub remap: ColumnRemap,
    pub beta_star: TopicMatrix,
    pub config: SimulationConfig,
}

/// Per-token topic law (1 − ε) θ*_q + ε / K.
pub fn token_topic_law(theta_row: &[f64], epsilon: f64) -> Vec<f64> {
    let k = theta_row.len() as f64;
    theta_row
        .iter()
        .map(|&t| (1.0 - epsilon) * t + epsilon / k)
        .collect()
}

/// Draws a labeled corpus: Y_i ~ M(1, π(λ)), then for each of the L tokens a
/// topic from the ε-noised law of cluster Y_i and a word from that topic.
pub fn generate(config: &SimulationConfig) -> Result<LabeledCorpus, FitError> {
    config.validate()?;
    let beta = config.topics()?;
    let pi = cluster_proportions(config.lambda, config.q_star())?;
    let cluster_dist =
        WeightedIndex::new(pi.as_slice()).map_err(|e| FitError::Config(e.to_string()))?;
    let topic_dists = config
        .theta_star
        .iter()
        .map(|row| WeightedIndex::new(token_topic_law(row, config.epsilon)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| FitError::Config(e.to_string()))?;
    let word_dists = (0..beta.n_topics())
        .map(|k| WeightedIndex::new(beta.column(k)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| FitError::Config(e.to_string()))?;

    let docs = par::map_range(config.execution, config.n_docs, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64 + 1);
        let label = cluster_dist.sample(&mut rng);
        let mut counts = vec![0 as Count; beta.n_words()];
        for _ in 0..config.doc_length {
            let topic = topic_dists[label].sample(&mut rng);
            counts[word_dists[topic].sample(&mut rng)] += 1;
        }
        (label, counts)
    });

    let labels: Vec<usize> = docs.iter().map(|(l, _)| *l).collect();
    let triplets = docs.iter().enumerate().flat_map(|(i, (_, row))| {
        row.iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(w, &c)| (i, w, c))
    });
    let (counts, remap) = CountMatrix::from_triplets(config.n_docs, beta.n_words(), triplets)?;
    Ok(LabeledCorpus {
        counts,
        labels: Partition::new(labels, config.q_star())?,
        remap,
        beta_star: beta,
        config: config.clone(),
    })
}

/// Draws `n` topics from the ε-noised law of cluster `q` (test helper for
/// checking the token-level mechanism in isolation).
pub fn sample_topics<R: Rng + ?Sized>(
    theta_row: &[f64],
    epsilon: f64,
    n: usize,
    rng: &mut R,
) -> Vec<usize> {
    let dist = WeightedIndex::new(token_topic_law(theta_row, epsilon)).expect("valid law");
    (0..n).map(|_| dist.sample(rng)).collect()
}
