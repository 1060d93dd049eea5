use mmpca::simulate::{
    cluster_proportions, default_theta_star, generate, sample_topics, token_topic_law,
    SimulationConfig,
};
use mmpca::Execution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi_square(observed: &[u64], expected_probs: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    observed
        .iter()
        .zip(expected_probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

fn critical(dof: usize, level: f64) -> f64 {
    ChiSquared::new(dof as f64)
        .unwrap()
        .inverse_cdf(1.0 - level)
}

#[test]
fn topic_draws_follow_theta_rows() {
    let theta = default_theta_star();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for epsilon in [0.0, 0.3, 1.0] {
        for row in &theta {
            let draws = sample_topics(row, epsilon, 250 * 40, &mut rng);
            let mut counts = vec![0u64; row.len()];
            for t in draws {
                counts[t] += 1;
            }
            let law = token_topic_law(row, epsilon);
            assert!(chi_square(&counts, &law) < critical(row.len() - 1, 1e-4));
        }
    }
}

#[test]
fn cluster_labels_follow_proportions() {
    for lambda in [1.0, 0.85, 0.7] {
        let config = SimulationConfig {
            n_docs: 6000,
            doc_length: 1,
            lambda,
            seed: 7,
            execution: Execution::Sequential,
            ..Default::default()
        };
        let corpus = generate(&config).unwrap();
        let sizes: Vec<u64> = corpus.labels.sizes().iter().map(|&n| n as u64).collect();
        let pi = cluster_proportions(lambda, 6).unwrap();
        assert!(chi_square(&sizes, pi.as_slice()) < critical(5, 1e-4));
    }
}

#[test]
fn word_law_matches_the_noised_mixture() {
    for epsilon in [0.0, 0.5, 1.0] {
        let config = SimulationConfig {
            n_docs: 2400,
            doc_length: 2500,
            epsilon,
            seed: 8,
            execution: Execution::Parallel,
            ..Default::default()
        };
        let corpus = generate(&config).unwrap();
        let beta = &corpus.beta_star;
        let v = beta.n_words();
        for (q, row) in config.theta_star.iter().enumerate() {
            let law = token_topic_law(row, epsilon);
            let expected: Vec<f64> = (0..v)
                .map(|w| (0..law.len()).map(|k| beta.get(w, k) * law[k]).sum())
                .collect();
            let mut observed = vec![0u64; v];
            for i in (0..corpus.counts.n_docs()).filter(|&i| corpus.labels.label(i) == q) {
                let (words, counts) = corpus.counts.row(i);
                for (&w, &c) in words.iter().zip(counts) {
                    observed[corpus.remap.kept[w]] += u64::from(c);
                }
            }
            let total: u64 = observed.iter().sum();
            assert!(total >= 800_000, "cluster {q} has only {total} tokens");
            let tv: f64 = 0.5
                * observed
                    .iter()
                    .zip(&expected)
                    .map(|(&o, &e)| (o as f64 / total as f64 - e).abs())
                    .sum::<f64>();
            assert!(tv < 0.02, "epsilon {epsilon} cluster {q}: tv {tv}");
        }
    }
}

#[test]
fn parallel_generation_matches_sequential() {
    let base = SimulationConfig {
        n_docs: 50,
        epsilon: 0.2,
        lambda: 0.85,
        seed: 3,
        ..Default::default()
    };
    let seq = generate(&SimulationConfig {
        execution: Execution::Sequential,
        ..base.clone()
    })
    .unwrap();
    let par = generate(&SimulationConfig {
        execution: Execution::Parallel,
        ..base
    })
    .unwrap();
    assert_eq!(seq.counts, par.counts);
    assert_eq!(seq.labels, par.labels);
}
