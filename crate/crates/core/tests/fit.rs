mod common;

use mmpca::mmpca::{fit, BetaInit, FitConfig, PartitionInit};
use mmpca::model_select::{grid_search, icl};
use mmpca::{CountMatrix, Execution, FitError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_config(seed: u64) -> FitConfig {
    let mut config = FitConfig {
        seed,
        restarts: 3,
        execution: Execution::Sequential,
        ..Default::default()
    };
    config.lda.restarts = 2;
    config.lda.max_em_iters = 30;
    config
}

fn corpus(seed: u64) -> CountMatrix {
    common::random_corpus(&mut ChaCha8Rng::seed_from_u64(seed), 40, 50, 60)
}

#[test]
fn traces_are_nondecreasing() {
    for seed in 0..4 {
        let x = corpus(seed);
        for beta_refresh in [false, true] {
            let config = FitConfig {
                beta_refresh,
                ..small_config(seed)
            };
            let result = fit(&x, 3, 2, &config, None).unwrap();
            common::nondecreasing(&result.bound_trace, 1e-8).unwrap();
            assert_eq!(*result.bound_trace.last().unwrap(), result.bound);
        }
    }
}

#[test]
fn best_restart_has_the_highest_bound() {
    let x = corpus(10);
    let result = fit(&x, 3, 2, &small_config(10), None).unwrap();
    assert_eq!(result.restarts.len(), 3);
    let max = result
        .restarts
        .iter()
        .map(|r| r.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(result.bound, max);
    assert_eq!(result.restarts[result.best_restart].bound, max);
}

#[test]
fn single_cluster() {
    let x = corpus(11);
    let result = fit(&x, 1, 2, &small_config(11), None).unwrap();
    assert!(result.partition.labels().iter().all(|&l| l == 0));
    assert_eq!(result.pi.as_slice(), &[1.0]);
    assert_eq!(result.swaps_per_epoch, vec![0]);
    assert_eq!(
        icl(result.bound, 1, 2, x.n_words(), x.n_docs()),
        result.bound
    );
}

#[test]
fn same_seed_same_result() {
    let x = corpus(12);
    let a = fit(&x, 3, 2, &small_config(5), None).unwrap();
    let b = fit(&x, 3, 2, &small_config(5), None).unwrap();
    assert_eq!(a, b);
    let par = fit(
        &x,
        3,
        2,
        &FitConfig {
            execution: Execution::Parallel,
            ..small_config(5)
        },
        None,
    )
    .unwrap();
    assert_eq!(a.partition, par.partition);
    assert_eq!(a.bound.to_bits(), par.bound.to_bits());
}

#[test]
fn ari_trace_follows_bound_trace() {
    let x = corpus(13);
    let truth: Vec<usize> = (0..x.n_docs()).map(|i| i % 3).collect();
    let result = fit(&x, 3, 2, &small_config(1), Some(&truth)).unwrap();
    let aris = result.ari_trace.unwrap();
    assert_eq!(aris.len(), result.bound_trace.len());
    assert!(aris.iter().all(|a| (-1.0..=1.0).contains(a)));
}

#[test]
fn provided_initialization_is_used() {
    let x = corpus(14);
    let labels: Vec<usize> = (0..x.n_docs()).map(|i| i % 2).collect();
    let config = FitConfig {
        partition_init: PartitionInit::Provided(labels.clone()),
        max_epochs: 1,
        restarts: 1,
        beta_init: BetaInit::Random,
        ..small_config(3)
    };
    let result = fit(&x, 2, 2, &config, None).unwrap();
    let moved = labels
        .iter()
        .zip(result.partition.labels())
        .filter(|(a, b)| a != b)
        .count();
    assert_eq!(moved, result.swaps_per_epoch[0].min(moved));
    assert!(result.swaps_per_epoch[0] >= moved);
}

#[test]
fn rejected_configurations() {
    let x = corpus(15);
    assert!(matches!(
        fit(&x, 41, 2, &small_config(0), None),
        Err(FitError::TooManyClusters {
            clusters: 41,
            docs: 40
        })
    ));
    let no_epochs = FitConfig {
        max_epochs: 0,
        ..small_config(0)
    };
    assert!(matches!(
        fit(&x, 2, 2, &no_epochs, None),
        Err(FitError::Config(_))
    ));
    let short_truth = vec![0; 3];
    assert!(fit(&x, 2, 2, &small_config(0), Some(&short_truth)).is_err());
    let empty = FitConfig {
        partition_init: PartitionInit::Provided(vec![0; 40]),
        ..small_config(0)
    };
    assert!(fit(&x, 2, 2, &empty, None).is_err());
}

#[test]
fn grid_search_scores_every_cell() {
    let x = corpus(16);
    let config = FitConfig {
        restarts: 1,
        ..small_config(2)
    };
    let grid = grid_search(&x, 1..=3, 2..=3, &config).unwrap();
    assert_eq!(grid.table.len(), 6);
    let best = grid.best_score();
    for cell in &grid.table {
        let score = cell.outcome.as_ref().unwrap();
        let expected = icl(
            score.bound,
            cell.n_clusters,
            cell.n_topics,
            x.n_words(),
            x.n_docs(),
        );
        assert_eq!(score.icl, expected);
        assert!(score.icl <= best.icl);
    }
    let single = grid_search(&x, 2..=2, 2..=2, &config).unwrap();
    assert_eq!(single.best, (2, 2));
    #[allow(clippy::reversed_empty_ranges)]
    let empty = grid_search(&x, 3..=2, 2..=2, &config);
    assert!(empty.is_err());
}
