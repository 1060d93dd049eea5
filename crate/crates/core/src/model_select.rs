//! ICL criterion and (Q, K) grid search.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::corpus::CountMatrix;
use crate::error::FitError;
use crate::lda::Alpha;
use crate::mmpca::{fit, initial_beta, BetaInit, FitConfig, FitResult};
use crate::par;

/// ICL = 𝓛* − K(V − 1)/2 · ln Q − (Q − 1)/2 · ln N.
pub fn icl(bound: f64, n_clusters: usize, n_topics: usize, n_words: usize, n_docs: usize) -> f64 {
    bound - penalty(n_clusters, n_topics, n_words, n_docs)
}

/// The dimension penalty subtracted from the bound by [`icl`].
pub fn penalty(n_clusters: usize, n_topics: usize, n_words: usize, n_docs: usize) -> f64 {
    let q = n_clusters as f64;
    let topics = n_topics as f64 * (n_words as f64 - 1.0) / 2.0 * q.ln();
    let mixture = (q - 1.0) / 2.0 * (n_docs as f64).ln();
    topics + mixture
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub n_clusters: usize,
    pub n_topics: usize,
    pub icl: f64,
    pub bound: f64,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n_clusters: usize,
    pub n_topics: usize,
    pub outcome: Result<ModelScore, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    /// Row-major over (Q, K).
    pub table: Vec<GridCell>,
    pub best: (usize, usize),
}

impl GridSearch {
    pub fn best_score(&self) -> &ModelScore {
        self.table
            .iter()
            .filter_map(|c| c.outcome.as_ref().ok())
            .find(|s| (s.n_clusters, s.n_topics) == self.best)
            .expect("best cell is present")
    }
}

/// Fits every (Q, K) cell and picks the highest ICL; ties go to the smaller
/// Q, then the smaller K. A failing cell is recorded, not fatal.
///
/// With `BetaInit::FromLda`, the LDA initialization depends only on K and
/// the seed, so it is computed once per K and shared by that column.
pub fn grid_search(
    x: &CountMatrix,
    q_range: RangeInclusive<usize>,
    k_range: RangeInclusive<usize>,
    config: &FitConfig,
) -> Result<GridSearch, FitError> {
    let cells: Vec<(usize, usize)> = q_range
        .clone()
        .flat_map(|q| k_range.clone().map(move |k| (q, k)))
        .collect();
    if cells.is_empty() {
        return Err(FitError::Config("empty Q or K range".into()));
    }

    let mut betas = BTreeMap::new();
    if config.beta_init == BetaInit::FromLda {
        let ks: Vec<usize> = k_range.clone().collect();
        let fitted = par::map_slice(config.execution, &ks, |&k| {
            Alpha::symmetric(k, config.alpha).and_then(|a| initial_beta(x, k, &a, config))
        });
        for (k, beta) in ks.into_iter().zip(fitted) {
            betas.insert(k, beta);
        }
    }

    let outcomes = par::map_slice(config.execution, &cells, |&(q, k)| {
        let cell_config = match betas.get(&k) {
            Some(Ok(beta)) => FitConfig {
                beta_init: BetaInit::Provided(beta.clone()),
                ..config.clone()
            },
            Some(Err(e)) => return Err(e.to_string()),
            None => config.clone(),
        };
        fit(x, q, k, &cell_config, None)
            .map(|mut f| {
                // report the configuration the caller asked for
                f.manifest.config.beta_init = config.beta_init.clone();
                ModelScore {
                    n_clusters: q,
                    n_topics: k,
                    icl: icl(f.bound, q, k, x.n_words(), x.n_docs()),
                    bound: f.bound,
                    fit: f,
                }
            })
            .map_err(|e| e.to_string())
    });

    let table: Vec<GridCell> = cells
        .iter()
        .zip(outcomes)
        .map(|(&(q, k), outcome)| GridCell {
            n_clusters: q,
            n_topics: k,
            outcome,
        })
        .collect();

    let mut best: Option<(f64, (usize, usize))> = None;
    for cell in &table {
        if let Ok(score) = &cell.outcome {
            if best.is_none_or(|(b, _)| score.icl > b) {
                best = Some((score.icl, (cell.n_clusters, cell.n_topics)));
            }
        }
    }
    match best {
        Some((_, best)) => Ok(GridSearch { table, best }),
        None => {
            let first = table
                .iter()
                .find_map(|c| c.outcome.as_ref().err().cloned())
                .unwrap_or_default();
            Err(FitError::AllCellsFailed(first))
        }
    }
}
