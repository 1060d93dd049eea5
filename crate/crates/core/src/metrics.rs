//! External clustering indices.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("label length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("at least two observations are required, got {0}")]
    TooFew(usize),
}

/// Co-occurrence counts of two labelings; rows follow `a`, columns `b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub table: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.table.iter().flatten().sum()
    }
}

/// `table[p][q] = #{i : a_i = p, b_i = q}`, sized by the largest labels.
pub fn confusion(a: &[usize], b: &[usize]) -> Result<ConfusionMatrix, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let rows = a.iter().max().map_or(0, |m| m + 1);
    let cols = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; cols]; rows];
    for (&p, &q) in a.iter().zip(b) {
        table[p][q] += 1;
    }
    Ok(ConfusionMatrix { table })
}

fn comb2(n: u64) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand Index from the contingency table.
///
/// When the chance-corrected denominator vanishes (both labelings put all
/// observations in one cluster, or both are all singletons) the result is 1
/// if the two labelings induce the same pair relation and 0 otherwise.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(MetricError::TooFew(n));
    }
    let mut left: HashMap<usize, u64> = HashMap::new();
    let mut right: HashMap<usize, u64> = HashMap::new();
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    for (&p, &q) in a.iter().zip(b) {
        *left.entry(p).or_default() += 1;
        *right.entry(q).or_default() += 1;
        *joint.entry((p, q)).or_default() += 1;
    }
    let index: f64 = joint.values().map(|&c| comb2(c)).sum();
    let sum_a: f64 = left.values().map(|&c| comb2(c)).sum();
    let sum_b: f64 = right.values().map(|&c| comb2(c)).sum();
    let expected = sum_a * sum_b / comb2(n as u64);
    let max_index = 0.5 * (sum_a + sum_b);
    let denominator = max_index - expected;
    if denominator == 0.0 {
        // Identical pair relations iff every joint cell is a full row and column.
        let same = left.len() == joint.len() && right.len() == joint.len();
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denominator)
}
