//! Independent reference implementations and random instance builders.
//!
//! Everything here works at the token level with dense loops so it shares
//! no code path with the library's collapsed sparse implementation.

#![allow(dead_code)]

use mmpca::lda::TopicMatrix;
use mmpca::special::{digamma, ln_gamma};
use mmpca::{CountMatrix, Partition};
use rand::seq::SliceRandom;
use rand::Rng;

/// A corpus with every document non-empty and every word used at least once.
pub fn random_corpus<R: Rng>(
    rng: &mut R,
    n_docs: usize,
    n_words: usize,
    max_len: u32,
) -> CountMatrix {
    let mut dense = vec![vec![0u32; n_words]; n_docs];
    for (i, row) in dense.iter_mut().enumerate() {
        // guarantee coverage of every column and every row
        row[i % n_words] += 1;
        let extra = rng.gen_range(0..max_len);
        for _ in 0..extra {
            row[rng.gen_range(0..n_words)] += 1;
        }
    }
    for v in n_docs..n_words {
        dense[rng.gen_range(0..n_docs)][v] += 1;
    }
    let (x, remap) = CountMatrix::from_dense(&dense).unwrap();
    assert_eq!(remap.n_dropped(), 0);
    x
}

pub fn random_beta<R: Rng>(rng: &mut R, n_words: usize, n_topics: usize) -> TopicMatrix {
    TopicMatrix::random(n_words, n_topics, rng)
}

/// Labels i % q shuffled, so every cluster is occupied when q ≤ n.
pub fn random_partition<R: Rng>(rng: &mut R, n: usize, q: usize) -> Partition {
    let mut labels: Vec<usize> = (0..n).map(|i| i % q).collect();
    labels.shuffle(rng);
    Partition::new(labels, q).unwrap()
}

/// Random positive γ and row-normalized φ for every document.
pub fn random_variational<R: Rng>(
    rng: &mut R,
    x: &CountMatrix,
    k: usize,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut gammas = Vec::new();
    let mut phis = Vec::new();
    for d in 0..x.n_docs() {
        let (words, _) = x.row(d);
        gammas.push((0..k).map(|_| rng.gen_range(0.05..20.0)).collect());
        let mut phi = Vec::with_capacity(words.len() * k);
        for _ in words {
            let row: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
            let s: f64 = row.iter().sum();
            phi.extend(row.iter().map(|p| p / s));
        }
        phis.push(phi);
    }
    (gammas, phis)
}

/// Document as a token sequence of word indices.
pub fn tokens(words: &[usize], counts: &[u32]) -> Vec<usize> {
    let mut out = Vec::new();
    for (&w, &c) in words.iter().zip(counts) {
        out.extend(std::iter::repeat_n(w, c as usize));
    }
    out
}

/// Per-document variational bound written out token by token with a dense
/// one-hot word vector for each token:
///
/// ```text
/// lnΓ(Σα) − Σ lnΓ(α_k) + Σ (α_k − 1) E[log θ_k]
/// + Σ_n Σ_k φ_nk [E[log θ_k] + Σ_v w_nv log β_vk]
/// − lnΓ(Σγ) + Σ lnΓ(γ_k) − Σ (γ_k − 1) E[log θ_k]
/// − Σ_n Σ_k φ_nk log φ_nk
/// ```
///
/// `token_phi[n]` is the K-vector of token n; `beta[v][k]`.
pub fn dense_document_bound(
    token_words: &[usize],
    token_phi: &[Vec<f64>],
    gamma: &[f64],
    beta: &[Vec<f64>],
    alpha: &[f64],
) -> f64 {
    let k = alpha.len();
    let v_total = beta.len();
    let gamma_sum: f64 = gamma.iter().sum();
    let elog: Vec<f64> = gamma
        .iter()
        .map(|&g| digamma(g) - digamma(gamma_sum))
        .collect();

    let mut prior = ln_gamma(alpha.iter().sum());
    for t in 0..k {
        prior -= ln_gamma(alpha[t]);
        prior += (alpha[t] - 1.0) * elog[t];
    }
    let mut likelihood = 0.0;
    let mut entropy_z = 0.0;
    for (n, &w) in token_words.iter().enumerate() {
        let one_hot: Vec<f64> = (0..v_total)
            .map(|v| if v == w { 1.0 } else { 0.0 })
            .collect();
        for t in 0..k {
            let p = token_phi[n][t];
            if p == 0.0 {
                continue;
            }
            let mut log_word = 0.0;
            for v in 0..v_total {
                if one_hot[v] != 0.0 {
                    log_word += one_hot[v] * beta[v][t].ln();
                }
            }
            likelihood += p * (elog[t] + log_word);
            entropy_z -= p * p.ln();
        }
    }
    let mut entropy_theta = -ln_gamma(gamma_sum);
    for t in 0..k {
        entropy_theta += ln_gamma(gamma[t]);
        entropy_theta -= (gamma[t] - 1.0) * elog[t];
    }
    prior + likelihood + entropy_theta + entropy_z
}

/// Dense V × K copy of a topic matrix.
pub fn beta_rows(beta: &TopicMatrix) -> Vec<Vec<f64>> {
    (0..beta.n_words())
        .map(|v| (0..beta.n_topics()).map(|k| beta.get(v, k)).collect())
        .collect()
}

/// Token-level coordinate ascent: every token gets its own φ_n, updated in
/// turn from the same γ, then γ = α + Σ_n φ_n. Returns (γ, per-token φ).
pub fn token_level_ve(
    token_words: &[usize],
    beta: &[Vec<f64>],
    alpha: &[f64],
    gamma_init: &[f64],
    iters: usize,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = alpha.len();
    let mut gamma = gamma_init.to_vec();
    let mut phi = vec![vec![0.0; k]; token_words.len()];
    for _ in 0..iters {
        let total: f64 = gamma.iter().sum();
        let weights: Vec<f64> = gamma
            .iter()
            .map(|&g| (digamma(g) - digamma(total)).exp())
            .collect();
        for (n, &w) in token_words.iter().enumerate() {
            let raw: Vec<f64> = (0..k).map(|t| beta[w][t] * weights[t]).collect();
            let z: f64 = raw.iter().sum();
            phi[n] = raw.iter().map(|r| r / z).collect();
        }
        gamma = (0..k)
            .map(|t| alpha[t] + phi.iter().map(|p| p[t]).sum::<f64>())
            .collect();
    }
    (gamma, phi)
}

/// Full classification bound from scratch: each meta-observation expanded
/// to tokens, its per-word φ copied to every token of that word.
pub fn dense_mmpca_bound(
    meta_rows: &[Vec<u32>],
    gammas: &[Vec<f64>],
    phis: &[(Vec<usize>, Vec<f64>)],
    beta: &TopicMatrix,
    alpha: &[f64],
    sizes: &[usize],
    pi: &[f64],
) -> f64 {
    let k = alpha.len();
    let dense_beta = beta_rows(beta);
    let mut total = 0.0;
    for (q, row) in meta_rows.iter().enumerate() {
        let (words, phi) = &phis[q];
        let mut token_words = Vec::new();
        let mut token_phi = Vec::new();
        for (j, &w) in words.iter().enumerate() {
            for _ in 0..row[w] {
                token_words.push(w);
                token_phi.push(phi[j * k..(j + 1) * k].to_vec());
            }
        }
        total += dense_document_bound(&token_words, &token_phi, &gammas[q], &dense_beta, alpha);
    }
    for (q, &n) in sizes.iter().enumerate() {
        if n > 0 {
            total += n as f64 * pi[q].ln();
        }
    }
    total
}

/// Adjusted Rand Index by direct enumeration of all pairs.
pub fn ari_by_pairs(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut in_a, mut in_b, mut pairs) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            pairs += 1;
            both += u64::from(sa && sb);
            in_a += u64::from(sa);
            in_b += u64::from(sb);
        }
    }
    let expected = in_a as f64 * in_b as f64 / pairs as f64;
    let max = 0.5 * (in_a + in_b) as f64;
    if max == expected {
        let same = (0..n).all(|i| (i + 1..n).all(|j| (a[i] == a[j]) == (b[i] == b[j])));
        return if same { 1.0 } else { 0.0 };
    }
    (both as f64 - expected) / (max - expected)
}

/// Relative-tolerance check that a trace never decreases.
pub fn nondecreasing(trace: &[f64], rel: f64) -> Result<(), String> {
    for (i, w) in trace.windows(2).enumerate() {
        let slack = rel * w[0].abs().max(w[1].abs()).max(1.0);
        if w[1] < w[0] - slack {
            return Err(format!("step {i}: {} -> {}", w[0], w[1]));
        }
    }
    Ok(())
}
