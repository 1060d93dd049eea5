//! Variational EM for latent Dirichlet allocation on sparse counts.
//!
//! Responsibilities are stored per (document, word type) rather than per
//! token: the optimal φ for a token depends on the token only through its
//! word, so all copies of a word in a document share one vector and the
//! token multiplicity enters as a weight.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Count, CountMatrix};
use crate::error::{FitError, NumericError};
use crate::par::{self, Execution};
use crate::special::{digamma, ln_gamma};

/// Pseudocount added to every cell of β in the M-step.
pub const BETA_SMOOTHING: f64 = 1e-8;

/// Dirichlet prior α on topic proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alpha(Vec<f64>);

impl Alpha {
    pub fn new(values: Vec<f64>) -> Result<Self, FitError> {
        if values.is_empty() {
            return Err(FitError::Config(
                "alpha must have at least one entry".into(),
            ));
        }
        if values.iter().any(|&a| a <= 0.0 || !a.is_finite()) {
            return Err(FitError::Config(
                "alpha entries must be positive and finite".into(),
            ));
        }
        Ok(Self(values))
    }

    pub fn symmetric(k: usize, value: f64) -> Result<Self, FitError> {
        Self::new(vec![value; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// log Γ(Σ α) − Σ log Γ(α_k)
    fn log_normalizer(&self) -> f64 {
        ln_gamma(self.0.iter().sum()) - self.0.iter().map(|&a| ln_gamma(a)).sum::<f64>()
    }
}

/// V×K matrix of topic-word probabilities; every column sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMatrix {
    n_words: usize,
    n_topics: usize,
    /// row-major, `data[v * n_topics + k]`
    data: Vec<f64>,
}

impl TopicMatrix {
    pub fn new(n_words: usize, n_topics: usize, data: Vec<f64>) -> Result<Self, FitError> {
        if data.len() != n_words * n_topics {
            return Err(FitError::Shape {
                expected: (n_words, n_topics),
                found: (data.len() / n_topics.max(1), n_topics),
            });
        }
        if data.iter().any(|&b| b < 0.0 || !b.is_finite()) {
            return Err(FitError::Config(
                "topic probabilities must be finite and >= 0".into(),
            ));
        }
        let m = Self {
            n_words,
            n_topics,
            data,
        };
        for k in 0..n_topics {
            let s: f64 = (0..n_words).map(|v| m.get(v, k)).sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(FitError::Config(format!("topic {k} sums to {s}, not 1")));
            }
        }
        Ok(m)
    }

    /// Builds a matrix from K columns of length V, normalizing each column.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self, FitError> {
        let k = columns.len();
        let v = columns.first().map_or(0, |c| c.len());
        let mut data = vec![0.0; v * k];
        for (t, col) in columns.iter().enumerate() {
            let total: f64 = col.iter().sum();
            for (w, &x) in col.iter().enumerate() {
                data[w * k + t] = x / total;
            }
        }
        Self::new(v, k, data)
    }

    /// Random strictly positive topics, β_vk ∝ 1/V + U(0, 1).
    pub fn random<R: Rng + ?Sized>(n_words: usize, n_topics: usize, rng: &mut R) -> Self {
        let mut data: Vec<f64> = (0..n_words * n_topics)
            .map(|_| 1.0 / n_words as f64 + rng.gen::<f64>())
            .collect();
        normalize_columns(&mut data, n_words, n_topics);
        Self {
            n_words,
            n_topics,
            data,
        }
    }

    pub fn n_words(&self) -> usize {
        self.n_words
    }

    pub fn n_topics(&self) -> usize {
        self.n_topics
    }

    #[inline]
    pub fn get(&self, v: usize, k: usize) -> f64 {
        self.data[v * self.n_topics + k]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n_words).map(|v| self.get(v, k)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Element-wise natural log, same layout.
    pub fn ln(&self) -> Vec<f64> {
        self.data.iter().map(|&b| b.ln()).collect()
    }

    /// Keeps only the listed rows and renormalizes columns.
    pub fn restrict_rows(&self, rows: &[usize]) -> Result<Self, FitError> {
        let k = self.n_topics;
        let mut data = Vec::with_capacity(rows.len() * k);
        for &v in rows {
            data.extend_from_slice(&self.data[v * k..(v + 1) * k]);
        }
        normalize_columns(&mut data, rows.len(), k);
        Self::new(rows.len(), k, data)
    }
}

fn normalize_columns(data: &mut [f64], n_words: usize, n_topics: usize) {
    let mut totals = vec![0.0; n_topics];
    for v in 0..n_words {
        for k in 0..n_topics {
            totals[k] += data[v * n_topics + k];
        }
    }
    for v in 0..n_words {
        for k in 0..n_topics {
            data[v * n_topics + k] /= totals[k];
        }
    }
}

/// Variational Dirichlet parameters γ, one K-vector per document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams(pub Vec<Vec<f64>>);

/// φ per document: `docs[d][j * K + k]` for the j-th nonzero word of d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Responsibilities {
    pub n_topics: usize,
    pub docs: Vec<Vec<f64>>,
}

/// Iteration budget for the VE fixed point on one document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VeSettings {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for VeSettings {
    fn default() -> Self {
        Self {
            max_iters: 25,
            tol: 1e-8,
        }
    }
}

/// Result of the VE fixed point on a single document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocFit {
    pub gamma: Vec<f64>,
    /// `phi[j * K + k]`, aligned with the document's word list.
    pub phi: Vec<f64>,
    /// Bound contribution of this document at (γ, φ).
    pub bound: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// E_q[log θ_k] = ψ(γ_k) − ψ(Σ γ)
fn expected_log_theta(gamma: &[f64], out: &mut [f64]) {
    let total = digamma(gamma.iter().sum());
    for (o, &g) in out.iter_mut().zip(gamma) {
        *o = digamma(g) - total;
    }
}

/// Initial γ for a cold start: α_k + L / K.
pub fn default_gamma(alpha: &Alpha, length: f64) -> Vec<f64> {
    let k = alpha.len() as f64;
    alpha.as_slice().iter().map(|&a| a + length / k).collect()
}

/// Alternates φ and γ updates for one document until the document's bound
/// changes by less than `settings.tol` (relative) or the budget runs out.
///
/// `log_beta` is the V×K row-major log of the topic matrix. On return γ
/// satisfies γ_k = α_k + Σ_v x_v φ_vk for the returned φ.
pub fn ve_step(
    words: &[usize],
    counts: &[Count],
    log_beta: &[f64],
    alpha: &Alpha,
    gamma_init: &[f64],
    settings: VeSettings,
) -> Result<DocFit, NumericError> {
    let k = alpha.len();
    let rows = gather_rows(words, k, log_beta, f64::exp);
    ve_core(words, counts, &rows, log_beta, alpha, gamma_init, settings)
}

/// Rows of a V×K row-major table for `words`, packed j*K + k.
pub(crate) fn gather_rows(
    words: &[usize],
    k: usize,
    table: &[f64],
    map: fn(f64) -> f64,
) -> Vec<f64> {
    let mut rows = Vec::with_capacity(words.len() * k);
    for &w in words {
        rows.extend(table[w * k..(w + 1) * k].iter().map(|&v| map(v)));
    }
    rows
}

/// [`ve_step`] with the linear β rows of the document's words precomputed.
pub(crate) fn ve_core(
    words: &[usize],
    counts: &[Count],
    beta_rows: &[f64],
    log_beta: &[f64],
    alpha: &Alpha,
    gamma_init: &[f64],
    settings: VeSettings,
) -> Result<DocFit, NumericError> {
    let k = alpha.len();
    debug_assert_eq!(beta_rows.len(), words.len() * k);
    debug_assert_eq!(gamma_init.len(), k);
    let log_norm = alpha.log_normalizer();
    let alpha = alpha.as_slice();

    let mut gamma = gamma_init.to_vec();
    let mut next_gamma = vec![0.0; k];
    let mut phi = vec![0.0; words.len() * k];
    let mut elog = vec![0.0; k];
    let mut scores = vec![0.0; k];
    let mut weights = vec![0.0; k];
    let mut previous = f64::NAN;
    let mut bound = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..settings.max_iters.max(1) {
        iterations += 1;
        expected_log_theta(&gamma, &mut elog);
        // exp(E[log θ_k] − max) in (0, 1]; β_vk times these is a shifted φ score.
        let shift = elog.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for t in 0..k {
            weights[t] = (elog[t] - shift).exp();
        }
        next_gamma.copy_from_slice(alpha);
        let mut word_term = 0.0;
        for (j, (&w, &c)) in words.iter().zip(counts).enumerate() {
            let out = &mut phi[j * k..(j + 1) * k];
            let beta_row = &beta_rows[j * k..(j + 1) * k];
            let mut z = 0.0;
            for t in 0..k {
                out[t] = beta_row[t] * weights[t];
                z += out[t];
            }
            let log_z = if z >= f64::MIN_POSITIVE && z.is_finite() {
                for p in out.iter_mut() {
                    *p /= z;
                }
                shift + z.ln()
            } else {
                // underflow: redo this word in log space with max-subtraction
                let row = &log_beta[w * k..(w + 1) * k];
                let mut max = f64::NEG_INFINITY;
                for t in 0..k {
                    scores[t] = row[t] + elog[t];
                    max = max.max(scores[t]);
                }
                if !max.is_finite() {
                    return Err(NumericError::NonFinite { word: w });
                }
                let mut z = 0.0;
                for t in 0..k {
                    out[t] = (scores[t] - max).exp();
                    z += out[t];
                }
                for p in out.iter_mut() {
                    *p /= z;
                }
                max + z.ln()
            };
            let c = c as f64;
            for t in 0..k {
                next_gamma[t] += c * out[t];
            }
            word_term += c * log_z;
        }
        // With γ' = α + Σ x φ the E[log θ'] terms cancel, and with φ optimal
        // for γ the word terms collapse to Σ x log Z − Σ (γ' − α) E[log θ].
        let mut value = log_norm - ln_gamma(next_gamma.iter().sum()) + word_term;
        for t in 0..k {
            value += ln_gamma(next_gamma[t]) - (next_gamma[t] - alpha[t]) * elog[t];
        }
        std::mem::swap(&mut gamma, &mut next_gamma);
        if !value.is_finite() {
            return Err(NumericError::NonFinite {
                word: words.first().copied().unwrap_or(0),
            });
        }
        bound = value;
        if (bound - previous).abs() <= settings.tol * bound.abs() {
            converged = true;
            break;
        }
        previous = bound;
    }

    Ok(DocFit {
        gamma,
        phi,
        bound,
        converged,
        iterations,
    })
}

/// Bound contribution of one document, evaluated term by term.
pub fn elbo_document(
    words: &[usize],
    counts: &[Count],
    gamma: &[f64],
    phi: &[f64],
    log_beta: &[f64],
    alpha: &Alpha,
) -> Result<f64, NumericError> {
    let k = alpha.len();
    let mut elog = vec![0.0; k];
    expected_log_theta(gamma, &mut elog);
    let a = alpha.as_slice();

    let mut value = alpha.log_normalizer();
    value -= ln_gamma(gamma.iter().sum());
    for t in 0..k {
        value += (a[t] - 1.0) * elog[t];
        value += ln_gamma(gamma[t]);
        value -= (gamma[t] - 1.0) * elog[t];
    }
    for (j, (&w, &c)) in words.iter().zip(counts).enumerate() {
        let c = c as f64;
        for t in 0..k {
            let p = phi[j * k + t];
            if p <= 0.0 {
                continue;
            }
            let lb = log_beta[w * k + t];
            if !lb.is_finite() {
                return Err(NumericError::ZeroTopicProbability { word: w, topic: t });
            }
            value += c * p * (elog[t] + lb - p.ln());
        }
    }
    Ok(value)
}

/// Σ_d of the per-document bounds over a whole corpus.
pub fn elbo_lda(
    corpus: &CountMatrix,
    gamma: &DirichletParams,
    phi: &Responsibilities,
    beta: &TopicMatrix,
    alpha: &Alpha,
) -> Result<f64, NumericError> {
    let log_beta = beta.ln();
    let mut total = 0.0;
    for d in 0..corpus.n_docs() {
        let (words, counts) = corpus.row(d);
        total += elbo_document(words, counts, &gamma.0[d], &phi.docs[d], &log_beta, alpha)?;
    }
    Ok(total)
}

/// β_vk ∝ δ + Σ_d x_dv φ_dvk over any collection of sparse documents.
pub(crate) fn m_step_from_docs<'a, I>(n_words: usize, n_topics: usize, docs: I) -> TopicMatrix
where
    I: IntoIterator<Item = (&'a [usize], &'a [Count], &'a [f64])>,
{
    let k = n_topics;
    let mut data = vec![0.0; n_words * k];
    for (words, counts, phi) in docs {
        for (j, (&w, &c)) in words.iter().zip(counts).enumerate() {
            let c = c as f64;
            for t in 0..k {
                data[w * k + t] += c * phi[j * k + t];
            }
        }
    }
    for t in 0..k {
        let mass: f64 = (0..n_words).map(|v| data[v * k + t]).sum();
        if mass <= 0.0 {
            log::warn!("topic {t} has no responsibility mass; its column is uniform");
        }
    }
    for x in data.iter_mut() {
        *x += BETA_SMOOTHING;
    }
    normalize_columns(&mut data, n_words, k);
    TopicMatrix {
        n_words,
        n_topics: k,
        data,
    }
}

/// M-step for β given responsibilities on `corpus`.
pub fn m_step_beta(corpus: &CountMatrix, phi: &Responsibilities) -> TopicMatrix {
    m_step_from_docs(
        corpus.n_words(),
        phi.n_topics,
        (0..corpus.n_docs()).map(|d| {
            let (w, c) = corpus.row(d);
            (w, c, phi.docs[d].as_slice())
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub max_em_iters: usize,
    pub em_tol: f64,
    pub ve: VeSettings,
    pub seed: u64,
    pub restarts: usize,
    pub execution: Execution,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            max_em_iters: 100,
            em_tol: 1e-6,
            ve: VeSettings::default(),
            seed: 0,
            restarts: 5,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaFit {
    pub beta: TopicMatrix,
    pub gamma: DirichletParams,
    pub phi: Responsibilities,
    pub bound: f64,
    /// Bound after every E-step.
    pub trace: Vec<f64>,
    pub restart: usize,
}

/// Variational EM for LDA with K topics; keeps the best of `restarts`
/// random initializations.
pub fn fit_lda(
    corpus: &CountMatrix,
    n_topics: usize,
    alpha: &Alpha,
    config: &LdaConfig,
) -> Result<LdaFit, FitError> {
    if n_topics == 0 {
        return Err(FitError::Config("number of topics must be >= 1".into()));
    }
    if alpha.len() != n_topics {
        return Err(FitError::Config(format!(
            "alpha has {} entries for {} topics",
            alpha.len(),
            n_topics
        )));
    }
    let tokens = corpus.total_tokens();
    if n_topics as u64 > tokens {
        return Err(FitError::TooManyTopics {
            topics: n_topics,
            tokens,
        });
    }
    if config.restarts == 0 || config.max_em_iters == 0 {
        return Err(FitError::Config(
            "restarts and max_em_iters must be >= 1".into(),
        ));
    }

    let runs = par::map_range(config.execution, config.restarts, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(r as u64);
        let beta = TopicMatrix::random(corpus.n_words(), n_topics, &mut rng);
        run_em(corpus, beta, alpha, config).map(|mut fit| {
            fit.restart = r;
            fit
        })
    });
    let mut best: Option<LdaFit> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.bound > b.bound) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn e_step(
    corpus: &CountMatrix,
    beta: &TopicMatrix,
    log_beta: &[f64],
    alpha: &Alpha,
    gammas: &[Vec<f64>],
    settings: VeSettings,
    exec: Execution,
) -> Result<Vec<DocFit>, NumericError> {
    par::map_range(exec, corpus.n_docs(), |d| {
        let (words, counts) = corpus.row(d);
        let rows = gather_rows(words, alpha.len(), beta.as_slice(), std::convert::identity);
        ve_core(words, counts, &rows, log_beta, alpha, &gammas[d], settings)
    })
    .into_iter()
    .collect()
}

/// EM iterations from a given β. Every E-step is warm-started from the
/// previous γ so the bound trace is monotone.
pub fn run_em(
    corpus: &CountMatrix,
    mut beta: TopicMatrix,
    alpha: &Alpha,
    config: &LdaConfig,
) -> Result<LdaFit, FitError> {
    let mut gammas: Vec<Vec<f64>> = corpus
        .doc_lengths()
        .iter()
        .map(|&l| default_gamma(alpha, l as f64))
        .collect();
    let mut trace = Vec::new();
    let mut fits = Vec::new();
    for iter in 0..config.max_em_iters {
        let log_beta = beta.ln();
        fits = e_step(
            corpus,
            &beta,
            &log_beta,
            alpha,
            &gammas,
            config.ve,
            config.execution,
        )?;
        let bound: f64 = fits.iter().map(|f| f.bound).sum();
        let done = trace
            .last()
            .is_some_and(|&prev: &f64| (bound - prev).abs() <= config.em_tol * bound.abs());
        trace.push(bound);
        gammas = fits.iter().map(|f| f.gamma.clone()).collect();
        if done || iter + 1 == config.max_em_iters {
            break;
        }
        beta = m_step_from_docs(
            corpus.n_words(),
            alpha.len(),
            fits.iter().enumerate().map(|(d, f)| {
                let (w, c) = corpus.row(d);
                (w, c, f.phi.as_slice())
            }),
        );
    }
    Ok(LdaFit {
        beta,
        gamma: DirichletParams(gammas),
        phi: Responsibilities {
            n_topics: alpha.len(),
            docs: fits.into_iter().map(|f| f.phi).collect(),
        },
        bound: *trace.last().expect("at least one iteration"),
        trace,
        restart: 0,
    })
}
