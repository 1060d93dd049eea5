//! Greedy classification VEM for the mixture of multinomial PCA.
//!
//! The state keeps one LDA variational fit per meta-observation. A
//! candidate move of observation `i` from cluster `l` to `q` re-runs the VE
//! step on the two affected meta-observations only, warm-started from their
//! current γ, and is scored by the change of the full bound with π at its
//! closed-form optimum N_q / N. Within an epoch observations are visited in
//! a seeded random order and the best strictly positive move is taken.

use std::convert::identity;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{aggregate, Count, CountMatrix, MetaCorpus};
use crate::error::{FitError, NumericError};
use crate::lda::{
    default_gamma, elbo_document, fit_lda, gather_rows, m_step_from_docs, ve_core, Alpha, DocFit,
    LdaConfig, TopicMatrix, VeSettings,
};
use crate::metrics::ari;
use crate::par::{self, Execution};
pub use crate::partition::{clustering_term, MixtureWeights, Partition};
use crate::partition::{clustering_term_from_sizes, optimal_clustering_term};

/// How the topic matrix is initialized before the greedy search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaInit {
    /// LDA with K topics on the raw observations.
    FromLda,
    Provided(TopicMatrix),
    Random,
}

/// How each restart's partition is initialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionInit {
    RandomBalanced,
    Provided(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Maximum number of greedy epochs T.
    pub max_epochs: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Symmetric Dirichlet prior value for every α_k.
    pub alpha: f64,
    /// VE iterations per tentative swap.
    pub swap_ve_iters: usize,
    /// VE settings for full passes over the meta-observations.
    pub ve: VeSettings,
    pub beta_init: BetaInit,
    pub partition_init: PartitionInit,
    /// Re-estimate β on the meta-observations at the end of each epoch.
    pub beta_refresh: bool,
    /// Settings of the LDA used for `BetaInit::FromLda`; its seed is
    /// replaced by `seed`.
    pub lda: LdaConfig,
    pub execution: Execution,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_epochs: 7,
            restarts: 5,
            seed: 0,
            alpha: 1.0,
            swap_ve_iters: 5,
            ve: VeSettings::default(),
            beta_init: BetaInit::FromLda,
            partition_init: PartitionInit::RandomBalanced,
            beta_refresh: false,
            lda: LdaConfig::default(),
            execution: Execution::default(),
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<(), FitError> {
        if self.max_epochs == 0 {
            return Err(FitError::Config("max_epochs must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(FitError::Config("restarts must be >= 1".into()));
        }
        if self.swap_ve_iters == 0 || self.ve.max_iters == 0 {
            return Err(FitError::Config("VE iteration counts must be >= 1".into()));
        }
        Ok(())
    }

    /// VE settings for the two tentative refits of a swap.
    pub fn swap_settings(&self) -> VeSettings {
        VeSettings {
            max_iters: self.swap_ve_iters,
            tol: self.ve.tol,
        }
    }
}

/// Seeded partition initialization.
pub fn init_partition(
    n: usize,
    q: usize,
    seed: u64,
    strategy: &PartitionInit,
) -> Result<Partition, FitError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    initial_partition(n, q, strategy, &mut rng)
}

fn initial_partition<R: Rng + ?Sized>(
    n: usize,
    q: usize,
    strategy: &PartitionInit,
    rng: &mut R,
) -> Result<Partition, FitError> {
    match strategy {
        PartitionInit::RandomBalanced => Partition::random_balanced(n, q, rng),
        PartitionInit::Provided(labels) => {
            if labels.len() != n {
                return Err(FitError::Config(format!(
                    "initial partition has {} labels for {n} observations",
                    labels.len()
                )));
            }
            let p = Partition::new(labels.clone(), q)?;
            if !p.all_occupied() {
                return Err(FitError::Config(
                    "initial partition leaves a cluster empty".into(),
                ));
            }
            Ok(p)
        }
    }
}

/// Variational fit of one meta-observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFit {
    pub words: Vec<usize>,
    pub counts: Vec<Count>,
    pub fit: DocFit,
}

impl ClusterFit {
    pub fn gamma(&self) -> &[f64] {
        &self.fit.gamma
    }

    pub fn phi(&self) -> &[f64] {
        &self.fit.phi
    }

    /// Cached LDA bound of this meta-observation.
    pub fn bound(&self) -> f64 {
        self.fit.bound
    }
}

/// A scored tentative move; applying it does not require recomputation.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapDelta {
    pub doc: usize,
    pub from: usize,
    pub to: usize,
    pub delta: f64,
    pub new_from: ClusterFit,
    pub new_to: ClusterFit,
    pub new_pi: MixtureWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SwapOutcome {
    /// Candidate equals the current cluster; Δ = 0.
    Stay,
    /// The current cluster would become empty.
    Inadmissible,
    Move(Box<SwapDelta>),
}

impl SwapOutcome {
    pub fn delta(&self) -> Option<f64> {
        match self {
            SwapOutcome::Stay => Some(0.0),
            SwapOutcome::Inadmissible => None,
            SwapOutcome::Move(s) => Some(s.delta),
        }
    }
}

/// Partition, meta-observations, and variational parameters of one run.
#[derive(Debug, Clone)]
pub struct MmpcaState<'a> {
    x: &'a CountMatrix,
    partition: Partition,
    meta: MetaCorpus,
    beta: TopicMatrix,
    log_beta: Vec<f64>,
    alpha: Alpha,
    clusters: Vec<ClusterFit>,
    pi: MixtureWeights,
    bound: f64,
    swap_settings: VeSettings,
    ve_settings: VeSettings,
    execution: Execution,
}

impl<'a> MmpcaState<'a> {
    /// Aggregates `x` under `partition` and runs a full VE pass on every
    /// meta-observation.
    pub fn new(
        x: &'a CountMatrix,
        partition: Partition,
        beta: TopicMatrix,
        alpha: Alpha,
        ve_settings: VeSettings,
        swap_settings: VeSettings,
        execution: Execution,
    ) -> Result<Self, FitError> {
        if beta.n_words() != x.n_words() || beta.n_topics() != alpha.len() {
            return Err(FitError::Shape {
                expected: (x.n_words(), alpha.len()),
                found: (beta.n_words(), beta.n_topics()),
            });
        }
        if !partition.all_occupied() {
            return Err(FitError::Config("partition leaves a cluster empty".into()));
        }
        let meta = aggregate(x, &partition)?;
        let log_beta = beta.ln();
        let clusters = par::map_range(execution, meta.n_clusters(), |q| {
            let (words, counts) = meta.sparse_row(q);
            let length: f64 = counts.iter().map(|&c| c as f64).sum();
            let rows = gather_rows(&words, alpha.len(), beta.as_slice(), identity);
            let fit = ve_core(
                &words,
                &counts,
                &rows,
                &log_beta,
                &alpha,
                &default_gamma(&alpha, length),
                ve_settings,
            )?;
            Ok(ClusterFit { words, counts, fit })
        })
        .into_iter()
        .collect::<Result<Vec<_>, NumericError>>()?;
        let pi = MixtureWeights::estimate(&partition);
        let mut state = Self {
            x,
            partition,
            meta,
            beta,
            log_beta,
            alpha,
            clusters,
            pi,
            bound: 0.0,
            swap_settings,
            ve_settings,
            execution,
        };
        state.bound = state.cached_bound()?;
        Ok(state)
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn meta(&self) -> &MetaCorpus {
        &self.meta
    }

    pub fn beta(&self) -> &TopicMatrix {
        &self.beta
    }

    pub fn pi(&self) -> &MixtureWeights {
        &self.pi
    }

    pub fn clusters(&self) -> &[ClusterFit] {
        &self.clusters
    }

    pub fn gamma(&self) -> Vec<Vec<f64>> {
        self.clusters.iter().map(|c| c.fit.gamma.clone()).collect()
    }

    /// Current bound 𝓛, maintained incrementally.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn n_clusters(&self) -> usize {
        self.partition.n_clusters()
    }

    fn cached_bound(&self) -> Result<f64, NumericError> {
        let lda: f64 = self.clusters.iter().map(|c| c.fit.bound).sum();
        Ok(lda + clustering_term_from_sizes(self.meta.cluster_sizes(), self.pi.as_slice())?)
    }

    /// 𝓛 recomputed from scratch: LDA bound of every meta-observation
    /// evaluated term by term, plus Σ_q N_q log π_q.
    pub fn full_bound(&self) -> Result<f64, NumericError> {
        let mut total = 0.0;
        for c in &self.clusters {
            total += elbo_document(
                &c.words,
                &c.counts,
                &c.fit.gamma,
                &c.fit.phi,
                &self.log_beta,
                &self.alpha,
            )?;
        }
        Ok(total + clustering_term(&self.partition, &self.pi)?)
    }

    /// Scores moving observation `doc` to cluster `to` without mutating.
    pub fn evaluate_swap(&self, doc: usize, to: usize) -> Result<SwapOutcome, NumericError> {
        let from = self.partition.label(doc);
        if to == from {
            return Ok(SwapOutcome::Stay);
        }
        if self.meta.cluster_sizes()[from] <= 1 {
            return Ok(SwapOutcome::Inadmissible);
        }
        let new_from = self.removal(doc)?;
        let new_to = self.insertion(doc, to)?;
        let swap = self.score(doc, to, new_from, new_to)?;
        Ok(SwapOutcome::Move(Box::new(swap)))
    }

    /// Source cluster refitted without `doc`.
    fn removal(&self, doc: usize) -> Result<ClusterFit, NumericError> {
        let cluster = &self.clusters[self.partition.label(doc)];
        let (words, counts) = self.x.row(doc);
        let (words, counts) = shifted_row(&cluster.words, &cluster.counts, words, counts, false);
        self.refit(words, counts, &cluster.fit.gamma)
    }

    /// Cluster `to` refitted with `doc` added.
    fn insertion(&self, doc: usize, to: usize) -> Result<ClusterFit, NumericError> {
        let cluster = &self.clusters[to];
        let (words, counts) = self.x.row(doc);
        let (words, counts) = shifted_row(&cluster.words, &cluster.counts, words, counts, true);
        self.refit(words, counts, &cluster.fit.gamma)
    }

    /// Change in 𝓛 when the two refitted clusters replace the current ones
    /// and π is re-optimized.
    fn delta(
        &self,
        from: usize,
        to: usize,
        from_bound: f64,
        to_bound: f64,
    ) -> Result<f64, NumericError> {
        let sizes = self.meta.cluster_sizes();
        let before = self.clusters[from].fit.bound
            + self.clusters[to].fit.bound
            + clustering_term_from_sizes(sizes, self.pi.as_slice())?;
        let after = from_bound + to_bound + optimal_clustering_term(&moved_sizes(sizes, from, to));
        Ok(after - before)
    }

    fn score(
        &self,
        doc: usize,
        to: usize,
        new_from: ClusterFit,
        new_to: ClusterFit,
    ) -> Result<SwapDelta, NumericError> {
        let from = self.partition.label(doc);
        let delta = self.delta(from, to, new_from.fit.bound, new_to.fit.bound)?;
        Ok(SwapDelta {
            doc,
            from,
            to,
            delta,
            new_from,
            new_to,
            new_pi: MixtureWeights::from_sizes(&moved_sizes(self.meta.cluster_sizes(), from, to)),
        })
    }

    fn refit(
        &self,
        words: Vec<usize>,
        counts: Vec<Count>,
        gamma_init: &[f64],
    ) -> Result<ClusterFit, NumericError> {
        let rows = gather_rows(&words, self.alpha.len(), self.beta.as_slice(), identity);
        let fit = ve_core(
            &words,
            &counts,
            &rows,
            &self.log_beta,
            &self.alpha,
            gamma_init,
            self.swap_settings,
        )?;
        Ok(ClusterFit { words, counts, fit })
    }

    /// Commits a move scored by [`evaluate_swap`](Self::evaluate_swap).
    pub fn apply_swap(&mut self, swap: SwapDelta) {
        debug_assert_eq!(self.partition.label(swap.doc), swap.from);
        self.meta
            .move_document(self.x, swap.doc, swap.from, swap.to);
        self.partition.set(swap.doc, swap.to);
        self.clusters[swap.from] = swap.new_from;
        self.clusters[swap.to] = swap.new_to;
        self.pi = swap.new_pi;
        self.bound += swap.delta;
    }

    /// Best admissible move for `doc`: largest Δ, ties to the smallest
    /// cluster index. `None` when no candidate exists. The source cluster is
    /// refitted once and shared by all candidates.
    pub fn best_swap(&self, doc: usize) -> Result<Option<SwapDelta>, NumericError> {
        let from = self.partition.label(doc);
        if self.meta.cluster_sizes()[from] <= 1 {
            return Ok(None);
        }
        let new_from = self.removal(doc)?;
        let candidates: Vec<usize> = (0..self.n_clusters()).filter(|&q| q != from).collect();
        let outcomes = par::map_slice(self.execution, &candidates, |&q| {
            let new_to = self.insertion(doc, q)?;
            let delta = self.delta(from, q, new_from.fit.bound, new_to.fit.bound)?;
            Ok::<_, NumericError>((q, delta, new_to))
        });
        let mut best: Option<(usize, f64, ClusterFit)> = None;
        for outcome in outcomes {
            let candidate = outcome?;
            if best.as_ref().is_none_or(|b| candidate.1 > b.1) {
                best = Some(candidate);
            }
        }
        best.map(|(to, _, new_to)| self.score(doc, to, new_from, new_to))
            .transpose()
    }

    /// One pass over all observations in random order. Returns the number of
    /// validated moves; `on_swap` runs after each one.
    pub fn greedy_epoch_with<R, F>(
        &mut self,
        rng: &mut R,
        mut on_swap: F,
    ) -> Result<usize, NumericError>
    where
        R: Rng + ?Sized,
        F: FnMut(&Self),
    {
        let mut order: Vec<usize> = (0..self.x.n_docs()).collect();
        order.shuffle(rng);
        let mut validated = 0;
        for doc in order {
            if let Some(swap) = self.best_swap(doc)? {
                if swap.delta > 0.0 {
                    self.apply_swap(swap);
                    validated += 1;
                    on_swap(self);
                }
            }
        }
        Ok(validated)
    }

    pub fn greedy_epoch<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize, NumericError> {
        self.greedy_epoch_with(rng, |_| {})
    }

    /// M-step for β on the meta-observations followed by a warm VE pass.
    pub fn refresh_beta(&mut self) -> Result<(), NumericError> {
        self.beta = m_step_from_docs(
            self.beta.n_words(),
            self.beta.n_topics(),
            self.clusters.iter().map(|c| {
                (
                    c.words.as_slice(),
                    c.counts.as_slice(),
                    c.fit.phi.as_slice(),
                )
            }),
        );
        self.log_beta = self.beta.ln();
        let refits = par::map_slice(self.execution, &self.clusters, |c| {
            let rows = gather_rows(&c.words, self.alpha.len(), self.beta.as_slice(), identity);
            ve_core(
                &c.words,
                &c.counts,
                &rows,
                &self.log_beta,
                &self.alpha,
                &c.fit.gamma,
                self.ve_settings,
            )
        });
        for (c, fit) in self.clusters.iter_mut().zip(refits) {
            c.fit = fit?;
        }
        self.bound = self.cached_bound()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitManifest {
    pub seed: u64,
    pub config: FitConfig,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub bound: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub n_clusters: usize,
    pub n_topics: usize,
    pub partition: Partition,
    pub beta: TopicMatrix,
    pub pi: MixtureWeights,
    pub gamma: Vec<Vec<f64>>,
    pub bound: f64,
    /// Bound after initialization and after every validated swap (and every
    /// β refresh when enabled) of the selected restart.
    pub bound_trace: Vec<f64>,
    /// ARI against the supplied truth, aligned with `bound_trace`.
    pub ari_trace: Option<Vec<f64>>,
    pub epochs_run: usize,
    pub swaps_per_epoch: Vec<usize>,
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
    pub manifest: FitManifest,
}

struct RestartRun {
    partition: Partition,
    pi: MixtureWeights,
    gamma: Vec<Vec<f64>>,
    beta: TopicMatrix,
    bound: f64,
    bound_trace: Vec<f64>,
    ari_trace: Option<Vec<f64>>,
    swaps_per_epoch: Vec<usize>,
}

/// Fits Q clusters and K topics, keeping the restart with the highest bound.
pub fn fit(
    x: &CountMatrix,
    n_clusters: usize,
    n_topics: usize,
    config: &FitConfig,
    truth: Option<&[usize]>,
) -> Result<FitResult, FitError> {
    config.validate()?;
    if n_clusters == 0 || n_topics == 0 {
        return Err(FitError::Config("Q and K must be >= 1".into()));
    }
    if n_clusters > x.n_docs() {
        return Err(FitError::TooManyClusters {
            clusters: n_clusters,
            docs: x.n_docs(),
        });
    }
    if let Some(t) = truth {
        if t.len() != x.n_docs() {
            return Err(FitError::Config(format!(
                "truth has {} labels for {} observations",
                t.len(),
                x.n_docs()
            )));
        }
    }
    let alpha = Alpha::symmetric(n_topics, config.alpha)?;
    let beta = initial_beta(x, n_topics, &alpha, config)?;

    let runs = par::map_range(config.execution, config.restarts, |r| {
        run_restart(x, n_clusters, r, beta.clone(), &alpha, config, truth)
    });
    let mut summaries = Vec::with_capacity(runs.len());
    let mut best: Option<(usize, RestartRun)> = None;
    for (r, run) in runs.into_iter().enumerate() {
        let run = run?;
        summaries.push(RestartSummary {
            restart: r,
            bound: run.bound,
            epochs_run: run.swaps_per_epoch.len(),
        });
        if best.as_ref().is_none_or(|(_, b)| run.bound > b.bound) {
            best = Some((r, run));
        }
    }
    let (best_restart, run) = best.expect("at least one restart");
    Ok(FitResult {
        n_clusters,
        n_topics,
        partition: run.partition,
        beta: run.beta,
        pi: run.pi,
        gamma: run.gamma,
        bound: run.bound,
        bound_trace: run.bound_trace,
        ari_trace: run.ari_trace,
        epochs_run: run.swaps_per_epoch.len(),
        swaps_per_epoch: run.swaps_per_epoch,
        best_restart,
        restarts: summaries,
        manifest: FitManifest {
            seed: config.seed,
            config: config.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

/// The β a fit starts from under `config.beta_init`.
pub fn initial_beta(
    x: &CountMatrix,
    n_topics: usize,
    alpha: &Alpha,
    config: &FitConfig,
) -> Result<TopicMatrix, FitError> {
    match &config.beta_init {
        BetaInit::FromLda => {
            let lda = LdaConfig {
                seed: config.seed,
                execution: config.execution,
                ..config.lda
            };
            Ok(fit_lda(x, n_topics, alpha, &lda)?.beta)
        }
        BetaInit::Provided(b) => {
            if b.n_words() != x.n_words() || b.n_topics() != n_topics {
                return Err(FitError::Shape {
                    expected: (x.n_words(), n_topics),
                    found: (b.n_words(), b.n_topics()),
                });
            }
            Ok(b.clone())
        }
        BetaInit::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(u64::MAX);
            Ok(TopicMatrix::random(x.n_words(), n_topics, &mut rng))
        }
    }
}

fn run_restart(
    x: &CountMatrix,
    n_clusters: usize,
    restart: usize,
    beta: TopicMatrix,
    alpha: &Alpha,
    config: &FitConfig,
    truth: Option<&[usize]>,
) -> Result<RestartRun, FitError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(restart as u64 + 1);
    let partition = initial_partition(x.n_docs(), n_clusters, &config.partition_init, &mut rng)?;
    let mut state = MmpcaState::new(
        x,
        partition,
        beta,
        alpha.clone(),
        config.ve,
        config.swap_settings(),
        config.execution,
    )?;

    let score = |s: &MmpcaState| truth.map(|t| ari(s.partition().labels(), t).unwrap_or(f64::NAN));
    let mut bound_trace = vec![state.bound()];
    let mut ari_trace = truth.map(|_| vec![score(&state).unwrap_or(f64::NAN)]);
    let mut swaps_per_epoch = Vec::new();
    for _ in 0..config.max_epochs {
        let swaps = state.greedy_epoch_with(&mut rng, |s| {
            bound_trace.push(s.bound());
            if let (Some(trace), Some(a)) = (ari_trace.as_mut(), score(s)) {
                trace.push(a);
            }
        })?;
        swaps_per_epoch.push(swaps);
        if config.beta_refresh {
            state.refresh_beta()?;
            bound_trace.push(state.bound());
            if let (Some(trace), Some(a)) = (ari_trace.as_mut(), score(&state)) {
                trace.push(a);
            }
        }
        if swaps == 0 {
            break;
        }
    }
    Ok(RestartRun {
        gamma: state.gamma(),
        pi: state.pi().clone(),
        bound: state.bound(),
        beta: state.beta().clone(),
        partition: state.partition().clone(),
        bound_trace,
        ari_trace,
        swaps_per_epoch,
    })
}

fn moved_sizes(sizes: &[usize], from: usize, to: usize) -> Vec<usize> {
    let mut out = sizes.to_vec();
    out[from] -= 1;
    out[to] += 1;
    out
}

/// A sorted sparse row with a document's counts added or subtracted.
/// Entries that drop to zero are removed.
fn shifted_row(
    words: &[usize],
    counts: &[Count],
    doc_words: &[usize],
    doc_counts: &[Count],
    add: bool,
) -> (Vec<usize>, Vec<Count>) {
    let mut out_w = Vec::with_capacity(words.len() + if add { doc_words.len() } else { 0 });
    let mut out_c = Vec::with_capacity(out_w.capacity());
    let mut j = 0;
    for (&w, &c) in words.iter().zip(counts) {
        while add && j < doc_words.len() && doc_words[j] < w {
            out_w.push(doc_words[j]);
            out_c.push(doc_counts[j]);
            j += 1;
        }
        let mut c = c;
        if j < doc_words.len() && doc_words[j] == w {
            c = if add {
                c + doc_counts[j]
            } else {
                c - doc_counts[j]
            };
            j += 1;
        }
        if c > 0 {
            out_w.push(w);
            out_c.push(c);
        }
    }
    if add {
        out_w.extend_from_slice(&doc_words[j..]);
        out_c.extend_from_slice(&doc_counts[j..]);
    } else {
        debug_assert_eq!(j, doc_words.len(), "document word missing from its cluster");
    }
    (out_w, out_c)
}
