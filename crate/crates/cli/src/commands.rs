//! `simulate`, `fit`, `select`, and `eval`.

use std::time::Instant;

use anyhow::{bail, Context};
use mmpca::corpus::{load_labels_csv, write_labels_csv, write_matrix_market};
use mmpca::metrics::{ari, confusion};
use mmpca::mmpca::{fit as fit_model, FitConfig, RestartSummary};
use mmpca::model_select::{grid_search, icl};
use mmpca::simulate::{generate, theta_star, SimulationConfig};
use mmpca::{Execution, FitResult};
use serde::Serialize;

use crate::args::{EvalArgs, FitArgs, ModelArgs, SelectArgs, SimulateArgs};
use crate::output::{create, load_corpus, with_suffix, write_beta_csv, write_json, RunManifest};

pub fn fit_config(model: &ModelArgs, exec: Execution) -> FitConfig {
    FitConfig {
        max_epochs: model.epochs as usize,
        restarts: model.restarts as usize,
        seed: model.seed,
        alpha: model.alpha,
        swap_ve_iters: model.swap_ve_iters as usize,
        beta_refresh: model.beta_refresh,
        execution: exec,
        ..FitConfig::default()
    }
}

pub fn simulation_config(args: &SimulateArgs, exec: Execution) -> anyhow::Result<SimulationConfig> {
    Ok(SimulationConfig {
        n_docs: args.n,
        doc_length: args.doc_length,
        n_words: args.v,
        theta_star: theta_star(args.q_star, args.k_star)?,
        epsilon: args.epsilon,
        lambda: args.lambda,
        seed: args.seed,
        execution: exec,
        ..SimulationConfig::default()
    })
}

#[derive(Serialize)]
struct SimulationSidecar<'a> {
    config: &'a SimulationConfig,
    n_docs: usize,
    n_words_observed: usize,
    cluster_sizes: Vec<usize>,
    manifest: RunManifest,
}

pub fn simulate(args: &SimulateArgs, exec: Execution) -> anyhow::Result<()> {
    let started = Instant::now();
    let config = simulation_config(args, exec)?;
    let corpus = generate(&config)?;

    let mtx = with_suffix(&args.out_prefix, ".mtx");
    let labels = with_suffix(&args.out_prefix, ".labels.csv");
    write_matrix_market(create(&mtx)?, &corpus.counts)
        .with_context(|| format!("writing {}", mtx.display()))?;
    write_labels_csv(create(&labels)?, corpus.labels.labels())?;
    if corpus.remap.n_dropped() > 0 {
        log::warn!(
            "{} words were never drawn and are absent from the matrix",
            corpus.remap.n_dropped()
        );
    }

    let sidecar = SimulationSidecar {
        config: &config,
        n_docs: corpus.counts.n_docs(),
        n_words_observed: corpus.counts.n_words(),
        cluster_sizes: corpus.labels.sizes(),
        manifest: RunManifest::new("simulate", &config, config.seed, &[], started)?,
    };
    write_json(&with_suffix(&args.out_prefix, ".config.json"), &sidecar)?;
    println!(
        "wrote {} documents, {} words to {}",
        corpus.counts.n_docs(),
        corpus.counts.n_words(),
        mtx.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct FitOutput<'a> {
    n_clusters: usize,
    n_topics: usize,
    labels: &'a [usize],
    pi: &'a [f64],
    gamma: &'a [Vec<f64>],
    bound: f64,
    bound_trace: &'a [f64],
    icl: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ari: Option<f64>,
    epochs_run: usize,
    swaps_per_epoch: &'a [usize],
    best_restart: usize,
    restarts: &'a [RestartSummary],
    manifest: RunManifest,
}

#[derive(Serialize)]
struct FitRunConfig<'a> {
    input: String,
    q: usize,
    k: usize,
    truth: Option<String>,
    fit: &'a FitConfig,
}

pub fn fit(args: &FitArgs, exec: Execution) -> anyhow::Result<()> {
    let started = Instant::now();
    let corpus = load_corpus(&args.input)?;
    let x = &corpus.counts;
    let truth = args
        .truth
        .as_ref()
        .map(|p| load_labels_csv(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    if let Some(t) = &truth {
        if t.len() != x.n_docs() {
            bail!(
                "truth has {} labels but the corpus has {} documents",
                t.len(),
                x.n_docs()
            );
        }
    }
    let (q, k) = (args.q as usize, args.k as usize);
    let config = fit_config(&args.model, exec);
    let result: FitResult = fit_model(x, q, k, &config, truth.as_deref())?;

    let score = icl(result.bound, q, k, x.n_words(), x.n_docs());
    let ari_value = truth
        .as_ref()
        .map(|t| ari(result.partition.labels(), t))
        .transpose()?;

    let mut inputs = vec![args.input.as_path()];
    if let Some(t) = &args.truth {
        inputs.push(t);
    }
    let run_config = FitRunConfig {
        input: args.input.display().to_string(),
        q,
        k,
        truth: args.truth.as_ref().map(|p| p.display().to_string()),
        fit: &config,
    };
    let output = FitOutput {
        n_clusters: q,
        n_topics: k,
        labels: result.partition.labels(),
        pi: result.pi.as_slice(),
        gamma: &result.gamma,
        bound: result.bound,
        bound_trace: &result.bound_trace,
        icl: score,
        ari: ari_value,
        epochs_run: result.epochs_run,
        swaps_per_epoch: &result.swaps_per_epoch,
        best_restart: result.best_restart,
        restarts: &result.restarts,
        manifest: RunManifest::new("fit", &run_config, config.seed, &inputs, started)?,
    };
    write_json(&args.out.join("fit.json"), &output)?;
    write_beta_csv(&args.out.join("beta.csv"), &result.beta, &corpus)?;
    write_labels_csv(
        create(&args.out.join("labels.csv"))?,
        result.partition.labels(),
    )?;

    println!("bound: {}", result.bound);
    println!("icl: {score}");
    if let Some(a) = ari_value {
        println!("ari: {a}");
    }
    Ok(())
}

#[derive(Serialize)]
struct SelectRunConfig<'a> {
    input: String,
    q_range: (usize, usize),
    k_range: (usize, usize),
    fit: &'a FitConfig,
}

#[derive(Serialize)]
struct SelectSidecar {
    best: (usize, usize),
    manifest: RunManifest,
}

pub fn select(args: &SelectArgs, exec: Execution) -> anyhow::Result<()> {
    let started = Instant::now();
    let corpus = load_corpus(&args.input)?;
    let config = fit_config(&args.model, exec);
    let grid = grid_search(
        &corpus.counts,
        args.q_range.clone(),
        args.k_range.clone(),
        &config,
    )?;

    let path = args.out.join("select.csv");
    let mut wtr = csv::Writer::from_writer(create(&path)?);
    wtr.write_record(["q", "k", "bound", "icl", "status"])?;
    for cell in &grid.table {
        let (bound, score, status) = match &cell.outcome {
            Ok(s) => (s.bound.to_string(), s.icl.to_string(), "ok".to_string()),
            Err(e) => (String::new(), String::new(), e.clone()),
        };
        wtr.write_record([
            cell.n_clusters.to_string(),
            cell.n_topics.to_string(),
            bound,
            score,
            status,
        ])?;
    }
    wtr.flush()?;

    let run_config = SelectRunConfig {
        input: args.input.display().to_string(),
        q_range: (*args.q_range.start(), *args.q_range.end()),
        k_range: (*args.k_range.start(), *args.k_range.end()),
        fit: &config,
    };
    let sidecar = SelectSidecar {
        best: grid.best,
        manifest: RunManifest::new(
            "select",
            &run_config,
            config.seed,
            &[args.input.as_path()],
            started,
        )?,
    };
    write_json(&args.out.join("select.manifest.json"), &sidecar)?;

    let best = grid.best_score();
    println!(
        "best: Q={} K={} icl={} bound={}",
        best.n_clusters, best.n_topics, best.icl, best.bound
    );
    Ok(())
}

pub fn eval(args: &EvalArgs) -> anyhow::Result<()> {
    let pred =
        load_labels_csv(&args.pred).with_context(|| format!("loading {}", args.pred.display()))?;
    let truth = load_labels_csv(&args.truth)
        .with_context(|| format!("loading {}", args.truth.display()))?;
    let value = ari(&pred, &truth)?;
    let table = confusion(&pred, &truth)?;

    let mut wtr = csv::Writer::from_writer(create(&args.confusion)?);
    let columns = table.table.first().map_or(0, |r| r.len());
    let mut header = vec!["pred".to_string()];
    header.extend((0..columns).map(|j| format!("truth_{j}")));
    wtr.write_record(&header)?;
    for (p, row) in table.table.iter().enumerate() {
        let mut record = vec![p.to_string()];
        record.extend(row.iter().map(|c| c.to_string()));
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    println!("ari: {value}");
    Ok(())
}
