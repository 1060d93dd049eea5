//! Replicated experiments. Rows come out in (setting, replicate) order
//! whatever the degree of parallelism; only `wall_seconds` varies between
//! replays.

use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use mmpca::metrics::ari;
use mmpca::mmpca::{fit, init_partition, initial_beta, FitConfig, MmpcaState, PartitionInit};
use mmpca::par;
use mmpca::simulate::{generate, theta_star, LabeledCorpus, SimulationConfig};
use mmpca::{Alpha, Execution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::{BenchArgs, BenchCommand};
use crate::commands::fit_config;
use crate::output::{create, with_suffix, write_json, RunManifest};

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub setting: usize,
    pub replicate: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub lambda: f64,
    pub n: usize,
    pub ari: f64,
    pub bound: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares y = slope · x + intercept.
pub fn least_squares(points: &[(f64, f64)]) -> LineFit {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    LineFit {
        slope,
        intercept: mean_y - slope * mean_x,
        r_squared,
    }
}

#[derive(Debug, Clone, Copy)]
struct Job {
    setting: usize,
    replicate: usize,
    epsilon: f64,
    n: usize,
}

fn corpus_for(job: &Job, common: &BenchArgs) -> anyhow::Result<(u64, LabeledCorpus)> {
    let seed = common.model.seed + job.replicate as u64;
    let config = SimulationConfig {
        n_docs: job.n,
        doc_length: common.doc_length,
        n_words: common.v,
        theta_star: theta_star(common.q, common.k)?,
        epsilon: job.epsilon,
        lambda: common.lambda,
        seed,
        execution: Execution::Sequential,
        ..SimulationConfig::default()
    };
    Ok((seed, generate(&config)?))
}

fn fit_job(job: &Job, common: &BenchArgs) -> anyhow::Result<BenchRow> {
    let (seed, corpus) = corpus_for(job, common)?;
    let config = FitConfig {
        seed,
        ..fit_config(&common.model, Execution::Sequential)
    };
    let started = Instant::now();
    let result = fit(&corpus.counts, common.q, common.k, &config, None)?;
    let wall_seconds = started.elapsed().as_secs_f64();
    Ok(BenchRow {
        setting: job.setting,
        replicate: job.replicate,
        seed,
        epsilon: job.epsilon,
        lambda: common.lambda,
        n: job.n,
        ari: ari(result.partition.labels(), corpus.labels.labels())?,
        bound: result.bound,
        wall_seconds,
    })
}

/// Median seconds per greedy epoch from a random balanced start, with β
/// initialized by LDA outside the timed region.
fn time_job(
    job: &Job,
    common: &BenchArgs,
    epochs: usize,
    exec: Execution,
) -> anyhow::Result<BenchRow> {
    let (seed, corpus) = corpus_for(job, common)?;
    let x = &corpus.counts;
    let config = FitConfig {
        seed,
        ..fit_config(&common.model, exec)
    };
    let alpha = Alpha::symmetric(common.k, config.alpha)?;
    let beta = initial_beta(x, common.k, &alpha, &config)?;
    let partition = init_partition(x.n_docs(), common.q, seed, &PartitionInit::RandomBalanced)?;
    let mut state = MmpcaState::new(
        x,
        partition,
        beta,
        alpha,
        config.ve,
        config.swap_settings(),
        exec,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let started = Instant::now();
        state.greedy_epoch(&mut rng)?;
        times.push(started.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(BenchRow {
        setting: job.setting,
        replicate: job.replicate,
        seed,
        epsilon: job.epsilon,
        lambda: common.lambda,
        n: job.n,
        ari: ari(state.partition().labels(), corpus.labels.labels())?,
        bound: state.bound(),
        wall_seconds: times[times.len() / 2],
    })
}

fn jobs<T: Copy>(grid: &[T], replicates: u32, make: impl Fn(usize, usize, T) -> Job) -> Vec<Job> {
    let mut out = Vec::new();
    for (s, &value) in grid.iter().enumerate() {
        for r in 0..replicates as usize {
            out.push(make(s, r, value));
        }
    }
    out
}

fn write_rows(path: &Path, rows: &[BenchRow]) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(create(path)?);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SettingSummary {
    setting: usize,
    epsilon: f64,
    n: usize,
    mean_ari: f64,
    mean_wall_seconds: f64,
}

fn summarize(rows: &[BenchRow]) -> Vec<SettingSummary> {
    let settings = rows.iter().map(|r| r.setting).max().map_or(0, |m| m + 1);
    (0..settings)
        .filter_map(|s| {
            let group: Vec<&BenchRow> = rows.iter().filter(|r| r.setting == s).collect();
            let first = group.first()?;
            let m = group.len() as f64;
            Some(SettingSummary {
                setting: s,
                epsilon: first.epsilon,
                n: first.n,
                mean_ari: group.iter().map(|r| r.ari).sum::<f64>() / m,
                mean_wall_seconds: group.iter().map(|r| r.wall_seconds).sum::<f64>() / m,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct BenchSidecar {
    settings: Vec<SettingSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scaling: Option<LineFit>,
    manifest: RunManifest,
}

#[derive(Serialize)]
struct BenchConfig<'a> {
    kind: &'static str,
    grid: serde_json::Value,
    replicates: u32,
    lambda: f64,
    doc_length: usize,
    v: usize,
    q: usize,
    k: usize,
    fit: FitConfig,
    timed_epochs: Option<u32>,
    out: &'a Path,
}

pub fn run(command: &BenchCommand, exec: Execution) -> anyhow::Result<()> {
    let started = Instant::now();
    let (kind, common, grid, rows, timed_epochs) = match command {
        BenchCommand::Noise {
            epsilon_grid,
            n,
            common,
        } => {
            let jobs = jobs(
                &epsilon_grid.0,
                common.replicates,
                |setting, replicate, epsilon| Job {
                    setting,
                    replicate,
                    epsilon,
                    n: *n,
                },
            );
            let rows = par::map_slice(exec, &jobs, |j| fit_job(j, common));
            (
                "noise",
                common,
                serde_json::to_value(&epsilon_grid.0)?,
                rows,
                None,
            )
        }
        BenchCommand::Size {
            n_grid,
            epsilon,
            common,
        } => {
            let jobs = jobs(&n_grid.0, common.replicates, |setting, replicate, n| Job {
                setting,
                replicate,
                epsilon: *epsilon,
                n,
            });
            let rows = par::map_slice(exec, &jobs, |j| fit_job(j, common));
            ("size", common, serde_json::to_value(&n_grid.0)?, rows, None)
        }
        BenchCommand::Time {
            n_grid,
            epsilon,
            timed_epochs,
            common,
        } => {
            let jobs = jobs(&n_grid.0, common.replicates, |setting, replicate, n| Job {
                setting,
                replicate,
                epsilon: *epsilon,
                n,
            });
            // one at a time so runs do not compete for cores while timed
            let rows = jobs
                .iter()
                .map(|j| time_job(j, common, *timed_epochs as usize, exec))
                .collect();
            (
                "time",
                common,
                serde_json::to_value(&n_grid.0)?,
                rows,
                Some(*timed_epochs),
            )
        }
    };
    let rows: Vec<BenchRow> = rows.into_iter().collect::<anyhow::Result<_>>()?;
    write_rows(&common.out, &rows)?;

    let settings = summarize(&rows);
    for s in &settings {
        println!(
            "setting {}: epsilon {} n {} mean ari {:.4} mean seconds {:.4}",
            s.setting, s.epsilon, s.n, s.mean_ari, s.mean_wall_seconds
        );
    }
    let scaling = (kind == "time").then(|| {
        let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.wall_seconds)).collect();
        least_squares(&points)
    });
    if let Some(line) = scaling {
        println!(
            "seconds per epoch = {:.6e} * N + {:.6e} (r^2 = {:.4})",
            line.slope, line.intercept, line.r_squared
        );
    }

    let config = BenchConfig {
        kind,
        grid,
        replicates: common.replicates,
        lambda: common.lambda,
        doc_length: common.doc_length,
        v: common.v,
        q: common.q,
        k: common.k,
        fit: fit_config(&common.model, exec),
        timed_epochs,
        out: &common.out,
    };
    let sidecar = BenchSidecar {
        settings,
        scaling,
        manifest: RunManifest::new(
            &format!("bench {kind}"),
            &config,
            common.model.seed,
            &[],
            started,
        )?,
    };
    write_json(&with_suffix(&common.out, ".manifest.json"), &sidecar)?;
    Ok(())
}
