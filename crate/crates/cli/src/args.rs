//! Flag definitions and value parsers. Out-of-range values are rejected at
//! parse time so they surface as usage errors.

use std::ops::RangeInclusive;
use std::path::PathBuf;

use clap::{Args, Subcommand};

pub fn unit_interval(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{x} is outside [0, 1]"))
    }
}

pub fn imbalance(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if x > 0.0 && x <= 1.0 {
        Ok(x)
    } else {
        Err(format!("{x} is outside (0, 1]"))
    }
}

pub fn positive_real(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{x} must be positive"))
    }
}

/// `a:b` with 1 ≤ a ≤ b.
pub fn index_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("'{s}' is not of the form a:b"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad bound '{a}'"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad bound '{b}'"))?;
    if a == 0 || a > b {
        return Err(format!("range {a}:{b} is empty or starts at 0"));
    }
    Ok(a..=b)
}

/// A list-valued flag parsed from a single argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T>(pub Vec<T>);

/// `start:stop:step`, inclusive of `stop` up to rounding; values in [0, 1].
pub fn epsilon_grid(s: &str) -> Result<Grid<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(format!("'{s}' is not of the form start:stop:step"));
    };
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad number '{t}'"))
    };
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if [start, stop, step].iter().any(|v| !v.is_finite())
        || step <= 0.0
        || stop < start
        || start < 0.0
        || stop > 1.0
    {
        return Err(format!("invalid grid {s}"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    // round to the grid's decimal resolution so CSV values print cleanly
    Ok(Grid(
        (0..=count)
            .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
            .collect(),
    ))
}

/// Comma-separated positive sizes.
pub fn size_grid(s: &str) -> Result<Grid<usize>, String> {
    let values = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad size '{t}'"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() || values.contains(&0) {
        return Err(format!("invalid size grid {s}"));
    }
    Ok(Grid(values))
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of documents.
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    /// Tokens per document.
    #[arg(long, default_value_t = 250)]
    pub doc_length: usize,
    #[arg(long, default_value_t = 6)]
    pub q_star: usize,
    #[arg(long, default_value_t = 4)]
    pub k_star: usize,
    /// Probability a token's topic is drawn uniformly.
    #[arg(long, default_value_t = 0.0, value_parser = unit_interval)]
    pub epsilon: f64,
    /// Cluster proportions ∝ λ^(Q−q).
    #[arg(long, default_value_t = 1.0, value_parser = imbalance)]
    pub lambda: f64,
    /// Vocabulary size of the block topics.
    #[arg(long, default_value_t = 900)]
    pub v: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Writes <prefix>.mtx, <prefix>.labels.csv and <prefix>.config.json.
    #[arg(long)]
    pub out_prefix: PathBuf,
}

/// Model and optimizer flags shared by `fit`, `select`, and `bench`.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Symmetric Dirichlet prior on topic proportions.
    #[arg(long, default_value_t = 1.0, value_parser = positive_real)]
    pub alpha: f64,
    /// Maximum greedy epochs.
    #[arg(long, default_value_t = 7, value_parser = clap::value_parser!(u32).range(1..))]
    pub epochs: u32,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub restarts: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// VE iterations per tentative swap.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub swap_ve_iters: u32,
    /// Re-estimate β on the meta-observations after every epoch.
    #[arg(long)]
    pub beta_refresh: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Count matrix (.mtx MatrixMarket or .csv doc,word,count triplets).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub q: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub k: u32,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Reference labels (doc,cluster CSV) for ARI reporting.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Output directory for fit.json, beta.csv, and labels.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Inclusive cluster range a:b.
    #[arg(long, value_parser = index_range)]
    pub q_range: RangeInclusive<usize>,
    /// Inclusive topic range a:b.
    #[arg(long, value_parser = index_range)]
    pub k_range: RangeInclusive<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory for select.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted labels (doc,cluster CSV).
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Confusion matrix destination.
    #[arg(long, default_value = "confusion.csv")]
    pub confusion: PathBuf,
}

/// Corpus and model flags shared by every bench.
#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 1.0, value_parser = imbalance)]
    pub lambda: f64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub replicates: u32,
    #[arg(long, default_value_t = 250)]
    pub doc_length: usize,
    #[arg(long, default_value_t = 900)]
    pub v: usize,
    /// Clusters fitted (and generated).
    #[arg(long, default_value_t = 6)]
    pub q: usize,
    /// Topics fitted (and generated).
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    /// CSV destination.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Mean ARI per noise level.
    Noise {
        #[arg(long, default_value = "0:0.7:0.05", value_parser = epsilon_grid)]
        epsilon_grid: Grid<f64>,
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[command(flatten)]
        common: BenchArgs,
    },
    /// ARI as the number of observations grows.
    Size {
        #[arg(long, default_value = "50,100,200,400,800", value_parser = size_grid)]
        n_grid: Grid<usize>,
        #[arg(long, default_value_t = 0.0, value_parser = unit_interval)]
        epsilon: f64,
        #[command(flatten)]
        common: BenchArgs,
    },
    /// Seconds per greedy epoch against N, with a least-squares line.
    Time {
        #[arg(long, default_value = "100,200,400,800", value_parser = size_grid)]
        n_grid: Grid<usize>,
        #[arg(long, default_value_t = 0.0, value_parser = unit_interval)]
        epsilon: f64,
        /// Epochs timed per run (the median is reported).
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        timed_epochs: u32,
        #[command(flatten)]
        common: BenchArgs,
    },
}
