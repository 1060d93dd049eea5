use std::path::PathBuf;

use thiserror::Error;

/// Failures of the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("{function} is undefined at {value}")]
    Domain { function: &'static str, value: f64 },
    #[error("non-finite value while updating word {word}")]
    NonFinite { word: usize },
    #[error("log(0) in topic {topic} for observed word {word}")]
    ZeroTopicProbability { word: usize, topic: usize },
    #[error("cluster {cluster} is occupied but has zero weight")]
    ZeroWeight { cluster: usize },
}

/// Failures while reading or validating count data.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no observations")]
    NoObservations,
    #[error("document {doc} has no tokens")]
    EmptyDocument { doc: usize },
    #[error("expected {expected} labels, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("label {label} out of range for {n_clusters} clusters")]
    LabelOutOfRange { label: usize, n_clusters: usize },
    #[error("vocabulary has {terms} terms but the matrix has {words} columns")]
    VocabularySize { terms: usize, words: usize },
    #[error("duplicate vocabulary term {0:?}")]
    DuplicateTerm(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Errors from model fitting and selection.
#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{topics} topics requested but the corpus holds only {tokens} tokens")]
    TooManyTopics { topics: usize, tokens: u64 },
    #[error("{clusters} clusters requested for {docs} observations")]
    TooManyClusters { clusters: usize, docs: usize },
    #[error("topic matrix has shape {found:?}, expected {expected:?}")]
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("every grid cell failed; first error: {0}")]
    AllCellsFailed(String),
}
