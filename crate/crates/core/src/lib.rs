//! Clustering of high-dimensional count data with a mixture of multinomial
//! PCA models.
//!
//! Observations are assigned to clusters by greedily maximizing a
//! variational lower bound on the classification likelihood. For a fixed
//! partition the model reduces to LDA on one aggregated "meta-observation"
//! per cluster, so moving a single observation only touches two of them.
//! The number of clusters and topics is chosen with an ICL criterion.
//!
//! ```no_run
//! use mmpca::{simulate, mmpca::{fit, FitConfig}, metrics::ari};
//!
//! let corpus = simulate::generate(&simulate::SimulationConfig::default()).unwrap();
//! let result = fit(&corpus.counts, 6, 4, &FitConfig::default(), Some(corpus.labels.labels())).unwrap();
//! println!("ARI = {}", ari(result.partition.labels(), corpus.labels.labels()).unwrap());
//! ```

pub mod corpus;
pub mod error;
pub mod lda;
pub mod metrics;
pub mod mmpca;
pub mod model_select;
pub mod par;
pub mod partition;
pub mod simulate;
pub mod special;

pub use corpus::{aggregate, Count, CountMatrix, MetaCorpus, Vocabulary};
pub use error::{CorpusError, FitError, NumericError};
pub use lda::{Alpha, TopicMatrix};
pub use mmpca::{fit, FitConfig, FitResult};
pub use par::Execution;
pub use partition::{MixtureWeights, Partition};
