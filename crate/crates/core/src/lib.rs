//! Community detection on undirected weighted networks.
//!
//! Random walks over the graph become documents whose words are node ids. A
//! truncated hierarchical Dirichlet process topic model is fitted to that
//! corpus with stochastic variational inference, and each node is assigned to
//! the topic with the largest posterior weight. Partitions are scored with
//! internal density, cut ratio, conductance and modularity.

pub mod cli;
pub mod community;
pub mod corpus;
pub mod error;
pub mod graph;
pub mod hdp;
pub mod io;

pub use community::{assign, node_posteriors, NodePosterior, Partition, ScoreReport};
pub use corpus::{generate_corpus, Corpus, Document};
pub use error::{Error, Result};
pub use graph::{planted_partition, Graph, NodeId, TransitionSampler};
pub use hdp::{fit, fit_with, init_global, perplexity, GlobalState, HdpConfig};
