//! Node-to-community assignment from a fitted model, and partition quality
//! metrics.

pub mod metrics;

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::hdp::{stick_weights, GlobalState};

pub use metrics::{
    community_counts, conductance, cut_ratio, internal_density, modularity, quartiles,
    CommunityCounts, CommunityScore, ScoreReport,
};

/// Node labelling with dense community ids `0..C`, each community nonempty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    num_communities: usize,
}

impl Partition {
    /// Relabels arbitrary ids densely in order of first appearance.
    pub fn from_labels(raw: Vec<usize>) -> Self {
        let mut dense: HashMap<usize, usize> = HashMap::new();
        let labels: Vec<usize> = raw
            .into_iter()
            .map(|r| {
                let next = dense.len();
                *dense.entry(r).or_insert(next)
            })
            .collect();
        Partition {
            labels,
            num_communities: dense.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_communities(&self) -> usize {
        self.num_communities
    }

    /// Members of every community, in node order.
    pub fn communities(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.num_communities];
        for (node, &c) in self.labels.iter().enumerate() {
            out[c].push(node);
        }
        out
    }

    /// Writes `node_label community_id` lines.
    pub fn write<W: Write>(&self, node_labels: &[String], mut out: W) -> std::io::Result<()> {
        for (label, c) in node_labels.iter().zip(&self.labels) {
            writeln!(out, "{label} {c}")?;
        }
        Ok(())
    }

    /// Reads `node_label community_id` lines against the graph's labels.
    /// Every node must appear exactly once.
    pub fn read<R: BufRead>(reader: R, node_labels: &[String]) -> Result<Partition> {
        let index: HashMap<&str, NodeId> = node_labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let mut raw: Vec<Option<usize>> = vec![None; node_labels.len()];
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let (Some(label), Some(c), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Parse {
                    line: lineno,
                    message: "expected \"node_label community_id\"".into(),
                });
            };
            let &node = index.get(label).ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("unknown node {label:?}"),
            })?;
            let c: usize = c.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("community id {c:?} is not a non-negative integer"),
            })?;
            if raw[node].replace(c).is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("node {label:?} labelled twice"),
                });
            }
        }
        let raw = raw
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| Error::Mismatch(format!("node {:?} has no community", node_labels[i])))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Partition::from_labels(raw))
    }
}

/// Row-normalized `p(z = k | w_i)` for every node, `V x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePosterior {
    num_topics: usize,
    weights: Vec<f64>,
}

impl NodePosterior {
    /// Normalizes each row of `V x K` nonnegative scores.
    pub fn from_scores(num_topics: usize, mut scores: Vec<f64>) -> Result<Self> {
        if num_topics == 0 || scores.len() % num_topics != 0 {
            return Err(Error::Mismatch(format!(
                "{} scores do not form rows of {num_topics}",
                scores.len()
            )));
        }
        for row in scores.chunks_mut(num_topics) {
            let total: f64 = row.iter().sum();
            if !(total > 0.0 && total.is_finite()) || row.iter().any(|&x| x < 0.0) {
                return Err(Error::InvalidParameter(
                    "posterior scores must be nonnegative with a positive finite sum".into(),
                ));
            }
            row.iter_mut().for_each(|x| *x /= total);
        }
        Ok(NodePosterior {
            num_topics,
            weights: scores,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.weights.len() / self.num_topics
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn row(&self, node: NodeId) -> &[f64] {
        &self.weights[node * self.num_topics..(node + 1) * self.num_topics]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks(self.num_topics)
    }
}

/// `p(z = k | w_i) ∝ beta_ki * sigma_k(v)` at the variational point
/// estimates of topics and sticks.
pub fn node_posteriors(global: &GlobalState) -> NodePosterior {
    let k = global.num_topics();
    let v = global.vocab_size();
    let log_sigma: Vec<f64> = stick_weights(&global.stick_means())
        .into_iter()
        .map(f64::ln)
        .collect();
    let log_row_sums: Vec<f64> = (0..k)
        .map(|i| global.lambda_row(i).iter().sum::<f64>().ln())
        .collect();
    let lambda = global.lambda();
    let mut weights = vec![0.0; v * k];
    for (node, row) in weights.chunks_mut(k).enumerate() {
        for (i, x) in row.iter_mut().enumerate() {
            *x = lambda[i * v + node].ln() - log_row_sums[i] + log_sigma[i];
        }
        // Scores can underflow for long tails of sticks; normalize in log space.
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            total += *x;
        }
        row.iter_mut().for_each(|x| *x /= total);
    }
    NodePosterior {
        num_topics: k,
        weights,
    }
}

/// Arg-max topic per node, ties to the smallest index, relabelled densely.
pub fn assign(posterior: &NodePosterior) -> Partition {
    let raw = posterior
        .rows()
        .map(|row| {
            let mut best = 0;
            for (k, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    Partition::from_labels(raw)
}
