//! Undirected weighted graphs over dense node ids.
//!
//! Edge lists are read as whitespace-separated `u v [weight]` lines. Node
//! labels are arbitrary strings, mapped to ids `0..V` in order of first
//! appearance. Duplicate edges accumulate weight and self-loops are kept.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::community::Partition;
use crate::error::{Error, Result};

/// Dense node index in `0..V`.
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    labels: Vec<String>,
    /// Neighbors sorted by id; a self-loop appears once in its own list.
    adjacency: Vec<Vec<(NodeId, f64)>>,
}

impl Graph {
    /// Builds a graph from undirected weighted edges over `num_nodes` nodes
    /// labelled `"0".."V-1"`.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId, f64)>,
    {
        let labels = (0..num_nodes).map(|i| i.to_string()).collect();
        Self::from_labelled_edges(labels, edges)
    }

    pub fn from_labelled_edges<I>(labels: Vec<String>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId, f64)>,
    {
        let n = labels.len();
        let mut acc: Vec<BTreeMap<NodeId, f64>> = vec![BTreeMap::new(); n];
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "edge ({u}, {v}) has non-positive weight {w}"
                )));
            }
            *acc[u].entry(v).or_insert(0.0) += w;
            if u != v {
                *acc[v].entry(u).or_insert(0.0) += w;
            }
        }
        let adjacency = acc.into_iter().map(|m| m.into_iter().collect()).collect();
        Ok(Graph { labels, adjacency })
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    /// Number of distinct undirected edges, self-loops included.
    pub fn num_edges(&self) -> usize {
        self.edges().count()
    }

    pub fn neighbors(&self, i: NodeId) -> &[(NodeId, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: NodeId) -> usize {
        self.adjacency[i].len()
    }

    pub fn is_isolated(&self, i: NodeId) -> bool {
        self.adjacency[i].is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: NodeId) -> &str {
        &self.labels[i]
    }

    /// Each undirected edge once, as `(u, v, weight)` with `u <= v`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, nbrs)| {
            nbrs.iter()
                .filter(move |&&(v, _)| u <= v)
                .map(move |&(v, w)| (u, v, w))
        })
    }

    /// Multiplies every edge weight by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Graph> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        let adjacency = self
            .adjacency
            .iter()
            .map(|nbrs| nbrs.iter().map(|&(v, w)| (v, w * factor)).collect())
            .collect();
        Ok(Graph {
            labels: self.labels.clone(),
            adjacency,
        })
    }

    /// Transition probabilities `p_ij = e_ij / sum_j e_ij` out of `i`.
    /// Empty for an isolated node.
    pub fn transition_probabilities(&self, i: NodeId) -> Vec<(NodeId, f64)> {
        let nbrs = &self.adjacency[i];
        let total: f64 = nbrs.iter().map(|&(_, w)| w).sum();
        nbrs.iter().map(|&(v, w)| (v, w / total)).collect()
    }

    /// Parses an edge list. See the module docs for the accepted format.
    pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Graph> {
        let mut ids: HashMap<String, NodeId> = HashMap::new();
        let mut labels: Vec<String> = Vec::new();
        let mut edges = Vec::new();
        let mut intern = |label: &str| -> NodeId {
            if let Some(&id) = ids.get(label) {
                return id;
            }
            let id = labels.len();
            ids.insert(label.to_owned(), id);
            labels.push(label.to_owned());
            id
        };

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
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let weight = match fields.len() {
                2 => 1.0,
                3 => fields[2].parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("weight {:?} is not a number", fields[2]),
                })?,
                n => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("expected \"u v\" or \"u v weight\", found {n} fields"),
                    })
                }
            };
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("edge weight must be positive, got {}", fields[2]),
                });
            }
            let u = intern(fields[0]);
            let v = intern(fields[1]);
            edges.push((u, v, weight));
        }
        Graph::from_labelled_edges(labels, edges)
    }

    /// Writes `u v weight` lines using node labels.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (u, v, w) in self.edges() {
            writeln!(out, "{} {} {}", self.labels[u], self.labels[v], w)?;
        }
        Ok(())
    }

    /// Writes the `label id` map.
    pub fn write_label_map<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (id, label) in self.labels.iter().enumerate() {
            writeln!(out, "{label} {id}")?;
        }
        Ok(())
    }
}

/// Reads a `label id` map. Ids must be exactly `0..V`, each used once.
pub fn read_label_map<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut slots: Vec<Option<String>> = Vec::new();
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
        let (Some(label), Some(id), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line: lineno,
                message: "expected \"label id\"".into(),
            });
        };
        let id: usize = id.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("id {id:?} is not a non-negative integer"),
        })?;
        if id >= slots.len() {
            slots.resize(id + 1, None);
        }
        if slots[id].replace(label.to_owned()).is_some() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("id {id} assigned twice"),
            });
        }
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(id, s)| {
            s.ok_or_else(|| Error::Mismatch(format!("label map has no entry for id {id}")))
        })
        .collect()
}

/// Per-node cumulative weight tables for `O(log deg)` next-step draws.
#[derive(Debug, Clone)]
pub struct TransitionSampler {
    targets: Vec<Vec<NodeId>>,
    cumulative: Vec<Vec<f64>>,
}

impl TransitionSampler {
    pub fn new(g: &Graph) -> Self {
        let mut targets = Vec::with_capacity(g.num_nodes());
        let mut cumulative = Vec::with_capacity(g.num_nodes());
        for i in 0..g.num_nodes() {
            let nbrs = g.neighbors(i);
            targets.push(nbrs.iter().map(|&(v, _)| v).collect());
            cumulative.push(
                nbrs.iter()
                    .scan(0.0, |acc, &(_, w)| {
                        *acc += w;
                        Some(*acc)
                    })
                    .collect(),
            );
        }
        TransitionSampler {
            targets,
            cumulative,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.targets.len()
    }

    /// Draws the next node from `i`, or `None` if `i` is isolated.
    pub fn step<R: Rng + ?Sized>(&self, i: NodeId, rng: &mut R) -> Option<NodeId> {
        let cum = &self.cumulative[i];
        let total = *cum.last()?;
        let u = rng.gen::<f64>() * total;
        let pos = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        Some(self.targets[i][pos])
    }
}

/// Planted-partition random graph: `k` blocks of `n_per` nodes, within-block
/// pairs joined with probability `p_in` and cross-block pairs with `p_out`.
/// All weights are 1. Returns the graph and the block labelling.
pub fn planted_partition(
    k: usize,
    n_per: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(Graph, Partition)> {
    if k == 0 || n_per == 0 {
        return Err(Error::InvalidParameter(
            "planted partition needs k >= 1 and n_per >= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || p_out > p_in {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    let n = k * n_per;
    let block = |i: usize| i / n_per;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if block(i) == block(j) { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    let graph = Graph::from_edges(n, edges)?;
    let truth = Partition::from_labels((0..n).map(block).collect());
    Ok((graph, truth))
}
