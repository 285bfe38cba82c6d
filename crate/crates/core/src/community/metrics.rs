//! Community scoring functions over unweighted edge counts.
//!
//! For a node set `S`: `n_S` members, `m_S` edges with both ends in `S`
//! (self-loops included), `c_S` edges with exactly one end in `S`. Internal
//! density counts node pairs, so it ignores self-loops.

use std::fmt::Write as _;

use super::Partition;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CommunityCounts {
    pub size: usize,
    /// Internal edges, self-loops included.
    pub internal: usize,
    /// Internal edges between distinct nodes.
    pub internal_pairs: usize,
    pub boundary: usize,
}

impl CommunityCounts {
    pub fn density(&self) -> f64 {
        if self.size < 2 {
            return 0.0;
        }
        2.0 * self.internal_pairs as f64 / (self.size * (self.size - 1)) as f64
    }

    /// `None` when the set covers the whole graph.
    pub fn cut_ratio(&self, num_nodes: usize) -> Option<f64> {
        if self.size >= num_nodes {
            return None;
        }
        Some(self.boundary as f64 / (self.size * (num_nodes - self.size)) as f64)
    }

    pub fn conductance(&self) -> f64 {
        let volume = 2 * self.internal + self.boundary;
        if volume == 0 {
            return 0.0;
        }
        self.boundary as f64 / volume as f64
    }
}

fn set_counts(g: &Graph, set: &[NodeId]) -> Result<CommunityCounts> {
    let n = g.num_nodes();
    let mut member = vec![false; n];
    for &i in set {
        if i >= n {
            return Err(Error::InvalidParameter(format!("node {i} outside 0..{n}")));
        }
        member[i] = true;
    }
    let size = member.iter().filter(|&&m| m).count();
    if size == 0 {
        return Err(Error::InvalidParameter("node set must be nonempty".into()));
    }
    let mut counts = CommunityCounts {
        size,
        ..Default::default()
    };
    for (u, v, _) in g.edges() {
        match (member[u], member[v]) {
            (true, true) => {
                counts.internal += 1;
                if u != v {
                    counts.internal_pairs += 1;
                }
            }
            (true, false) | (false, true) => counts.boundary += 1,
            _ => {}
        }
    }
    Ok(counts)
}

/// `2 m_S / (n_S (n_S - 1))`, zero for a single node.
pub fn internal_density(g: &Graph, set: &[NodeId]) -> Result<f64> {
    Ok(set_counts(g, set)?.density())
}

/// `c_S / (n_S (n - n_S))`; undefined when `S` is every node.
pub fn cut_ratio(g: &Graph, set: &[NodeId]) -> Result<f64> {
    set_counts(g, set)?
        .cut_ratio(g.num_nodes())
        .ok_or_else(|| Error::Undefined("cut ratio of the full node set".into()))
}

/// `c_S / (2 m_S + c_S)`, zero when `S` touches no edges.
pub fn conductance(g: &Graph, set: &[NodeId]) -> Result<f64> {
    Ok(set_counts(g, set)?.conductance())
}

/// Counts for every community of `p` in one pass over the edges.
pub fn community_counts(g: &Graph, p: &Partition) -> Result<Vec<CommunityCounts>> {
    if p.num_nodes() != g.num_nodes() {
        return Err(Error::Mismatch(format!(
            "partition covers {} nodes, graph has {}",
            p.num_nodes(),
            g.num_nodes()
        )));
    }
    let labels = p.labels();
    let mut counts = vec![CommunityCounts::default(); p.num_communities()];
    for &c in labels {
        counts[c].size += 1;
    }
    for (u, v, _) in g.edges() {
        let (cu, cv) = (labels[u], labels[v]);
        if cu == cv {
            counts[cu].internal += 1;
            if u != v {
                counts[cu].internal_pairs += 1;
            }
        } else {
            counts[cu].boundary += 1;
            counts[cv].boundary += 1;
        }
    }
    Ok(counts)
}

/// `Q = sum_i [m_i / m - ((2 m_i + c_i) / 2m)^2]`, evaluated as one integer
/// ratio `(4m sum m_i - sum (2 m_i + c_i)^2) / 4m^2` so small cases are exact.
pub fn modularity(g: &Graph, p: &Partition) -> Result<f64> {
    let counts = community_counts(g, p)?;
    let m = g.num_edges() as i128;
    if m == 0 {
        return Err(Error::Undefined("modularity of a graph without edges".into()));
    }
    let internal: i128 = counts.iter().map(|c| c.internal as i128).sum();
    let squares: i128 = counts
        .iter()
        .map(|c| {
            let vol = 2 * c.internal as i128 + c.boundary as i128;
            vol * vol
        })
        .sum();
    Ok((4 * m * internal - squares) as f64 / (4 * m * m) as f64)
}

/// `[min, q1, median, q3, max]` with linear interpolation between order
/// statistics. `None` for an empty sample.
pub fn quartiles(values: &[f64]) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    };
    Some([sorted[0], at(0.25), at(0.5), at(0.75), sorted[sorted.len() - 1]])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityScore {
    pub id: usize,
    pub size: usize,
    pub density: f64,
    pub cut_ratio: Option<f64>,
    pub conductance: f64,
}

/// Modularity plus the per-community metric table.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub modularity: f64,
    pub communities: Vec<CommunityScore>,
}

impl ScoreReport {
    pub fn compute(g: &Graph, p: &Partition) -> Result<ScoreReport> {
        let modularity = modularity(g, p)?;
        let n = g.num_nodes();
        let communities = community_counts(g, p)?
            .into_iter()
            .enumerate()
            .map(|(id, c)| CommunityScore {
                id,
                size: c.size,
                density: c.density(),
                cut_ratio: c.cut_ratio(n),
                conductance: c.conductance(),
            })
            .collect();
        Ok(ScoreReport {
            modularity,
            communities,
        })
    }

    /// Plain-text report. Undefined cut ratios print as `nan` and are left
    /// out of the summary.
    pub fn render(&self) -> String {
        fn num(x: Option<f64>) -> String {
            x.map_or_else(|| "nan".to_string(), |v| v.to_string())
        }
        let mut out = String::new();
        let _ = writeln!(out, "communities {}", self.communities.len());
        let _ = writeln!(out, "modularity {}", self.modularity);
        let _ = writeln!(out, "summary min q1 median q3 max");
        let columns: [(&str, Vec<f64>); 3] = [
            ("density", self.communities.iter().map(|c| c.density).collect()),
            ("cut_ratio", self.communities.iter().filter_map(|c| c.cut_ratio).collect()),
            ("conductance", self.communities.iter().map(|c| c.conductance).collect()),
        ];
        for (name, values) in &columns {
            let _ = write!(out, "{name}");
            match quartiles(values) {
                Some(q) => q.iter().for_each(|v| {
                    let _ = write!(out, " {v}");
                }),
                None => out.push_str(" nan nan nan nan nan"),
            }
            out.push('\n');
        }
        let _ = writeln!(out, "community size density cut_ratio conductance");
        for c in &self.communities {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                c.id,
                c.size,
                c.density,
                num(c.cut_ratio),
                c.conductance
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Triangles {0,1,2} and {3,4,5} joined by the bridge 2-3.
    fn barbell() -> Graph {
        Graph::from_edges(
            6,
            [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0), (2, 3, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn density_cases() {
        let g = barbell();
        assert_eq!(internal_density(&g, &[0, 1, 2]).unwrap(), 1.0);
        let path = Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(internal_density(&path, &[0, 1, 2]).unwrap(), 2.0 / 3.0);
        assert_eq!(internal_density(&g, &[4]).unwrap(), 0.0);
        assert!(internal_density(&g, &[]).is_err());
    }

    #[test]
    fn cut_ratio_cases() {
        let g = barbell();
        assert_eq!(cut_ratio(&g, &[0, 1, 2]).unwrap(), 1.0 / 9.0);
        let two = Graph::from_edges(6, [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0)]).unwrap();
        assert_eq!(cut_ratio(&two, &[0, 1, 2]).unwrap(), 0.0);
        assert!(matches!(cut_ratio(&g, &[0, 1, 2, 3, 4, 5]), Err(Error::Undefined(_))));
    }

    #[test]
    fn conductance_cases() {
        let g = barbell();
        assert_eq!(conductance(&g, &[0, 1, 2]).unwrap(), 1.0 / 7.0);
        assert_eq!(conductance(&g, &[0, 1, 2, 3, 4, 5]).unwrap(), 0.0);
        let star = Graph::from_edges(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        assert_eq!(conductance(&star, &[0]).unwrap(), 1.0);
        let isolated = Graph::from_edges(3, [(0, 1, 1.0)]).unwrap();
        assert_eq!(conductance(&isolated, &[2]).unwrap(), 0.0);
    }

    #[test]
    fn modularity_cases() {
        let g = barbell();
        let split = Partition::from_labels(vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(modularity(&g, &split).unwrap(), 5.0 / 14.0);
        let whole = Partition::from_labels(vec![0; 6]);
        assert_eq!(modularity(&g, &whole).unwrap(), 0.0);
        let empty = Graph::from_edges(2, []).unwrap();
        assert!(modularity(&empty, &Partition::from_labels(vec![0, 1])).is_err());
        assert!(modularity(&g, &Partition::from_labels(vec![0, 1])).is_err());
    }

    #[test]
    fn quartile_interpolation() {
        assert_eq!(quartiles(&[]), None);
        assert_eq!(quartiles(&[2.0]), Some([2.0; 5]));
        assert_eq!(quartiles(&[4.0, 1.0, 3.0, 2.0, 5.0]), Some([1.0, 2.0, 3.0, 4.0, 5.0]));
        assert_eq!(quartiles(&[1.0, 2.0]), Some([1.0, 1.25, 1.5, 1.75, 2.0]));
    }

    #[test]
    fn report_layout() {
        let g = barbell();
        let report = ScoreReport::compute(&g, &Partition::from_labels(vec![0, 0, 0, 1, 1, 1])).unwrap();
        let text = report.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "communities 2");
        assert!(lines[1].starts_with("modularity 0.357142857142857"));
        assert_eq!(lines[3], "density 1 1 1 1 1");
        assert_eq!(lines[7], "0 3 1 0.1111111111111111 0.14285714285714285");

        let single = ScoreReport::compute(&g, &Partition::from_labels(vec![0; 6])).unwrap();
        let text = single.render();
        assert!(text.contains("modularity 0\n"));
        assert!(text.contains("cut_ratio nan nan nan nan nan\n"));
        assert!(text.ends_with("0 6 0.4666666666666667 nan 0\n"));
    }
}
