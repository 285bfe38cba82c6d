//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the library's inference or metric code; the
//! oracles take plain edge sets, token lists and parameter arrays.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;

/// Digamma by upward recurrence to x >= 10, then the asymptotic series.
pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    acc + x.ln() - 0.5 * inv - series
}

/// Undirected edges as `(u, v)` with `u <= v`.
pub type EdgeSet = BTreeSet<(usize, usize)>;

pub fn random_edge_set<R: Rng>(rng: &mut R, n: usize, p: f64, loops: bool) -> EdgeSet {
    let mut edges = EdgeSet::new();
    for u in 0..n {
        for v in u..n {
            if (u != v || loops) && rng.gen::<f64>() < p {
                edges.insert((u, v));
            }
        }
    }
    edges
}

pub struct BruteCounts {
    pub n_s: usize,
    pub m_s: usize,
    pub pairs_s: usize,
    pub c_s: usize,
}

/// Counts for a node set by checking every edge against membership.
pub fn brute_counts(edges: &EdgeSet, n: usize, set: &[usize]) -> BruteCounts {
    let inside = |x: usize| set.contains(&x);
    let n_s = (0..n).filter(|&x| inside(x)).count();
    let mut m_s = 0;
    let mut pairs_s = 0;
    let mut c_s = 0;
    for &(u, v) in edges {
        if inside(u) && inside(v) {
            m_s += 1;
            if u != v {
                pairs_s += 1;
            }
        } else if inside(u) != inside(v) {
            c_s += 1;
        }
    }
    BruteCounts { n_s, m_s, pairs_s, c_s }
}

pub fn brute_density(edges: &EdgeSet, n: usize, set: &[usize]) -> f64 {
    // Literal pair count over all unordered pairs of distinct members.
    let members: Vec<usize> = (0..n).filter(|x| set.contains(x)).collect();
    if members.len() < 2 {
        return 0.0;
    }
    let mut connected = 0usize;
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            if edges.contains(&(a.min(b), a.max(b))) {
                connected += 1;
            }
        }
    }
    let n_s = members.len() as f64;
    2.0 * connected as f64 / (n_s * (n_s - 1.0))
}

pub fn brute_cut_ratio(edges: &EdgeSet, n: usize, set: &[usize]) -> Option<f64> {
    let c = brute_counts(edges, n, set);
    if c.n_s == n {
        return None;
    }
    Some(c.c_s as f64 / (c.n_s * (n - c.n_s)) as f64)
}

pub fn brute_conductance(edges: &EdgeSet, n: usize, set: &[usize]) -> f64 {
    let c = brute_counts(edges, n, set);
    if c.m_s == 0 && c.c_s == 0 {
        return 0.0;
    }
    c.c_s as f64 / (2 * c.m_s + c.c_s) as f64
}

/// `Q = sum_i (e_ii - a_i^2)` from the community-by-community edge fraction
/// matrix, splitting each cross edge evenly between `e_ij` and `e_ji`.
pub fn brute_modularity(edges: &EdgeSet, labels: &[usize]) -> f64 {
    let c = labels.iter().max().map_or(0, |&x| x + 1);
    let m = edges.len() as f64;
    let mut e = vec![vec![0.0; c]; c];
    for &(u, v) in edges {
        let (cu, cv) = (labels[u], labels[v]);
        if cu == cv {
            e[cu][cu] += 1.0 / m;
        } else {
            e[cu][cv] += 0.5 / m;
            e[cv][cu] += 0.5 / m;
        }
    }
    (0..c)
        .map(|i| {
            let a: f64 = e[i].iter().sum();
            e[i][i] - a * a
        })
        .sum()
}

/// Result of the dense oracle for one document.
#[derive(Debug, Clone)]
pub struct OracleLocal {
    /// `T x K`
    pub zeta: Vec<Vec<f64>>,
    /// `N x T`
    pub phi: Vec<Vec<f64>>,
    pub gdoc1: Vec<f64>,
    pub gdoc2: Vec<f64>,
    /// `K x V`
    pub word_stats: Vec<Vec<f64>>,
    pub m: Vec<f64>,
    pub big_m: Vec<f64>,
}

fn elog_sticks(a: &[f64], b: &[f64]) -> Vec<f64> {
    let k = a.len();
    let mut out = vec![0.0; k];
    for i in 0..k {
        let mut s = 0.0;
        for j in 0..i {
            s += digamma(b[j]) - digamma(a[j] + b[j]);
        }
        if i + 1 < k {
            s += digamma(a[i]) - digamma(a[i] + b[i]);
        }
        out[i] = s;
    }
    out
}

fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Full-batch coordinate ascent over every document at once, token by token,
/// with dense `K x V` expectations. Same initialization (contiguous blocks)
/// and update order as the library: zeta, document sticks, phi; stop when
/// every document's mean absolute phi change is below `tol`; refresh sticks.
#[allow(clippy::too_many_arguments)]
pub fn dense_local_oracle(
    docs: &[Vec<usize>],
    lambda: &[Vec<f64>],
    a: &[f64],
    b: &[f64],
    t_count: usize,
    alpha: f64,
    max_iters: usize,
    tol: f64,
) -> Vec<OracleLocal> {
    let k = lambda.len();
    let v = lambda[0].len();
    let mut elog_beta = vec![vec![0.0; v]; k];
    for i in 0..k {
        let total: f64 = lambda[i].iter().sum();
        for w in 0..v {
            elog_beta[i][w] = digamma(lambda[i][w]) - digamma(total);
        }
    }
    let sticks = elog_sticks(a, b);

    let doc_sticks = |phi: &Vec<Vec<f64>>| {
        let mut g1 = vec![0.0; t_count];
        let mut g2 = vec![0.0; t_count];
        for t in 0..t_count {
            g1[t] = 1.0 + phi.iter().map(|row| row[t]).sum::<f64>();
            g2[t] = alpha + phi.iter().map(|row| row[t + 1..].iter().sum::<f64>()).sum::<f64>();
        }
        (g1, g2)
    };

    let mut phis: Vec<Vec<Vec<f64>>> = docs
        .iter()
        .map(|doc| {
            let n = doc.len();
            (0..n)
                .map(|pos| {
                    let mut row = vec![0.0; t_count];
                    row[pos * t_count / n] = 1.0;
                    row
                })
                .collect()
        })
        .collect();
    let mut zetas: Vec<Vec<Vec<f64>>> = vec![vec![vec![0.0; k]; t_count]; docs.len()];
    let mut done = vec![false; docs.len()];

    for _ in 0..max_iters {
        if done.iter().all(|&d| d) {
            break;
        }
        for (d, doc) in docs.iter().enumerate() {
            if done[d] {
                continue;
            }
            let phi = &mut phis[d];
            for t in 0..t_count {
                let logits: Vec<f64> = (0..k)
                    .map(|i| {
                        sticks[i]
                            + doc
                                .iter()
                                .enumerate()
                                .map(|(n, &w)| phi[n][t] * elog_beta[i][w])
                                .sum::<f64>()
                    })
                    .collect();
                zetas[d][t] = softmax(&logits);
            }
            let (g1, g2) = doc_sticks(phi);
            let pi = elog_sticks(&g1, &g2);
            let mut change = 0.0;
            for (n, &w) in doc.iter().enumerate() {
                let logits: Vec<f64> = (0..t_count)
                    .map(|t| pi[t] + (0..k).map(|i| zetas[d][t][i] * elog_beta[i][w]).sum::<f64>())
                    .collect();
                let new = softmax(&logits);
                for t in 0..t_count {
                    change += (new[t] - phi[n][t]).abs();
                }
                phi[n] = new;
            }
            if change / ((doc.len() * t_count) as f64) < tol {
                done[d] = true;
            }
        }
    }

    docs.iter()
        .enumerate()
        .map(|(d, doc)| {
            let phi = phis[d].clone();
            let zeta = zetas[d].clone();
            let (gdoc1, gdoc2) = doc_sticks(&phi);
            let mut word_stats = vec![vec![0.0; v]; k];
            for (n, &w) in doc.iter().enumerate() {
                for t in 0..t_count {
                    for i in 0..k {
                        word_stats[i][w] += zeta[t][i] * phi[n][t];
                    }
                }
            }
            let m: Vec<f64> = (0..k).map(|i| (0..t_count).map(|t| zeta[t][i]).sum()).collect();
            let big_m: Vec<f64> = (0..k)
                .map(|i| (0..t_count).map(|t| zeta[t][i + 1..].iter().sum::<f64>()).sum())
                .collect();
            OracleLocal {
                zeta,
                phi,
                gdoc1,
                gdoc2,
                word_stats,
                m,
                big_m,
            }
        })
        .collect()
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
