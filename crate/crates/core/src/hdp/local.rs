//! Per-document coordinate ascent.
//!
//! Tokens sharing a word share their `phi` row, so the solver works over the
//! document's distinct words weighted by count. Each sweep updates `zeta`
//! from `phi`, then the document sticks from `phi`, then `phi` from both.
//! Every update maximizes the document bound in its block, so the bound never
//! decreases. `phi` starts by splitting the walk into `T` contiguous blocks,
//! one per document topic, so consecutive tokens share a topic.

use statrs::function::gamma::{digamma, ln_gamma};

use super::{stick_log_expectations_unchecked, GlobalExpectations, GlobalState, HdpConfig};
use crate::corpus::Document;
use crate::graph::NodeId;

/// Variational parameters of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalState {
    /// `T x K`; row `t` is `q(c_dt)`.
    pub zeta: Vec<Vec<f64>>,
    /// `N_d x T`; row `n` is `q(z_dn)`.
    pub phi: Vec<Vec<f64>>,
    pub gdoc1: Vec<f64>,
    pub gdoc2: Vec<f64>,
    /// Sweeps performed.
    pub sweeps: usize,
}

/// What one document contributes to the global update.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    /// Distinct words of the document.
    pub words: Vec<NodeId>,
    /// Row-major `words.len() x K`: `S_kv = sum_t zeta_tk sum_{n: w_n = v} phi_nt`.
    pub topic_word: Vec<f64>,
    /// `m_k = sum_t zeta_tk`.
    pub stick_counts: Vec<f64>,
    /// `M_k = sum_t sum_{l > k} zeta_tl`.
    pub stick_tail_counts: Vec<f64>,
}

/// Working state of the solver over distinct words.
#[derive(Debug, Clone)]
pub struct WordState {
    /// `T x K`.
    zeta: Vec<f64>,
    /// `U x T`.
    phi: Vec<f64>,
    gdoc1: Vec<f64>,
    gdoc2: Vec<f64>,
    sweeps: usize,
}

pub struct DocumentSolver<'a> {
    words: Vec<NodeId>,
    counts: Vec<f64>,
    /// Token position to distinct-word slot.
    slots: Vec<usize>,
    /// `U x K`.
    elog_beta: Vec<f64>,
    elog_sticks: &'a [f64],
    topics: usize,
    doc_topics: usize,
    alpha: f64,
}

impl<'a> DocumentSolver<'a> {
    pub fn new(
        doc: &Document,
        global: &GlobalState,
        exp: &'a GlobalExpectations,
        config: &HdpConfig,
    ) -> Self {
        let topics = global.num_topics();
        let mut words: Vec<NodeId> = doc.tokens().to_vec();
        words.sort_unstable();
        words.dedup();
        let mut counts = vec![0.0; words.len()];
        let slots: Vec<usize> = doc
            .tokens()
            .iter()
            .map(|w| {
                let u = words.binary_search(w).expect("token is among distinct words");
                counts[u] += 1.0;
                u
            })
            .collect();
        let mut elog_beta = vec![0.0; words.len() * topics];
        for (u, &w) in words.iter().enumerate() {
            global.elog_beta_column(exp, w, &mut elog_beta[u * topics..(u + 1) * topics]);
        }
        DocumentSolver {
            words,
            counts,
            slots,
            elog_beta,
            elog_sticks: &exp.elog_sticks,
            topics,
            doc_topics: config.doc_truncation.min(topics),
            alpha: config.alpha,
        }
    }

    pub fn num_tokens(&self) -> usize {
        self.slots.len()
    }

    pub fn initial_state(&self) -> WordState {
        let t = self.doc_topics;
        let n = self.slots.len();
        // Token n starts in document topic floor(n T / N); a distinct word's
        // row averages the blocks its tokens fall in.
        let mut phi = vec![0.0; self.words.len() * t];
        for (pos, &u) in self.slots.iter().enumerate() {
            phi[u * t + pos * t / n] += 1.0 / self.counts[u];
        }
        let mut state = WordState {
            zeta: vec![1.0 / self.topics as f64; t * self.topics],
            phi,
            gdoc1: vec![1.0; t],
            gdoc2: vec![self.alpha; t],
            sweeps: 0,
        };
        self.update_sticks(&mut state);
        state
    }

    fn update_zeta(&self, s: &mut WordState) {
        let k = self.topics;
        let t_count = self.doc_topics;
        for t in 0..t_count {
            let row = &mut s.zeta[t * k..(t + 1) * k];
            row.copy_from_slice(self.elog_sticks);
            for (u, &c) in self.counts.iter().enumerate() {
                let weight = c * s.phi[u * t_count + t];
                let eb = &self.elog_beta[u * k..(u + 1) * k];
                for (z, &e) in row.iter_mut().zip(eb) {
                    *z += weight * e;
                }
            }
            normalize_log(row);
        }
    }

    fn update_sticks(&self, s: &mut WordState) {
        let t_count = self.doc_topics;
        let mut mass = vec![0.0; t_count];
        for (u, &c) in self.counts.iter().enumerate() {
            for (m, &p) in mass.iter_mut().zip(&s.phi[u * t_count..(u + 1) * t_count]) {
                *m += c * p;
            }
        }
        let mut tail = 0.0;
        for t in (0..t_count).rev() {
            s.gdoc1[t] = 1.0 + mass[t];
            s.gdoc2[t] = self.alpha + tail;
            tail += mass[t];
        }
    }

    /// Returns the mean absolute change of `phi` over tokens.
    fn update_phi(&self, s: &mut WordState) -> f64 {
        let k = self.topics;
        let t_count = self.doc_topics;
        let elog_pi = stick_log_expectations_unchecked(&s.gdoc1, &s.gdoc2);
        let mut row = vec![0.0; t_count];
        let mut change = 0.0;
        for (u, &c) in self.counts.iter().enumerate() {
            let eb = &self.elog_beta[u * k..(u + 1) * k];
            for t in 0..t_count {
                let z = &s.zeta[t * k..(t + 1) * k];
                row[t] = elog_pi[t] + z.iter().zip(eb).map(|(a, b)| a * b).sum::<f64>();
            }
            normalize_log(&mut row);
            let old = &mut s.phi[u * t_count..(u + 1) * t_count];
            for (o, &n) in old.iter_mut().zip(&row) {
                change += c * (n - *o).abs();
                *o = n;
            }
        }
        change / (self.num_tokens() * t_count) as f64
    }

    /// One sweep: `zeta`, then document sticks, then `phi`.
    pub fn sweep(&self, s: &mut WordState) -> f64 {
        self.update_zeta(s);
        self.update_sticks(s);
        let change = self.update_phi(s);
        s.sweeps += 1;
        change
    }

    /// Runs sweeps until the mean `phi` change drops below `tol` or
    /// `max_iters` sweeps are done, then refreshes the document sticks.
    pub fn solve(&self, max_iters: usize, tol: f64) -> WordState {
        let mut s = self.initial_state();
        for _ in 0..max_iters {
            if self.sweep(&mut s) < tol {
                break;
            }
        }
        self.update_sticks(&mut s);
        s
    }

    /// Document-level evidence lower bound, up to terms constant in the
    /// local parameters.
    pub fn elbo(&self, s: &WordState) -> f64 {
        let k = self.topics;
        let t_count = self.doc_topics;
        let elog_pi = stick_log_expectations_unchecked(&s.gdoc1, &s.gdoc2);
        let mut bound = 0.0;

        // Beta(1, alpha) prior against Beta(gdoc1, gdoc2), last stick fixed.
        for t in 0..t_count.saturating_sub(1) {
            let (g1, g2) = (s.gdoc1[t], s.gdoc2[t]);
            let total = digamma(g1 + g2);
            let elog_v = digamma(g1) - total;
            let elog_1mv = digamma(g2) - total;
            let prior = self.alpha.ln() + (self.alpha - 1.0) * elog_1mv;
            let entropy_neg = ln_gamma(g1 + g2) - ln_gamma(g1) - ln_gamma(g2)
                + (g1 - 1.0) * elog_v
                + (g2 - 1.0) * elog_1mv;
            bound += prior - entropy_neg;
        }

        for t in 0..t_count {
            for i in 0..k {
                let z = s.zeta[t * k + i];
                if z > 0.0 {
                    bound += z * (self.elog_sticks[i] - z.ln());
                }
            }
        }

        for (u, &c) in self.counts.iter().enumerate() {
            let eb = &self.elog_beta[u * k..(u + 1) * k];
            for t in 0..t_count {
                let p = s.phi[u * t_count + t];
                if p <= 0.0 {
                    continue;
                }
                let z = &s.zeta[t * k..(t + 1) * k];
                let lik: f64 = z.iter().zip(eb).map(|(a, b)| a * b).sum();
                bound += c * p * (elog_pi[t] - p.ln() + lik);
            }
        }
        bound
    }

    pub fn finish(&self, s: WordState) -> (LocalState, SufficientStats) {
        let k = self.topics;
        let t_count = self.doc_topics;

        let mut topic_word = vec![0.0; self.words.len() * k];
        for (u, &c) in self.counts.iter().enumerate() {
            let out = &mut topic_word[u * k..(u + 1) * k];
            for t in 0..t_count {
                let weight = c * s.phi[u * t_count + t];
                for (o, &z) in out.iter_mut().zip(&s.zeta[t * k..(t + 1) * k]) {
                    *o += weight * z;
                }
            }
        }
        let mut stick_counts = vec![0.0; k];
        for t in 0..t_count {
            for (m, &z) in stick_counts.iter_mut().zip(&s.zeta[t * k..(t + 1) * k]) {
                *m += z;
            }
        }
        let mut stick_tail_counts = vec![0.0; k];
        let mut tail = 0.0;
        for i in (0..k).rev() {
            stick_tail_counts[i] = tail;
            tail += stick_counts[i];
        }

        let local = LocalState {
            zeta: s.zeta.chunks(k).map(<[f64]>::to_vec).collect(),
            phi: self
                .slots
                .iter()
                .map(|&u| s.phi[u * t_count..(u + 1) * t_count].to_vec())
                .collect(),
            gdoc1: s.gdoc1,
            gdoc2: s.gdoc2,
            sweeps: s.sweeps,
        };
        let stats = SufficientStats {
            words: self.words.clone(),
            topic_word,
            stick_counts,
            stick_tail_counts,
        };
        (local, stats)
    }
}

/// Exponentiates and normalizes a row of log weights in place.
fn normalize_log(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x /= total;
    }
}

/// Local step with precomputed global expectations.
pub fn local_step_with(
    doc: &Document,
    global: &GlobalState,
    exp: &GlobalExpectations,
    config: &HdpConfig,
) -> (LocalState, SufficientStats) {
    let solver = DocumentSolver::new(doc, global, exp, config);
    let state = solver.solve(config.max_local_iters, config.local_tol);
    solver.finish(state)
}

pub fn local_step(doc: &Document, global: &GlobalState, config: &HdpConfig) -> (LocalState, SufficientStats) {
    local_step_with(doc, global, &global.expectations(), config)
}
