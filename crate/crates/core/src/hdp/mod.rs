//! Truncated stick-breaking HDP topic model fitted by stochastic variational
//! inference.
//!
//! Global variational family: `q(phi_k) = Dirichlet(lambda_k)` for topics and
//! `q(v_k) = Beta(a_k, b_k)` for corpus sticks, with `v_K = 1`. Each document
//! carries `q(c_dt) = Mult(zeta_t)`, `q(pi_dt) = Beta(gdoc1_t, gdoc2_t)` with
//! `pi_dT = 1`, and `q(z_dn) = Mult(phi_n)`.

mod checkpoint;
mod local;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use statrs::function::gamma::digamma;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::graph::NodeId;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use local::{local_step, local_step_with, DocumentSolver, LocalState, SufficientStats};

#[derive(Debug, Clone, PartialEq)]
pub struct HdpConfig {
    /// Corpus-level truncation `K`.
    pub corpus_truncation: usize,
    /// Document-level truncation `T`, at most `K`.
    pub doc_truncation: usize,
    /// Topic Dirichlet concentration.
    pub eta: f64,
    /// Corpus stick concentration.
    pub gamma: f64,
    /// Document stick concentration.
    pub alpha: f64,
    pub batch_size: usize,
    /// Learning-rate decay, in `(0.5, 1]`.
    pub kappa: f64,
    /// Learning-rate delay.
    pub tau: f64,
    pub epochs: usize,
    pub max_local_iters: usize,
    pub local_tol: f64,
}

impl Default for HdpConfig {
    fn default() -> Self {
        HdpConfig {
            corpus_truncation: 100,
            doc_truncation: 10,
            eta: 1.0,
            gamma: 1.0,
            alpha: 1.0,
            batch_size: 2,
            kappa: 0.7,
            tau: 64.0,
            epochs: 3,
            max_local_iters: 100,
            local_tol: 1e-4,
        }
    }
}

impl HdpConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.corpus_truncation == 0 {
            return fail("corpus truncation K must be at least 1".into());
        }
        if self.doc_truncation == 0 || self.doc_truncation > self.corpus_truncation {
            return fail(format!(
                "document truncation T must lie in 1..={}, got {}",
                self.corpus_truncation, self.doc_truncation
            ));
        }
        for (name, value) in [("eta", self.eta), ("gamma", self.gamma), ("alpha", self.alpha)] {
            if !(value > 0.0 && value.is_finite()) {
                return fail(format!("{name} must be positive, got {value}"));
            }
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1".into());
        }
        if !(self.kappa > 0.5 && self.kappa <= 1.0) {
            return fail(format!("kappa must lie in (0.5, 1], got {}", self.kappa));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return fail(format!("tau must be non-negative, got {}", self.tau));
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.max_local_iters == 0 {
            return fail("max_local_iters must be at least 1".into());
        }
        if !(self.local_tol > 0.0) {
            return fail(format!("local_tol must be positive, got {}", self.local_tol));
        }
        Ok(())
    }

    /// `rho_t = (tau + t)^(-kappa)`.
    pub fn step_size(&self, t: u64) -> f64 {
        (self.tau + t as f64).powf(-self.kappa)
    }
}

/// `E[log sigma_k(v)]` for `v_k ~ Beta(a_k, b_k)` with the last stick fixed
/// at 1.
pub fn stick_log_expectations(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "stick parameter lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if let Some(x) = a.iter().chain(b).find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "stick parameters must be positive, got {x}"
        )));
    }
    Ok(stick_log_expectations_unchecked(a, b))
}

pub(crate) fn stick_log_expectations_unchecked(a: &[f64], b: &[f64]) -> Vec<f64> {
    let k = a.len();
    let mut out = Vec::with_capacity(k);
    let mut rest = 0.0;
    for i in 0..k {
        if i + 1 == k {
            out.push(rest);
        } else {
            let total = digamma(a[i] + b[i]);
            out.push(digamma(a[i]) - total + rest);
            rest += digamma(b[i]) - total;
        }
    }
    out
}

/// Stick weights `sigma_k` at the given breaking fractions, with the last
/// fraction treated as 1.
pub fn stick_weights(fractions: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(fractions.len());
    let mut rest = 1.0;
    for (i, &v) in fractions.iter().enumerate() {
        if i + 1 == fractions.len() {
            out.push(rest);
        } else {
            out.push(v * rest);
            rest *= 1.0 - v;
        }
    }
    out
}

/// `E[log x_v] = psi(lambda_v) - psi(sum lambda)` for `x ~ Dirichlet(lambda)`.
pub fn dirichlet_log_expectation(lambda: &[f64]) -> Result<Vec<f64>> {
    if let Some(x) = lambda.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "Dirichlet parameters must be positive, got {x}"
        )));
    }
    let total = digamma(lambda.iter().sum());
    Ok(lambda.iter().map(|&l| digamma(l) - total).collect())
}

/// Corpus-level variational parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    num_topics: usize,
    vocab_size: usize,
    /// Row-major `K x V`.
    lambda: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    step_count: u64,
}

impl GlobalState {
    pub fn from_parts(
        vocab_size: usize,
        lambda: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
        step_count: u64,
    ) -> Result<Self> {
        let k = a.len();
        if k == 0 || vocab_size == 0 {
            return Err(Error::InvalidParameter("need at least one topic and one word".into()));
        }
        if b.len() != k || lambda.len() != k * vocab_size {
            return Err(Error::Mismatch(format!(
                "expected lambda of {}x{vocab_size} and {k} stick pairs, got {} entries and {} b values",
                k,
                lambda.len(),
                b.len()
            )));
        }
        if let Some(x) = lambda.iter().chain(&a).chain(&b).find(|&&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "variational parameters must be positive, got {x}"
            )));
        }
        Ok(GlobalState {
            num_topics: k,
            vocab_size,
            lambda,
            a,
            b,
            step_count,
        })
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn lambda_row(&self, k: usize) -> &[f64] {
        &self.lambda[k * self.vocab_size..(k + 1) * self.vocab_size]
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Point estimate `lambda_kv / sum_v lambda_kv` of topic `k`.
    pub fn topic_mean(&self, k: usize) -> Vec<f64> {
        let row = self.lambda_row(k);
        let total: f64 = row.iter().sum();
        row.iter().map(|&l| l / total).collect()
    }

    /// Point estimates `a_k / (a_k + b_k)`, last fixed at 1.
    pub fn stick_means(&self) -> Vec<f64> {
        let k = self.num_topics;
        (0..k)
            .map(|i| if i + 1 == k { 1.0 } else { self.a[i] / (self.a[i] + self.b[i]) })
            .collect()
    }

    pub fn expectations(&self) -> GlobalExpectations {
        GlobalExpectations {
            elog_sticks: stick_log_expectations_unchecked(&self.a, &self.b),
            psi_row_sums: (0..self.num_topics)
                .map(|k| digamma(self.lambda_row(k).iter().sum()))
                .collect(),
        }
    }

    /// `E[log beta_kv]` for every topic at word `v`, written into `out`.
    pub(crate) fn elog_beta_column(&self, exp: &GlobalExpectations, v: NodeId, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = digamma(self.lambda[k * self.vocab_size + v]) - exp.psi_row_sums[k];
        }
    }
}

/// Per-step quantities shared by all local steps of a batch.
#[derive(Debug, Clone)]
pub struct GlobalExpectations {
    /// `E[log sigma_k(v)]`.
    pub elog_sticks: Vec<f64>,
    /// `psi(sum_v lambda_kv)`.
    pub psi_row_sums: Vec<f64>,
}

fn model_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    // Keep model randomness apart from the walk streams of the same seed.
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x6a09_e667_f3bc_c908);
    rng.set_stream(stream);
    rng
}

/// `lambda = eta + Uniform(0, 1)`, sticks at their prior `(1, gamma)`.
pub fn init_global(config: &HdpConfig, vocab_size: usize, seed: u64) -> Result<GlobalState> {
    config.validate()?;
    if vocab_size == 0 {
        return Err(Error::InvalidParameter("vocabulary must be nonempty".into()));
    }
    let k = config.corpus_truncation;
    let mut rng = model_rng(seed, 0);
    let lambda = (0..k * vocab_size)
        .map(|_| config.eta + rng.gen::<f64>())
        .collect();
    Ok(GlobalState {
        num_topics: k,
        vocab_size,
        lambda,
        a: vec![1.0; k],
        b: vec![config.gamma; k],
        step_count: 0,
    })
}

/// Natural-gradient step with `rho_t` from the config schedule, treating the
/// batch as if it were repeated `corpus_size / batch_size` times.
pub fn global_step(
    global: &mut GlobalState,
    batch: &[SufficientStats],
    corpus_size: usize,
    batch_size: usize,
    config: &HdpConfig,
) {
    let rho = config.step_size(global.step_count);
    global_step_with_rate(global, batch, corpus_size, batch_size, config, rho);
}

/// [`global_step`] with an explicit step size.
pub fn global_step_with_rate(
    global: &mut GlobalState,
    batch: &[SufficientStats],
    corpus_size: usize,
    batch_size: usize,
    config: &HdpConfig,
    rho: f64,
) {
    let k = global.num_topics;
    let v = global.vocab_size;
    let scale = corpus_size as f64 / batch_size as f64;

    let mut word_stats = vec![0.0; k * v];
    let mut stick_m = vec![0.0; k];
    let mut stick_big_m = vec![0.0; k];
    for stats in batch {
        for (u, &w) in stats.words.iter().enumerate() {
            let row = &stats.topic_word[u * k..(u + 1) * k];
            for (topic, &s) in row.iter().enumerate() {
                word_stats[topic * v + w] += s;
            }
        }
        for topic in 0..k {
            stick_m[topic] += stats.stick_counts[topic];
            stick_big_m[topic] += stats.stick_tail_counts[topic];
        }
    }

    let keep = 1.0 - rho;
    for (l, s) in global.lambda.iter_mut().zip(&word_stats) {
        *l = keep * *l + rho * (config.eta + scale * s);
    }
    for topic in 0..k {
        global.a[topic] = keep * global.a[topic] + rho * (1.0 + scale * stick_m[topic]);
        global.b[topic] = keep * global.b[topic] + rho * (config.gamma + scale * stick_big_m[topic]);
    }
    global.step_count += 1;
}

/// SVI over shuffled mini-batches. `on_epoch` sees the state after each
/// completed epoch (1-based).
pub fn fit_with<F>(corpus: &Corpus, config: &HdpConfig, seed: u64, mut on_epoch: F) -> Result<GlobalState>
where
    F: FnMut(usize, &GlobalState) -> Result<()>,
{
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::InvalidParameter("cannot fit an empty corpus".into()));
    }
    let mut global = init_global(config, corpus.vocab_size(), seed)?;
    let docs = corpus.documents();
    let d = docs.len();
    let mut order: Vec<usize> = (0..d).collect();
    for epoch in 0..config.epochs {
        let mut rng = model_rng(seed, 1 + epoch as u64);
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let exp = global.expectations();
            let stats: Vec<SufficientStats> = batch
                .par_iter()
                .map(|&i| local_step_with(&docs[i], &global, &exp, config).1)
                .collect();
            global_step(&mut global, &stats, d, batch.len(), config);
        }
        on_epoch(epoch + 1, &global)?;
    }
    Ok(global)
}

pub fn fit(corpus: &Corpus, config: &HdpConfig, seed: u64) -> Result<GlobalState> {
    fit_with(corpus, config, seed, |_, _| Ok(()))
}

/// Held-out perplexity `exp(-sum_d log p(w_d) / sum_d N_d)` using the
/// variational point-estimate predictive for each document.
pub fn perplexity(test: &Corpus, global: &GlobalState, config: &HdpConfig) -> Result<f64> {
    config.validate()?;
    if test.is_empty() {
        return Err(Error::InvalidParameter("perplexity needs at least one document".into()));
    }
    let v = global.vocab_size();
    for (d, doc) in test.documents().iter().enumerate() {
        if let Some(&t) = doc.tokens().iter().find(|&&t| t >= v) {
            return Err(Error::Corpus {
                document: d + 1,
                message: format!("token {t} outside model vocabulary of size {v}"),
            });
        }
    }
    if config.doc_truncation > global.num_topics() {
        return Err(Error::Mismatch(format!(
            "document truncation {} exceeds model topics {}",
            config.doc_truncation,
            global.num_topics()
        )));
    }
    let k = global.num_topics();
    let row_sums: Vec<f64> = (0..k).map(|i| global.lambda_row(i).iter().sum()).collect();
    let exp = global.expectations();
    let log_liks: Vec<f64> = test
        .documents()
        .par_iter()
        .map(|doc| {
            let (local, _) = local_step_with(doc, global, &exp, config);
            let fractions: Vec<f64> = local
                .gdoc1
                .iter()
                .zip(&local.gdoc2)
                .map(|(g1, g2)| g1 / (g1 + g2))
                .collect();
            let pi = stick_weights(&fractions);
            // Mixture weight of each corpus topic in this document.
            let mut weight = vec![0.0; k];
            for (t, row) in local.zeta.iter().enumerate() {
                for (w, &z) in weight.iter_mut().zip(row) {
                    *w += pi[t] * z;
                }
            }
            doc.tokens()
                .iter()
                .map(|&word| {
                    let p: f64 = (0..k)
                        .map(|i| weight[i] * global.lambda[i * v + word] / row_sums[i])
                        .sum();
                    p.ln()
                })
                .sum::<f64>()
        })
        .collect();
    let total: f64 = log_liks.iter().sum();
    Ok((-total / test.num_tokens() as f64).exp())
}
