//! Random-walk corpora: each walk is a document, each visited node a word.
//!
//! Corpus files hold one document per line as space-separated node ids.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, TransitionSampler};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    tokens: Vec<NodeId>,
}

impl Document {
    pub fn new(tokens: Vec<NodeId>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidParameter("a document needs at least one token".into()));
        }
        Ok(Document { tokens })
    }

    pub fn tokens(&self) -> &[NodeId] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    vocab_size: usize,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, vocab_size: usize) -> Result<Self> {
        for (d, doc) in documents.iter().enumerate() {
            if let Some(&t) = doc.tokens.iter().find(|&&t| t >= vocab_size) {
                return Err(Error::Corpus {
                    document: d + 1,
                    message: format!("token {t} outside vocabulary of size {vocab_size}"),
                });
            }
        }
        Ok(Corpus {
            documents,
            vocab_size,
        })
    }

    pub fn from_token_lists(lists: Vec<Vec<NodeId>>, vocab_size: usize) -> Result<Self> {
        let docs = lists
            .into_iter()
            .enumerate()
            .map(|(d, t)| {
                Document::new(t).map_err(|e| Error::Corpus {
                    document: d + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(docs, vocab_size)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_tokens(&self) -> usize {
        self.documents.iter().map(Document::len).sum()
    }

    pub fn mean_length(&self) -> f64 {
        if self.documents.is_empty() {
            return 0.0;
        }
        self.num_tokens() as f64 / self.documents.len() as f64
    }

    /// Splits off the last `fraction` of documents by index as a held-out
    /// set. Returns `(train, held_out)`; the training part keeps at least
    /// one document.
    pub fn split_holdout(&self, fraction: f64) -> Result<(Corpus, Corpus)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidParameter(format!(
                "held-out fraction must lie in [0, 1), got {fraction}"
            )));
        }
        let n = self.documents.len();
        let held = ((n as f64 * fraction).round() as usize).min(n.saturating_sub(1));
        let (train, test) = self.documents.split_at(n - held);
        Ok((
            Corpus {
                documents: train.to_vec(),
                vocab_size: self.vocab_size,
            },
            Corpus {
                documents: test.to_vec(),
                vocab_size: self.vocab_size,
            },
        ))
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut line = String::new();
        for doc in &self.documents {
            line.clear();
            for (n, t) in doc.tokens.iter().enumerate() {
                if n > 0 {
                    line.push(' ');
                }
                line.push_str(&t.to_string());
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// Reads a corpus file. Every line is a document; blank lines are
    /// rejected. Errors name the 1-based document index.
    pub fn read<R: BufRead>(reader: R, vocab_size: usize) -> Result<Corpus> {
        let mut documents = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let document = idx + 1;
            let line = line.map_err(|e| Error::Corpus {
                document,
                message: e.to_string(),
            })?;
            let tokens = line
                .split_whitespace()
                .map(|tok| {
                    let t: NodeId = tok.parse().map_err(|_| Error::Corpus {
                        document,
                        message: format!("token {tok:?} is not a node id"),
                    })?;
                    if t >= vocab_size {
                        return Err(Error::Corpus {
                            document,
                            message: format!("token {t} outside vocabulary of size {vocab_size}"),
                        });
                    }
                    Ok(t)
                })
                .collect::<Result<Vec<_>>>()?;
            if tokens.is_empty() {
                return Err(Error::Corpus {
                    document,
                    message: "empty document".into(),
                });
            }
            documents.push(Document { tokens });
        }
        Ok(Corpus {
            documents,
            vocab_size,
        })
    }
}

/// Random stream for walk `index` under `seed`. Streams are independent of
/// each other and of scheduling.
pub fn walk_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One walk: uniform start, target length `max(1, Poisson(L))`, early stop
/// at an isolated node.
pub fn sample_walk<R: Rng + ?Sized>(
    sampler: &TransitionSampler,
    expected_length: &Poisson<f64>,
    rng: &mut R,
) -> Document {
    let v = sampler.num_nodes();
    let target = (expected_length.sample(rng) as usize).max(1);
    let mut current = rng.gen_range(0..v);
    let mut tokens = Vec::with_capacity(target);
    tokens.push(current);
    while tokens.len() < target {
        match sampler.step(current, rng) {
            Some(next) => {
                tokens.push(next);
                current = next;
            }
            None => break,
        }
    }
    Document { tokens }
}

/// `D` independent walks; walk `d` draws from `walk_rng(seed, d)`, so the
/// corpus does not depend on how many rayon workers run it.
pub fn generate_corpus(
    g: &Graph,
    num_walks: usize,
    expected_length: f64,
    seed: u64,
) -> Result<Corpus> {
    if num_walks == 0 {
        return Err(Error::InvalidParameter("number of walks must be at least 1".into()));
    }
    if g.num_nodes() == 0 {
        return Err(Error::InvalidParameter("graph has no nodes".into()));
    }
    let poisson = Poisson::new(expected_length).map_err(|_| {
        Error::InvalidParameter(format!(
            "expected walk length must be positive, got {expected_length}"
        ))
    })?;
    let sampler = TransitionSampler::new(g);
    let documents: Vec<Document> = (0..num_walks)
        .into_par_iter()
        .map(|d| sample_walk(&sampler, &poisson, &mut walk_rng(seed, d as u64)))
        .collect();
    Ok(Corpus {
        documents,
        vocab_size: g.num_nodes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap()
    }

    #[test]
    fn self_loop_only_graph() {
        let g = Graph::from_edges(1, [(0, 0, 1.0)]).unwrap();
        let c = generate_corpus(&g, 20, 5.0, 1).unwrap();
        for doc in c.documents() {
            assert!(!doc.is_empty());
            assert!(doc.tokens().iter().all(|&t| t == 0));
        }
    }

    #[test]
    fn isolated_start_gives_single_token() {
        let g = Graph::from_edges(1, []).unwrap();
        let c = generate_corpus(&g, 10, 50.0, 4).unwrap();
        assert!(c.documents().iter().all(|d| d.tokens() == [0]));
    }

    #[test]
    fn triangle_token_frequencies_are_uniform() {
        let c = generate_corpus(&triangle(), 10_000, 100.0, 2024).unwrap();
        let mut counts = [0usize; 3];
        for d in c.documents() {
            for &t in d.tokens() {
                counts[t] += 1;
            }
        }
        let total = c.num_tokens() as f64;
        for n in counts {
            assert!((n as f64 / total - 1.0 / 3.0).abs() < 0.01);
        }
    }

    #[test]
    fn mean_length_matches_poisson() {
        let l = 100.0;
        let c = generate_corpus(&triangle(), 10_000, l, 77).unwrap();
        let tol = 3.0 * (l / 10_000.0f64).sqrt();
        assert!((c.mean_length() - l).abs() < tol, "{}", c.mean_length());
    }

    #[test]
    fn zero_walks_rejected() {
        assert!(generate_corpus(&triangle(), 0, 10.0, 0).is_err());
        assert!(generate_corpus(&triangle(), 1, 0.0, 0).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_corpus(&triangle(), 50, 20.0, 9).unwrap();
        let b = generate_corpus(&triangle(), 50, 20.0, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn file_round_trip() {
        let c = Corpus::from_token_lists(vec![vec![0, 1, 2]], 3).unwrap();
        let mut buf = Vec::new();
        c.write(&mut buf).unwrap();
        assert_eq!(buf, b"0 1 2\n");
        assert_eq!(Corpus::read(buf.as_slice(), 3).unwrap(), c);
    }

    #[test]
    fn empty_line_rejected() {
        let err = Corpus::read("0 1\n\n2\n".as_bytes(), 3).unwrap_err();
        assert!(matches!(err, Error::Corpus { document: 2, .. }), "{err}");
    }

    #[test]
    fn out_of_vocabulary_token_names_document() {
        let err = Corpus::read("9\n".as_bytes(), 5).unwrap_err();
        assert!(matches!(err, Error::Corpus { document: 1, .. }), "{err}");
        let err = Corpus::read("1 2\n0 x\n".as_bytes(), 5).unwrap_err();
        assert!(matches!(err, Error::Corpus { document: 2, .. }), "{err}");
    }

    #[test]
    fn holdout_takes_tail() {
        let c = Corpus::from_token_lists((0..20).map(|i| vec![i % 3]).collect(), 3).unwrap();
        let (train, test) = c.split_holdout(0.1).unwrap();
        assert_eq!(train.len(), 18);
        assert_eq!(test.documents(), &c.documents()[18..]);
    }
}
