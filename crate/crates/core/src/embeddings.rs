//! Word vectors (static word2vec text files and per-token contextual
//! vectors), word-level whitening and sentence-level IDF.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{Corpus, DepSentence};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding file is empty")]
    EmptyFile,

    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("no contextual vector for sentence {sentence_id}, token {token}")]
    MissingContextualVector { sentence_id: String, token: usize },

    #[error("contextual vector for sentence {sentence_id}, token {token} has no matching corpus token")]
    UnknownContextualToken { sentence_id: String, token: usize },

    #[error("whitening population is degenerate: {0}")]
    DegeneratePopulation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EmbeddingWarning {
    /// A word appeared again; the first row was kept.
    DuplicateWord { word: String, line: usize },
}

/// Word-keyed vectors loaded from word2vec text format.
#[derive(Clone, Debug)]
pub struct StaticEmbeddings {
    pub dim: usize,
    pub table: HashMap<String, Vec<f64>>,
}

impl StaticEmbeddings {
    /// Reads `word v1 ... vD` lines with an optional leading `V D` header.
    pub fn read_text<R: BufRead>(reader: R) -> Result<(Self, Vec<EmbeddingWarning>), EmbeddingError> {
        let mut table = HashMap::new();
        let mut warnings = Vec::new();
        let mut dim: Option<usize> = None;

        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let rest: Vec<&str> = parts.collect();

            if lineno == 1 && rest.len() == 1 {
                if let (Ok(_), Ok(d)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                    if d == 0 {
                        return Err(EmbeddingError::MalformedLine {
                            line: 1,
                            reason: "header declares zero dimensions".into(),
                        });
                    }
                    dim = Some(d);
                    continue;
                }
            }

            let expected = *dim.get_or_insert(rest.len());
            if rest.len() != expected || expected == 0 {
                return Err(EmbeddingError::DimensionMismatch {
                    line: lineno,
                    expected,
                    found: rest.len(),
                });
            }
            let vector = rest
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EmbeddingError::MalformedLine {
                    line: lineno,
                    reason: e.to_string(),
                })?;

            if table.contains_key(word) {
                warnings.push(EmbeddingWarning::DuplicateWord {
                    word: word.to_owned(),
                    line: lineno,
                });
                continue;
            }
            table.insert(word.to_owned(), vector);
        }

        match dim {
            Some(dim) if !table.is_empty() => Ok((StaticEmbeddings { dim, table }, warnings)),
            _ => Err(EmbeddingError::EmptyFile),
        }
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.table.get(word).map(Vec::as_slice)
    }
}

#[derive(Deserialize)]
struct ContextualRecord {
    sent: String,
    tok: usize,
    vec: Vec<f32>,
}

/// Per-token vectors keyed by `(sentence_id, token index)`.
#[derive(Clone, Debug)]
pub struct ContextualEmbeddings {
    pub dim: usize,
    pub vectors: HashMap<(String, usize), Vec<f64>>,
}

impl ContextualEmbeddings {
    /// Reads JSON lines `{"sent": .., "tok": .., "vec": [..]}`. Components
    /// are parsed as `f32` and widened.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ContextualRecord =
                serde_json::from_str(&line).map_err(|e| EmbeddingError::MalformedLine {
                    line: lineno,
                    reason: e.to_string(),
                })?;
            let expected = *dim.get_or_insert(rec.vec.len());
            if rec.vec.len() != expected || expected == 0 {
                return Err(EmbeddingError::DimensionMismatch {
                    line: lineno,
                    expected,
                    found: rec.vec.len(),
                });
            }
            let v: Vec<f64> = rec.vec.into_iter().map(f64::from).collect();
            if vectors.insert((rec.sent, rec.tok), v).is_some() {
                return Err(EmbeddingError::MalformedLine {
                    line: lineno,
                    reason: "duplicate (sent, tok) record".into(),
                });
            }
        }
        match dim {
            Some(dim) => Ok(ContextualEmbeddings { dim, vectors }),
            None => Err(EmbeddingError::EmptyFile),
        }
    }

    /// Coverage must be exact: one vector per corpus token and nothing else.
    pub fn check_coverage(&self, corpus: &Corpus) -> Result<(), EmbeddingError> {
        let mut expected = HashSet::new();
        for s in &corpus.sentences {
            for t in &s.tokens {
                let key = (s.sentence_id.clone(), t.index);
                if !self.vectors.contains_key(&key) {
                    return Err(EmbeddingError::MissingContextualVector {
                        sentence_id: key.0,
                        token: key.1,
                    });
                }
                expected.insert(key);
            }
        }
        let mut extra: Vec<&(String, usize)> =
            self.vectors.keys().filter(|k| !expected.contains(*k)).collect();
        extra.sort();
        if let Some((sentence_id, token)) = extra.first() {
            return Err(EmbeddingError::UnknownContextualToken {
                sentence_id: sentence_id.clone(),
                token: *token,
            });
        }
        Ok(())
    }
}

/// What to do with words missing from a static vocabulary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OovPolicy {
    /// Drop the token: no flow, no cost row.
    #[default]
    Skip,
    /// Keep the token with a zero vector (cosine distance to it is 1).
    Zero,
}

/// Result of a token lookup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lookup<'a> {
    Vector(&'a [f64]),
    /// Out of vocabulary under [`OovPolicy::Zero`]; not normalizable.
    Zero,
    /// Out of vocabulary under [`OovPolicy::Skip`].
    Skip,
}

/// The vector backbone used for scoring.
#[derive(Clone, Debug)]
pub enum Embeddings {
    Static { store: StaticEmbeddings, oov: OovPolicy },
    Contextual(ContextualEmbeddings),
}

impl Embeddings {
    pub fn dim(&self) -> usize {
        match self {
            Embeddings::Static { store, .. } => store.dim,
            Embeddings::Contextual(store) => store.dim,
        }
    }

    /// Vector for token `index` of `sentence`. Static lookups try the
    /// token key first, then the surface form.
    pub fn lookup<'a>(
        &'a self,
        sentence: &DepSentence,
        index: usize,
        lowercase: bool,
    ) -> Result<Lookup<'a>, EmbeddingError> {
        match self {
            Embeddings::Static { store, oov } => {
                let tok = &sentence.tokens[index - 1];
                let found = store
                    .get(&tok.key(lowercase))
                    .or_else(|| store.get(&tok.surface));
                Ok(match (found, oov) {
                    (Some(v), _) => Lookup::Vector(v),
                    (None, OovPolicy::Skip) => Lookup::Skip,
                    (None, OovPolicy::Zero) => Lookup::Zero,
                })
            }
            Embeddings::Contextual(store) => store
                .vectors
                .get(&(sentence.sentence_id.clone(), index))
                .map(|v| Lookup::Vector(v.as_slice()))
                .ok_or_else(|| EmbeddingError::MissingContextualVector {
                    sentence_id: sentence.sentence_id.clone(),
                    token: index,
                }),
        }
    }
}

/// Affine map `x -> P (x - mean)` whose image of the fitting population has
/// identity sample covariance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WhiteningTransform {
    pub mean: Vec<f64>,
    /// `effective_dim` rows, each of input length.
    pub projection: Vec<Vec<f64>>,
}

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOLERANCE: f64 = 1e-10;

impl WhiteningTransform {
    /// Fits on a population of equal-length vectors using the unbiased
    /// (`n - 1`) sample covariance. Rank-deficient directions are dropped.
    pub fn fit(population: &[&[f64]]) -> Result<Self, EmbeddingError> {
        let n = population.len();
        if n < 2 {
            return Err(EmbeddingError::DegeneratePopulation(format!(
                "need at least 2 vectors, got {n}"
            )));
        }
        let dim = population[0].len();
        if let Some((i, v)) = population.iter().enumerate().find(|(_, v)| v.len() != dim) {
            return Err(EmbeddingError::DimensionMismatch {
                line: i + 1,
                expected: dim,
                found: v.len(),
            });
        }

        let mut mean = vec![0.0; dim];
        for v in population {
            for (m, x) in mean.iter_mut().zip(v.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        let mut centered = vec![0.0; dim];
        for v in population {
            for ((c, x), m) in centered.iter_mut().zip(v.iter()).zip(&mean) {
                *c = x - m;
            }
            for r in 0..dim {
                for c in r..dim {
                    cov[(r, c)] += centered[r] * centered[c];
                }
            }
        }
        for r in 0..dim {
            for c in r..dim {
                let val = cov[(r, c)] / (n as f64 - 1.0);
                cov[(r, c)] = val;
                cov[(c, r)] = val;
            }
        }

        let eig = SymmetricEigen::new(cov);
        let max_eig = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        if max_eig <= 0.0 {
            return Err(EmbeddingError::DegeneratePopulation(
                "all vectors are identical".into(),
            ));
        }

        // Keep eigen-directions in descending eigenvalue order.
        let mut order: Vec<usize> = (0..dim)
            .filter(|&k| eig.eigenvalues[k] > RANK_TOLERANCE * max_eig)
            .collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let projection = order
            .iter()
            .map(|&k| {
                let scale = eig.eigenvalues[k].sqrt().recip();
                eig.eigenvectors.column(k).iter().map(|x| x * scale).collect()
            })
            .collect();

        Ok(WhiteningTransform { mean, projection })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// Output dimensionality after dropping rank-deficient directions.
    pub fn effective_dim(&self) -> usize {
        self.projection.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.projection
            .iter()
            .map(|row| {
                row.iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(p, (xi, m))| p * (xi - m))
                    .sum()
            })
            .collect()
    }
}

/// Smoothed sentence-level inverse document frequency:
/// `idf(w) = ln((1 + N) / (1 + df(w))) + 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdfTable {
    pub num_docs: usize,
    pub idf: HashMap<String, f64>,
}

impl IdfTable {
    pub fn compute(corpus: &Corpus, lowercase: bool) -> Self {
        let mut df: HashMap<String, usize> = HashMap::new();
        for s in &corpus.sentences {
            let words: HashSet<_> = s
                .tokens
                .iter()
                .map(|t| t.key(lowercase))
                .filter(|k| !k.is_empty())
                .collect();
            for w in words {
                *df.entry(w.into_owned()).or_default() += 1;
            }
        }
        let n = corpus.len() as f64;
        let idf = df
            .into_iter()
            .map(|(w, d)| (w, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
            .collect();
        IdfTable {
            num_docs: corpus.len(),
            idf,
        }
    }

    pub fn max_idf(&self) -> f64 {
        self.idf.values().cloned().fold(1.0, f64::max)
    }

    /// IDF of `word`, or the largest observed value for unseen words.
    pub fn get(&self, word: &str) -> f64 {
        self.idf.get(word).copied().unwrap_or_else(|| self.max_idf())
    }
}
