//! Composes flows, costs and the exact transport solve into pair scores.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ContextMode, FlowScheme, MethodConfig, Metric};
use crate::conllu::{Corpus, DepSentence};
use crate::context::{cost_matrix, embed_subtree, extract_subtrees, member_weights, ngram_spans, CostMatrix, SentenceContext, Subtree};
use crate::embeddings::{Embeddings, IdfTable, Lookup, WhiteningTransform};
use crate::error::{Error, Result};
use crate::filter::TokenFilter;
use crate::graph::{assign_flows, weighted_pagerank, CooccurrenceGraph, FlowAssignment, PageRankScores};
use crate::linalg::{cosine_distance, norm, weighted_mean};
use crate::transport::{solve_exact, TransportProblem};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("unknown sentence id {0}")]
    UnknownSentence(String),
}

/// Corpus-level artifacts shared by every pair: PageRank scores, IDF and
/// the whitening transform. Which ones exist depends on the config.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CorpusArtifacts {
    pub pagerank: Option<PageRankScores>,
    pub idf: Option<IdfTable>,
    pub whitening: Option<WhiteningTransform>,
}

impl CorpusArtifacts {
    pub fn build(corpus: &Corpus, embeddings: &Embeddings, cfg: &MethodConfig, filter: &TokenFilter) -> Result<Self> {
        cfg.validate()?;
        let pagerank = (cfg.flow == FlowScheme::Swf).then(|| {
            let graph = CooccurrenceGraph::build(corpus, cfg.n, cfg.graph_mode, filter);
            weighted_pagerank(&graph, cfg.d, cfg.pagerank_tol, cfg.pagerank_max_iter)
        });
        let idf = (cfg.flow == FlowScheme::Idf).then(|| IdfTable::compute(corpus, cfg.lowercase));
        let whitening = if cfg.whiten {
            Some(fit_corpus_whitening(corpus, embeddings, cfg.lowercase)?)
        } else {
            None
        };
        Ok(CorpusArtifacts { pagerank, idf, whitening })
    }
}

/// Whitening fitted on every corpus token that has a vector (each token
/// occurrence counts once).
pub fn fit_corpus_whitening(corpus: &Corpus, embeddings: &Embeddings, lowercase: bool) -> Result<WhiteningTransform> {
    let mut population: Vec<&[f64]> = Vec::new();
    for s in &corpus.sentences {
        for t in &s.tokens {
            if let Lookup::Vector(v) = embeddings.lookup(s, t.index, lowercase)? {
                population.push(v);
            }
        }
    }
    Ok(WhiteningTransform::fit(&population)?)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub tokens_a: usize,
    pub tokens_b: usize,
    pub solver_iterations: usize,
    /// One side had no flow carriers; `distance` holds the fallback.
    pub undefined: bool,
    pub zero_norm_pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub pair_id: String,
    pub distance: f64,
    pub diagnostics: Diagnostics,
}

struct Prepared {
    context: SentenceContext,
    flows: FlowAssignment,
    subtrees: Vec<Subtree>,
}

/// Scores sentence pairs of one corpus under one configuration.
///
/// Construction resolves vectors (whitened if configured), flows and context
/// embeddings for every sentence; scoring a pair is then a cost matrix plus
/// one exact transport solve.
pub struct Scorer {
    cfg: MethodConfig,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    prepared: Vec<Option<Prepared>>,
    fallback: f64,
}

impl Scorer {
    pub fn new(
        corpus: &Corpus,
        embeddings: &Embeddings,
        cfg: &MethodConfig,
        filter: &TokenFilter,
        artifacts: &CorpusArtifacts,
    ) -> Result<Self> {
        cfg.validate()?;
        if cfg.flow == FlowScheme::Swf && artifacts.pagerank.is_none() {
            return Err(Error::Config("swf flows need PageRank scores in the artifacts".into()));
        }
        if cfg.flow == FlowScheme::Idf && artifacts.idf.is_none() {
            return Err(Error::Config("idf flows need an IDF table in the artifacts".into()));
        }
        if cfg.whiten != artifacts.whitening.is_some() {
            return Err(Error::Config("whitening setting does not match the artifacts".into()));
        }

        let prepared = corpus
            .sentences
            .par_iter()
            .map(|s| prepare(s, embeddings, cfg, filter, artifacts))
            .collect::<Result<Vec<_>>>()?;

        let max_norm = prepared
            .iter()
            .flatten()
            .flat_map(|p| p.context.vectors.iter())
            .map(|v| norm(v))
            .fold(0.0, f64::max);
        let fallback = match cfg.metric {
            Metric::Cosine => cfg.cosine_fallback(),
            Metric::L2 => 2.0 * (1.0 + cfg.a) * max_norm,
        };

        let ids: Vec<String> = corpus.sentences.iter().map(|s| s.sentence_id.clone()).collect();
        let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Ok(Scorer {
            cfg: cfg.clone(),
            ids,
            index,
            prepared,
            fallback,
        })
    }

    /// Builds the artifacts and the scorer in one go.
    pub fn from_corpus(corpus: &Corpus, embeddings: &Embeddings, cfg: &MethodConfig, filter: &TokenFilter) -> Result<Self> {
        let artifacts = CorpusArtifacts::build(corpus, embeddings, cfg, filter)?;
        Scorer::new(corpus, embeddings, cfg, filter, &artifacts)
    }

    pub fn config(&self) -> &MethodConfig {
        &self.cfg
    }

    /// Distance reported for pairs where one side has no flow carriers.
    pub fn fallback_distance(&self) -> f64 {
        self.fallback
    }

    fn position(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| ScoreError::UnknownSentence(id.to_owned()).into())
    }

    pub fn flows(&self, id: &str) -> Result<Option<&FlowAssignment>> {
        Ok(self.prepared[self.position(id)?].as_ref().map(|p| &p.flows))
    }

    pub fn subtrees(&self, id: &str) -> Result<&[Subtree]> {
        Ok(self.prepared[self.position(id)?]
            .as_ref()
            .map(|p| p.subtrees.as_slice())
            .unwrap_or(&[]))
    }

    pub fn context(&self, id: &str) -> Result<Option<&SentenceContext>> {
        Ok(self.prepared[self.position(id)?].as_ref().map(|p| &p.context))
    }

    /// Cost matrix with `a` rows for sentence `a` and columns for `b`.
    pub fn cost_matrix(&self, a: &str, b: &str) -> Result<CostMatrix> {
        let (pa, pb) = (self.position(a)?, self.position(b)?);
        let side = |p: usize| {
            self.prepared[p].as_ref().map(|p| &p.context).ok_or_else(|| {
                crate::context::ContextError::EmptySideAfterFiltering {
                    sentence_id: self.ids[p].clone(),
                }
            })
        };
        Ok(cost_matrix(side(pa)?, side(pb)?, self.cfg.a, self.cfg.metric, self.cfg.aggregation)?)
    }

    /// Distance between sentences `a` and `b`.
    ///
    /// The pair is always evaluated in sentence-id order, so swapping the
    /// arguments gives a bitwise-identical distance.
    pub fn score_pair(&self, pair_id: &str, a: &str, b: &str) -> Result<PairScore> {
        let (pa, pb) = (self.position(a)?, self.position(b)?);
        let (tokens_a, tokens_b) = (self.carrier_count(pa), self.carrier_count(pb));
        let (first, second) = if self.ids[pa] <= self.ids[pb] { (pa, pb) } else { (pb, pa) };
        let (Some(left), Some(right)) = (&self.prepared[first], &self.prepared[second]) else {
            return Ok(PairScore {
                pair_id: pair_id.to_owned(),
                distance: self.fallback,
                diagnostics: Diagnostics {
                    tokens_a,
                    tokens_b,
                    undefined: true,
                    ..Diagnostics::default()
                },
            });
        };

        let cost = cost_matrix(&left.context, &right.context, self.cfg.a, self.cfg.metric, self.cfg.aggregation)?;
        let problem = TransportProblem::new(left.flows.values(), right.flows.values(), cost.entries);
        let plan = solve_exact(&problem)?;
        Ok(PairScore {
            pair_id: pair_id.to_owned(),
            distance: plan.objective.max(0.0),
            diagnostics: Diagnostics {
                tokens_a,
                tokens_b,
                solver_iterations: plan.iterations,
                undefined: false,
                zero_norm_pairs: cost.zero_norm_pairs,
            },
        })
    }

    fn carrier_count(&self, p: usize) -> usize {
        self.prepared[p].as_ref().map_or(0, |p| p.context.carriers.len())
    }

    /// Scores many pairs in parallel; output order follows input order.
    pub fn score_many(&self, pairs: &[(String, String, String)]) -> Result<Vec<PairScore>> {
        pairs
            .par_iter()
            .map(|(id, a, b)| self.score_pair(id, a, b))
            .collect()
    }

    /// Symmetric matrix of distances among `ids`, zero on the diagonal.
    pub fn distance_matrix(&self, ids: &[String]) -> Result<Vec<Vec<f64>>> {
        let n = ids.len();
        let upper: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let values = upper
            .par_iter()
            .map(|&(i, j)| self.score_pair("", &ids[i], &ids[j]).map(|s| s.distance))
            .collect::<Result<Vec<f64>>>()?;
        let mut out = vec![vec![0.0; n]; n];
        for (&(i, j), d) in upper.iter().zip(values) {
            out[i][j] = d;
            out[j][i] = d;
        }
        Ok(out)
    }
}

fn prepare(
    sentence: &DepSentence,
    embeddings: &Embeddings,
    cfg: &MethodConfig,
    filter: &TokenFilter,
    artifacts: &CorpusArtifacts,
) -> Result<Option<Prepared>> {
    let dim = artifacts
        .whitening
        .as_ref()
        .map_or(embeddings.dim(), WhiteningTransform::effective_dim);

    let mut carriers = Vec::new();
    let mut vectors: HashMap<usize, Vec<f64>> = HashMap::new();
    for tok in &sentence.tokens {
        if !filter.keeps(tok) {
            continue;
        }
        let v = match embeddings.lookup(sentence, tok.index, cfg.lowercase)? {
            Lookup::Vector(v) => match &artifacts.whitening {
                Some(w) => w.apply(v),
                None => v.to_vec(),
            },
            Lookup::Zero => vec![0.0; dim],
            Lookup::Skip => continue,
        };
        carriers.push(tok.index);
        vectors.insert(tok.index, v);
    }
    if carriers.is_empty() {
        log::warn!("sentence {} has no flow carriers after filtering", sentence.sentence_id);
        return Ok(None);
    }

    let flows = assign_flows(
        sentence,
        &carriers,
        cfg.flow,
        artifacts.pagerank.as_ref(),
        artifacts.idf.as_ref(),
        cfg.lowercase,
    )?;

    let carrier_set: HashSet<usize> = carriers.iter().copied().collect();
    let (subtrees, unit_members): (Vec<Subtree>, Vec<Vec<usize>>) = match cfg.context {
        ContextMode::None => (Vec::new(), Vec::new()),
        ContextMode::Subtree => {
            let subtrees = extract_subtrees(sentence, cfg.m, |i| carrier_set.contains(&i));
            let members = subtrees.iter().map(|t| t.members.clone()).collect();
            (subtrees, members)
        }
        ContextMode::Ngram => (Vec::new(), ngram_spans(&carriers)),
    };
    let units = match cfg.context {
        ContextMode::Subtree => subtrees
            .iter()
            .map(|st| {
                embed_subtree(sentence, st, |i| vectors.get(&i).map(Vec::as_slice), dim, cfg.subtree_weighting, Some(&flows))
                    .map(|e| e.vector)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?,
        _ => unit_members
            .iter()
            .map(|members| {
                let weights = member_weights(members, cfg.subtree_weighting, Some(&flows));
                weighted_mean(members.iter().map(|i| vectors[i].as_slice()), &weights, dim)
            })
            .collect(),
    };

    let carrier_vectors = carriers.iter().map(|i| vectors[i].clone()).collect();
    let context = SentenceContext::new(sentence.sentence_id.clone(), carriers, carrier_vectors, units, &unit_members);
    Ok(Some(Prepared { context, flows, subtrees }))
}

/// Mean over sentences of the mean pairwise cosine distance between the
/// vectors of a sentence's kept tokens. Sentences with fewer than two such
/// tokens are left out; returns `None` if none remain.
pub fn mean_pairwise_cosine(
    corpus: &Corpus,
    embeddings: &Embeddings,
    filter: &TokenFilter,
    lowercase: bool,
) -> Result<Option<f64>> {
    let mut per_sentence = Vec::new();
    for s in &corpus.sentences {
        let mut vecs: Vec<&[f64]> = Vec::new();
        for t in s.tokens.iter().filter(|t| filter.keeps(t)) {
            match embeddings.lookup(s, t.index, lowercase)? {
                Lookup::Vector(v) => vecs.push(v),
                Lookup::Zero | Lookup::Skip => {}
            }
        }
        if vecs.len() < 2 {
            continue;
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for i in 0..vecs.len() {
            for j in i + 1..vecs.len() {
                total += cosine_distance(vecs[i], vecs[j]).unwrap_or(1.0);
                count += 1;
            }
        }
        per_sentence.push(total / count as f64);
    }
    if per_sentence.is_empty() {
        return Ok(None);
    }
    Ok(Some(per_sentence.iter().sum::<f64>() / per_sentence.len() as f64))
}
