//! Corpus-level co-occurrence graph over dependency trees, weighted
//! PageRank on it, and word-flow assignment.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::FlowScheme;
use crate::conllu::{Corpus, DepSentence};
use crate::embeddings::IdfTable;
use crate::filter::TokenFilter;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("sentence {sentence_id}: no tokens left to carry flow after filtering")]
    EmptySentenceAfterFiltering { sentence_id: String },

    #[error("flow scheme {0} needs {1}")]
    MissingInput(FlowScheme, &'static str),
}

/// Distance used when counting co-occurrences.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphMode {
    /// Hops in the dependency tree.
    #[default]
    Tree,
    /// Absolute difference of surface positions (sliding window).
    Window,
}

/// Undirected word graph; each co-occurring token pair at distance
/// `1 <= h <= hop_limit` adds `1 / h` to the edge between their words.
#[derive(Clone, Debug)]
pub struct CooccurrenceGraph {
    /// Word keys in lexicographic order.
    pub nodes: Vec<String>,
    /// Sorted `(neighbour, weight)` lists, symmetric.
    adjacency: Vec<Vec<(usize, f64)>>,
    index: HashMap<String, usize>,
    pub hop_limit: usize,
    pub mode: GraphMode,
}

impl CooccurrenceGraph {
    /// Pairs of tokens sharing the same word key add nothing (no
    /// self-edges), but each token instance pairs with other words
    /// separately.
    pub fn build(corpus: &Corpus, hop_limit: usize, mode: GraphMode, filter: &TokenFilter) -> Self {
        let mut edges: BTreeMap<(String, String), f64> = BTreeMap::new();
        let mut words: BTreeMap<String, ()> = BTreeMap::new();

        for sentence in &corpus.sentences {
            accumulate_sentence(sentence, hop_limit, mode, filter, &mut words, &mut edges);
        }

        let nodes: Vec<String> = words.into_keys().collect();
        let index: HashMap<String, usize> =
            nodes.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for ((a, b), w) in edges {
            let (ia, ib) = (index[&a], index[&b]);
            adjacency[ia].push((ib, w));
            adjacency[ib].push((ia, w));
        }
        for list in &mut adjacency {
            list.sort_unstable_by_key(|&(j, _)| j);
        }

        CooccurrenceGraph {
            nodes,
            adjacency,
            index,
            hop_limit,
            mode,
        }
    }

    /// Builds a graph directly from weighted edges. Edges between the same
    /// pair are summed; self-edges and non-positive weights are ignored.
    pub fn from_edges<'a, I>(nodes: impl IntoIterator<Item = String>, edges: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str, f64)>,
    {
        let mut words: BTreeMap<String, ()> = nodes.into_iter().map(|w| (w, ())).collect();
        let mut acc: BTreeMap<(String, String), f64> = BTreeMap::new();
        for (a, b, w) in edges {
            words.insert(a.to_owned(), ());
            words.insert(b.to_owned(), ());
            if a == b || !(w > 0.0) {
                continue;
            }
            let key = if a < b { (a.to_owned(), b.to_owned()) } else { (b.to_owned(), a.to_owned()) };
            *acc.entry(key).or_default() += w;
        }
        let nodes: Vec<String> = words.into_keys().collect();
        let index: HashMap<String, usize> =
            nodes.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for ((a, b), w) in acc {
            let (ia, ib) = (index[&a], index[&b]);
            adjacency[ia].push((ib, w));
            adjacency[ib].push((ia, w));
        }
        for list in &mut adjacency {
            list.sort_unstable_by_key(|&(j, _)| j);
        }
        CooccurrenceGraph {
            nodes,
            adjacency,
            index,
            hop_limit: 1,
            mode: GraphMode::Tree,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn edge_weight(&self, a: &str, b: &str) -> f64 {
        let (Some(&ia), Some(&ib)) = (self.index.get(a), self.index.get(b)) else {
            return 0.0;
        };
        self.adjacency[ia]
            .binary_search_by_key(&ib, |&(j, _)| j)
            .map(|pos| self.adjacency[ia][pos].1)
            .unwrap_or(0.0)
    }

    pub fn neighbours(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    /// Sum of incident edge weights.
    pub fn strength(&self, node: usize) -> f64 {
        self.adjacency[node].iter().map(|&(_, w)| w).sum()
    }

    /// Sum of all edge weights (each undirected edge once).
    pub fn total_weight(&self) -> f64 {
        self.edges().map(|(_, _, w)| w).sum()
    }

    /// Edges `(a, b, w)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(move |(i, list)| {
            list.iter()
                .filter(move |&&(j, _)| j > i)
                .map(move |&(j, w)| (self.nodes[i].as_str(), self.nodes[j].as_str(), w))
        })
    }

    /// Tab-separated `word_i word_j weight` lines in lexicographic order.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (a, b, w) in self.edges() {
            writeln!(out, "{a}\t{b}\t{w}")?;
        }
        Ok(())
    }
}

fn accumulate_sentence(
    sentence: &DepSentence,
    hop_limit: usize,
    mode: GraphMode,
    filter: &TokenFilter,
    words: &mut BTreeMap<String, ()>,
    edges: &mut BTreeMap<(String, String), f64>,
) {
    let kept: Vec<(usize, String)> = sentence
        .tokens
        .iter()
        .filter(|t| filter.keeps(t))
        .map(|t| (t.index, t.key(filter.lowercase).into_owned()))
        .collect();
    for (_, w) in &kept {
        words.entry(w.clone()).or_default();
    }

    for (a, (ia, wa)) in kept.iter().enumerate() {
        let tree_dist = match mode {
            GraphMode::Tree => Some(
                sentence
                    .hop_distances_from(*ia)
                    .expect("kept tokens are valid indices"),
            ),
            GraphMode::Window => None,
        };
        for (ib, wb) in &kept[a + 1..] {
            let h = match &tree_dist {
                Some(d) => d[ib - 1],
                None => ib.abs_diff(*ia),
            };
            if h == 0 || h > hop_limit || wa == wb {
                continue;
            }
            let key = if wa < wb { (wa.clone(), wb.clone()) } else { (wb.clone(), wa.clone()) };
            *edges.entry(key).or_default() += 1.0 / h as f64;
        }
    }
}

/// Scores of the unnormalized weighted PageRank
/// `PR(i) = (1 - d) + d * sum_j w_ij PR(j) / sum_k w_jk`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PageRankScores {
    pub pr: BTreeMap<String, f64>,
    pub damping: f64,
    /// Max-abs change that one more iteration would make to `pr`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl PageRankScores {
    /// Score of `word`; words outside the graph behave like isolated nodes.
    pub fn get(&self, word: &str) -> f64 {
        self.pr.get(word).copied().unwrap_or(1.0 - self.damping)
    }

    /// Every score multiplied by `factor` (flows are invariant to this).
    pub fn scaled(&self, factor: f64) -> Self {
        PageRankScores {
            pr: self.pr.iter().map(|(w, p)| (w.clone(), p * factor)).collect(),
            ..self.clone()
        }
    }

    /// Highest-scoring words, ties broken lexicographically.
    pub fn top(&self, k: usize) -> Vec<(&str, f64)> {
        let mut all: Vec<(&str, f64)> = self.pr.iter().map(|(w, &p)| (w.as_str(), p)).collect();
        all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        all.truncate(k);
        all
    }
}

/// One application of the PageRank update.
pub fn pagerank_step(graph: &CooccurrenceGraph, damping: f64, strength: &[f64], pr: &[f64]) -> Vec<f64> {
    (0..graph.node_count())
        .map(|i| {
            let inflow: f64 = graph
                .neighbours(i)
                .iter()
                .filter(|&&(j, _)| strength[j] > 0.0)
                .map(|&(j, w)| w * pr[j] / strength[j])
                .sum();
            (1.0 - damping) + damping * inflow
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Fixed-point iteration from `PR = 1` until the max-abs change drops
/// below `tol`. The returned iterate is the one whose next update moved
/// less than `tol`. Non-convergence is logged and the last iterate kept.
pub fn weighted_pagerank(graph: &CooccurrenceGraph, damping: f64, tol: f64, max_iter: usize) -> PageRankScores {
    let n = graph.node_count();
    let strength: Vec<f64> = (0..n).map(|i| graph.strength(i)).collect();
    let mut pr = vec![1.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = n == 0;

    while !converged && iterations < max_iter {
        let next = pagerank_step(graph, damping, &strength, &pr);
        residual = max_abs_diff(&next, &pr);
        iterations += 1;
        if residual < tol {
            converged = true;
        } else {
            pr = next;
        }
    }
    if n == 0 {
        residual = 0.0;
    } else if !converged {
        residual = max_abs_diff(&pagerank_step(graph, damping, &strength, &pr), &pr);
        log::warn!("weighted PageRank did not converge in {max_iter} iterations (residual {residual:.3e})");
    }

    PageRankScores {
        pr: graph.nodes.iter().cloned().zip(pr).collect(),
        damping,
        residual,
        iterations,
        converged,
    }
}

/// Per-token flows of one sentence, summing to 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowAssignment {
    pub scheme: FlowScheme,
    /// `(token index, flow)` in carrier order.
    pub flows: Vec<(usize, f64)>,
}

impl FlowAssignment {
    pub fn values(&self) -> Vec<f64> {
        self.flows.iter().map(|&(_, f)| f).collect()
    }

    pub fn get(&self, token: usize) -> Option<f64> {
        self.flows.iter().find(|&&(t, _)| t == token).map(|&(_, f)| f)
    }
}

/// Raw per-token weights (count 1, `idf(word)` or `1 / PR(word)`),
/// normalized to sum to one over `carriers`.
pub fn assign_flows(
    sentence: &DepSentence,
    carriers: &[usize],
    scheme: FlowScheme,
    pagerank: Option<&PageRankScores>,
    idf: Option<&IdfTable>,
    lowercase: bool,
) -> Result<FlowAssignment, GraphError> {
    if carriers.is_empty() {
        return Err(GraphError::EmptySentenceAfterFiltering {
            sentence_id: sentence.sentence_id.clone(),
        });
    }
    let key = |i: usize| sentence.tokens[i - 1].key(lowercase);
    let raw: Vec<f64> = match scheme {
        FlowScheme::UniformCount => vec![1.0; carriers.len()],
        FlowScheme::Idf => {
            let idf = idf.ok_or(GraphError::MissingInput(scheme, "an IDF table"))?;
            carriers.iter().map(|&i| idf.get(&key(i))).collect()
        }
        FlowScheme::Swf => {
            let pr = pagerank.ok_or(GraphError::MissingInput(scheme, "PageRank scores"))?;
            carriers.iter().map(|&i| 1.0 / pr.get(&key(i))).collect()
        }
    };
    let total: f64 = raw.iter().sum();
    Ok(FlowAssignment {
        scheme,
        flows: carriers.iter().zip(&raw).map(|(&i, &r)| (i, r / total)).collect(),
    })
}
