//! Subtree contexts and the syntax-aware cost matrix.
//!
//! Every flow-carrying word gets a set of context embeddings: the averaged
//! vectors of all subtrees (or n-gram spans) it belongs to. The cost between
//! two words is their own distance plus `a` times a distance between their
//! context sets.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ContextAggregation, Metric, SubtreeWeighting};
use crate::conllu::DepSentence;
use crate::graph::FlowAssignment;
use crate::linalg::{cosine_distance, euclidean, sorted_sum, weighted_mean};

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("no vector for token {token} of sentence {sentence_id}")]
    MissingVector { sentence_id: String, token: usize },

    #[error("sentence {sentence_id} has no flow-carrying tokens")]
    EmptySideAfterFiltering { sentence_id: String },
}

/// A parent token with its kept descendants up to `hop` child edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subtree {
    pub parent: usize,
    pub hop: usize,
    /// Sorted token indices, parent included.
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtreeEmbedding {
    pub subtree: Subtree,
    pub vector: Vec<f64>,
}

/// Subtrees of `sentence` for hops `1..=max_hop`.
///
/// Only tokens accepted by `keep` become parents or members, although the
/// traversal passes through rejected tokens. Single-member subtrees are not
/// emitted, and a hop that adds no kept member repeats the previous set and
/// is skipped.
pub fn extract_subtrees(sentence: &DepSentence, max_hop: usize, keep: impl Fn(usize) -> bool) -> Vec<Subtree> {
    let mut out = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    for parent in 1..=sentence.len() {
        if !keep(parent) {
            continue;
        }
        for hop in 1..=max_hop {
            let mut members: Vec<usize> = sentence
                .children_within(parent, hop)
                .expect("parent is a valid index")
                .into_iter()
                .filter(|&c| keep(c))
                .collect();
            if members.is_empty() {
                continue;
            }
            members.push(parent);
            members.sort_unstable();
            if seen.insert(members.clone()) {
                out.push(Subtree { parent, hop, members });
            }
        }
    }
    out
}

/// Contiguous 2-grams and 3-grams over the carrier sequence.
pub fn ngram_spans(carriers: &[usize]) -> Vec<Vec<usize>> {
    [2, 3]
        .into_iter()
        .flat_map(|size| carriers.windows(size).map(<[usize]>::to_vec))
        .collect()
}

/// Member weights for averaging, summing to one.
pub fn member_weights(members: &[usize], weighting: SubtreeWeighting, flows: Option<&FlowAssignment>) -> Vec<f64> {
    let uniform = || vec![1.0 / members.len() as f64; members.len()];
    match (weighting, flows) {
        (SubtreeWeighting::Flow, Some(flows)) => {
            let raw: Vec<f64> = members.iter().map(|&m| flows.get(m).unwrap_or(0.0)).collect();
            let total: f64 = raw.iter().sum();
            if total > 0.0 {
                raw.iter().map(|r| r / total).collect()
            } else {
                uniform()
            }
        }
        _ => uniform(),
    }
}

/// Weighted average of the members' vectors.
pub fn embed_subtree<'a>(
    sentence: &DepSentence,
    subtree: &Subtree,
    vector: impl Fn(usize) -> Option<&'a [f64]>,
    dim: usize,
    weighting: SubtreeWeighting,
    flows: Option<&FlowAssignment>,
) -> Result<SubtreeEmbedding, ContextError> {
    let vectors = subtree
        .members
        .iter()
        .map(|&m| {
            vector(m).ok_or_else(|| ContextError::MissingVector {
                sentence_id: sentence.sentence_id.clone(),
                token: m,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let weights = member_weights(&subtree.members, weighting, flows);
    Ok(SubtreeEmbedding {
        subtree: subtree.clone(),
        vector: weighted_mean(vectors, &weights, dim),
    })
}

/// Per-sentence data the cost matrix needs: the flow carriers, their
/// vectors and the context embeddings that contain each of them.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SentenceContext {
    pub sentence_id: String,
    pub carriers: Vec<usize>,
    /// One vector per carrier.
    pub vectors: Vec<Vec<f64>>,
    /// Context embeddings (subtrees or n-grams).
    pub units: Vec<Vec<f64>>,
    /// For each carrier position, the indices into `units` containing it.
    pub containing: Vec<Vec<usize>>,
}

impl SentenceContext {
    /// Wires `unit_members` (token index sets) to carrier positions.
    pub fn new(
        sentence_id: String,
        carriers: Vec<usize>,
        vectors: Vec<Vec<f64>>,
        units: Vec<Vec<f64>>,
        unit_members: &[Vec<usize>],
    ) -> Self {
        let containing = carriers
            .iter()
            .map(|tok| {
                unit_members
                    .iter()
                    .enumerate()
                    .filter(|(_, members)| members.contains(tok))
                    .map(|(u, _)| u)
                    .collect()
            })
            .collect();
        SentenceContext {
            sentence_id,
            carriers,
            vectors,
            units,
            containing,
        }
    }
}

/// Pairwise word costs for one sentence pair.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub entries: Vec<Vec<f64>>,
    pub a: f64,
    /// Cosine distances involving a zero vector (each counted as 1).
    pub zero_norm_pairs: usize,
}

impl CostMatrix {
    pub fn transposed(&self) -> CostMatrix {
        CostMatrix {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            entries: (0..self.cols.len())
                .map(|j| self.entries.iter().map(|r| r[j]).collect())
                .collect(),
            a: self.a,
            zero_norm_pairs: self.zero_norm_pairs,
        }
    }
}

struct Distance {
    metric: Metric,
    zero_norm: usize,
}

impl Distance {
    fn eval(&mut self, x: &[f64], y: &[f64]) -> f64 {
        match self.metric {
            Metric::L2 => euclidean(x, y),
            Metric::Cosine => cosine_distance(x, y).unwrap_or_else(|| {
                self.zero_norm += 1;
                1.0
            }),
        }
    }
}

fn mean_of(values: &mut [f64]) -> f64 {
    let n = values.len() as f64;
    sorted_sum(values) / n
}

/// `c(i, j) = dist(v_i, v_j) + a * context(S_i, S_j)`.
///
/// The context term is zero when either word has no context, or when
/// `a == 0`. Sums run over sorted values, so swapping the sentences
/// transposes the matrix exactly.
pub fn cost_matrix(
    left: &SentenceContext,
    right: &SentenceContext,
    a: f64,
    metric: Metric,
    aggregation: ContextAggregation,
) -> Result<CostMatrix, ContextError> {
    for side in [left, right] {
        if side.carriers.is_empty() {
            return Err(ContextError::EmptySideAfterFiltering {
                sentence_id: side.sentence_id.clone(),
            });
        }
    }
    let mut dist = Distance { metric, zero_norm: 0 };

    let use_context = a != 0.0 && !left.units.is_empty() && !right.units.is_empty();
    let cross_units: Vec<Vec<f64>> = if use_context {
        left.units
            .iter()
            .map(|s| right.units.iter().map(|t| dist.eval(s, t)).collect())
            .collect()
    } else {
        Vec::new()
    };

    // Mean within-set distance of each carrier's context set. The diagonal
    // goes through the same distance routine as the cross terms so that
    // identical sets cancel exactly.
    let dispersion = |side: &SentenceContext, dist: &mut Distance| -> Vec<f64> {
        if !use_context || aggregation != ContextAggregation::Centered {
            return vec![0.0; side.carriers.len()];
        }
        side.containing
            .iter()
            .map(|set| {
                if set.is_empty() {
                    return 0.0;
                }
                let mut vals: Vec<f64> = set
                    .iter()
                    .flat_map(|&s| set.iter().map(move |&t| (s, t)))
                    .map(|(s, t)| dist.eval(&side.units[s], &side.units[t]))
                    .collect();
                mean_of(&mut vals)
            })
            .collect()
    };
    let left_disp = dispersion(left, &mut dist);
    let right_disp = dispersion(right, &mut dist);

    let mut entries = Vec::with_capacity(left.carriers.len());
    for (i, vi) in left.vectors.iter().enumerate() {
        let mut row = Vec::with_capacity(right.carriers.len());
        for (j, vj) in right.vectors.iter().enumerate() {
            let word = dist.eval(vi, vj);
            let (si, sj) = (&left.containing[i], &right.containing[j]);
            let context = if use_context && !si.is_empty() && !sj.is_empty() {
                let mut vals: Vec<f64> = si
                    .iter()
                    .flat_map(|&s| {
                        let row = &cross_units[s];
                        sj.iter().map(move |&t| row[t])
                    })
                    .collect();
                let cross = mean_of(&mut vals);
                match aggregation {
                    ContextAggregation::PairMean => cross,
                    ContextAggregation::Centered => (cross - 0.5 * (left_disp[i] + right_disp[j])).max(0.0),
                }
            } else {
                0.0
            };
            row.push(word + a * context);
        }
        entries.push(row);
    }

    if dist.zero_norm > 0 {
        log::warn!(
            "{} cosine distances between {} and {} involved a zero vector; counted as 1",
            dist.zero_norm,
            left.sentence_id,
            right.sentence_id
        );
    }
    Ok(CostMatrix {
        rows: left.carriers.clone(),
        cols: right.carriers.clone(),
        entries,
        a,
        zero_norm_pairs: dist.zero_norm,
    })
}
