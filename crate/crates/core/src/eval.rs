//! STS rank correlation and kNN classification with cross-validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::Corpus;
use crate::scorer::PairScore;

/// Seed for fold assignment.
pub const FOLD_SEED: u64 = 0;
pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("{examples} examples cannot fill {folds} folds")]
    FoldTooSmall { folds: usize, examples: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("sentence id {0} is not in the corpus")]
    UnknownSentence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fractional ranks, 1-based; tied values share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(EvalError::DegenerateInput(format!("need at least 2 values, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::DegenerateInput("constant vector".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EvalError::DegenerateInput("non-finite value".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StsPair {
    pub pair_id: String,
    pub subset: String,
    pub gold: f64,
    pub sent_a: String,
    pub sent_b: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StsDataset {
    pub pairs: Vec<StsPair>,
}

fn data_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String), EvalError>> {
    reader.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(e.into())),
        Ok(l) if l.trim().is_empty() || l.starts_with('#') => None,
        Ok(l) => Some(Ok((i + 1, l))),
    })
}

impl StsDataset {
    /// Reads "subset\tgold\tsent_id_a\tsent_id_b" lines. Pair ids are
    /// `subset/k` with `k` counting from 0 within each subset.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let mut pairs = Vec::new();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for item in data_lines(reader) {
            let (line, text) = item?;
            let cols: Vec<&str> = text.split('\t').collect();
            if cols.len() != 4 {
                return Err(EvalError::MalformedLine {
                    line,
                    reason: format!("expected 4 columns, found {}", cols.len()),
                });
            }
            let gold: f64 = cols[1].trim().parse().map_err(|_| EvalError::MalformedLine {
                line,
                reason: format!("gold score {:?} is not a number", cols[1]),
            })?;
            if !gold.is_finite() {
                return Err(EvalError::MalformedLine { line, reason: "gold score is not finite".into() });
            }
            let k = seen.entry(cols[0].to_owned()).or_insert(0);
            pairs.push(StsPair {
                pair_id: format!("{}/{}", cols[0], k),
                subset: cols[0].to_owned(),
                gold,
                sent_a: cols[2].to_owned(),
                sent_b: cols[3].to_owned(),
            });
            *k += 1;
        }
        Ok(StsDataset { pairs })
    }

    pub fn validate(&self, corpus: &Corpus) -> Result<(), EvalError> {
        for p in &self.pairs {
            for id in [&p.sent_a, &p.sent_b] {
                if corpus.position(id).is_none() {
                    return Err(EvalError::UnknownSentence(id.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn subsets(&self) -> BTreeSet<&str> {
        self.pairs.iter().map(|p| p.subset.as_str()).collect()
    }
}

/// Reads the companion "sent_id\ttext" file.
pub fn read_sentences<R: BufRead>(reader: R) -> Result<BTreeMap<String, String>, EvalError> {
    let mut out = BTreeMap::new();
    for item in data_lines(reader) {
        let (line, text) = item?;
        let Some((id, sentence)) = text.split_once('\t') else {
            return Err(EvalError::MalformedLine { line, reason: "expected sent_id<TAB>text".into() });
        };
        out.insert(id.to_owned(), sentence.to_owned());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClsExample {
    pub sent_id: String,
    pub label: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClsDataset {
    pub examples: Vec<ClsExample>,
}

impl ClsDataset {
    /// Reads "label\tsent_id" lines.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let mut examples = Vec::new();
        for item in data_lines(reader) {
            let (line, text) = item?;
            let cols: Vec<&str> = text.split('\t').collect();
            if cols.len() != 2 {
                return Err(EvalError::MalformedLine {
                    line,
                    reason: format!("expected 2 columns, found {}", cols.len()),
                });
            }
            examples.push(ClsExample {
                label: cols[0].to_owned(),
                sent_id: cols[1].to_owned(),
            });
        }
        let ds = ClsDataset { examples };
        if ds.labels().len() < 2 {
            return Err(EvalError::DegenerateInput("need at least 2 distinct labels".into()));
        }
        Ok(ds)
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.examples.iter().map(|e| e.label.as_str()).collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.examples.iter().map(|e| e.sent_id.clone()).collect()
    }

    pub fn validate(&self, corpus: &Corpus) -> Result<(), EvalError> {
        match self.examples.iter().find(|e| corpus.position(&e.sent_id).is_none()) {
            Some(e) => Err(EvalError::UnknownSentence(e.sent_id.clone())),
            None => Ok(()),
        }
    }
}

/// One row of a report table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub count: usize,
    /// Percentage (ρ × 100 or accuracy × 100), rounded to 2 decimals.
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub metric: String,
    pub rows: Vec<ReportRow>,
    pub overall: Option<ReportRow>,
    pub manifest: BTreeMap<String, String>,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut rows: Vec<[String; 3]> = vec![["name".into(), "n".into(), self.metric.clone()]];
        for r in self.rows.iter().chain(&self.overall) {
            rows.push([r.name.clone(), r.count.to_string(), format!("{:.2}", r.value)]);
        }
        let widths: Vec<usize> = (0..3).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for r in rows {
            let _ = writeln!(out, "{:<w0$}  {:>w1$}  {:>w2$}", r[0], r[1], r[2], w0 = widths[0], w1 = widths[1], w2 = widths[2]);
        }
        out
    }
}

/// Spearman between gold and negated distance, per subset and over the
/// concatenation of all pairs. `scores[i]` belongs to `dataset.pairs[i]`.
pub fn eval_sts(dataset: &StsDataset, scores: &[PairScore]) -> Result<EvalReport, EvalError> {
    if dataset.pairs.len() != scores.len() {
        return Err(EvalError::LengthMismatch { left: dataset.pairs.len(), right: scores.len() });
    }
    let rho = |idx: &[usize]| -> Result<f64, EvalError> {
        let gold: Vec<f64> = idx.iter().map(|&i| dataset.pairs[i].gold).collect();
        let neg: Vec<f64> = idx.iter().map(|&i| -scores[i].distance).collect();
        spearman(&gold, &neg)
    };
    let mut rows = Vec::new();
    for subset in dataset.subsets() {
        let idx: Vec<usize> = (0..dataset.pairs.len()).filter(|&i| dataset.pairs[i].subset == subset).collect();
        rows.push(ReportRow {
            name: subset.to_owned(),
            count: idx.len(),
            value: round2(100.0 * rho(&idx)?),
        });
    }
    let all: Vec<usize> = (0..dataset.pairs.len()).collect();
    let overall = ReportRow {
        name: "all".into(),
        count: all.len(),
        value: round2(100.0 * rho(&all)?),
    };
    Ok(EvalReport {
        task: "sts".into(),
        metric: "spearman x100".into(),
        rows,
        overall: Some(overall),
        manifest: BTreeMap::new(),
    })
}

/// Training examples ordered by (distance, index).
pub fn neighbour_order(distances: &[f64], train: &[usize]) -> Vec<usize> {
    let mut order = train.to_vec();
    order.sort_by(|&i, &j| distances[i].total_cmp(&distances[j]).then(i.cmp(&j)));
    order
}

/// Majority label among the first `k` entries of `ordered` (a neighbour
/// list from [`neighbour_order`]). A vote tie goes to whichever tied label
/// occurs first in the list.
pub fn vote<'a>(ordered: &[usize], labels: &'a [String], k: usize) -> &'a str {
    let top = &ordered[..k.min(ordered.len())];
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for &i in top {
        *counts.entry(labels[i].as_str()).or_insert(0) += 1;
    }
    let best = counts.values().copied().max().unwrap_or(0);
    top.iter()
        .map(|&i| labels[i].as_str())
        .find(|l| counts[l] == best)
        .unwrap_or("")
}

/// Label predicted for a query with distances `distances` (indexed like
/// `labels`) against the training indices `train`.
pub fn knn_classify<'a>(distances: &[f64], labels: &'a [String], train: &[usize], k: usize) -> &'a str {
    vote(&neighbour_order(distances, train), labels, k)
}

/// Stratified fold index for each example. Indices of each label are
/// shuffled with a fixed seed and dealt round-robin, continuing the deal
/// across labels so fold sizes differ by at most one.
pub fn stratified_folds(labels: &[String], folds: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    if folds < 2 || labels.len() < folds {
        return Err(EvalError::FoldTooSmall { folds, examples: labels.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for members in by_label.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

/// Cross-validated kNN accuracy for every `k` in `k_range`, from a full
/// pairwise distance matrix over `labels`.
pub fn eval_cls(
    labels: &[String],
    distances: &[Vec<f64>],
    folds: usize,
    k_range: std::ops::RangeInclusive<usize>,
) -> Result<EvalReport, EvalError> {
    if distances.len() != labels.len() {
        return Err(EvalError::LengthMismatch { left: labels.len(), right: distances.len() });
    }
    if k_range.is_empty() || *k_range.start() == 0 {
        return Err(EvalError::DegenerateInput("k range must be non-empty and start at 1 or more".into()));
    }
    let assignment = stratified_folds(labels, folds, FOLD_SEED)?;
    let ks: Vec<usize> = k_range.collect();
    let mut correct = vec![0usize; ks.len()];
    for f in 0..folds {
        let train: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] != f).collect();
        for q in (0..labels.len()).filter(|&i| assignment[i] == f) {
            let order = neighbour_order(&distances[q], &train);
            for (slot, &k) in ks.iter().enumerate() {
                if vote(&order, labels, k) == labels[q] {
                    correct[slot] += 1;
                }
            }
        }
    }
    let n = labels.len();
    let rows: Vec<ReportRow> = ks
        .iter()
        .zip(&correct)
        .map(|(k, &c)| ReportRow {
            name: format!("k={k}"),
            count: n,
            value: round2(100.0 * c as f64 / n as f64),
        })
        .collect();
    // First k reaching the top accuracy.
    let best = rows
        .iter()
        .zip(&correct)
        .fold(None::<(&ReportRow, usize)>, |acc, (r, &c)| match acc {
            Some((_, bc)) if bc >= c => acc,
            _ => Some((r, c)),
        })
        .map(|(r, _)| ReportRow { name: format!("best {}", r.name), ..r.clone() });
    let mut manifest = BTreeMap::new();
    manifest.insert("folds".into(), folds.to_string());
    manifest.insert("fold_seed".into(), FOLD_SEED.to_string());
    Ok(EvalReport {
        task: "cls".into(),
        metric: "accuracy %".into(),
        rows,
        overall: best,
        manifest,
    })
}
