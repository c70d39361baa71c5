//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use synwmd::embeddings::StaticEmbeddings;
use synwmd::{Corpus, DepSentence, Embeddings, OovPolicy, Token};

pub fn toy_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/toy")
}

/// Random tree: a random root, then each remaining token (in random order)
/// attaches to an already placed one.
pub fn random_sentence<R: Rng>(rng: &mut R, id: &str, len: usize, vocab: usize) -> DepSentence {
    let mut heads = vec![0usize; len + 1];
    let mut order: Vec<usize> = (1..=len).collect();
    order.shuffle(rng);
    let mut placed = vec![order[0]];
    for &tok in &order[1..] {
        heads[tok] = placed[rng.random_range(0..placed.len())];
        placed.push(tok);
    }
    let tokens = (1..=len)
        .map(|i| Token::new(i, format!("w{}", rng.random_range(0..vocab)), "X", heads[i], "dep"))
        .collect();
    DepSentence::new(id, tokens, None).expect("generated tree is valid")
}

pub fn random_corpus<R: Rng>(rng: &mut R, sentences: usize, max_len: usize, vocab: usize) -> Corpus {
    let sents = (0..sentences)
        .map(|k| {
            let len = rng.random_range(1..=max_len);
            random_sentence(rng, &format!("s{k:03}"), len, vocab)
        })
        .collect();
    Corpus::new(sents, "random").unwrap()
}

pub fn random_vectors<R: Rng>(rng: &mut R, vocab: usize, dim: usize) -> Embeddings {
    let table = (0..vocab)
        .map(|w| (format!("w{w}"), (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect();
    Embeddings::Static {
        store: StaticEmbeddings { dim, table },
        oov: OovPolicy::Skip,
    }
}

/// Random probability vector with entries bounded away from zero.
pub fn random_masses<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

pub fn random_cost<R: Rng>(rng: &mut R, m: usize, n: usize) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).collect()
}

/// Minimum over all basic feasible solutions: every spanning tree of the
/// bipartite row/column graph gives at most one vertex, found by peeling
/// leaves. Only practical for tiny instances.
pub fn vertex_enumeration(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;
    let mut best = f64::INFINITY;
    for subset in combinations(cells.len(), k) {
        let chosen: Vec<(usize, usize)> = subset.iter().map(|&c| cells[c]).collect();
        if let Some(flow) = tree_flow(supply, demand, &chosen) {
            if flow.iter().all(|&x| x >= -1e-12) {
                let obj: f64 = chosen.iter().zip(&flow).map(|(&(i, j), x)| cost[i][j] * x).sum();
                best = best.min(obj);
            }
        }
    }
    best
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for c in start..n {
            cur.push(c);
            rec(c + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Flows on a spanning tree of cells, or `None` if the cells contain a cycle.
fn tree_flow(supply: &[f64], demand: &[f64], cells: &[(usize, usize)]) -> Option<Vec<f64>> {
    let m = supply.len();
    let nodes = m + demand.len();
    let mut parent: Vec<usize> = (0..nodes).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        r
    }
    for &(i, j) in cells {
        let (a, b) = (find(&mut parent, i), find(&mut parent, m + j));
        if a == b {
            return None;
        }
        parent[a] = b;
    }
    let mut remaining: Vec<f64> = supply.iter().chain(demand).copied().collect();
    let mut flow = vec![f64::NAN; cells.len()];
    let mut open: Vec<bool> = vec![true; cells.len()];
    for _ in 0..cells.len() {
        let degree = |node: usize, open: &[bool]| {
            cells
                .iter()
                .enumerate()
                .filter(|(c, &(i, j))| open[*c] && (i == node || m + j == node))
                .count()
        };
        let leaf = (0..nodes).find(|&v| degree(v, &open) == 1)?;
        let c = (0..cells.len())
            .find(|&c| open[c] && (cells[c].0 == leaf || m + cells[c].1 == leaf))
            .unwrap();
        let (i, j) = cells[c];
        let other = if i == leaf { m + j } else { i };
        flow[c] = remaining[leaf];
        remaining[other] -= remaining[leaf];
        remaining[leaf] = 0.0;
        open[c] = false;
    }
    Some(flow)
}

/// Min-cost transport by successive shortest paths (Bellman-Ford on the
/// residual network). Returns the objective.
pub fn successive_shortest_paths(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    let mut flow = vec![vec![0.0; n]; m];
    let mut left: Vec<f64> = supply.to_vec();
    let mut need: Vec<f64> = demand.to_vec();
    let eps = 1e-15;
    for _ in 0..10 * (m + n) * (m + n) + 100 {
        if left.iter().all(|&x| x <= eps) || need.iter().all(|&x| x <= eps) {
            break;
        }
        // nodes: rows 0..m, cols m..m+n
        let mut dist = vec![f64::INFINITY; m + n];
        let mut prev: Vec<Option<usize>> = vec![None; m + n];
        for i in 0..m {
            if left[i] > eps {
                dist[i] = 0.0;
            }
        }
        for _ in 0..m + n {
            let mut changed = false;
            for i in 0..m {
                for j in 0..n {
                    if dist[i] + cost[i][j] < dist[m + j] - 1e-15 {
                        dist[m + j] = dist[i] + cost[i][j];
                        prev[m + j] = Some(i);
                        changed = true;
                    }
                    if flow[i][j] > eps && dist[m + j] - cost[i][j] < dist[i] - 1e-15 {
                        dist[i] = dist[m + j] - cost[i][j];
                        prev[i] = Some(m + j);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let target = (0..n)
            .filter(|&j| need[j] > eps && dist[m + j].is_finite())
            .min_by(|&a, &b| dist[m + a].total_cmp(&dist[m + b]))
            .expect("reachable demand");
        let mut path = Vec::new();
        let mut v = m + target;
        while let Some(p) = prev[v] {
            path.push((p, v));
            v = p;
        }
        let source = v;
        let mut delta = left[source].min(need[target]);
        for &(p, v) in &path {
            if p >= m {
                // reverse edge col p -> row v
                delta = delta.min(flow[v][p - m]);
            }
        }
        for &(p, v) in &path {
            if p < m {
                flow[p][v - m] += delta;
            } else {
                flow[v][p - m] -= delta;
            }
        }
        left[source] -= delta;
        need[target] -= delta;
    }
    (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| flow[i][j] * cost[i][j]).sum()
}

/// Word mover's distance the textbook way: normalized bag-of-words over
/// distinct words, Euclidean ground distance.
pub fn textbook_wmd(a: &[&str], b: &[&str], vectors: &HashMap<String, Vec<f64>>) -> f64 {
    fn nbow<'s>(words: &[&'s str]) -> (Vec<&'s str>, Vec<f64>) {
        let mut counts: Vec<(&str, f64)> = Vec::new();
        for w in words {
            match counts.iter_mut().find(|(x, _)| x == w) {
                Some(e) => e.1 += 1.0,
                None => counts.push((w, 1.0)),
            }
        }
        let total = words.len() as f64;
        counts.into_iter().map(|(w, c)| (w, c / total)).unzip()
    }
    let (wa, da) = nbow(a);
    let (wb, db) = nbow(b);
    let cost: Vec<Vec<f64>> = wa
        .iter()
        .map(|x| {
            wb.iter()
                .map(|y| {
                    vectors[*x]
                        .iter()
                        .zip(&vectors[*y])
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect();
    successive_shortest_paths(&da, &db, &cost)
}

/// Average ranks by counting: rank = #smaller + (#equal + 1) / 2.
pub fn rank_oracle(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let less = x.iter().filter(|w| *w < v).count() as f64;
            let equal = x.iter().filter(|w| *w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Spearman as Pearson on counted ranks, two-pass.
pub fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (rank_oracle(x), rank_oracle(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// kNN by full sort then counting votes; a vote tie goes to the tied label
/// seen first in sorted order.
pub fn knn_oracle(distances: &[f64], labels: &[String], train: &[usize], k: usize) -> String {
    let mut all: Vec<(f64, usize)> = train.iter().map(|&i| (distances[i], i)).collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let top: Vec<&String> = all.iter().take(k).map(|&(_, i)| &labels[i]).collect();
    let count = |l: &String| top.iter().filter(|x| **x == l).count();
    let best = top.iter().map(|l| count(l)).max().unwrap();
    top.iter().find(|l| count(l) == best).unwrap().to_string()
}
