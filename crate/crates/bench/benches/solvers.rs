use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use synwmd::embeddings::StaticEmbeddings;
use synwmd::graph::weighted_pagerank;
use synwmd::transport::solve_exact;
use synwmd::{
    CooccurrenceGraph, Corpus, DepSentence, Embeddings, OovPolicy, Preset, Scorer, Token, TokenFilter, TransportProblem,
};

fn masses(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn transport(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_exact");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for n in [5, 10, 20, 40] {
        let cost = (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let p = TransportProblem::new(masses(&mut rng, n), masses(&mut rng, n), cost);
        group.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| b.iter(|| solve_exact(black_box(p)).unwrap()));
    }
    group.finish();
}

fn pagerank(c: &mut Criterion) {
    let mut group = c.benchmark_group("pagerank");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for nodes in [100, 1000, 10_000] {
        let names: Vec<String> = (0..nodes).map(|i| format!("w{i}")).collect();
        let edges: Vec<(usize, usize, f64)> = (0..nodes * 5)
            .map(|_| (rng.random_range(0..nodes), rng.random_range(0..nodes), rng.random_range(0.1..1.0)))
            .collect();
        let g = CooccurrenceGraph::from_edges(
            names.clone(),
            edges.iter().map(|&(a, b, w)| (names[a].as_str(), names[b].as_str(), w)),
        );
        group.bench_with_input(BenchmarkId::from_parameter(nodes), &g, |b, g| {
            b.iter(|| weighted_pagerank(black_box(g), 0.2, 1e-8, 200))
        });
    }
    group.finish();
}

fn sentence(rng: &mut ChaCha8Rng, id: usize, len: usize, vocab: usize) -> DepSentence {
    let tokens = (1..=len)
        .map(|i| {
            let head = if i == 1 { 0 } else { rng.random_range(1..i) };
            Token::new(i, format!("w{}", rng.random_range(0..vocab)), "X", head, "dep")
        })
        .collect();
    DepSentence::new(format!("s{id}"), tokens, None).unwrap()
}

fn score_pair(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let vocab = 500;
    let corpus = Corpus::new((0..200).map(|i| sentence(&mut rng, i, 20, vocab)).collect(), "bench").unwrap();
    let table = (0..vocab)
        .map(|w| (format!("w{w}"), (0..300).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect();
    let emb = Embeddings::Static {
        store: StaticEmbeddings { dim: 300, table },
        oov: OovPolicy::Skip,
    };
    let mut group = c.benchmark_group("score_pair");
    for preset in [Preset::WmdCos, Preset::SynwmdSwf, Preset::SynwmdFull] {
        let scorer = Scorer::from_corpus(&corpus, &emb, &preset.config(), &TokenFilter::none()).unwrap();
        group.bench_function(preset.to_string(), |b| b.iter(|| scorer.score_pair("p", "s0", "s1").unwrap()));
    }
    group.finish();
}

criterion_group!(benches, transport, pagerank, score_pair);
criterion_main!(benches);
