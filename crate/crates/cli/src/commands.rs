use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use synwmd::conllu::parse_conllu;
use synwmd::embeddings::{ContextualEmbeddings, StaticEmbeddings};
use synwmd::eval::{eval_cls as run_cls, eval_sts as run_sts, read_sentences, EvalError};
use synwmd::graph::weighted_pagerank;
use synwmd::scorer::{fit_corpus_whitening, mean_pairwise_cosine};
use synwmd::{
    ClsDataset, CooccurrenceGraph, Corpus, CorpusArtifacts, Embeddings, Error, EvalReport, GraphMode, MethodConfig,
    PairScore, Preset, Result, Scorer, StsDataset, TokenFilter,
};

use crate::args::{CacheArgs, CosineSpreadArgs, EvalClsArgs, EvalStsArgs, FilterArgs, GraphStatsArgs, InputArgs, ScoreArgs};
use crate::manifest::{artifact_key, config_hash, ArtifactCache, FilterSnapshot, RunManifest};
use crate::resolve::resolve;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn ms(start: Instant) -> u128 {
    start.elapsed().as_millis()
}

fn build_filter(args: &FilterArgs, lowercase: bool) -> Result<TokenFilter> {
    let mut filter = TokenFilter::default();
    if let Some(path) = &args.stopwords {
        filter = filter.with_stopwords(open(path)?);
    }
    if args.no_stopwords {
        filter.stopwords.clear();
    }
    filter.drop_punct = !args.keep_punct;
    filter.lowercase = lowercase;
    Ok(filter)
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    Ok(parse_conllu(open(path)?, &path.display().to_string())?)
}

fn load_embeddings(input: &InputArgs, corpus: &Corpus, cfg: &MethodConfig) -> Result<Embeddings> {
    let reader = open(&input.embeddings)?;
    if input.contextual {
        let store = ContextualEmbeddings::read_jsonl(reader)?;
        store.check_coverage(corpus)?;
        Ok(Embeddings::Contextual(store))
    } else {
        let (store, warnings) = StaticEmbeddings::read_text(reader)?;
        for w in warnings {
            log::warn!("{}: {w:?}", input.embeddings.display());
        }
        Ok(Embeddings::Static { store, oov: cfg.oov })
    }
}

/// Everything a scoring command needs after loading.
struct Session {
    preset: Preset,
    cfg: MethodConfig,
    corpus: Corpus,
    scorer: Scorer,
    manifest: RunManifest,
    corpus_sha: String,
}

fn session(command: &str, input: &InputArgs, method: &crate::args::MethodArgs, cache: &CacheArgs) -> Result<Session> {
    let (preset, cfg) = resolve(method)?;
    let mut manifest = RunManifest::new(command);
    manifest.set_config(&preset.to_string(), &cfg);

    let t = Instant::now();
    let corpus = load_corpus(&input.corpus)?;
    let corpus_sha = manifest.add_input(&input.corpus)?;
    let embeddings = load_embeddings(input, &corpus, &cfg)?;
    let emb_sha = manifest.add_input(&input.embeddings)?;
    if let Some(path) = &method.config {
        manifest.add_input(path)?;
    }
    manifest.timings_ms.insert("load".into(), ms(t));

    let filter = build_filter(&input.filter, cfg.lowercase)?;
    let snapshot = FilterSnapshot::of(&filter);
    if cfg.whiten {
        manifest.notes.insert("whitening_population".into(), "all corpus tokens with a vector".into());
    }

    let t = Instant::now();
    let key = artifact_key(&corpus_sha, &emb_sha, &cfg, &snapshot);
    let cache = match (&cache.cache_dir, cache.no_cache) {
        (Some(root), false) => Some(ArtifactCache::new(root.clone())),
        _ => None,
    };
    let artifacts = match cache.as_ref().and_then(|c| c.load(&key)) {
        Some(a) => {
            manifest.notes.insert("artifact_cache".into(), format!("hit {key}"));
            a
        }
        None => {
            let a = CorpusArtifacts::build(&corpus, &embeddings, &cfg, &filter)?;
            if let Some(c) = &cache {
                c.store(&key, &a)?;
                manifest.notes.insert("artifact_cache".into(), format!("stored {key}"));
            }
            a
        }
    };
    if let Some(pr) = &artifacts.pagerank {
        manifest.notes.insert(
            "pagerank".into(),
            format!("iterations {}, residual {:e}, converged {}", pr.iterations, pr.residual, pr.converged),
        );
    }
    manifest.filter = Some(snapshot);
    manifest.timings_ms.insert("artifacts".into(), ms(t));

    let t = Instant::now();
    let scorer = Scorer::new(&corpus, &embeddings, &cfg, &filter, &artifacts)?;
    manifest.timings_ms.insert("prepare".into(), ms(t));
    Ok(Session {
        preset,
        cfg,
        corpus,
        scorer,
        manifest,
        corpus_sha,
    })
}

fn data_error(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Eval(EvalError::MalformedLine {
        line,
        reason: format!("{}: {}", path.display(), reason.into()),
    })
}

/// Reads "pair_id\tsent_a\tsent_b" or the four-column STS layout.
fn read_pairs(path: &Path) -> Result<Vec<(String, String, String)>> {
    let first = open(path)?
        .lines()
        .find(|l| !matches!(l, Ok(s) if s.trim().is_empty() || s.starts_with('#')))
        .transpose()?;
    if first.is_some_and(|l| l.split('\t').count() == 4) {
        let ds = StsDataset::read_tsv(open(path)?)?;
        return Ok(ds.pairs.into_iter().map(|p| (p.pair_id, p.sent_a, p.sent_b)).collect());
    }
    let mut pairs = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(data_error(path, i + 1, format!("expected 3 columns, found {}", cols.len())));
        }
        pairs.push((cols[0].to_owned(), cols[1].to_owned(), cols[2].to_owned()));
    }
    Ok(pairs)
}

fn check_ids(corpus: &Corpus, pairs: &[(String, String, String)]) -> Result<()> {
    for (_, a, b) in pairs {
        for id in [a, b] {
            if corpus.position(id).is_none() {
                return Err(EvalError::UnknownSentence(id.clone()).into());
            }
        }
    }
    Ok(())
}

fn write_scores<W: Write>(mut out: W, scores: &[PairScore]) -> io::Result<()> {
    for s in scores {
        writeln!(out, "{}\t{}", s.pair_id, s.distance)?;
    }
    out.flush()
}

#[derive(Serialize)]
struct SubtreeRecord<'a> {
    sent: &'a str,
    parent: usize,
    hop: usize,
    members: &'a [usize],
}

fn dump_subtrees(path: &Path, corpus: &Corpus, scorer: &Scorer) -> Result<()> {
    let mut out = create(path)?;
    for s in &corpus.sentences {
        for st in scorer.subtrees(&s.sentence_id)? {
            let rec = SubtreeRecord {
                sent: &s.sentence_id,
                parent: st.parent,
                hop: st.hop,
                members: &st.members,
            };
            writeln!(out, "{}", serde_json::to_string(&rec).expect("record serializes"))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn undefined_note(manifest: &mut RunManifest, scores: &[PairScore], fallback: f64) {
    let undefined = scores.iter().filter(|s| s.diagnostics.undefined).count();
    if undefined > 0 {
        log::warn!("{undefined} pairs had an empty side and were given the fallback distance {fallback}");
        manifest.notes.insert("undefined_pairs".into(), format!("{undefined} (fallback {fallback})"));
    }
}

fn manifest_path(explicit: &Option<PathBuf>, out: &Option<PathBuf>) -> Option<PathBuf> {
    explicit.clone().or_else(|| {
        out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    })
}

pub fn score(args: &ScoreArgs) -> Result<()> {
    let mut sess = session("score", &args.input, &args.method, &args.cache)?;
    let pairs = read_pairs(&args.pairs)?;
    sess.manifest.add_input(&args.pairs)?;
    check_ids(&sess.corpus, &pairs)?;

    let t = Instant::now();
    let scores = sess.scorer.score_many(&pairs)?;
    sess.manifest.timings_ms.insert("score".into(), ms(t));
    undefined_note(&mut sess.manifest, &scores, sess.scorer.fallback_distance());

    match &args.out {
        Some(path) => write_scores(create(path)?, &scores)?,
        None => write_scores(io::stdout().lock(), &scores)?,
    }
    if let Some(path) = &args.dump_subtrees {
        dump_subtrees(path, &sess.corpus, &sess.scorer)?;
    }
    if let Some(path) = manifest_path(&args.manifest, &args.out) {
        sess.manifest.write(&path)?;
    }
    Ok(())
}

fn stamp(report: &mut EvalReport, sess: &Session, dataset_sha: &str) {
    report.manifest.insert("method".into(), sess.preset.to_string());
    report.manifest.insert("config_sha256".into(), config_hash(&sess.cfg));
    report.manifest.insert("corpus_sha256".into(), sess.corpus_sha.clone());
    report.manifest.insert("dataset_sha256".into(), dataset_sha.to_owned());
}

fn emit_report(report: &EvalReport, out: &Option<PathBuf>) -> Result<()> {
    print!("{}", report.to_table());
    if let Some(path) = out {
        let mut f = create(path)?;
        writeln!(f, "{}", report.to_json())?;
        f.flush()?;
    }
    Ok(())
}

pub fn eval_sts(args: &EvalStsArgs) -> Result<()> {
    let mut sess = session("eval-sts", &args.input, &args.method, &args.cache)?;
    let dataset = StsDataset::read_tsv(open(&args.sts)?)?;
    let dataset_sha = sess.manifest.add_input(&args.sts)?;
    dataset.validate(&sess.corpus)?;
    if let Some(path) = &args.sentences {
        let sentences = read_sentences(open(path)?)?;
        sess.manifest.add_input(path)?;
        for p in &dataset.pairs {
            for id in [&p.sent_a, &p.sent_b] {
                if !sentences.contains_key(id) {
                    return Err(EvalError::UnknownSentence(format!("{id} (missing from {})", path.display())).into());
                }
            }
        }
    }

    let pairs: Vec<(String, String, String)> = dataset
        .pairs
        .iter()
        .map(|p| (p.pair_id.clone(), p.sent_a.clone(), p.sent_b.clone()))
        .collect();
    let t = Instant::now();
    let scores = sess.scorer.score_many(&pairs)?;
    sess.manifest.timings_ms.insert("score".into(), ms(t));
    undefined_note(&mut sess.manifest, &scores, sess.scorer.fallback_distance());

    let mut report = run_sts(&dataset, &scores)?;
    stamp(&mut report, &sess, &dataset_sha);
    emit_report(&report, &args.out)?;
    if let Some(path) = &args.scores {
        write_scores(create(path)?, &scores)?;
    }
    if let Some(path) = &args.dump_subtrees {
        dump_subtrees(path, &sess.corpus, &sess.scorer)?;
    }
    if let Some(path) = manifest_path(&args.manifest, &args.out) {
        sess.manifest.write(&path)?;
    }
    Ok(())
}

pub fn parse_k_range(s: &str) -> Result<std::ops::RangeInclusive<usize>> {
    let bad = || Error::Config(format!("k range {s:?} must look like 1..30"));
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let hi = hi.strip_prefix('=').unwrap_or(hi);
    let (lo, hi): (usize, usize) = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok(lo..=hi)
}

pub fn eval_cls(args: &EvalClsArgs) -> Result<()> {
    let k_range = parse_k_range(&args.k_range)?;
    if args.folds < 2 {
        return Err(Error::Config("folds must be at least 2".into()));
    }
    let mut sess = session("eval-cls", &args.input, &args.method, &args.cache)?;
    let dataset = ClsDataset::read_tsv(open(&args.dataset)?)?;
    let dataset_sha = sess.manifest.add_input(&args.dataset)?;
    dataset.validate(&sess.corpus)?;

    let t = Instant::now();
    let distances = sess.scorer.distance_matrix(&dataset.ids())?;
    sess.manifest.timings_ms.insert("score".into(), ms(t));

    let labels: Vec<String> = dataset.examples.iter().map(|e| e.label.clone()).collect();
    let mut report = run_cls(&labels, &distances, args.folds, k_range)?;
    stamp(&mut report, &sess, &dataset_sha);
    sess.manifest.notes.insert("folds".into(), args.folds.to_string());
    sess.manifest.notes.insert("fold_seed".into(), synwmd::eval::FOLD_SEED.to_string());
    emit_report(&report, &args.out)?;
    if let Some(path) = manifest_path(&args.manifest, &args.out) {
        sess.manifest.write(&path)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Bin {
    lo: f64,
    hi: f64,
    count: usize,
}

#[derive(Serialize)]
struct WordScore<'a> {
    word: &'a str,
    pagerank: f64,
}

#[derive(Serialize)]
struct GraphStats<'a> {
    sentences: usize,
    nodes: usize,
    edges: usize,
    total_weight: f64,
    hop_limit: usize,
    mode: String,
    weight_histogram: Vec<Bin>,
    pagerank_iterations: usize,
    pagerank_residual: f64,
    pagerank_converged: bool,
    top_pagerank: Vec<WordScore<'a>>,
}

fn histogram(weights: &[f64], bins: usize) -> Vec<Bin> {
    let (Some(lo), Some(hi)) = (
        weights.iter().copied().reduce(f64::min),
        weights.iter().copied().reduce(f64::max),
    ) else {
        return Vec::new();
    };
    let bins = bins.max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<Bin> = (0..bins)
        .map(|b| Bin {
            lo: lo + b as f64 * width,
            hi: if b + 1 == bins { hi.max(lo + width) } else { lo + (b + 1) as f64 * width },
            count: 0,
        })
        .collect();
    for &w in weights {
        let b = (((w - lo) / width) as usize).min(bins - 1);
        out[b].count += 1;
    }
    out
}

pub fn graph_stats(args: &GraphStatsArgs) -> Result<()> {
    let mode: GraphMode = args.mode.parse()?;
    if args.n < 1 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&args.d) {
        return Err(Error::Config(format!("d must lie in [0, 1), got {}", args.d)));
    }
    let corpus = load_corpus(&args.corpus)?;
    let filter = build_filter(&args.filter, !args.cased)?;
    let graph = CooccurrenceGraph::build(&corpus, args.n, mode, &filter);
    let defaults = MethodConfig::default();
    let pr = weighted_pagerank(&graph, args.d, defaults.pagerank_tol, defaults.pagerank_max_iter);

    let weights: Vec<f64> = graph.edges().map(|(_, _, w)| w).collect();
    let stats = GraphStats {
        sentences: corpus.len(),
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        total_weight: graph.total_weight(),
        hop_limit: args.n,
        mode: mode.to_string(),
        weight_histogram: histogram(&weights, args.bins),
        pagerank_iterations: pr.iterations,
        pagerank_residual: pr.residual,
        pagerank_converged: pr.converged,
        top_pagerank: pr.top(args.top).into_iter().map(|(word, pagerank)| WordScore { word, pagerank }).collect(),
    };
    let text = serde_json::to_string_pretty(&stats).expect("stats serialize");
    match &args.out {
        Some(path) => {
            let mut f = create(path)?;
            writeln!(f, "{text}")?;
            f.flush()?;
        }
        None => println!("{text}"),
    }
    if let Some(path) = &args.dump_edges {
        let mut f = create(path)?;
        graph.write_tsv(&mut f)?;
        f.flush()?;
    }
    Ok(())
}

fn whitened(embeddings: &Embeddings, corpus: &Corpus, lowercase: bool) -> Result<Embeddings> {
    let w = fit_corpus_whitening(corpus, embeddings, lowercase)?;
    Ok(match embeddings {
        Embeddings::Static { store, oov } => Embeddings::Static {
            store: StaticEmbeddings {
                dim: w.effective_dim(),
                table: store.table.iter().map(|(k, v)| (k.clone(), w.apply(v))).collect(),
            },
            oov: *oov,
        },
        Embeddings::Contextual(store) => Embeddings::Contextual(ContextualEmbeddings {
            dim: w.effective_dim(),
            vectors: store.vectors.iter().map(|(k, v)| (k.clone(), w.apply(v))).collect(),
        }),
    })
}

pub fn cosine_spread(args: &CosineSpreadArgs) -> Result<()> {
    let lowercase = !args.cased;
    let corpus = load_corpus(&args.input.corpus)?;
    let cfg = MethodConfig { lowercase, ..MethodConfig::default() };
    let embeddings = load_embeddings(&args.input, &corpus, &cfg)?;
    let filter = build_filter(&args.input.filter, lowercase)?;
    let raw = mean_pairwise_cosine(&corpus, &embeddings, &filter, lowercase)?;
    let white = if args.whiten {
        let w = whitened(&embeddings, &corpus, lowercase)?;
        mean_pairwise_cosine(&corpus, &w, &filter, lowercase)?
    } else {
        None
    };
    let out = serde_json::json!({ "sentences": corpus.len(), "raw": raw, "whitened": white });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}
