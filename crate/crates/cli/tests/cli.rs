use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn toy(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data/toy")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synwmd"))
        .args(args)
        .env_remove("SYNWMD_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr has a line");
    serde_json::from_str(line).expect("stderr is JSON")
}

#[test]
fn score_is_deterministic_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.tsv"), path(dir.path(), "b.tsv"));
    let (corpus, emb, pairs) = (toy("corpus.conllu"), toy("vectors.txt"), toy("sts.tsv"));
    let base = ["score", "--corpus", &corpus, "--embeddings", &emb, "--pairs", &pairs, "--method", "synwmd-full"];

    let out = run(&[&["--jobs", "1"], &base[..], &["--out", &a]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&[&["--jobs", "4"], &base[..], &["--out", &b]].concat());
    assert!(out.status.success());

    let (ta, tb) = (fs::read_to_string(&a).unwrap(), fs::read_to_string(&b).unwrap());
    assert_eq!(ta, tb);
    assert_eq!(ta.lines().count(), 20);
    let first: Vec<&str> = ta.lines().next().unwrap().split('\t').collect();
    assert_eq!(first[0], "toy-a/0");
    assert!(first[1].parse::<f64>().unwrap() >= 0.0);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(format!("{a}.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["preset"], "synwmd-full");
    assert_eq!(manifest["config"]["flow"], "swf");
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 3);
}

#[test]
fn preset_rows_resolve() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = path(dir.path(), "s.tsv");
    let out = run(&[
        "score", "--corpus", &toy("corpus.conllu"), "--embeddings", &toy("vectors.txt"), "--pairs", &toy("sts.tsv"),
        "--method", "wmd-cos-idf", "--out", &out_path,
    ]);
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(format!("{out_path}.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["flow"], "idf");
    assert_eq!(manifest["config"]["context"], "none");
    assert_eq!(manifest["config"]["metric"], "cosine");
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "m.toml");
    fs::write(&cfg, "method = \"wmd-l2\"\na = 0.5\nn = 2\n").unwrap();
    let out_path = path(dir.path(), "s.tsv");
    let out = run(&[
        "score", "--corpus", &toy("corpus.conllu"), "--embeddings", &toy("vectors.txt"), "--pairs", &toy("sts.tsv"),
        "--config", &cfg, "--n", "1", "--out", &out_path,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(format!("{out_path}.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["preset"], "wmd-l2");
    assert_eq!(m["config"]["metric"], "l2");
    assert_eq!(m["config"]["a"], 0.5);
    assert_eq!(m["config"]["n"], 1);

    fs::write(&cfg, "colour = 3\n").unwrap();
    let out = run(&[
        "score", "--corpus", &toy("corpus.conllu"), "--embeddings", &toy("vectors.txt"), "--pairs", &toy("sts.tsv"),
        "--config", &cfg,
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config");
}

#[test]
fn missing_embeddings_exit_3() {
    let out = run(&[
        "score", "--corpus", &toy("corpus.conllu"), "--embeddings", "/definitely/not/here.txt", "--pairs", &toy("sts.tsv"),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "data");
    assert_eq!(err["exit_code"], 3);
}

#[test]
fn bad_flags_exit_2() {
    let base = ["score", "--corpus", "c", "--embeddings", "e", "--pairs", "p"];
    for extra in [["--metric", "manhattan"], ["--d", "1.0"], ["--a", "-1"]] {
        let out = run(&[&base[..], &extra[..]].concat());
        assert_eq!(out.status.code(), Some(2), "{extra:?}");
    }
    let out = run(&["score", "--corpus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_sts_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = path(dir.path(), "r.json");
    let out = run(&[
        "eval-sts", "--corpus", &toy("corpus.conllu"), "--embeddings", &toy("vectors.txt"), "--sts", &toy("sts.tsv"),
        "--sentences", &toy("sentences.tsv"), "--out", &report,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("all")));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["overall"]["count"], 20);
    assert!(r["overall"]["value"].as_f64().unwrap() > 50.0);
    assert_eq!(r["rows"].as_array().unwrap().len(), 2);
    assert_eq!(r["manifest"]["method"], "synwmd-full");

    // determinism of the primary output
    let again = path(dir.path(), "r2.json");
    run(&[
        "eval-sts", "--corpus", &toy("corpus.conllu"), "--embeddings", &toy("vectors.txt"), "--sts", &toy("sts.tsv"),
        "--out", &again,
    ]);
    assert_eq!(fs::read(&report).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn eval_cls_thirty_rows() {
    let dir = tempfile::tempdir().unwrap();
    let report = path(dir.path(), "c.json");
    let out = run(&[
        "eval-cls", "--corpus", &toy("corpus.conllu"), "--embeddings", &toy("vectors.txt"), "--dataset", &toy("cls.tsv"),
        "--method", "synwmd-cls", "--k-range", "1..30", "--out", &report,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["rows"].as_array().unwrap().len(), 30);
    assert_eq!(r["manifest"]["folds"], "10");
    assert!(r["overall"]["name"].as_str().unwrap().starts_with("best k="));
}

#[test]
fn graph_stats_single_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = path(dir.path(), "one.conllu");
    fs::write(
        &corpus,
        "# sent_id = x\n1\tThe\tthe\tDET\t_\t_\t2\tdet\t_\t_\n2\tcat\tcat\tNOUN\t_\t_\t3\tnsubj\t_\t_\n\
         3\tchased\tchase\tVERB\t_\t_\t0\troot\t_\t_\n4\tthe\tthe\tDET\t_\t_\t5\tdet\t_\t_\n\
         5\tmouse\tmouse\tNOUN\t_\t_\t3\tobj\t_\t_\n6\t.\t.\tPUNCT\t_\t_\t3\tpunct\t_\t_\n\n",
    )
    .unwrap();
    let edges = path(dir.path(), "edges.tsv");
    let out = run(&["graph-stats", "--corpus", &corpus, "--n", "1", "--dump-edges", &edges]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // kept: cat, chased, mouse; tree-adjacent kept pairs: cat-chased, chased-mouse
    assert_eq!(stats["nodes"], 3);
    assert_eq!(stats["edges"], 2);
    assert_eq!(fs::read_to_string(&edges).unwrap().lines().count(), 2);
    assert!(stats["top_pagerank"][0]["word"] == "chased");
}

#[test]
fn cache_round_trip_gives_identical_scores() {
    let dir = tempfile::tempdir().unwrap();
    let cache = path(dir.path(), "cache");
    let score = |out: &str| {
        Command::new(env!("CARGO_BIN_EXE_synwmd"))
            .args([
                "score", "--corpus", &toy("corpus.conllu"), "--embeddings", &toy("vectors.txt"), "--pairs", &toy("sts.tsv"),
                "--out", out,
            ])
            .env("SYNWMD_CACHE_DIR", &cache)
            .output()
            .unwrap()
    };
    let (a, b) = (path(dir.path(), "a.tsv"), path(dir.path(), "b.tsv"));
    assert!(score(&a).status.success());
    assert!(score(&b).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let entries: Vec<_> = fs::read_dir(Path::new(&cache).join("artifacts")).unwrap().collect();
    assert_eq!(entries.len(), 1);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(format!("{b}.manifest.json")).unwrap()).unwrap();
    assert!(m["notes"]["artifact_cache"].as_str().unwrap().starts_with("hit "));
}

#[test]
fn subtree_dump_and_unknown_ids() {
    let dir = tempfile::tempdir().unwrap();
    let dump = path(dir.path(), "sub.jsonl");
    let out = run(&[
        "score", "--corpus", &toy("corpus.conllu"), "--embeddings", &toy("vectors.txt"), "--pairs", &toy("sts.tsv"),
        "--dump-subtrees", &dump,
    ]);
    assert!(out.status.success());
    let first: serde_json::Value = serde_json::from_str(fs::read_to_string(&dump).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first["sent"], "t01");
    assert!(first["members"].as_array().unwrap().len() >= 2);
    assert!(first["hop"].as_u64().unwrap() >= 1);

    let pairs = path(dir.path(), "p.tsv");
    fs::write(&pairs, "p0\tt01\tmissing\n").unwrap();
    let out = run(&["score", "--corpus", &toy("corpus.conllu"), "--embeddings", &toy("vectors.txt"), "--pairs", &pairs]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn cosine_spread_reports_both() {
    let out = run(&["cosine-spread", "--corpus", &toy("corpus.conllu"), "--embeddings", &toy("vectors.txt"), "--whiten"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let raw = v["raw"].as_f64().unwrap();
    assert!(raw > 0.0 && raw <= 2.0);
    assert!(v["whitened"].as_f64().is_some());
}
