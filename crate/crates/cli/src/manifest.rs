//! Run manifests, input hashing and the content-addressed artifact cache.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use synwmd::{CorpusArtifacts, MethodConfig, TokenFilter};

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn sha256_str(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

#[derive(Debug, Serialize)]
pub struct FilterSnapshot {
    pub lowercase: bool,
    pub drop_punct: bool,
    pub stopwords: usize,
    pub stopwords_sha256: String,
}

impl FilterSnapshot {
    pub fn of(filter: &TokenFilter) -> Self {
        let words = filter.sorted_stopwords();
        FilterSnapshot {
            lowercase: filter.lowercase,
            drop_punct: filter.drop_punct,
            stopwords: words.len(),
            stopwords_sha256: sha256_str(&words.join("\n")),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub preset: Option<String>,
    pub config: Option<MethodConfig>,
    pub config_sha256: Option<String>,
    pub filter: Option<FilterSnapshot>,
    /// Input path -> SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub notes: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, u128>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: "synwmd",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_owned(),
            preset: None,
            config: None,
            config_sha256: None,
            filter: None,
            inputs: BTreeMap::new(),
            notes: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn set_config(&mut self, preset: &str, cfg: &MethodConfig) {
        self.preset = Some(preset.to_owned());
        self.config_sha256 = Some(config_hash(cfg));
        self.config = Some(cfg.clone());
    }

    pub fn add_input(&mut self, path: &Path) -> io::Result<String> {
        let digest = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), digest.clone());
        Ok(digest)
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n")
    }
}

pub fn config_hash(cfg: &MethodConfig) -> String {
    sha256_str(&serde_json::to_string(cfg).expect("config serializes"))
}

/// Key for the corpus-level artifacts: everything that can change them and
/// nothing else.
pub fn artifact_key(corpus_sha: &str, embeddings_sha: &str, cfg: &MethodConfig, filter: &FilterSnapshot) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        corpus: &'a str,
        embeddings: Option<&'a str>,
        filter: &'a FilterSnapshot,
        flow: String,
        n: usize,
        d: f64,
        graph_mode: String,
        pagerank_tol: f64,
        pagerank_max_iter: usize,
        lowercase: bool,
        whiten: bool,
    }
    let key = Key {
        corpus: corpus_sha,
        embeddings: cfg.whiten.then_some(embeddings_sha),
        filter,
        flow: cfg.flow.to_string(),
        n: cfg.n,
        d: cfg.d,
        graph_mode: cfg.graph_mode.to_string(),
        pagerank_tol: cfg.pagerank_tol,
        pagerank_max_iter: cfg.pagerank_max_iter,
        lowercase: cfg.lowercase,
        whiten: cfg.whiten,
    };
    sha256_str(&serde_json::to_string(&key).expect("key serializes"))
}

/// Write-once store of serialized artifacts under `<root>/artifacts/`.
pub struct ArtifactCache {
    root: PathBuf,
}

impl ArtifactCache {
    pub fn new(root: PathBuf) -> Self {
        ArtifactCache { root }
    }

    fn path(&self, key: &str) -> PathBuf {
        self.root.join("artifacts").join(format!("{key}.json"))
    }

    pub fn load(&self, key: &str) -> Option<CorpusArtifacts> {
        let text = fs::read_to_string(self.path(key)).ok()?;
        match serde_json::from_str(&text) {
            Ok(a) => Some(a),
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {key}: {e}");
                None
            }
        }
    }

    pub fn store(&self, key: &str, artifacts: &CorpusArtifacts) -> io::Result<()> {
        let path = self.path(key);
        if path.exists() {
            return Ok(());
        }
        fs::create_dir_all(path.parent().expect("cache path has a parent"))?;
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, serde_json::to_string(artifacts).expect("artifacts serialize"))?;
        fs::rename(&tmp, &path)
    }
}
