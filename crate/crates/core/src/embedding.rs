//! Sentence atoms, embedding providers and cosine similarity.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::community::ClusterId;
use crate::corpus::PaperId;
use crate::error::{Error, Result};

pub const DEFAULT_MIN_ATOM_LEN: usize = 20;
pub const HASH_EMBEDDING_DIM: usize = 384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceId {
    Paper(PaperId),
    Cluster(ClusterId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextAtom {
    pub source: SourceId,
    pub text: String,
}

/// Tokens ending in `.` that do not close a sentence.
const ABBREVIATIONS: &[&str] = &[
    "e.g", "i.e", "et al", "al", "cf", "vs", "fig", "figs", "eq", "eqs", "dr", "prof", "mr", "mrs", "ms", "no", "vol",
    "approx", "resp", "ca", "sec", "ref", "refs", "st", "jr", "inc", "corp", "ltd",
];

fn ends_with_abbreviation(before: &str) -> bool {
    let word = before
        .rsplit(|c: char| c.is_whitespace() || c == '(')
        .next()
        .unwrap_or("")
        .to_lowercase();
    if word.chars().count() == 1 && word.chars().all(char::is_alphabetic) {
        // single initial such as "J."
        return true;
    }
    if ABBREVIATIONS.contains(&word.as_str()) {
        return true;
    }
    let tail = before.to_lowercase();
    ABBREVIATIONS.iter().any(|a| a.contains(' ') && tail.ends_with(a))
}

/// Sentence spans: a terminator (`.`, `!`, `?`) followed by whitespace and a
/// capital letter, or by the end of the text.
fn sentence_spans(text: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for (pos, &(i, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let end = i + c.len_utf8();
        let mut next = pos + 1;
        while next < chars.len() && matches!(chars[next].1, '.' | '!' | '?' | '"' | '”' | ')') {
            next += 1;
        }
        let boundary = if next == chars.len() {
            true
        } else {
            let mut j = next;
            let mut saw_space = false;
            while j < chars.len() && chars[j].1.is_whitespace() {
                saw_space = true;
                j += 1;
            }
            saw_space && j < chars.len() && chars[j].1.is_uppercase()
        };
        if !boundary || next != pos + 1 {
            continue;
        }
        if c == '.' && ends_with_abbreviation(&text[start..i]) {
            continue;
        }
        out.push(text[start..end].trim());
        start = end;
    }
    out.push(text[start..].trim());
    out.into_iter().filter(|s| !s.is_empty()).collect()
}

/// Split with the default minimum atom length.
pub fn split_atoms(text: &str, source: SourceId) -> Vec<TextAtom> {
    split_atoms_with(text, source, DEFAULT_MIN_ATOM_LEN)
}

/// Sentence-level atoms. Spans shorter than `min_len` characters are merged
/// into the previous atom (a short leading span merges forward). A text that
/// is short overall still yields one atom.
pub fn split_atoms_with(text: &str, source: SourceId, min_len: usize) -> Vec<TextAtom> {
    let mut atoms: Vec<String> = Vec::new();
    let mut pending = String::new();
    for span in sentence_spans(text) {
        if !pending.is_empty() {
            pending.push(' ');
        }
        pending.push_str(span);
        if pending.chars().count() >= min_len {
            atoms.push(std::mem::take(&mut pending));
        } else if let Some(last) = atoms.last_mut() {
            last.push(' ');
            last.push_str(&pending);
            pending.clear();
        }
    }
    if !pending.is_empty() {
        atoms.push(pending);
    }
    atoms.into_iter().map(|text| TextAtom { source, text }).collect()
}

/// Unit-norm embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Normalizes `values`; a zero or non-finite vector is rejected.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if values.is_empty() || !norm.is_finite() || norm == 0.0 {
            return Err(Error::Embedding {
                indices: vec![],
                message: "cannot normalize a zero, empty or non-finite vector".into(),
            });
        }
        Ok(EmbeddingVector {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    /// Trusts that `values` is already unit-norm (cache reloads).
    fn from_normalized(values: Vec<f64>) -> Self {
        EmbeddingVector { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

impl std::ops::Neg for &EmbeddingVector {
    type Output = EmbeddingVector;
    fn neg(self) -> EmbeddingVector {
        EmbeddingVector::from_normalized(self.values.iter().map(|v| -v).collect())
    }
}

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dimension() != b.dimension() {
        return Err(Error::Metric(format!(
            "dimension mismatch: {} vs {}",
            a.dimension(),
            b.dimension()
        )));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Row-major matrix of cosines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Metric("ragged similarity matrix".into()));
        }
        Ok(SimilarityMatrix {
            rows: rows.len(),
            cols,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> SimilarityMatrix {
        let mut values = Vec::with_capacity(self.values.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                values.push(self.get(r, c));
            }
        }
        SimilarityMatrix {
            rows: self.cols,
            cols: self.rows,
            values,
        }
    }
}

pub fn pairwise_similarity(a: &[EmbeddingVector], b: &[EmbeddingVector]) -> Result<SimilarityMatrix> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Metric("pairwise similarity needs non-empty inputs".into()));
    }
    let mut values = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            values.push(cosine(x, y)?);
        }
    }
    Ok(SimilarityMatrix {
        rows: a.len(),
        cols: b.len(),
        values,
    })
}

/// A text embedding backend. Implementations must return one vector per
/// input, in input order, all of one dimension.
pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    fn model_id(&self) -> &str;
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;

    /// Contextless per-token vectors, when the backend exposes them.
    fn embed_tokens(&self, _text: &str) -> Option<Result<Vec<EmbeddingVector>>> {
        None
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Box<P> {
    fn provider_id(&self) -> &str {
        (**self).provider_id()
    }

    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        (**self).embed_texts(texts)
    }

    fn embed_tokens(&self, text: &str) -> Option<Result<Vec<EmbeddingVector>>> {
        (**self).embed_tokens(text)
    }
}

pub fn embed(atoms: &[TextAtom], provider: &dyn EmbeddingProvider) -> Result<Vec<EmbeddingVector>> {
    let texts: Vec<String> = atoms.iter().map(|a| a.text.clone()).collect();
    let out = provider.embed_texts(&texts)?;
    if out.len() != texts.len() {
        return Err(Error::Embedding {
            indices: (0..texts.len()).collect(),
            message: format!("provider returned {} vectors for {} atoms", out.len(), texts.len()),
        });
    }
    Ok(out)
}

static WORD_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"[\p{L}\p{N}]+").unwrap());

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "in", "into", "is", "it", "its", "of", "on", "or",
    "that", "the", "these", "this", "to", "was", "were", "which", "with",
];

fn word_tokens(text: &str) -> Vec<String> {
    WORD_RE
        .find_iter(&text.to_lowercase())
        .map(|m| m.as_str().to_string())
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

/// Deterministic offline embedder: hashed bag of lowercased word tokens.
/// Counts are unsigned, so cosines between outputs are non-negative.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    seed: u64,
    dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder {
            seed: 0,
            dim: HASH_EMBEDDING_DIM,
        }
    }
}

impl HashEmbedder {
    pub fn new(seed: u64, dim: usize) -> Self {
        HashEmbedder { seed, dim: dim.max(1) }
    }

    fn bucket(&self, token: &str) -> usize {
        (xxhash_rust::xxh3::xxh3_64_with_seed(token.as_bytes(), self.seed) % self.dim as u64) as usize
    }

    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        let mut v = vec![0.0; self.dim];
        let tokens = word_tokens(text);
        if tokens.is_empty() {
            v[self.bucket("\u{2205}")] = 1.0;
        }
        for t in tokens {
            v[self.bucket(&t)] += 1.0;
        }
        EmbeddingVector::new(v).expect("non-empty bag")
    }

    /// Character-trigram vector of one token, so near-miss spellings stay close.
    fn embed_token(&self, token: &str) -> EmbeddingVector {
        let padded: Vec<char> = format!("#{token}#").chars().collect();
        let mut v = vec![0.0; self.dim];
        for w in padded.windows(3.min(padded.len())) {
            let g: String = w.iter().collect();
            v[self.bucket(&g)] += 1.0;
        }
        EmbeddingVector::new(v).expect("non-empty trigram bag")
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn provider_id(&self) -> &str {
        "hash"
    }

    fn model_id(&self) -> &str {
        "hashed-bow-384"
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }

    fn embed_tokens(&self, text: &str) -> Option<Result<Vec<EmbeddingVector>>> {
        let tokens = word_tokens(text);
        let tokens = if tokens.is_empty() {
            vec!["\u{2205}".to_string()]
        } else {
            tokens
        };
        Some(Ok(tokens.iter().map(|t| self.embed_token(t)).collect()))
    }
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    vector: Vec<f64>,
}

/// Disk-backed cache in front of another provider. Entries are JSON lines
/// keyed by `sha256(provider | model | text)`; only misses reach the inner
/// provider.
pub struct CachedProvider<P> {
    inner: P,
    path: PathBuf,
    entries: Mutex<HashMap<String, Vec<f64>>>,
    writer: Mutex<File>,
}

impl<P: EmbeddingProvider> CachedProvider<P> {
    pub fn open(inner: P, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
            for line in BufReader::new(f).lines() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                // a torn final line from an interrupted run is skipped
                match serde_json::from_str::<CacheLine>(&line) {
                    Ok(c) => {
                        entries.insert(c.key, c.vector);
                    }
                    Err(e) => log::warn!("{}: skipping bad cache line: {e}", path.display()),
                }
            }
        }
        let writer = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(CachedProvider {
            inner,
            path,
            entries: Mutex::new(entries),
            writer: Mutex::new(writer),
        })
    }

    pub fn key(&self, text: &str) -> String {
        let mut h = Sha256::new();
        h.update(self.inner.provider_id().as_bytes());
        h.update(b"|");
        h.update(self.inner.model_id().as_bytes());
        h.update(b"|");
        h.update(text.as_bytes());
        hex::encode(h.finalize())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedProvider<P> {
    fn provider_id(&self) -> &str {
        self.inner.provider_id()
    }

    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let keys: Vec<String> = texts.iter().map(|t| self.key(t)).collect();
        let mut out: Vec<Option<EmbeddingVector>> = {
            let entries = self.entries.lock().unwrap();
            keys.iter()
                .map(|k| entries.get(k).map(|v| EmbeddingVector::from_normalized(v.clone())))
                .collect()
        };
        let mut miss_idx: Vec<usize> = Vec::new();
        let mut miss_texts: Vec<String> = Vec::new();
        let mut queued: HashMap<&str, ()> = HashMap::new();
        for (i, slot) in out.iter().enumerate() {
            if slot.is_none() && queued.insert(keys[i].as_str(), ()).is_none() {
                miss_idx.push(i);
                miss_texts.push(texts[i].clone());
            }
        }
        if !miss_texts.is_empty() {
            let fresh = self.inner.embed_texts(&miss_texts)?;
            let mut entries = self.entries.lock().unwrap();
            let mut writer = self.writer.lock().unwrap();
            for (&i, v) in miss_idx.iter().zip(fresh) {
                let line = serde_json::to_string(&CacheLine {
                    key: keys[i].clone(),
                    vector: v.values.clone(),
                })?;
                writeln!(writer, "{line}").map_err(|e| Error::io(&self.path, e))?;
                entries.insert(keys[i].clone(), v.values.clone());
            }
            writer.flush().map_err(|e| Error::io(&self.path, e))?;
            for (i, slot) in out.iter_mut().enumerate() {
                if slot.is_none() {
                    *slot = entries
                        .get(&keys[i])
                        .map(|v| EmbeddingVector::from_normalized(v.clone()));
                }
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled above")).collect())
    }

    fn embed_tokens(&self, text: &str) -> Option<Result<Vec<EmbeddingVector>>> {
        self.inner.embed_tokens(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpEmbedderConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub batch_size: usize,
    pub max_concurrent_batches: usize,
    pub retries: usize,
    pub timeout_secs: u64,
}

impl Default for HttpEmbedderConfig {
    fn default() -> Self {
        HttpEmbedderConfig {
            endpoint: String::new(),
            model: String::new(),
            api_key: None,
            batch_size: 64,
            max_concurrent_batches: 4,
            retries: 3,
            timeout_secs: 60,
        }
    }
}

/// Remote embedder. Sends `{"model", "input": [...]}` and accepts either
/// `{"embeddings": [[...]]}`, an OpenAI-style `{"data": [{"embedding", "index"}]}`
/// or a bare array of vectors.
pub struct HttpEmbedder {
    config: HttpEmbedderConfig,
    client: reqwest::blocking::Client,
}

impl HttpEmbedder {
    pub fn new(config: HttpEmbedderConfig) -> Result<Self> {
        if config.endpoint.is_empty() {
            return Err(Error::Config("embedding endpoint is not set".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(HttpEmbedder { config, client })
    }

    fn request_batch(&self, texts: &[String]) -> std::result::Result<Vec<Vec<f64>>, String> {
        let body = serde_json::json!({ "model": self.config.model, "input": texts });
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(250 << attempt.min(6)));
            }
            let mut req = self.client.post(&self.config.endpoint).json(&body);
            if let Some(key) = &self.config.api_key {
                req = req.bearer_auth(key);
            }
            match req
                .send()
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.json::<serde_json::Value>())
            {
                Ok(v) => return parse_embedding_response(&v, texts.len()),
                Err(e) => last = e.to_string(),
            }
        }
        Err(last)
    }
}

fn parse_embedding_response(v: &serde_json::Value, expected: usize) -> std::result::Result<Vec<Vec<f64>>, String> {
    let to_vec = |x: &serde_json::Value| -> Option<Vec<f64>> { x.as_array()?.iter().map(|f| f.as_f64()).collect() };
    let vectors: Vec<Vec<f64>> = if let Some(arr) = v.get("embeddings").and_then(|e| e.as_array()) {
        arr.iter()
            .map(to_vec)
            .collect::<Option<_>>()
            .ok_or("non-numeric embedding")?
    } else if let Some(data) = v.get("data").and_then(|d| d.as_array()) {
        let mut items: Vec<(u64, Vec<f64>)> = data
            .iter()
            .enumerate()
            .map(|(i, d)| {
                Some((
                    d.get("index").and_then(|x| x.as_u64()).unwrap_or(i as u64),
                    to_vec(d.get("embedding")?)?,
                ))
            })
            .collect::<Option<_>>()
            .ok_or("malformed data entry")?;
        items.sort_by_key(|(i, _)| *i);
        items.into_iter().map(|(_, v)| v).collect()
    } else if let Some(arr) = v.as_array() {
        arr.iter()
            .map(to_vec)
            .collect::<Option<_>>()
            .ok_or("non-numeric embedding")?
    } else {
        return Err("unrecognized embedding response".into());
    };
    if vectors.len() != expected {
        return Err(format!("expected {expected} vectors, got {}", vectors.len()));
    }
    Ok(vectors)
}

impl EmbeddingProvider for HttpEmbedder {
    fn provider_id(&self) -> &str {
        &self.config.endpoint
    }

    fn model_id(&self) -> &str {
        &self.config.model
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let batch = self.config.batch_size.max(1);
        let chunks: Vec<(usize, &[String])> = texts.chunks(batch).enumerate().map(|(i, c)| (i * batch, c)).collect();
        let mut results: Vec<Option<std::result::Result<Vec<Vec<f64>>, String>>> = vec![None; chunks.len()];
        for (group_idx, group) in chunks.chunks(self.config.max_concurrent_batches.max(1)).enumerate() {
            let outs: Vec<_> = std::thread::scope(|s| {
                let handles: Vec<_> = group.iter().map(|(_, c)| s.spawn(|| self.request_batch(c))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err("worker panicked".into())))
                    .collect()
            });
            let base = group_idx * self.config.max_concurrent_batches.max(1);
            for (i, out) in outs.into_iter().enumerate() {
                results[base + i] = Some(out);
            }
        }
        let mut vectors = Vec::with_capacity(texts.len());
        for ((start, chunk), res) in chunks.iter().zip(results) {
            let indices = || (*start..start + chunk.len()).collect::<Vec<_>>();
            let raw = res.expect("every batch ran").map_err(|message| Error::Embedding {
                indices: indices(),
                message,
            })?;
            for v in raw {
                vectors.push(EmbeddingVector::new(v).map_err(|_| Error::Embedding {
                    indices: indices(),
                    message: "provider returned a zero vector".into(),
                })?);
            }
        }
        if let Some(d) = vectors.first().map(EmbeddingVector::dimension) {
            if vectors.iter().any(|v| v.dimension() != d) {
                return Err(Error::Embedding {
                    indices: (0..texts.len()).collect(),
                    message: "provider returned mixed dimensions".into(),
                });
            }
        }
        Ok(vectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const P: SourceId = SourceId::Paper(1);

    fn texts(atoms: &[TextAtom]) -> Vec<&str> {
        atoms.iter().map(|a| a.text.as_str()).collect()
    }

    #[test]
    fn split_trivial_cases() {
        assert_eq!(
            texts(&split_atoms_with("A cat. A dog.", P, 0)),
            vec!["A cat.", "A dog."]
        );
        assert!(split_atoms("", P).is_empty());
        assert!(split_atoms("   ", P).is_empty());
        // with the default minimum the two short sentences collapse
        assert_eq!(texts(&split_atoms("A cat. A dog.", P)), vec!["A cat. A dog."]);
    }

    /// Ten abstracts with hand-counted sentence boundaries.
    #[test]
    fn split_abstract_fixture() {
        let cases: [(&str, usize); 10] = [
            ("We study graph clustering, e.g. Louvain and Leiden methods. Results show strong agreement with experts.", 2),
            ("Prior work (Smith et al. 2020) used surveys. We instead mine citation data across many fields.", 2),
            ("As shown in Fig. 3 the effect persists over time. It vanishes only for very small corpora.", 2),
            ("The method follows J. Smith and colleagues closely. Accuracy improves by ten percent overall.", 2),
            ("Is coupling better than co-citation for mapping? We answer this with twelve benchmark studies.", 2),
            ("Results differ, i.e. the ranking changes with resolution. Stability analysis confirms this finding!", 2),
            ("Scores rose from 0.5 to 0.8 in most settings. None seen.", 1),
            ("We compare three pipelines on one hundred studies. Human experts rated all outputs. Agreement was high for all raters.", 3),
            ("Networks vs. text embeddings are compared in depth here. Both approaches capture related structure.", 2),
            ("A single long sentence describing a science map without any terminator", 1),
        ];
        for (text, n) in cases {
            assert_eq!(
                split_atoms(text, P).len(),
                n,
                "{text:?} -> {:?}",
                texts(&split_atoms(text, P))
            );
        }
    }

    #[test]
    fn short_spans_merge_into_previous() {
        let atoms = split_atoms(
            "This is a sufficiently long first sentence. Ok. Another sufficiently long sentence.",
            P,
        );
        assert_eq!(
            texts(&atoms),
            vec![
                "This is a sufficiently long first sentence. Ok.",
                "Another sufficiently long sentence."
            ]
        );
    }

    #[test]
    fn cosine_basics() {
        let v = EmbeddingVector::new(vec![3.0, 4.0]).unwrap();
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&v, &-&v).unwrap(), -1.0);
        let e1 = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
        let e2 = EmbeddingVector::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(cosine(&e1, &e2).unwrap(), 0.0);
        let e3 = EmbeddingVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(cosine(&e1, &e3).is_err());
        assert!(EmbeddingVector::new(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn pairwise_shapes_and_oracle() {
        let h = HashEmbedder::default();
        let a: Vec<EmbeddingVector> = ["x y", "y z", "z w"].iter().map(|t| h.embed_text(t)).collect();
        let m = pairwise_similarity(&a, &a).unwrap();
        for i in 0..3 {
            assert!((m.get(i, i) - 1.0).abs() < 1e-12);
        }
        let m = pairwise_similarity(&a[..2], &a).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 3));
        assert!(pairwise_similarity(&[], &a).is_err());
    }

    #[test]
    fn pairwise_matches_nested_loop_on_random_vectors() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut gen = |n: usize| -> Vec<EmbeddingVector> {
            (0..n)
                .map(|_| EmbeddingVector::new((0..16).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
                .collect()
        };
        let a = gen(5);
        let b = gen(4);
        let m = pairwise_similarity(&a, &b).unwrap();
        for (u, x) in a.iter().enumerate() {
            for (v, y) in b.iter().enumerate() {
                let mut dot = 0.0;
                for d in 0..16 {
                    dot += x.values()[d] * y.values()[d];
                }
                assert!((m.get(u, v) - dot).abs() < 1e-12);
            }
        }
        assert_eq!(pairwise_similarity(&b, &a).unwrap(), m.transpose());
    }

    #[test]
    fn hash_embedder_properties() {
        let h = HashEmbedder::default();
        let a = h.embed_text("abc");
        assert_eq!(a, HashEmbedder::default().embed_text("abc"));
        assert_eq!(a.dimension(), 384);
        assert!(
            (cosine(
                &h.embed_text("Deep learning models"),
                &h.embed_text("deep LEARNING models!")
            )
            .unwrap()
                - 1.0)
                .abs()
                < 1e-12
        );
        let c = cosine(
            &h.embed_text("graph community detection"),
            &h.embed_text("ocean salinity measurement"),
        )
        .unwrap();
        assert!(c.abs() < 0.1, "{c}");
        assert!(h.embed_tokens("alpha beta").unwrap().unwrap().len() == 2);
    }

    // Hash collisions make near-orthogonality a rate, not a guarantee.
    #[test]
    fn disjoint_texts_are_mostly_orthogonal() {
        use rand::{Rng, SeedableRng};
        let h = HashEmbedder::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut word = |tag: char| -> String {
            (0..7)
                .map(|_| rng.gen_range(b'a'..=b'z') as char)
                .chain([tag])
                .collect()
        };
        let mut ok = 0;
        for _ in 0..200 {
            let a: Vec<String> = (0..4).map(|_| word('x')).collect();
            let b: Vec<String> = (0..4).map(|_| word('y')).collect();
            let c = cosine(&h.embed_text(&a.join(" ")), &h.embed_text(&b.join(" "))).unwrap();
            ok += (c.abs() < 0.1) as usize;
        }
        assert!(ok >= 180, "{ok}/200");
    }

    #[test]
    fn cache_serves_identical_vectors_without_inner_calls() {
        struct Counting(std::sync::atomic::AtomicUsize, HashEmbedder);
        impl EmbeddingProvider for Counting {
            fn provider_id(&self) -> &str {
                "counting"
            }
            fn model_id(&self) -> &str {
                "m"
            }
            fn embed_texts(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
                self.0.fetch_add(texts.len(), std::sync::atomic::Ordering::SeqCst);
                self.1.embed_texts(texts)
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let input: Vec<String> = vec!["one text".into(), "two text".into(), "one text".into()];
        let first = {
            let c = CachedProvider::open(Counting(0.into(), HashEmbedder::default()), &path).unwrap();
            let out = c.embed_texts(&input).unwrap();
            assert_eq!(c.inner.0.load(std::sync::atomic::Ordering::SeqCst), 2);
            out
        };
        let c = CachedProvider::open(Counting(0.into(), HashEmbedder::default()), &path).unwrap();
        let second = c.embed_texts(&input).unwrap();
        assert_eq!(c.inner.0.load(std::sync::atomic::Ordering::SeqCst), 0);
        for (a, b) in first.iter().zip(&second) {
            let bits = |v: &EmbeddingVector| v.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn response_shapes() {
        let a = serde_json::json!({"embeddings": [[1.0, 0.0], [0.0, 1.0]]});
        assert_eq!(parse_embedding_response(&a, 2).unwrap()[1], vec![0.0, 1.0]);
        let b =
            serde_json::json!({"data": [{"index": 1, "embedding": [0.0, 1.0]}, {"index": 0, "embedding": [1.0, 0.0]}]});
        assert_eq!(parse_embedding_response(&b, 2).unwrap()[0], vec![1.0, 0.0]);
        assert!(parse_embedding_response(&a, 3).is_err());
    }

    proptest! {
        #[test]
        fn hash_vectors_are_unit_norm(text in "[a-zA-Z .,]{0,60}") {
            let v = HashEmbedder::default().embed_text(&text);
            let n: f64 = v.values().iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-9);
        }

        #[test]
        fn atoms_are_trimmed_and_cover_words(text in "([A-Z][a-z]{1,8}( [a-z]{1,8}){0,6}[.!?] ){0,6}") {
            let atoms = split_atoms(&text, P);
            for a in &atoms {
                prop_assert_eq!(a.text.trim(), a.text.as_str());
                prop_assert!(!a.text.is_empty());
            }
            let joined: Vec<&str> = atoms.iter().flat_map(|a| a.text.split_whitespace()).collect();
            prop_assert_eq!(joined, text.split_whitespace().collect::<Vec<_>>());
            if atoms.len() > 1 {
                prop_assert!(atoms.iter().all(|a| a.text.chars().count() >= DEFAULT_MIN_ATOM_LEN));
            }
        }
    }
}
