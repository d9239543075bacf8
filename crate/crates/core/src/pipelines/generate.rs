use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use once_cell::sync::Lazy;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub model: String,
    pub prompt: String,
    pub max_output_tokens: usize,
}

/// A text generation backend.
pub trait Generator: Send + Sync {
    fn id(&self) -> String;
    fn generate(&self, request: &GenerationRequest) -> Result<String>;
}

impl<G: Generator + ?Sized> Generator for &G {
    fn id(&self) -> String {
        (**self).id()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String> {
        (**self).generate(request)
    }
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String> {
        (**self).generate(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorStyle {
    /// `{"model", "prompt", "max_tokens"}` → `{"text"}`.
    #[default]
    Simple,
    /// Chat-completions request and `choices[0].message.content` response.
    OpenaiChat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpGeneratorConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub style: GeneratorStyle,
    pub max_concurrent: usize,
    pub retries: usize,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for HttpGeneratorConfig {
    fn default() -> Self {
        HttpGeneratorConfig {
            endpoint: String::new(),
            api_key: None,
            style: GeneratorStyle::Simple,
            max_concurrent: 4,
            retries: 3,
            backoff_ms: 500,
            timeout_secs: 300,
        }
    }
}

struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut p = self.permits.lock().unwrap();
        while *p == 0 {
            p = self.cv.wait(p).unwrap();
        }
        *p -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Remote generator with a concurrent-request bound and jittered
/// exponential backoff.
pub struct HttpGenerator {
    config: HttpGeneratorConfig,
    client: reqwest::blocking::Client,
    slots: Semaphore,
}

impl HttpGenerator {
    pub fn new(config: HttpGeneratorConfig) -> Result<Self> {
        if config.endpoint.is_empty() {
            return Err(Error::Config("generation endpoint is not set".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        let slots = Semaphore {
            permits: Mutex::new(config.max_concurrent.max(1)),
            cv: Condvar::new(),
        };
        Ok(HttpGenerator { config, client, slots })
    }

    fn body(&self, req: &GenerationRequest) -> serde_json::Value {
        match self.config.style {
            GeneratorStyle::Simple => json!({
                "model": req.model,
                "prompt": req.prompt,
                "max_tokens": req.max_output_tokens,
            }),
            GeneratorStyle::OpenaiChat => json!({
                "model": req.model,
                "messages": [{"role": "user", "content": req.prompt}],
                "max_tokens": req.max_output_tokens,
            }),
        }
    }

    fn extract(&self, v: &serde_json::Value) -> Option<String> {
        match self.config.style {
            GeneratorStyle::Simple => v.get("text").and_then(|t| t.as_str()).map(str::to_string),
            GeneratorStyle::OpenaiChat => v
                .pointer("/choices/0/message/content")
                .and_then(|t| t.as_str())
                .map(str::to_string),
        }
    }
}

impl Generator for HttpGenerator {
    fn id(&self) -> String {
        format!("http:{}", self.config.endpoint)
    }

    fn generate(&self, req: &GenerationRequest) -> Result<String> {
        let _slot = self.slots.acquire();
        let body = self.body(req);
        let mut rng = rand::thread_rng();
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                let base = self.config.backoff_ms << (attempt - 1).min(8);
                std::thread::sleep(Duration::from_millis(base + rng.gen_range(0..=base / 2)));
            }
            let mut r = self.client.post(&self.config.endpoint).json(&body);
            if let Some(key) = &self.config.api_key {
                r = r.bearer_auth(key);
            }
            match r
                .send()
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.json::<serde_json::Value>())
            {
                Ok(v) => {
                    return self
                        .extract(&v)
                        .ok_or_else(|| Error::Generation(format!("response has no text field: {v}")))
                }
                Err(e) => {
                    log::warn!("generation attempt {} failed: {e}", attempt + 1);
                    last = e.to_string();
                }
            }
        }
        Err(Error::Generation(format!(
            "{} attempts failed; last error: {last}",
            self.config.retries + 1
        )))
    }
}

#[derive(Serialize)]
struct TranscriptLine<'a> {
    generator: String,
    model: &'a str,
    prompt: &'a str,
    response: Option<&'a str>,
    error: Option<String>,
}

/// Appends every request and response to a JSON-lines audit log.
pub struct TranscriptGenerator<G> {
    inner: G,
    path: PathBuf,
    file: Mutex<File>,
}

impl<G: Generator> TranscriptGenerator<G> {
    pub fn new(inner: G, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(TranscriptGenerator {
            inner,
            path,
            file: Mutex::new(file),
        })
    }
}

impl<G: Generator> Generator for TranscriptGenerator<G> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn generate(&self, req: &GenerationRequest) -> Result<String> {
        let out = self.inner.generate(req);
        let line = TranscriptLine {
            generator: self.inner.id(),
            model: &req.model,
            prompt: &req.prompt,
            response: out.as_ref().ok().map(String::as_str),
            error: out.as_ref().err().map(|e| e.to_string()),
        };
        let mut f = self.file.lock().unwrap();
        writeln!(f, "{}", serde_json::to_string(&line)?).map_err(|e| Error::io(&self.path, e))?;
        out
    }
}

static EXACTLY_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"JSON array with exactly (\d+) objects").unwrap());
static MAX_REFS_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"no more than (\d+) references").unwrap());
static FIELDS_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"each object must contain: ([a-z_, ]+)").unwrap());
static RANGE_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"Use cluster_id values 1 through (\d+)").unwrap());
static HEADER_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^Cluster (\d+):$").unwrap());
static QUERY_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?m)^Query(?:/context)?:\n(.*)$").unwrap());

#[derive(Debug, Clone, Default)]
struct PromptRecord {
    paper_id: u64,
    title: String,
    group: Option<u32>,
    label: Option<u32>,
}

/// What a mock can read back out of a rendered prompt.
#[derive(Debug, Clone)]
struct PromptView {
    k: usize,
    max_refs: usize,
    fields: Vec<String>,
    ids: Option<Vec<u32>>,
    query: String,
    records: Vec<PromptRecord>,
}

impl PromptView {
    fn parse(prompt: &str) -> Result<Self> {
        // a corrective retry repeats the original prompt first
        let prompt = prompt
            .split("\n\nYour previous response was rejected:")
            .next()
            .unwrap_or(prompt);
        let num = |re: &Regex| re.captures(prompt).and_then(|c| c[1].parse::<usize>().ok());
        let k = num(&EXACTLY_RE).ok_or_else(|| Error::Generation("mock: prompt states no cluster count".into()))?;
        let fields = FIELDS_RE
            .captures(prompt)
            .map(|c| c[1].split(',').map(|f| f.trim().to_string()).collect())
            .unwrap_or_default();
        let mut records: Vec<PromptRecord> = Vec::new();
        let mut group = None;
        for line in prompt.lines() {
            if let Some(c) = HEADER_RE.captures(line) {
                group = c[1].parse().ok();
            } else if let Some(v) = line.strip_prefix("paper_id: ") {
                records.push(PromptRecord {
                    paper_id: v.trim().parse().unwrap_or(0),
                    group,
                    ..PromptRecord::default()
                });
            } else if let Some(r) = records.last_mut() {
                if let Some(v) = line.strip_prefix("title: ") {
                    r.title = v.trim().to_string();
                } else if let Some(v) = line.strip_prefix("cluster: ") {
                    r.label = v.trim().parse().ok();
                }
            }
        }
        let ids = num(&RANGE_RE).map(|n| (1..=n as u32).collect());
        Ok(PromptView {
            k,
            max_refs: num(&MAX_REFS_RE).unwrap_or(10),
            fields,
            ids,
            query: QUERY_RE
                .captures(prompt)
                .map(|c| c[1].trim().to_string())
                .unwrap_or_default(),
            records,
        })
    }

    /// Papers per cluster id, in context order.
    fn groups(&self) -> BTreeMap<u32, Vec<&PromptRecord>> {
        let mut out: BTreeMap<u32, Vec<&PromptRecord>> = BTreeMap::new();
        let ids: Vec<u32> = self.ids.clone().unwrap_or_default();
        if let Some(ids) = &self.ids {
            for &c in ids {
                out.entry(c).or_default();
            }
        }
        for (i, r) in self.records.iter().enumerate() {
            let c = match (r.group, r.label) {
                (Some(g), _) => g,
                (None, Some(l)) => l,
                // unlabeled corpus: deal papers round-robin
                (None, None) if !ids.is_empty() => ids[i % ids.len()],
                (None, None) => (i % self.k) as u32 + 1,
            };
            out.entry(c).or_default().push(r);
        }
        out
    }

    fn has(&self, field: &str) -> bool {
        self.fields.iter().any(|f| f == field)
    }

    fn render(&self, groups: &BTreeMap<u32, Vec<&PromptRecord>>) -> String {
        let mut items = Vec::new();
        if self.records.is_empty() {
            for c in self.ids.clone().unwrap_or_else(|| (1..=self.k as u32).collect()) {
                let mut obj = serde_json::Map::new();
                obj.insert("cluster_id".into(), json!(c));
                if self.has("description") {
                    obj.insert(
                        "description".into(),
                        json!(format!("Research theme {c} within {}.", self.query)),
                    );
                }
                if self.has("references") {
                    obj.insert(
                        "references".into(),
                        json!([format!(
                            "Example, A. (2020). {} theme {c}. Journal of Examples, 1, 1-10.",
                            self.query
                        )]),
                    );
                }
                items.push(serde_json::Value::Object(obj));
            }
        } else {
            for (c, papers) in groups {
                let top: Vec<&&PromptRecord> = papers.iter().take(self.max_refs).collect();
                let mut obj = serde_json::Map::new();
                obj.insert("cluster_id".into(), json!(c));
                if self.has("description") {
                    let titles: Vec<&str> = top.iter().map(|r| r.title.as_str()).collect();
                    obj.insert("description".into(), json!(titles.join(". ")));
                }
                if self.has("references") {
                    let refs: Vec<String> = top.iter().map(|r| format!("[{}]", r.paper_id)).collect();
                    obj.insert("references".into(), json!(refs));
                }
                items.push(serde_json::Value::Object(obj));
            }
        }
        serde_json::to_string_pretty(&items).expect("json values serialize")
    }
}

/// Offline mock that answers every prompt by echoing the titles of each
/// cluster's first papers and citing them. Unlabeled corpora are dealt to
/// clusters round-robin; the blind prompt gets query-only placeholders.
#[derive(Debug, Clone, Copy, Default)]
pub struct TermEchoGenerator;

impl Generator for TermEchoGenerator {
    fn id(&self) -> String {
        "mock:term-echo".into()
    }

    fn generate(&self, req: &GenerationRequest) -> Result<String> {
        let view = PromptView::parse(&req.prompt)?;
        Ok(format!("```json\n{}\n```", view.render(&view.groups())))
    }
}

/// Control mock: same output shape as [`TermEchoGenerator`], but each
/// cluster echoes a random set of papers of the same size.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShuffledEchoGenerator {
    pub seed: u64,
}

impl Generator for ShuffledEchoGenerator {
    fn id(&self) -> String {
        format!("mock:shuffled-echo:{}", self.seed)
    }

    fn generate(&self, req: &GenerationRequest) -> Result<String> {
        let view = PromptView::parse(&req.prompt)?;
        let groups = view.groups();
        let mut pool: Vec<&PromptRecord> = view.records.iter().collect();
        pool.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let mut it = pool.into_iter();
        let shuffled: BTreeMap<u32, Vec<&PromptRecord>> = groups
            .iter()
            .map(|(&c, members)| (c, it.by_ref().take(members.len()).collect()))
            .collect();
        Ok(view.render(&shuffled))
    }
}
