//! Lookup of free-text references in an external bibliographic service.

use std::collections::{BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{normalize_reference, ReferenceKey};
use crate::error::{Error, Result};
use crate::fuzzy::{normalize_surname, normalize_text, token_set_ratio, TokenSet, TITLE_MATCH_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalRecord {
    pub record_id: String,
    pub title: String,
    pub year: Option<i32>,
    pub first_author_surname: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Resolution {
    /// Best candidate and its title score (0–100).
    Found {
        record: ExternalRecord,
        score: f64,
    },
    NoMatch,
    /// The service could not be reached; not evidence either way.
    Unresolved {
        reason: String,
    },
}

/// Finds the closest external record for a reference string.
pub trait RecordResolver: Send + Sync {
    fn id(&self) -> String;

    /// Best candidate among at most a handful returned for the reference's
    /// title. Service outages come back as [`Resolution::Unresolved`].
    fn search_best(&self, reference: &str) -> Result<Resolution>;
}

impl<R: RecordResolver + ?Sized> RecordResolver for Box<R> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn search_best(&self, reference: &str) -> Result<Resolution> {
        (**self).search_best(reference)
    }
}

/// Title used to query a service, taken from the parsed reference when possible.
pub fn query_title(reference: &str) -> Result<String> {
    if reference.trim().is_empty() {
        return Err(Error::Normalization("empty reference".into()));
    }
    Ok(match normalize_reference(reference) {
        Ok(key) => key.normalized_title,
        Err(_) => normalize_text(reference),
    })
}

fn best_of(query: &str, candidates: impl IntoIterator<Item = ExternalRecord>) -> Resolution {
    let q = TokenSet::new(query);
    let mut best: Option<(ExternalRecord, f64)> = None;
    for c in candidates {
        let s = crate::fuzzy::token_set_ratio_sets(&q, &TokenSet::new(&c.title));
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((c, s));
        }
    }
    match best {
        Some((record, score)) => Resolution::Found { record, score },
        None => Resolution::NoMatch,
    }
}

/// Which of the three nested criteria a reference meets against a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchCriteria {
    pub title: bool,
    pub title_year: bool,
    pub title_year_author: bool,
}

pub fn match_criteria(reference: &ReferenceKey, record: &ExternalRecord) -> MatchCriteria {
    let title = token_set_ratio(&reference.normalized_title, &record.title) >= TITLE_MATCH_THRESHOLD;
    let title_year = title && matches!((reference.year, record.year), (Some(a), Some(b)) if a == b);
    let surname = |s: &Option<String>| s.as_deref().and_then(normalize_surname);
    let title_year_author = title_year
        && matches!((surname(&reference.first_author_surname), surname(&record.first_author_surname)), (Some(a), Some(b)) if a == b);
    MatchCriteria {
        title,
        title_year,
        title_year_author,
    }
}

/// Offline resolver over a local record list. Candidates are records sharing
/// at least one non-stopword title token with the query, ranked by overlap, top 5.
#[derive(Debug, Clone, Default)]
pub struct FixtureResolver {
    records: Vec<ExternalRecord>,
    tokens: Vec<BTreeSet<String>>,
}

const CANDIDATE_STOPWORDS: &[&str] = &[
    "a", "an", "and", "at", "by", "for", "from", "in", "of", "on", "the", "to", "with",
];

fn content_tokens(text: &str) -> BTreeSet<String> {
    TokenSet::new(text)
        .tokens()
        .iter()
        .filter(|t| !CANDIDATE_STOPWORDS.contains(&t.as_str()))
        .cloned()
        .collect()
}

impl FixtureResolver {
    pub fn new(records: Vec<ExternalRecord>) -> Self {
        let tokens = records.iter().map(|r| content_tokens(&r.title)).collect();
        FixtureResolver { records, tokens }
    }

    /// Reads `record_id,title,year,first_author_surname`.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path)?;
        let mut records = Vec::new();
        let mut ids = BTreeSet::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).map(str::trim).filter(|s| !s.is_empty());
            let record_id =
                field(0).ok_or_else(|| Error::Ingestion(format!("{}: missing record_id", path.display())))?;
            let title = field(1)
                .ok_or_else(|| Error::Ingestion(format!("{}: record {record_id} has no title", path.display())))?;
            if !ids.insert(record_id.to_string()) {
                return Err(Error::Ingestion(format!(
                    "{}: duplicate record_id {record_id}",
                    path.display()
                )));
            }
            records.push(ExternalRecord {
                record_id: record_id.to_string(),
                title: title.to_string(),
                year: field(2).and_then(|y| y.parse().ok()),
                first_author_surname: field(3).map(str::to_string),
            });
        }
        Ok(FixtureResolver::new(records))
    }

    pub fn records(&self) -> &[ExternalRecord] {
        &self.records
    }
}

impl RecordResolver for FixtureResolver {
    fn id(&self) -> String {
        "fixture".into()
    }

    fn search_best(&self, reference: &str) -> Result<Resolution> {
        let title = query_title(reference)?;
        let q = content_tokens(&title);
        let mut scored: Vec<(usize, usize)> = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.intersection(&q).count(), i))
            .filter(|(n, _)| *n > 0)
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        Ok(best_of(
            &title,
            scored.into_iter().take(5).map(|(_, i)| self.records[i].clone()),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpenAlexConfig {
    pub base_url: String,
    pub mailto: Option<String>,
    pub candidates: usize,
    pub requests_per_second: f64,
    pub retries: usize,
    pub timeout_secs: u64,
}

impl Default for OpenAlexConfig {
    fn default() -> Self {
        OpenAlexConfig {
            base_url: "https://api.openalex.org".into(),
            mailto: None,
            candidates: 5,
            requests_per_second: 5.0,
            retries: 3,
            timeout_secs: 30,
        }
    }
}

/// Client for the OpenAlex works search. Requests pass through a shared rate
/// limiter and back off with jitter on failure.
pub struct OpenAlexResolver {
    config: OpenAlexConfig,
    client: reqwest::blocking::Client,
    next_slot: Mutex<Instant>,
}

impl OpenAlexResolver {
    pub fn new(config: OpenAlexConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(OpenAlexResolver {
            config,
            client,
            next_slot: Mutex::new(Instant::now()),
        })
    }

    fn wait_turn(&self) {
        let interval = Duration::from_secs_f64(1.0 / self.config.requests_per_second.max(0.01));
        let wait = {
            let mut next = self.next_slot.lock().unwrap();
            let now = Instant::now();
            let at = (*next).max(now);
            *next = at + interval;
            at - now
        };
        std::thread::sleep(wait);
    }

    fn fetch(&self, title: &str) -> std::result::Result<Vec<ExternalRecord>, String> {
        let url = format!("{}/works", self.config.base_url.trim_end_matches('/'));
        let per_page = self.config.candidates.max(1).to_string();
        let filter = format!("title.search:{}", title.replace([',', ':', '|'], " "));
        let mut query: Vec<(&str, &str)> = vec![("filter", &filter), ("per-page", &per_page)];
        if let Some(m) = &self.config.mailto {
            query.push(("mailto", m));
        }
        let mut last = String::new();
        let mut rng = rand::thread_rng();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                let base = 500u64 << (attempt - 1).min(6);
                std::thread::sleep(Duration::from_millis(base + rng.gen_range(0..=base)));
            }
            self.wait_turn();
            match self
                .client
                .get(&url)
                .query(&query)
                .send()
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.json::<serde_json::Value>())
            {
                Ok(v) => return Ok(parse_openalex(&v)),
                Err(e) => last = e.to_string(),
            }
        }
        Err(last)
    }
}

fn parse_openalex(v: &serde_json::Value) -> Vec<ExternalRecord> {
    let Some(results) = v.get("results").and_then(|r| r.as_array()) else {
        return Vec::new();
    };
    results
        .iter()
        .filter_map(|w| {
            let title = w
                .get("display_name")
                .or_else(|| w.get("title"))
                .and_then(|t| t.as_str())?
                .to_string();
            let first_author_surname = w
                .pointer("/authorships/0/author/display_name")
                .and_then(|a| a.as_str())
                .and_then(crate::corpus::author_surname);
            Some(ExternalRecord {
                record_id: w.get("id").and_then(|i| i.as_str()).unwrap_or_default().to_string(),
                title,
                year: w.get("publication_year").and_then(|y| y.as_i64()).map(|y| y as i32),
                first_author_surname,
            })
        })
        .collect()
}

impl RecordResolver for OpenAlexResolver {
    fn id(&self) -> String {
        format!("openalex:{}", self.config.base_url)
    }

    fn search_best(&self, reference: &str) -> Result<Resolution> {
        let title = query_title(reference)?;
        match self.fetch(&title) {
            Ok(candidates) => Ok(best_of(&title, candidates)),
            Err(reason) => {
                log::warn!("resolver unavailable for {title:?}: {reason}");
                Ok(Resolution::Unresolved { reason })
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    resolution: Resolution,
}

/// JSON-lines cache keyed by a digest of the resolver id and the reference.
/// Unresolved outcomes are not stored, so a later run retries them.
pub struct CachedResolver<R> {
    inner: R,
    path: PathBuf,
    entries: Mutex<HashMap<String, Resolution>>,
    file: Mutex<File>,
}

impl<R: RecordResolver> CachedResolver<R> {
    pub fn open(inner: R, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
            for line in BufReader::new(f).lines() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                match serde_json::from_str::<CacheLine>(&line) {
                    Ok(c) => {
                        entries.insert(c.key, c.resolution);
                    }
                    Err(e) if !line.trim().is_empty() => log::warn!("{}: skipping bad cache line: {e}", path.display()),
                    Err(_) => {}
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(CachedResolver {
            inner,
            path,
            entries: Mutex::new(entries),
            file: Mutex::new(file),
        })
    }

    fn key(&self, reference: &str) -> String {
        let mut h = Sha256::new();
        h.update(self.inner.id().as_bytes());
        h.update(b"|");
        h.update(reference.trim().as_bytes());
        hex::encode(h.finalize())
    }
}

impl<R: RecordResolver> RecordResolver for CachedResolver<R> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn search_best(&self, reference: &str) -> Result<Resolution> {
        let key = self.key(reference);
        if let Some(hit) = self.entries.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let resolution = self.inner.search_best(reference)?;
        if !matches!(resolution, Resolution::Unresolved { .. }) {
            let line = serde_json::to_string(&CacheLine {
                key: key.clone(),
                resolution: resolution.clone(),
            })?;
            let mut f = self.file.lock().unwrap();
            writeln!(f, "{line}").map_err(|e| Error::io(&self.path, e))?;
            self.entries.lock().unwrap().insert(key, resolution.clone());
        }
        Ok(resolution)
    }
}
