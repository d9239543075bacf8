//! Corpus ingestion, reference normalization and intra-corpus citation
//! resolution.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{normalize_surname, normalize_text, token_set_ratio_sets, TokenSet, TITLE_MATCH_THRESHOLD};

pub type PaperId = u64;

/// One corpus document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: PaperId,
    pub title: String,
    pub abstract_text: String,
    pub year: Option<i32>,
    /// First entry is the first author.
    pub authors: Vec<String>,
    pub raw_references: Vec<String>,
    /// Corpus papers this paper cites; filled by [`resolve_intra_corpus_citations`].
    pub cited_in_corpus: BTreeSet<PaperId>,
}

impl PaperRecord {
    pub fn new(paper_id: PaperId, title: impl Into<String>) -> Self {
        PaperRecord {
            paper_id,
            title: title.into(),
            abstract_text: String::new(),
            year: None,
            authors: Vec::new(),
            raw_references: Vec::new(),
            cited_in_corpus: BTreeSet::new(),
        }
    }

    /// Canonical key of the paper itself, used as a citation target.
    pub fn key(&self) -> ReferenceKey {
        ReferenceKey {
            normalized_title: normalize_text(&self.title),
            year: self.year,
            first_author_surname: self.authors.first().and_then(|a| author_surname(a)),
        }
    }

    /// Normalized keys of all raw references; unparseable strings are skipped.
    pub fn reference_keys(&self) -> Vec<ReferenceKey> {
        self.raw_references
            .iter()
            .filter_map(|r| normalize_reference(r).ok())
            .collect()
    }

    /// Title and abstract joined into one passage.
    pub fn text(&self) -> String {
        let title = self.title.trim();
        let abs = self.abstract_text.trim();
        match (title.is_empty(), abs.is_empty()) {
            (_, true) => title.to_string(),
            (true, false) => abs.to_string(),
            _ if title.ends_with(['.', '?', '!']) => format!("{title} {abs}"),
            _ => format!("{title}. {abs}"),
        }
    }

    pub fn has_abstract(&self) -> bool {
        !self.abstract_text.trim().is_empty()
    }
}

/// One reconstructed study: query, corpus and the cluster count to match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkInstance {
    pub instance_id: String,
    pub query: String,
    pub papers: Vec<PaperRecord>,
    pub target_k: usize,
    pub human_descriptions: Option<Vec<String>>,
}

impl BenchmarkInstance {
    pub fn paper(&self, id: PaperId) -> Option<&PaperRecord> {
        self.papers.iter().find(|p| p.paper_id == id)
    }

    pub fn paper_ids(&self) -> BTreeSet<PaperId> {
        self.papers.iter().map(|p| p.paper_id).collect()
    }
}

/// Canonical form of a reference string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReferenceKey {
    pub normalized_title: String,
    pub year: Option<i32>,
    pub first_author_surname: Option<String>,
}

static YEAR_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"\b(1[89]\d{2}|20\d{2})\b").unwrap());
static PAREN_YEAR_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"\(\s*(?:1[89]|20)\d{2}[a-z]?\s*\)[.,:]?").unwrap());
static NUMBER_PREFIX_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^(?:\[\d+\]|\d+\.)\s+").unwrap());
static QUOTED_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r#"["“]([^"“”]{8,}?)[,.]["”]"#).unwrap());
/// `Smith, J.`, `Smith J. A.`, `van Dijk, A.-B.`, `Waltman L, van Eck NJ`, `... et al`
static AUTHOR_LEAD_RE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"^\p{Lu}[\p{L}'’\-]+(?:\s+[\p{L}'’\-]+)?,?\s+(?:\p{Lu}\.\s?-?)+|^\p{Lu}[\p{L}'’\-]+,?\s+\p{Lu}{1,3}\b|\bet al\b")
        .unwrap()
});
/// A single Scopus-style comma-separated author, e.g. `Smith J.` or `Doe A.B.`.
static SCOPUS_AUTHOR_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^\p{Lu}[\p{L}'’\-]+(?:\s[\p{L}'’\-]+)*\s(?:\p{Lu}\.)+(?:-\p{Lu}\.)?$").unwrap());
static ABBREVIATIONS: &[&str] = &[
    "al", "vol", "pp", "no", "ed", "eds", "eg", "ie", "vs", "cf", "fig", "st", "jr", "dr", "inc",
];

/// Split on sentence-style terminators. `.`, `?` or `!` ends a segment when
/// followed by whitespace or end of text; a period closing an initial or an
/// abbreviation does not.
fn period_segments(text: &str) -> Vec<String> {
    let mut segments = Vec::new();
    let mut current = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (idx, &c) in chars.iter().enumerate() {
        current.push(c);
        if !matches!(c, '.' | '?' | '!') {
            continue;
        }
        let at_boundary = chars.get(idx + 1).is_none_or(|n| n.is_whitespace());
        if !at_boundary {
            continue;
        }
        let word: String = current
            .trim_end_matches('.')
            .chars()
            .rev()
            .take_while(|c| c.is_alphanumeric())
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        let is_initial = word.chars().count() == 1 && word.chars().all(char::is_uppercase);
        let is_abbrev = ABBREVIATIONS.contains(&word.to_lowercase().as_str());
        if c == '.' && (is_initial || is_abbrev) {
            continue;
        }
        let seg = current.trim().trim_end_matches('.').trim().to_string();
        if !seg.is_empty() {
            segments.push(seg);
        }
        current.clear();
    }
    let seg = current.trim().trim_end_matches('.').trim().to_string();
    if !seg.is_empty() {
        segments.push(seg);
    }
    segments
}

fn surname_from_author_segment(segment: &str) -> Option<String> {
    segment
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .filter(|t| !matches!(t.to_lowercase().as_str(), "and" | "&"))
        .find(|t| t.chars().filter(|c| c.is_alphabetic()).count() >= 2 && !t.ends_with('.'))
        .and_then(normalize_surname)
}

/// Surname of a corpus author entry such as `Smith J.`, `Smith, John` or
/// `John Smith`.
pub fn author_surname(name: &str) -> Option<String> {
    let name = name.trim();
    if let Some((head, _)) = name.split_once(',') {
        return normalize_surname(head);
    }
    let tokens: Vec<&str> = name.split_whitespace().collect();
    let last = tokens.last()?;
    let looks_like_initials = last.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase)
        && last.chars().filter(|c| c.is_alphabetic()).count() <= 3;
    if looks_like_initials && tokens.len() > 1 {
        normalize_surname(tokens[0])
    } else {
        normalize_surname(last)
    }
}

fn is_title_like(segment: &str) -> bool {
    normalize_text(segment)
        .split(' ')
        .any(|t| t.chars().filter(|c| c.is_alphabetic()).count() >= 2 && !matches!(t, "pp" | "vol" | "no"))
}

/// Parse a free-text reference into its canonical key.
///
/// A leading author segment (text before an early parenthesized year, or a
/// first period-delimited segment that looks like an author list) is removed
/// and the first title-like segment after it becomes the title. Without a
/// detectable author lead the longest title-like segment is used. Quoted
/// titles and comma-separated export styles
/// (`Smith J., Doe A., Title, Venue, 12, pp. 1-9, (2020)`) are handled too.
pub fn normalize_reference(raw: &str) -> Result<ReferenceKey> {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.is_empty() {
        return Err(Error::Normalization("blank reference".into()));
    }
    let text = NUMBER_PREFIX_RE.replace(&collapsed, "").to_string();
    let year = YEAR_RE
        .captures(&text)
        .and_then(|c| c.get(1))
        .and_then(|m| m.as_str().parse::<i32>().ok());

    let (author_segment, title) = extract_title(&text);
    let mut normalized_title = normalize_text(&title);
    if normalized_title.is_empty() {
        normalized_title = normalize_text(&text);
    }
    if normalized_title.is_empty() {
        return Err(Error::Normalization(format!("no title-like text in {raw:?}")));
    }
    Ok(ReferenceKey {
        normalized_title,
        year,
        first_author_surname: author_segment.as_deref().and_then(surname_from_author_segment),
    })
}

fn extract_title(text: &str) -> (Option<String>, String) {
    if let Some(c) = QUOTED_RE.captures(text) {
        let whole = c.get(0).unwrap();
        let author = text[..whole.start()].trim().trim_end_matches(',').trim();
        let title = c.get(1).unwrap().as_str().trim().to_string();
        return ((!author.is_empty()).then(|| author.to_string()), title);
    }

    if let Some(m) = PAREN_YEAR_RE.find(text) {
        let author = text[..m.start()].trim();
        let rest = &text[m.end()..];
        if !author.is_empty() && is_title_like(rest) {
            return (Some(author.to_string()), first_title_segment(rest));
        }
    }

    let segments = period_segments(text);
    if segments.len() >= 2 && AUTHOR_LEAD_RE.is_match(&segments[0]) {
        let rest = segments[1..].join(". ");
        return (Some(segments[0].clone()), first_title_segment(&rest));
    }

    if segments.len() <= 1 {
        let pieces: Vec<&str> = text.split(", ").map(str::trim).collect();
        let n_authors = pieces.iter().take_while(|p| SCOPUS_AUTHOR_RE.is_match(p)).count();
        if n_authors > 0 && n_authors < pieces.len() {
            let mut body: Vec<&str> = pieces[n_authors..].to_vec();
            while body.last().is_some_and(|p| !is_title_like(p)) {
                body.pop();
            }
            // the last remaining piece is the source title
            if body.len() > 1 {
                body.pop();
            }
            return (Some(pieces[0].to_string()), body.join(", "));
        }
    }

    (None, longest_segment(text))
}

fn first_title_segment(text: &str) -> String {
    period_segments(text)
        .into_iter()
        .find(|s| is_title_like(s))
        .map(|s| PAREN_YEAR_RE.replace_all(&s, "").to_string())
        .unwrap_or_default()
}

fn longest_segment(text: &str) -> String {
    let mut best: Option<(usize, String)> = None;
    for seg in period_segments(text).into_iter().filter(|s| is_title_like(s)) {
        let cleaned = PAREN_YEAR_RE.replace_all(&seg, "").to_string();
        let len = normalize_text(&cleaned).chars().count();
        if best.as_ref().is_none_or(|(l, _)| len > *l) {
            best = Some((len, cleaned));
        }
    }
    best.map(|(_, s)| s).unwrap_or_default()
}

fn check_unique_ids(papers: &[PaperRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for p in papers {
        if !seen.insert(p.paper_id) {
            return Err(Error::Ingestion(format!("duplicate paper_id {}", p.paper_id)));
        }
    }
    Ok(())
}

/// Whether a parsed reference points at the given corpus key.
pub fn reference_matches(
    reference: &ReferenceKey,
    ref_tokens: &TokenSet,
    target: &ReferenceKey,
    target_tokens: &TokenSet,
) -> bool {
    if let (Some(a), Some(b)) = (reference.year, target.year) {
        if a != b {
            return false;
        }
    }
    !target.normalized_title.is_empty() && token_set_ratio_sets(ref_tokens, target_tokens) >= TITLE_MATCH_THRESHOLD
}

/// Resolve which corpus papers each paper cites.
///
/// Paper `j` is cited by `i` (`i != j`) when some reference of `i` matches
/// `j`'s title at the fuzzy threshold, with equal years when both are known.
/// Links are directed and previous `cited_in_corpus` contents are replaced.
pub fn resolve_intra_corpus_citations(papers: &[PaperRecord]) -> Result<Vec<PaperRecord>> {
    check_unique_ids(papers)?;
    let targets: Vec<(PaperId, ReferenceKey, TokenSet)> = papers
        .iter()
        .map(|p| {
            let key = p.key();
            let tokens = TokenSet::new(&key.normalized_title);
            (p.paper_id, key, tokens)
        })
        .collect();
    let mut by_year: HashMap<Option<i32>, Vec<usize>> = HashMap::new();
    for (idx, (_, key, _)) in targets.iter().enumerate() {
        by_year.entry(key.year).or_default().push(idx);
    }
    let all: Vec<usize> = (0..targets.len()).collect();

    let resolved = papers
        .iter()
        .map(|paper| {
            let mut cited = BTreeSet::new();
            for key in paper.reference_keys() {
                let tokens = TokenSet::new(&key.normalized_title);
                let candidates: Vec<usize> = match key.year {
                    // same year, or corpus papers with unknown year
                    Some(y) => by_year
                        .get(&Some(y))
                        .into_iter()
                        .chain(by_year.get(&None))
                        .flatten()
                        .copied()
                        .collect(),
                    None => all.clone(),
                };
                for idx in candidates {
                    let (target_id, target_key, target_tokens) = &targets[idx];
                    if *target_id == paper.paper_id || cited.contains(target_id) {
                        continue;
                    }
                    if reference_matches(&key, &tokens, target_key, target_tokens) {
                        cited.insert(*target_id);
                    }
                }
            }
            let mut out = paper.clone();
            out.cited_in_corpus = cited;
            out
        })
        .collect();
    Ok(resolved)
}

/// CSV layout options for corpus files.
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub reference_delimiter: String,
    pub author_delimiter: String,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            reference_delimiter: "; ".into(),
            author_delimiter: "; ".into(),
        }
    }
}

fn split_list(cell: &str, delimiter: &str) -> Vec<String> {
    let trimmed_delim = delimiter.trim();
    let delim = if trimmed_delim.is_empty() {
        delimiter
    } else {
        trimmed_delim
    };
    cell.split(delim)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Read a corpus CSV with the default delimiters.
pub fn parse_corpus_csv(path: impl AsRef<Path>) -> Result<Vec<PaperRecord>> {
    parse_corpus_csv_with(path, &CsvOptions::default())
}

pub fn parse_corpus_csv_with(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Vec<PaperRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(file, options)
}

/// Parse corpus CSV content from any reader.
pub fn read_corpus<R: std::io::Read>(reader: R, options: &CsvOptions) -> Result<Vec<PaperRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let id_col = col("paper_id").ok_or_else(|| Error::Ingestion("missing required column paper_id".into()))?;
    let title_col = col("title").ok_or_else(|| Error::Ingestion("missing required column title".into()))?;
    let abstract_col = col("abstract");
    let year_col = col("year");
    let authors_col = col("authors");
    let refs_col = col("references");

    let mut papers = Vec::new();
    let mut seen = HashSet::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = row_idx + 2;
        let cell = |c: Option<usize>| c.and_then(|i| record.get(i)).unwrap_or("");
        let id_text = cell(Some(id_col)).trim();
        let paper_id: PaperId =
            id_text.parse().ok().filter(|id| *id > 0).ok_or_else(|| {
                Error::Ingestion(format!("line {line}: paper_id {id_text:?} is not a positive integer"))
            })?;
        if !seen.insert(paper_id) {
            return Err(Error::Ingestion(format!("duplicate paper_id {paper_id} (line {line})")));
        }
        let year_text = cell(year_col).trim();
        let year = if year_text.is_empty() {
            None
        } else {
            Some(
                year_text
                    .parse::<i32>()
                    .map_err(|_| Error::Ingestion(format!("line {line}: year {year_text:?} is not an integer")))?,
            )
        };
        papers.push(PaperRecord {
            paper_id,
            title: cell(Some(title_col)).to_string(),
            abstract_text: cell(abstract_col).to_string(),
            year,
            authors: split_list(cell(authors_col), &options.author_delimiter),
            raw_references: split_list(cell(refs_col), &options.reference_delimiter),
            cited_in_corpus: BTreeSet::new(),
        });
    }
    Ok(papers)
}

/// Write records in the corpus CSV layout.
pub fn write_corpus_csv(path: impl AsRef<Path>, papers: &[PaperRecord], options: &CsvOptions) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(file, papers, options)
}

pub fn write_corpus<W: std::io::Write>(writer: W, papers: &[PaperRecord], options: &CsvOptions) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["paper_id", "title", "abstract", "year", "authors", "references"])?;
    for p in papers {
        w.write_record([
            p.paper_id.to_string(),
            p.title.clone(),
            p.abstract_text.clone(),
            p.year.map(|y| y.to_string()).unwrap_or_default(),
            p.authors.join(&options.author_delimiter),
            p.raw_references.join(&options.reference_delimiter),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<corpus csv>", e))?;
    Ok(())
}

/// On-disk benchmark manifest (JSON, or TOML for any other extension).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub instance_id: String,
    /// Stored as opaque text; filters that could not be encoded are not modelled.
    pub query: String,
    pub corpus_path: PathBuf,
    #[serde(default)]
    pub target_k: Option<usize>,
    #[serde(default)]
    pub human_descriptions_path: Option<PathBuf>,
}

/// Read a single-column description CSV: the `description` column if present,
/// otherwise the first column.
pub fn read_human_descriptions(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = rdr.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case("description"))
        .unwrap_or(0);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let text = rec.get(col).unwrap_or("").trim();
        if !text.is_empty() {
            out.push(text.to_string());
        }
    }
    Ok(out)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))
    }
}

/// Load a manifest and everything it points at. Relative paths resolve
/// against the manifest's directory; citations are resolved on load.
pub fn load_benchmark_manifest(path: impl AsRef<Path>) -> Result<BenchmarkInstance> {
    let path = path.as_ref();
    let manifest = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

    let corpus_path = resolve(&manifest.corpus_path);
    if !corpus_path.exists() {
        return Err(Error::Manifest(format!(
            "corpus file {} does not exist",
            corpus_path.display()
        )));
    }
    let human = manifest
        .human_descriptions_path
        .as_deref()
        .map(|p| read_human_descriptions(resolve(p)))
        .transpose()?;

    let target_k = match (manifest.target_k, &human) {
        (Some(k), Some(h)) if k != h.len() => {
            return Err(Error::Manifest(format!(
                "target_k {k} contradicts {} human description rows",
                h.len()
            )))
        }
        (Some(k), _) => k,
        (None, Some(h)) => h.len(),
        (None, None) => {
            return Err(Error::Manifest(
                "target_k absent and no human_descriptions_path to derive it from".into(),
            ))
        }
    };
    if target_k == 0 {
        return Err(Error::Manifest("target_k must be at least 1".into()));
    }

    let papers = resolve_intra_corpus_citations(&parse_corpus_csv(&corpus_path)?)?;
    Ok(BenchmarkInstance {
        instance_id: manifest.instance_id,
        query: manifest.query,
        papers,
        target_k,
        human_descriptions: human,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key(title: &str, year: Option<i32>, surname: Option<&str>) -> ReferenceKey {
        ReferenceKey {
            normalized_title: title.into(),
            year,
            first_author_surname: surname.map(str::to_string),
        }
    }

    /// Hand-labelled reference strings covering the common citation styles.
    fn fixtures() -> Vec<(&'static str, ReferenceKey)> {
        vec![
            ("Smith, J. (2020). Deep Learning. Nature.", key("deep learning", Some(2020), Some("smith"))),
            ("DEEP   LEARNING!!", key("deep learning", None, None)),
            (
                "LeCun, Y., Bengio, Y., & Hinton, G. (2015). Deep learning. Nature, 521(7553), 436-444.",
                key("deep learning", Some(2015), Some("lecun")),
            ),
            (
                "Zupic, I., & Čater, T. (2015). Bibliometric methods in management and organization. Organizational Research Methods, 18(3), 429–472.",
                key("bibliometric methods in management and organization", Some(2015), Some("zupic")),
            ),
            (
                "Donthu N., Kumar S., Mukherjee D., Pandey N., Lim W.M., How to conduct a bibliometric analysis: An overview and guidelines, Journal of Business Research, 133, pp. 285-296, (2021)",
                key("how to conduct a bibliometric analysis an overview and guidelines", Some(2021), Some("donthu")),
            ),
            (
                "Kessler M.M., Bibliographic coupling between scientific papers, American Documentation, 14, 1, pp. 10-25, (1963)",
                key("bibliographic coupling between scientific papers", Some(1963), Some("kessler")),
            ),
            (
                "Blondel, V. D., Guillaume, J.-L., Lambiotte, R., & Lefebvre, E. (2008). Fast unfolding of communities in large networks. Journal of Statistical Mechanics: Theory and Experiment, 2008(10), P10008.",
                key("fast unfolding of communities in large networks", Some(2008), Some("blondel")),
            ),
            (
                "A. Vaswani et al., \"Attention is all you need,\" in Advances in Neural Information Processing Systems, 2017.",
                key("attention is all you need", Some(2017), Some("vaswani")),
            ),
            (
                "[12] M. Newman, \"Modularity and community structure in networks,\" PNAS, vol. 103, 2006.",
                key("modularity and community structure in networks", Some(2006), Some("newman")),
            ),
            (
                "Newman MEJ. Modularity and community structure in networks. Proc Natl Acad Sci USA. 2006;103(23):8577-82.",
                key("modularity and community structure in networks", Some(2006), Some("newman")),
            ),
            (
                "Garfield, E. (1955). Citation indexes for science. Science, 122(3159), 108–111.",
                key("citation indexes for science", Some(1955), Some("garfield")),
            ),
            (
                "Hubert, L., Arabie, P. (1985). Comparing partitions. Journal of Classification, 2, 193-218.",
                key("comparing partitions", Some(1985), Some("hubert")),
            ),
            (
                "Rousseeuw P.J., Silhouettes: A graphical aid to the interpretation and validation of cluster analysis, Journal of Computational and Applied Mathematics, 20, pp. 53-65, (1987)",
                key(
                    "silhouettes a graphical aid to the interpretation and validation of cluster analysis",
                    Some(1987),
                    Some("rousseeuw"),
                ),
            ),
            (
                "van Eck, N. J., & Waltman, L. (2010). Software survey: VOSviewer, a computer program for bibliometric mapping. Scientometrics, 84(2), 523-538.",
                key("software survey vosviewer a computer program for bibliometric mapping", Some(2010), Some("van")),
            ),
            (
                "Boyack KW, Klavans R (2010) Co-citation analysis, bibliographic coupling, and direct citation: Which citation approach represents the research front most accurately? J Am Soc Inf Sci Technol 61(12):2389-2404",
                key(
                    "co citation analysis bibliographic coupling and direct citation which citation approach represents the research front most accurately",
                    Some(2010),
                    Some("boyack"),
                ),
            ),
            (
                "Price, D. J. de S. (1965). Networks of scientific papers. Science, 149(3683), 510–515.",
                key("networks of scientific papers", Some(1965), Some("price")),
            ),
            ("Graph theory and complex networks", key("graph theory and complex networks", None, None)),
            (
                "Cobo M.J., Lopez-Herrera A.G., Herrera-Viedma E., Herrera F., Science mapping software tools: Review, analysis, and cooperative study among tools, Journal of the American Society for Information Science and Technology, 62, 7, pp. 1382-1402, (2011)",
                key(
                    "science mapping software tools review analysis and cooperative study among tools",
                    Some(2011),
                    Some("cobo"),
                ),
            ),
            (
                "Zhang, T., Kishore, V., Wu, F., Weinberger, K. Q., & Artzi, Y. (2019). BERTScore: Evaluating text generation with BERT. arXiv preprint.",
                key("bertscore evaluating text generation with bert", Some(2019), Some("zhang")),
            ),
            (
                "Waltman L, van Eck NJ. A new methodology for constructing a publication-level classification system of science. Journal of the American Society for Information Science and Technology. 2012;63(12):2378–92.",
                key(
                    "a new methodology for constructing a publication level classification system of science",
                    Some(2012),
                    Some("waltman"),
                ),
            ),
        ]
    }

    #[test]
    fn fixture_references_parse_to_hand_labelled_keys() {
        let fx = fixtures();
        assert_eq!(fx.len(), 20);
        for (raw, expected) in fx {
            let got = normalize_reference(raw).unwrap();
            assert_eq!(got, expected, "reference {raw:?}");
        }
    }

    #[test]
    fn normalization_is_idempotent_on_fixtures() {
        for (raw, _) in fixtures() {
            let once = normalize_reference(raw).unwrap();
            let twice = normalize_reference(&once.normalized_title).unwrap();
            assert_eq!(once.normalized_title, twice.normalized_title, "{raw:?}");
        }
    }

    #[test]
    fn blank_reference_is_an_error() {
        assert!(matches!(normalize_reference("   "), Err(Error::Normalization(_))));
        assert!(normalize_reference("!!! ...").is_err());
    }

    #[test]
    fn parses_row_and_empty_reference_cell() {
        let csv = "paper_id,title,abstract,year,authors,references\n\
                   1,Title A,Abs A,2020,Smith J.,refX; refY\n\
                   2,Title B,,,,\n";
        let papers = read_corpus(csv.as_bytes(), &CsvOptions::default()).unwrap();
        assert_eq!(papers.len(), 2);
        assert_eq!(papers[0].paper_id, 1);
        assert_eq!(papers[0].raw_references, vec!["refX", "refY"]);
        assert_eq!(papers[0].authors, vec!["Smith J."]);
        assert_eq!(papers[0].year, Some(2020));
        assert!(papers[1].raw_references.is_empty());
        assert_eq!(papers[1].year, None);
        assert_eq!(papers[1].abstract_text, "");
    }

    #[test]
    fn missing_column_and_duplicate_id_are_named() {
        let err = read_corpus("paper_id,abstract\n1,x\n".as_bytes(), &CsvOptions::default()).unwrap_err();
        assert!(err.to_string().contains("title"), "{err}");
        let err = read_corpus("title,abstract\nA,x\n".as_bytes(), &CsvOptions::default()).unwrap_err();
        assert!(err.to_string().contains("paper_id"), "{err}");
        let err = read_corpus("paper_id,title\n7,A\n7,B\n".as_bytes(), &CsvOptions::default()).unwrap_err();
        assert!(err.to_string().contains("duplicate paper_id 7"), "{err}");
    }

    #[test]
    fn custom_reference_delimiter() {
        let opts = CsvOptions {
            reference_delimiter: " | ".into(),
            ..CsvOptions::default()
        };
        let csv = "paper_id,title,references\n1,T,a; b | c\n";
        let papers = read_corpus(csv.as_bytes(), &opts).unwrap();
        assert_eq!(papers[0].raw_references, vec!["a; b", "c"]);
    }

    #[test]
    fn exact_reference_match_links_and_no_self_citation() {
        let mut a = PaperRecord::new(1, "Graph methods for science mapping");
        a.year = Some(2021);
        a.raw_references = vec![
            "Doe, A. (2019). Community detection in citation networks. Scientometrics.".into(),
            "Self, X. (2021). Graph methods for science mapping. Journal.".into(),
        ];
        let mut b = PaperRecord::new(2, "Community detection in citation networks");
        b.year = Some(2019);
        let c = PaperRecord::new(3, "Something unrelated entirely");
        let out = resolve_intra_corpus_citations(&[a, b, c]).unwrap();
        assert_eq!(out[0].cited_in_corpus, BTreeSet::from([2]));
        assert!(out[1].cited_in_corpus.is_empty());
        assert!(out[2].cited_in_corpus.is_empty());
    }

    #[test]
    fn year_mismatch_blocks_link() {
        let mut a = PaperRecord::new(1, "A");
        a.raw_references = vec!["Doe, A. (2018). Community detection in citation networks. X.".into()];
        let mut b = PaperRecord::new(2, "Community detection in citation networks");
        b.year = Some(2019);
        let out = resolve_intra_corpus_citations(&[a, b]).unwrap();
        assert!(out[0].cited_in_corpus.is_empty());
    }

    fn planted_six() -> Vec<PaperRecord> {
        let titles = [
            "Bibliographic coupling of patents",
            "Louvain clustering on citation graphs",
            "Large language models for literature reviews",
            "Measuring semantic coverage of summaries",
            "Reference hallucination in generated text",
            "Science maps of sustainability research",
        ];
        let mut papers: Vec<PaperRecord> = titles
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut p = PaperRecord::new(i as u64 + 1, *t);
                p.year = Some(2015 + i as i32);
                p.authors = vec![format!("Author{} A.", i + 1)];
                p
            })
            .collect();
        // four planted citations: 1->2, 3->1, 3->5, 6->4
        papers[0].raw_references = vec![
            "Author2, A. (2016). Louvain clustering on citation graphs. Physica A.".into(),
            "Other, Q. (2001). An unrelated classic. Journal.".into(),
        ];
        papers[2].raw_references = vec![
            "Author1 A., Bibliographic coupling of patents, Research Policy, 10, pp. 1-9, (2015)".into(),
            "Author5, A. (2019). Reference halucination in generated text. ACL.".into(),
        ];
        papers[5].raw_references = vec![
            "Author4, A. (2018). Measuring semantic coverage of summaries. EMNLP.".into(),
            "Author4, A. (2011). Measuring semantic coverage of summaries. Wrong year.".into(),
        ];
        papers
    }

    /// All-pairs brute force: every reference against every other paper.
    fn brute_force_links(papers: &[PaperRecord]) -> BTreeSet<(PaperId, PaperId)> {
        let mut links = BTreeSet::new();
        for p in papers {
            for raw in &p.raw_references {
                let Ok(k) = normalize_reference(raw) else { continue };
                for q in papers {
                    if q.paper_id == p.paper_id {
                        continue;
                    }
                    let year_ok = match (k.year, q.year) {
                        (Some(a), Some(b)) => a == b,
                        _ => true,
                    };
                    if year_ok && crate::fuzzy::token_set_ratio(&k.normalized_title, &q.title) >= 80.0 {
                        links.insert((p.paper_id, q.paper_id));
                    }
                }
            }
        }
        links
    }

    fn links_of(papers: &[PaperRecord]) -> BTreeSet<(PaperId, PaperId)> {
        papers
            .iter()
            .flat_map(|p| p.cited_in_corpus.iter().map(move |&c| (p.paper_id, c)))
            .collect()
    }

    #[test]
    fn planted_fixture_yields_exactly_four_links() {
        let papers = planted_six();
        let resolved = resolve_intra_corpus_citations(&papers).unwrap();
        let got = links_of(&resolved);
        assert_eq!(got, brute_force_links(&papers));
        assert_eq!(got, BTreeSet::from([(1, 2), (3, 1), (3, 5), (6, 4)]));
    }

    #[test]
    fn resolution_is_order_independent() {
        let papers = planted_six();
        let mut reversed = papers.clone();
        reversed.reverse();
        let a = links_of(&resolve_intra_corpus_citations(&papers).unwrap());
        let b = links_of(&resolve_intra_corpus_citations(&reversed).unwrap());
        assert_eq!(a, b);
    }

    fn write_tmp(dir: &Path, name: &str, content: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn manifest_target_k_rules() {
        let dir = tempfile::tempdir().unwrap();
        write_tmp(dir.path(), "corpus.csv", "paper_id,title\n1,A\n2,B\n");
        write_tmp(dir.path(), "human.csv", "description\none\ntwo\nthree\nfour\nfive\n");
        let m = write_tmp(
            dir.path(),
            "m1.json",
            r#"{"instance_id":"x","query":"q","corpus_path":"corpus.csv","human_descriptions_path":"human.csv"}"#,
        );
        let inst = load_benchmark_manifest(&m).unwrap();
        assert_eq!(inst.target_k, 5);
        assert_eq!(inst.human_descriptions.as_ref().unwrap().len(), 5);

        let m = write_tmp(
            dir.path(),
            "m2.toml",
            "instance_id = \"y\"\nquery = \"digital twins\"\ncorpus_path = \"corpus.csv\"\ntarget_k = 3\n",
        );
        let inst = load_benchmark_manifest(&m).unwrap();
        assert_eq!(inst.target_k, 3);
        assert!(inst.human_descriptions.is_none());

        let m = write_tmp(
            dir.path(),
            "m3.json",
            r#"{"instance_id":"z","query":"q","corpus_path":"corpus.csv","target_k":4,"human_descriptions_path":"human.csv"}"#,
        );
        assert!(matches!(load_benchmark_manifest(&m), Err(Error::Manifest(_))));

        let m = write_tmp(
            dir.path(),
            "m4.json",
            r#"{"instance_id":"z","query":"q","corpus_path":"corpus.csv"}"#,
        );
        assert!(matches!(load_benchmark_manifest(&m), Err(Error::Manifest(_))));

        let m = write_tmp(
            dir.path(),
            "m5.json",
            r#"{"instance_id":"z","query":"q","corpus_path":"nope.csv","target_k":2}"#,
        );
        assert!(matches!(load_benchmark_manifest(&m), Err(Error::Manifest(_))));
    }

    fn arb_text() -> impl Strategy<Value = String> {
        "[A-Za-z][A-Za-z ,.\"]{0,20}"
    }

    fn arb_record() -> impl Strategy<Value = PaperRecord> {
        (
            1u64..10_000,
            arb_text(),
            proptest::option::of(1900i32..2030),
            proptest::collection::vec("[A-Z][a-z]{1,8} [A-Z]\\.", 0..3),
            proptest::collection::vec("[A-Za-z][A-Za-z ,.()0-9]{0,30}[a-z0-9]", 0..4),
            "[A-Za-z ,.\n]{0,40}",
        )
            .prop_map(|(id, title, year, authors, refs, abs)| PaperRecord {
                paper_id: id,
                title,
                abstract_text: abs,
                year,
                authors,
                raw_references: refs,
                cited_in_corpus: BTreeSet::new(),
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip(mut records in proptest::collection::vec(arb_record(), 0..6)) {
            let mut seen = HashSet::new();
            records.retain(|r| seen.insert(r.paper_id));
            let mut buf = Vec::new();
            write_corpus(&mut buf, &records, &CsvOptions::default()).unwrap();
            let parsed = read_corpus(buf.as_slice(), &CsvOptions::default()).unwrap();
            prop_assert_eq!(parsed, records);
        }

        #[test]
        fn normalized_title_is_a_fixed_point(raw in "[A-Za-z0-9 ,.;:()!?-]{1,60}") {
            if let Ok(k) = normalize_reference(&raw) {
                let again = normalize_reference(&k.normalized_title).unwrap();
                prop_assert_eq!(again.normalized_title, k.normalized_title);
            }
        }
    }
}
