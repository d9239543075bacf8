use std::collections::{BTreeMap, BTreeSet};

use once_cell::sync::Lazy;
use regex::Regex;
use serde_json::Value;

use crate::community::{ClusterId, Partition};
use crate::corpus::PaperId;

use super::{ClusterDescription, DescriptionSet, PipelineKind, SelectionSet};

/// Why a generated output was rejected.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OutputError {
    #[error("malformed JSON at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },

    #[error("contract violation: {detail} (missing cluster ids {missing:?}, unexpected cluster ids {extra:?})")]
    Contract {
        missing: Vec<ClusterId>,
        extra: Vec<ClusterId>,
        detail: String,
    },

    #[error("grounding violation: {tokens:?} do not cite papers from the provided context")]
    Grounding { tokens: Vec<String> },
}

fn contract(detail: impl Into<String>) -> OutputError {
    OutputError::Contract {
        missing: Vec::new(),
        extra: Vec::new(),
        detail: detail.into(),
    }
}

/// What the output is checked against.
#[derive(Debug, Clone, Copy)]
pub struct ParseContext<'a> {
    pub expected: &'a BTreeSet<ClusterId>,
    /// Papers that may be cited; ignored for the blind pipeline.
    pub context_ids: &'a BTreeSet<PaperId>,
    /// Labels for same-cluster checks on labeled selection.
    pub partition: Option<&'a Partition>,
    pub max_refs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedOutput {
    Descriptions(DescriptionSet),
    Selection(SelectionSet),
}

static FENCE_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?s)```[A-Za-z]*[ \t]*\n?(.*?)```").unwrap());
static TOKEN_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"\[\s*(\d+)\s*\]").unwrap());
static TOKEN_LIST_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^(?:\[\s*\d+\s*\][\s,;]*)+$").unwrap());

/// Paper id of a `[#]` token.
pub fn reference_token_id(token: &str) -> Option<PaperId> {
    let t = token.trim();
    let inner = t.strip_prefix('[')?.strip_suffix(']')?;
    inner.trim().parse().ok()
}

/// Locate the JSON payload and its byte offset in `raw`.
fn payload(raw: &str) -> (usize, &str) {
    let (base, body) = match FENCE_RE.captures(raw) {
        Some(c) => {
            let m = c.get(1).unwrap();
            (m.start(), m.as_str())
        }
        None => (0, raw),
    };
    let lead = body.len() - body.trim_start().len();
    let trimmed = body.trim();
    if !trimmed.starts_with('[') {
        if let (Some(s), Some(e)) = (trimmed.find('['), trimmed.rfind(']')) {
            if s < e {
                return (base + lead + s, &trimmed[s..=e]);
            }
        }
    }
    (base + lead, trimmed)
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn cluster_id_of(v: &Value) -> Option<ClusterId> {
    match v {
        Value::Number(n) => n
            .as_u64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0 && *f >= 0.0).map(|f| f as u64))
            .and_then(|x| ClusterId::try_from(x).ok()),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Raw reference entries as strings; bare numbers become `[n]`.
fn reference_strings(v: &Value, i: usize) -> Result<Vec<String>, OutputError> {
    let arr = v
        .as_array()
        .ok_or_else(|| contract(format!("object {i}: references must be an array")))?;
    arr.iter()
        .map(|r| match r {
            Value::String(s) => Ok(s.trim().to_string()),
            Value::Number(n) if n.is_u64() => Ok(format!("[{n}]")),
            _ => Err(contract(format!("object {i}: references must be strings"))),
        })
        .collect()
}

fn dedup_truncate(refs: Vec<String>, max: usize, cluster: ClusterId) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out: Vec<String> = refs
        .into_iter()
        .filter(|r| !r.is_empty() && seen.insert(r.clone()))
        .collect();
    if out.len() > max {
        log::warn!(
            "cluster {cluster}: {} references exceed the limit of {max}; truncating",
            out.len()
        );
        out.truncate(max);
    }
    out
}

/// Validate a generator response. Strips code fences, requires a JSON array
/// with one object per expected cluster id, the fields the stage asks for,
/// and (for grounded kinds) `[#]` tokens that cite context papers.
pub fn parse_output(
    raw: &str,
    ctx: &ParseContext<'_>,
    kind: PipelineKind,
    stage: u8,
) -> Result<ParsedOutput, OutputError> {
    let selection_stage = kind.stages() == 2 && stage == 1;
    let needs_description = !selection_stage;
    let needs_references = stage == 1;

    let (base, text) = payload(raw);
    let value: Value = serde_json::from_str(text).map_err(|e| OutputError::Malformed {
        offset: base + byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let items = value
        .as_array()
        .ok_or_else(|| contract("expected a JSON array of cluster objects"))?;

    let mut seen: BTreeMap<ClusterId, usize> = BTreeMap::new();
    let mut parsed = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let obj = item
            .as_object()
            .ok_or_else(|| contract(format!("element {i} is not an object")))?;
        let cluster_id = obj
            .get("cluster_id")
            .and_then(cluster_id_of)
            .ok_or_else(|| contract(format!("object {i}: missing or non-numeric cluster_id")))?;
        *seen.entry(cluster_id).or_default() += 1;
        let description = match obj.get("description") {
            Some(Value::String(s)) => s.trim().to_string(),
            Some(_) => return Err(contract(format!("object {i}: description must be a string"))),
            None if needs_description => return Err(contract(format!("object {i}: missing description"))),
            None => String::new(),
        };
        let references = match obj.get("references") {
            Some(v) if needs_references => reference_strings(v, i)?,
            None if needs_references => return Err(contract(format!("object {i}: missing references"))),
            _ => Vec::new(),
        };
        let label = obj.get("label").and_then(Value::as_str).map(|s| s.trim().to_string());
        parsed.push((cluster_id, label, description, references));
    }

    let got: BTreeSet<ClusterId> = seen.keys().copied().collect();
    let missing: Vec<ClusterId> = ctx.expected.difference(&got).copied().collect();
    let extra: Vec<ClusterId> = got.difference(ctx.expected).copied().collect();
    let dups: Vec<ClusterId> = seen.iter().filter(|(_, &n)| n > 1).map(|(&c, _)| c).collect();
    if items.len() != ctx.expected.len() || !missing.is_empty() || !extra.is_empty() || !dups.is_empty() {
        let mut detail = format!("expected exactly {} objects, got {}", ctx.expected.len(), items.len());
        if !dups.is_empty() {
            detail.push_str(&format!("; duplicated cluster ids {dups:?}"));
        }
        return Err(OutputError::Contract { missing, extra, detail });
    }

    let mut bad_tokens: Vec<String> = Vec::new();
    let mut entries = Vec::new();
    for (cluster_id, label, description, references) in parsed {
        let references = if kind.is_grounded() {
            let mut tokens = Vec::new();
            for r in references {
                if !TOKEN_LIST_RE.is_match(&r) {
                    bad_tokens.push(r);
                    continue;
                }
                for cap in TOKEN_RE.captures_iter(&r) {
                    let id: PaperId = match cap[1].parse() {
                        Ok(id) => id,
                        Err(_) => {
                            bad_tokens.push(cap[0].to_string());
                            continue;
                        }
                    };
                    let token = format!("[{id}]");
                    let in_cluster = !(selection_stage && kind == PipelineKind::LabeledSelect)
                        || ctx.partition.and_then(|p| p.label(id)) == Some(cluster_id);
                    if ctx.context_ids.contains(&id) && in_cluster {
                        tokens.push(token);
                    } else {
                        bad_tokens.push(token);
                    }
                }
            }
            for cap in TOKEN_RE.captures_iter(&description) {
                let ok = cap[1]
                    .parse::<PaperId>()
                    .map(|id| ctx.context_ids.contains(&id))
                    .unwrap_or(false);
                if !ok {
                    bad_tokens.push(cap[0].to_string());
                }
            }
            tokens
        } else {
            references
        };
        entries.push(ClusterDescription {
            cluster_id,
            label,
            description,
            references: dedup_truncate(references, ctx.max_refs, cluster_id),
        });
    }
    if !bad_tokens.is_empty() {
        let mut seen = BTreeSet::new();
        bad_tokens.retain(|t| seen.insert(t.clone()));
        return Err(OutputError::Grounding { tokens: bad_tokens });
    }

    if selection_stage {
        if let Some(e) = entries.iter().find(|e| e.references.is_empty()) {
            return Err(contract(format!("cluster {} selected no papers", e.cluster_id)));
        }
        let selections = entries
            .into_iter()
            .map(|e| {
                (
                    e.cluster_id,
                    e.references.iter().filter_map(|r| reference_token_id(r)).collect(),
                )
            })
            .collect();
        Ok(ParsedOutput::Selection(SelectionSet { selections }))
    } else {
        Ok(ParsedOutput::Descriptions(DescriptionSet::new(entries)))
    }
}
