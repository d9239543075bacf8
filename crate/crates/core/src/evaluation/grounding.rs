use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_reference, reference_matches, BenchmarkInstance, PaperId};
use crate::embedding::EmbeddingProvider;
use crate::embedding::{embed, split_atoms, SourceId, TextAtom};
use crate::error::Result;
use crate::fuzzy::{TokenSet, TITLE_MATCH_THRESHOLD};
use crate::pipelines::{reference_token_id, DescriptionSet};
use crate::resolver::{match_criteria, RecordResolver, Resolution};

use super::clustering::semantic_coverage;

/// How generated references split across grounding classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReferenceCounts {
    pub in_corpus: usize,
    pub out_corpus_valid: usize,
    pub invalid: usize,
    /// Free strings the resolver could not check.
    pub unresolved: usize,
}

impl ReferenceCounts {
    pub fn total(&self) -> usize {
        self.in_corpus + self.out_corpus_valid + self.invalid + self.unresolved
    }
}

fn corpus_match(instance: &BenchmarkInstance, reference: &str) -> Option<PaperId> {
    let key = normalize_reference(reference).ok()?;
    let tokens = TokenSet::new(&key.normalized_title);
    instance.papers.iter().find_map(|p| {
        let target = p.key();
        let target_tokens = TokenSet::new(&target.normalized_title);
        reference_matches(&key, &tokens, &target, &target_tokens).then_some(p.paper_id)
    })
}

/// Classify every generated reference. `[#]` tokens are in-corpus when the id
/// exists and invalid otherwise. Free strings are in-corpus when they match a
/// corpus paper, out-of-corpus valid when the resolver's best candidate
/// clears the title threshold, unresolved when the service was unreachable,
/// and invalid otherwise.
pub fn classify_references(
    descriptions: &DescriptionSet,
    instance: &BenchmarkInstance,
    resolver: &dyn RecordResolver,
) -> Result<ReferenceCounts> {
    let ids = instance.paper_ids();
    let mut counts = ReferenceCounts::default();
    for entry in &descriptions.entries {
        for r in &entry.references {
            if let Some(id) = reference_token_id(r) {
                if ids.contains(&id) {
                    counts.in_corpus += 1;
                } else {
                    counts.invalid += 1;
                }
                continue;
            }
            if r.trim().is_empty() {
                counts.invalid += 1;
                continue;
            }
            if corpus_match(instance, r).is_some() {
                counts.in_corpus += 1;
                continue;
            }
            match resolver.search_best(r)? {
                Resolution::Found { score, .. } if score >= TITLE_MATCH_THRESHOLD => counts.out_corpus_valid += 1,
                Resolution::Found { .. } | Resolution::NoMatch => counts.invalid += 1,
                Resolution::Unresolved { reason } => {
                    log::warn!("reference left unresolved ({reason}): {r}");
                    counts.unresolved += 1;
                }
            }
        }
    }
    Ok(counts)
}

/// Free-string references passing each nested criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BlindValidation {
    pub evaluated: usize,
    pub unresolved: usize,
    pub title: usize,
    pub title_year: usize,
    pub title_year_author: usize,
}

impl BlindValidation {
    /// Precision under title, title+year and title+year+author; `None` when
    /// nothing could be checked.
    pub fn precision(&self) -> Option<[f64; 3]> {
        if self.evaluated == 0 {
            return None;
        }
        let n = self.evaluated as f64;
        Some([
            self.title as f64 / n,
            self.title_year as f64 / n,
            self.title_year_author as f64 / n,
        ])
    }
}

/// Check each reference's best external candidate against the three nested
/// criteria. Unresolved lookups are counted apart and left out of the denominator.
pub fn validate_blind_references(references: &[String], resolver: &dyn RecordResolver) -> Result<BlindValidation> {
    let mut v = BlindValidation::default();
    for r in references {
        let key = match normalize_reference(r) {
            Ok(k) => k,
            Err(_) => {
                v.evaluated += 1;
                continue;
            }
        };
        match resolver.search_best(r)? {
            Resolution::Unresolved { reason } => {
                log::warn!("reference left unresolved ({reason}): {r}");
                v.unresolved += 1;
            }
            Resolution::NoMatch => v.evaluated += 1,
            Resolution::Found { record, .. } => {
                v.evaluated += 1;
                let m = match_criteria(&key, &record);
                v.title += m.title as usize;
                v.title_year += m.title_year as usize;
                v.title_year_author += m.title_year_author as usize;
            }
        }
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundedCoverage {
    /// Mean over clusters with evidence.
    pub score: f64,
    pub per_cluster: BTreeMap<u32, f64>,
    /// Clusters citing no in-corpus paper with an abstract.
    pub excluded: usize,
}

/// Coverage of each cluster's cited abstracts by its own description,
/// averaged over clusters that cite at least one in-corpus abstract.
/// `None` when no cluster has such evidence.
pub fn reference_grounded_coverage(
    descriptions: &DescriptionSet,
    instance: &BenchmarkInstance,
    provider: &dyn EmbeddingProvider,
) -> Result<Option<GroundedCoverage>> {
    let mut per_cluster = BTreeMap::new();
    let mut excluded = 0;
    for entry in &descriptions.entries {
        let mut seen = std::collections::BTreeSet::new();
        let evidence: Vec<TextAtom> = entry
            .cited_ids()
            .into_iter()
            .filter(|id| seen.insert(*id))
            .filter_map(|id| instance.paper(id))
            .filter(|p| p.has_abstract())
            .flat_map(|p| split_atoms(&p.abstract_text, SourceId::Paper(p.paper_id)))
            .collect();
        let desc_atoms = split_atoms(&entry.text(), SourceId::Cluster(entry.cluster_id));
        if evidence.is_empty() || desc_atoms.is_empty() {
            excluded += 1;
            continue;
        }
        let e = embed(&evidence, provider)?;
        let b = embed(&desc_atoms, provider)?;
        per_cluster.insert(entry.cluster_id, semantic_coverage(&e, &b)?);
    }
    if excluded > 0 {
        log::info!("{excluded} cluster(s) cite no in-corpus abstracts and are left out of grounded coverage");
    }
    if per_cluster.is_empty() {
        return Ok(None);
    }
    let score = per_cluster.values().sum::<f64>() / per_cluster.len() as f64;
    Ok(Some(GroundedCoverage {
        score,
        per_cluster,
        excluded,
    }))
}
