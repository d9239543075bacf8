//! Scoring of generated cluster descriptions against the corpus, the graph
//! partition, human descriptions and the cited literature.

mod alignment;
mod clustering;
mod grounding;
mod scorer;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::community::{ClusterId, Partition};
use crate::corpus::{BenchmarkInstance, PaperId};
use crate::embedding::{embed, split_atoms, EmbeddingProvider, EmbeddingVector, SourceId, TextAtom};
use crate::error::{Error, Result};
use crate::graph::RelationGraph;
use crate::pipelines::{DescriptionSet, PipelineKind};
use crate::resolver::RecordResolver;

pub use alignment::{optimal_alignment, Assignment};
pub use clustering::{ari, induce_partition, induced_modularity, semantic_coverage, silhouette, InducedPartition};
pub use grounding::{
    classify_references, reference_grounded_coverage, validate_blind_references, BlindValidation, GroundedCoverage,
    ReferenceCounts,
};
pub use scorer::{human_alignment, DefaultScorer, GreedyTokenScorer, HumanAlignment, SentenceCosineScorer, TextScorer};

/// Who produced the descriptions being scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    Pipeline(PipelineKind),
    Human,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Pipeline(k) => f.write_str(k.as_str()),
            Method::Human => f.write_str("human"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("human") {
            Ok(Method::Human)
        } else {
            s.parse().map(Method::Pipeline)
        }
    }
}

/// Identifiers of the services behind a score.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub embedding_provider: String,
    pub embedding_model: String,
    pub scorer: String,
    pub resolver: String,
}

/// All metric families for one method on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScores {
    pub instance_id: String,
    pub method: Method,
    pub coverage: Option<f64>,
    pub silhouette: Option<f64>,
    pub ari: Option<f64>,
    pub modularity: Option<f64>,
    pub human_alignment: Option<f64>,
    pub rgc: Option<f64>,
    pub rgc_excluded_clusters: usize,
    pub reference_counts: ReferenceCounts,
    pub blind: Option<BlindValidation>,
    pub provenance: Provenance,
}

/// Metric names used in score files and reports, in emission order.
pub const METRICS: &[&str] = &[
    "human_alignment",
    "coverage",
    "ari",
    "silhouette",
    "modularity",
    "rgc",
    "refs_in_corpus",
    "refs_out_corpus_valid",
    "refs_invalid",
    "refs_unresolved",
    "blind_precision_title",
    "blind_precision_title_year",
    "blind_precision_title_year_author",
];

impl InstanceScores {
    pub fn metric(&self, name: &str) -> Option<f64> {
        let c = &self.reference_counts;
        let blind = self.blind.and_then(|b| b.precision());
        match name {
            "human_alignment" => self.human_alignment,
            "coverage" => self.coverage,
            "ari" => self.ari,
            "silhouette" => self.silhouette,
            "modularity" => self.modularity,
            "rgc" => self.rgc,
            "refs_in_corpus" => Some(c.in_corpus as f64),
            "refs_out_corpus_valid" => Some(c.out_corpus_valid as f64),
            "refs_invalid" => Some(c.invalid as f64),
            "refs_unresolved" => Some(c.unresolved as f64),
            "blind_precision_title" => blind.map(|p| p[0]),
            "blind_precision_title_year" => blind.map(|p| p[1]),
            "blind_precision_title_year_author" => blind.map(|p| p[2]),
            _ => None,
        }
    }

    /// Long-format rows, one per metric name.
    pub fn to_rows(&self) -> Vec<ScoreRow> {
        METRICS
            .iter()
            .map(|m| ScoreRow {
                instance_id: self.instance_id.clone(),
                method: self.method.to_string(),
                metric: m.to_string(),
                value: self.metric(m),
                embedding_provider: self.provenance.embedding_provider.clone(),
                embedding_model: self.provenance.embedding_model.clone(),
                scorer: self.provenance.scorer.clone(),
                resolver: self.provenance.resolver.clone(),
            })
            .collect()
    }
}

/// One line of a scores file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub instance_id: String,
    pub method: String,
    pub metric: String,
    pub value: Option<f64>,
    pub embedding_provider: String,
    pub embedding_model: String,
    pub scorer: String,
    pub resolver: String,
}

pub fn write_scores_csv(path: impl AsRef<Path>, rows: &[ScoreRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_scores_csv(path: impl AsRef<Path>) -> Result<Vec<ScoreRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// What one evaluation call scores.
#[derive(Debug, Clone, Copy)]
pub struct EvaluationInput<'a> {
    pub instance: &'a BenchmarkInstance,
    pub graph: &'a RelationGraph,
    /// The graph partition the induced partition is compared with.
    pub reference_partition: &'a Partition,
    pub descriptions: &'a DescriptionSet,
    pub method: Method,
}

/// Services shared by all evaluations of a run.
#[derive(Clone, Copy)]
pub struct Evaluator<'a> {
    pub provider: &'a dyn EmbeddingProvider,
    pub scorer: &'a dyn TextScorer,
    pub resolver: &'a dyn RecordResolver,
}

fn atoms_of<'t>(texts: impl IntoIterator<Item = (SourceId, &'t str)>) -> Vec<TextAtom> {
    texts.into_iter().flat_map(|(s, t)| split_atoms(t, s)).collect()
}

fn embed_texts(provider: &dyn EmbeddingProvider, texts: Vec<String>) -> Result<Vec<EmbeddingVector>> {
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    provider.embed_texts(&texts)
}

impl<'a> Evaluator<'a> {
    pub fn provenance(&self) -> Provenance {
        Provenance {
            embedding_provider: self.provider.provider_id().to_string(),
            embedding_model: self.provider.model_id().to_string(),
            scorer: self.scorer.id(),
            resolver: self.resolver.id(),
        }
    }

    /// Score one description set. Metrics that are undefined for the input
    /// (for example silhouette with a single induced cluster) are left absent.
    pub fn evaluate(&self, input: &EvaluationInput<'_>) -> Result<InstanceScores> {
        let EvaluationInput {
            instance,
            graph,
            reference_partition,
            descriptions,
            method,
        } = *input;
        if descriptions.is_empty() {
            return Err(Error::Metric(format!(
                "{}: no descriptions to score for {method}",
                instance.instance_id
            )));
        }
        let with_abstract: Vec<_> = instance.papers.iter().filter(|p| p.has_abstract()).collect();
        let desc_texts: Vec<(ClusterId, String)> =
            descriptions.entries.iter().map(|e| (e.cluster_id, e.text())).collect();

        let corpus_texts: Vec<(SourceId, String)> = with_abstract
            .iter()
            .map(|p| (SourceId::Paper(p.paper_id), p.text()))
            .collect();
        let corpus_atoms = atoms_of(corpus_texts.iter().map(|(s, t)| (*s, t.as_str())));
        let desc_atoms = atoms_of(desc_texts.iter().map(|(c, t)| (SourceId::Cluster(*c), t.as_str())));
        let coverage = if corpus_atoms.is_empty() || desc_atoms.is_empty() {
            log::warn!("{}: coverage undefined for {method} (no atoms)", instance.instance_id);
            None
        } else {
            Some(semantic_coverage(
                &embed(&corpus_atoms, self.provider)?,
                &embed(&desc_atoms, self.provider)?,
            )?)
        };

        let paper_vecs = embed_texts(self.provider, instance.papers.iter().map(|p| p.text()).collect())?;
        let papers: Vec<(PaperId, EmbeddingVector)> =
            instance.papers.iter().map(|p| p.paper_id).zip(paper_vecs).collect();
        let desc_vecs = embed_texts(self.provider, desc_texts.iter().map(|(_, t)| t.clone()).collect())?;
        let descs: Vec<(ClusterId, EmbeddingVector)> = desc_texts.iter().map(|(c, _)| *c).zip(desc_vecs).collect();
        let induced = induce_partition(&papers, &descs)?.partition();

        let ari_score = ari(&induced, &reference_partition.restricted_to(&instance.paper_ids()))?;
        let modularity = induced_modularity(graph, &induced)?;

        let abstract_vecs = embed_texts(
            self.provider,
            with_abstract.iter().map(|p| p.abstract_text.clone()).collect(),
        )?;
        let abstract_map: BTreeMap<PaperId, EmbeddingVector> =
            with_abstract.iter().map(|p| p.paper_id).zip(abstract_vecs).collect();
        let silhouette_score = match silhouette(&abstract_map, &induced) {
            Ok(s) => Some(s),
            Err(e) => {
                log::warn!("{}: silhouette undefined for {method}: {e}", instance.instance_id);
                None
            }
        };

        let human_score = match (&instance.human_descriptions, method) {
            (Some(human), Method::Pipeline(_)) if human.len() == descriptions.len() => {
                let generated: Vec<String> = desc_texts.iter().map(|(_, t)| t.clone()).collect();
                Some(human_alignment(&generated, human, self.scorer, self.provider)?.score)
            }
            (Some(human), Method::Pipeline(_)) => {
                log::warn!(
                    "{}: {method} produced {} descriptions for {} human ones; alignment skipped",
                    instance.instance_id,
                    descriptions.len(),
                    human.len()
                );
                None
            }
            _ => None,
        };

        let reference_counts = classify_references(descriptions, instance, self.resolver)?;
        let (rgc, rgc_excluded_clusters) = match method {
            Method::Pipeline(k) if k.is_grounded() => {
                match reference_grounded_coverage(descriptions, instance, self.provider)? {
                    Some(g) => (Some(g.score), g.excluded),
                    None => (None, descriptions.len()),
                }
            }
            _ => (None, 0),
        };
        let blind = match method {
            Method::Pipeline(PipelineKind::Blind) => {
                let refs: Vec<String> = descriptions
                    .entries
                    .iter()
                    .flat_map(|e| e.references.iter().cloned())
                    .collect();
                Some(validate_blind_references(&refs, self.resolver)?)
            }
            _ => None,
        };

        Ok(InstanceScores {
            instance_id: instance.instance_id.clone(),
            method,
            coverage,
            silhouette: silhouette_score,
            ari: Some(ari_score),
            modularity: Some(modularity),
            human_alignment: human_score,
            rgc,
            rgc_excluded_clusters,
            reference_counts,
            blind,
            provenance: self.provenance(),
        })
    }
}

#[cfg(test)]
mod tests;
