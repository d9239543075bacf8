//! The six description pipelines: prompt rendering, context building,
//! generation and output validation.

mod context;
mod generate;
mod parse;
mod templates;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::community::{rank_cluster_papers, ClusterId, Partition};
use crate::corpus::{BenchmarkInstance, PaperId};
use crate::error::{Error, Result};
use crate::graph::{LinkStrengthTable, RelationMode};

pub use context::{build_context, build_selected_context, ContextOptions};
pub use generate::{
    GenerationRequest, Generator, GeneratorStyle, HttpGenerator, HttpGeneratorConfig, ShuffledEchoGenerator,
    TermEchoGenerator, TranscriptGenerator,
};
pub use parse::{parse_output, reference_token_id, OutputError, ParseContext, ParsedOutput};
pub use templates::{render_prompt, template_for};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    Blind,
    Corpus,
    CorpusSelect,
    Labeled,
    LabeledSelect,
    Ranked,
}

impl PipelineKind {
    pub const ALL: [PipelineKind; 6] = [
        PipelineKind::Blind,
        PipelineKind::Corpus,
        PipelineKind::CorpusSelect,
        PipelineKind::Labeled,
        PipelineKind::LabeledSelect,
        PipelineKind::Ranked,
    ];

    pub fn stages(self) -> u8 {
        match self {
            PipelineKind::CorpusSelect | PipelineKind::LabeledSelect => 2,
            _ => 1,
        }
    }

    /// Kinds whose cluster ids come from a supplied partition.
    pub fn needs_partition(self) -> bool {
        matches!(
            self,
            PipelineKind::Labeled | PipelineKind::LabeledSelect | PipelineKind::Ranked
        )
    }

    /// Kinds whose references are `[#]` tokens into the corpus.
    pub fn is_grounded(self) -> bool {
        self != PipelineKind::Blind
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineKind::Blind => "blind",
            PipelineKind::Corpus => "corpus",
            PipelineKind::CorpusSelect => "corpus_select",
            PipelineKind::Labeled => "labeled",
            PipelineKind::LabeledSelect => "labeled_select",
            PipelineKind::Ranked => "ranked",
        }
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PipelineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_lowercase().replace(['-', ' '], "_");
        PipelineKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| Error::Config(format!("unknown pipeline kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    #[default]
    Normal,
    BiblioContext,
    NoQuery,
}

impl FromStr for PromptVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().replace('-', "_").as_str() {
            "normal" => Ok(PromptVariant::Normal),
            "biblio_context" | "biblio" => Ok(PromptVariant::BiblioContext),
            "no_query" => Ok(PromptVariant::NoQuery),
            other => Err(Error::Config(format!("unknown prompt variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub kind: PipelineKind,
    pub max_refs_per_cluster: usize,
    pub ranked_top_k: usize,
    pub prompt_variant: PromptVariant,
    pub word_limit: usize,
    /// Extra attempts after an output is rejected.
    pub retries: usize,
    pub relation: RelationMode,
    pub model: String,
    pub max_output_tokens: usize,
    /// Abstracts longer than this many characters are cut in contexts.
    pub abstract_char_budget: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            kind: PipelineKind::Labeled,
            max_refs_per_cluster: 10,
            ranked_top_k: 10,
            prompt_variant: PromptVariant::Normal,
            word_limit: 250,
            retries: 2,
            relation: RelationMode::Bc,
            model: "mock".into(),
            max_output_tokens: 8192,
            abstract_char_budget: None,
        }
    }
}

impl PipelineConfig {
    pub fn for_kind(kind: PipelineKind) -> Self {
        PipelineConfig {
            kind,
            ..PipelineConfig::default()
        }
    }

    pub fn context_options(&self) -> ContextOptions {
        ContextOptions {
            abstract_char_budget: self.abstract_char_budget,
        }
    }
}

/// One generated cluster description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterDescription {
    pub cluster_id: ClusterId,
    pub label: Option<String>,
    pub description: String,
    /// `[#]` tokens, or free bibliographic strings for the blind pipeline.
    pub references: Vec<String>,
}

impl ClusterDescription {
    /// Label and description as one passage.
    pub fn text(&self) -> String {
        match self.label.as_deref().map(str::trim).filter(|l| !l.is_empty()) {
            Some(label) => format!("{label}. {}", self.description.trim()),
            None => self.description.trim().to_string(),
        }
    }

    /// Corpus ids cited through `[#]` tokens.
    pub fn cited_ids(&self) -> Vec<PaperId> {
        self.references.iter().filter_map(|r| reference_token_id(r)).collect()
    }
}

/// Pipeline output, sorted by cluster id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DescriptionSet {
    pub entries: Vec<ClusterDescription>,
}

impl DescriptionSet {
    pub fn new(mut entries: Vec<ClusterDescription>) -> Self {
        entries.sort_by_key(|e| e.cluster_id);
        DescriptionSet { entries }
    }

    /// Human descriptions numbered `1..=n` in file order.
    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Self {
        DescriptionSet::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| ClusterDescription {
                    cluster_id: i as ClusterId + 1,
                    label: None,
                    description: t.as_ref().to_string(),
                    references: Vec::new(),
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cluster_ids(&self) -> BTreeSet<ClusterId> {
        self.entries.iter().map(|e| e.cluster_id).collect()
    }

    pub fn get(&self, cluster_id: ClusterId) -> Option<&ClusterDescription> {
        self.entries.iter().find(|e| e.cluster_id == cluster_id)
    }
}

/// Stage-1 output of the select pipelines.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SelectionSet {
    pub selections: BTreeMap<ClusterId, Vec<PaperId>>,
}

impl SelectionSet {
    pub fn paper_ids(&self) -> BTreeSet<PaperId> {
        self.selections.values().flatten().copied().collect()
    }
}

/// Result of one pipeline run, with every prompt sent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub kind: PipelineKind,
    pub descriptions: DescriptionSet,
    pub selection: Option<SelectionSet>,
    pub prompts: Vec<String>,
    pub attempts: usize,
}

/// Cluster ids a pipeline must produce.
pub fn expected_cluster_ids(
    kind: PipelineKind,
    instance: &BenchmarkInstance,
    partition: Option<&Partition>,
) -> Result<BTreeSet<ClusterId>> {
    if kind.needs_partition() {
        let p = partition.ok_or_else(|| Error::Config(format!("pipeline {kind} requires a partition")))?;
        Ok(p.labels())
    } else {
        if instance.target_k == 0 {
            return Err(Error::Config("target_k must be positive".into()));
        }
        Ok((1..=instance.target_k as ClusterId).collect())
    }
}

fn corrective(prompt: &str, err: &OutputError) -> String {
    format!(
        "{prompt}\n\nYour previous response was rejected: {err}\nReturn ONLY the corrected JSON array that satisfies every output requirement above."
    )
}

/// Render, generate and validate one stage, retrying with a corrective note.
fn run_stage(
    config: &PipelineConfig,
    prompt: &str,
    ctx: &ParseContext<'_>,
    stage: u8,
    generator: &dyn Generator,
    prompts: &mut Vec<String>,
    attempts: &mut usize,
) -> Result<ParsedOutput> {
    let mut current = prompt.to_string();
    let mut last_raw = String::new();
    let mut last_err = None;
    for _ in 0..=config.retries {
        *attempts += 1;
        prompts.push(current.clone());
        let raw = generator.generate(&GenerationRequest {
            model: config.model.clone(),
            prompt: current.clone(),
            max_output_tokens: config.max_output_tokens,
        })?;
        match parse_output(&raw, ctx, config.kind, stage) {
            Ok(parsed) => return Ok(parsed),
            Err(e) => {
                log::warn!("{} stage {stage}: output rejected: {e}", config.kind);
                current = corrective(prompt, &e);
                last_raw = raw;
                last_err = Some(e);
            }
        }
    }
    Err(Error::PipelineFailed {
        attempts: config.retries + 1,
        message: last_err.map(|e| e.to_string()).unwrap_or_default(),
        raw_output: last_raw,
    })
}

/// Run one pipeline end to end. Structured kinds need `partition`; `Ranked`
/// also needs link `strengths`. Two-stage kinds build the second prompt from
/// the papers selected in the first.
pub fn run_pipeline(
    config: &PipelineConfig,
    instance: &BenchmarkInstance,
    partition: Option<&Partition>,
    strengths: Option<&LinkStrengthTable>,
    generator: &dyn Generator,
) -> Result<PipelineRun> {
    let kind = config.kind;
    let expected = expected_cluster_ids(kind, instance, partition)?;
    if let Some(p) = partition.filter(|_| kind.needs_partition()) {
        if p.k() != instance.target_k {
            log::info!(
                "{}: partition has {} clusters, target is {}; describing the partition's clusters",
                instance.instance_id,
                p.k(),
                instance.target_k
            );
        }
    }
    let ranking = if kind == PipelineKind::Ranked {
        let strengths = strengths.ok_or_else(|| Error::Config("ranked pipeline requires link strengths".into()))?;
        Some(rank_cluster_papers(
            partition.expect("checked above"),
            strengths,
            config.ranked_top_k,
        )?)
    } else {
        None
    };
    let options = config.context_options();
    let context = build_context(kind, instance, partition, ranking.as_ref(), &options)?;
    let context_ids: BTreeSet<PaperId> = match &ranking {
        Some(r) => r.values().flatten().copied().collect(),
        None if kind == PipelineKind::Blind => BTreeSet::new(),
        None => instance.paper_ids(),
    };
    let partition_for_parse = partition.filter(|_| kind.needs_partition());
    let ctx = ParseContext {
        expected: &expected,
        context_ids: &context_ids,
        partition: partition_for_parse,
        max_refs: config.max_refs_per_cluster,
    };

    let mut prompts = Vec::new();
    let mut attempts = 0;
    let prompt = render_prompt(config, 1, instance, expected.len(), &context)?;
    let first = run_stage(config, &prompt, &ctx, 1, generator, &mut prompts, &mut attempts)?;

    let (descriptions, selection) = match first {
        ParsedOutput::Descriptions(d) => (d, None),
        ParsedOutput::Selection(sel) => {
            let stage2_context = build_selected_context(instance, &sel, partition_for_parse, &options)?;
            let prompt = render_prompt(config, 2, instance, expected.len(), &stage2_context)?;
            let stage2_ids = sel.paper_ids();
            let ctx2 = ParseContext {
                context_ids: &stage2_ids,
                ..ctx
            };
            let ParsedOutput::Descriptions(mut d) =
                run_stage(config, &prompt, &ctx2, 2, generator, &mut prompts, &mut attempts)?
            else {
                unreachable!("stage 2 always yields descriptions")
            };
            for entry in &mut d.entries {
                entry.references = sel
                    .selections
                    .get(&entry.cluster_id)
                    .map(|ids| ids.iter().map(|id| format!("[{id}]")).collect())
                    .unwrap_or_default();
            }
            (d, Some(sel))
        }
    };
    Ok(PipelineRun {
        kind,
        descriptions,
        selection,
        prompts,
        attempts,
    })
}

/// Write `cluster_id,description,references` with references `;`-joined.
pub fn write_descriptions_csv(path: impl AsRef<Path>, set: &DescriptionSet) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cluster_id", "description", "references"])?;
    for e in &set.entries {
        let refs: Vec<String> = e
            .references
            .iter()
            .map(|r| {
                if r.contains(';') {
                    log::warn!("reference contains ';', replaced by ',': {r}");
                }
                r.replace(';', ",").trim().to_string()
            })
            .collect();
        w.write_record([e.cluster_id.to_string(), e.text(), refs.join(";")])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_descriptions_csv(path: impl AsRef<Path>) -> Result<DescriptionSet> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(id_col), Some(desc_col)) = (col("cluster_id"), col("description")) else {
        return Err(Error::Ingestion(format!(
            "{}: description file needs cluster_id and description columns",
            path.display()
        )));
    };
    let refs_col = col("references");
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let cluster_id = rec
            .get(id_col)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Ingestion(format!("{}: bad cluster_id in {:?}", path.display(), rec)))?;
        let references = refs_col
            .and_then(|c| rec.get(c))
            .map(|s| {
                s.split(';')
                    .map(str::trim)
                    .filter(|r| !r.is_empty())
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default();
        entries.push(ClusterDescription {
            cluster_id,
            label: None,
            description: rec.get(desc_col).unwrap_or("").to_string(),
            references,
        });
    }
    let set = DescriptionSet::new(entries);
    if set.cluster_ids().len() != set.len() {
        return Err(Error::Ingestion(format!("{}: duplicate cluster_id", path.display())));
    }
    Ok(set)
}
