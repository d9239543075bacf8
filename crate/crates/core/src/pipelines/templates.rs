use std::collections::BTreeMap;

use crate::corpus::BenchmarkInstance;
use crate::error::{Error, Result};
use crate::graph::RelationMode;

use super::{PipelineConfig, PipelineKind, PromptVariant};

const BLIND: &str = include_str!("../../templates/blind.txt");
const CORPUS: &str = include_str!("../../templates/corpus.txt");
const CORPUS_SELECT_1: &str = include_str!("../../templates/corpus_select_1.txt");
const CORPUS_SELECT_2: &str = include_str!("../../templates/corpus_select_2.txt");
const LABELED: &str = include_str!("../../templates/labeled.txt");
const LABELED_SELECT_1: &str = include_str!("../../templates/labeled_select_1.txt");
const LABELED_SELECT_2: &str = include_str!("../../templates/labeled_select_2.txt");
const RANKED: &str = include_str!("../../templates/ranked.txt");

const TASK_ANCHOR: &str = ", not general bibliometric analysis.\n";

pub fn template_for(kind: PipelineKind, stage: u8) -> Result<&'static str> {
    use PipelineKind::*;
    Ok(match (kind, stage) {
        (Blind, 1) => BLIND,
        (Corpus, 1) => CORPUS,
        (CorpusSelect, 1) => CORPUS_SELECT_1,
        (CorpusSelect, 2) => CORPUS_SELECT_2,
        (Labeled, 1) => LABELED,
        (LabeledSelect, 1) => LABELED_SELECT_1,
        (LabeledSelect, 2) => LABELED_SELECT_2,
        (Ranked, 1) => RANKED,
        _ => return Err(Error::Template(format!("pipeline {kind} has no stage {stage}"))),
    })
}

fn context_placeholder(kind: PipelineKind, stage: u8) -> Option<&'static str> {
    use PipelineKind::*;
    match (kind, stage) {
        (Blind, _) => None,
        (Corpus, _) | (CorpusSelect, 1) => Some("scopus_context"),
        (CorpusSelect, _) | (LabeledSelect, 2) => Some("cluster_contexts"),
        (Labeled, _) | (LabeledSelect, _) => Some("labeled_scopus_context"),
        (Ranked, _) => Some("selected_clusters_context"),
    }
}

fn relation_name(mode: RelationMode) -> &'static str {
    match mode {
        RelationMode::Bc => "bibliographic coupling",
        RelationMode::Cit => "direct citation",
    }
}

fn relation_paragraph(mode: RelationMode) -> &'static str {
    match mode {
        RelationMode::Bc => "The analysis that will be performed is a bibliographic coupling analysis. Bibliographic coupling clusters papers that share cited references. Papers in the same cluster often reflect related intellectual backgrounds, methods, or problem framings.",
        RelationMode::Cit => "The analysis that will be performed is a direct citation analysis. Direct citation clusters papers that cite one another. Papers in the same cluster often reflect related intellectual backgrounds, methods, or problem framings.",
    }
}

/// Drop the `Query:` / `Query/context:` heading, its placeholder line and the
/// blank line after it.
fn strip_query_block(template: &str) -> Result<String> {
    let lines: Vec<&str> = template.split('\n').collect();
    let pos = lines
        .windows(2)
        .position(|w| w[0].starts_with("Query") && w[0].ends_with(':') && w[1] == "{{query}}")
        .ok_or_else(|| Error::Template("template has no query block".into()))?;
    let mut end = pos + 2;
    if lines.get(end) == Some(&"") {
        end += 1;
    }
    Ok(lines[..pos]
        .iter()
        .chain(&lines[end..])
        .copied()
        .collect::<Vec<_>>()
        .join("\n"))
}

fn apply_variant(template: &str, variant: PromptVariant, mode: RelationMode) -> Result<String> {
    match variant {
        PromptVariant::Normal => Ok(template.to_string()),
        PromptVariant::NoQuery => strip_query_block(template),
        PromptVariant::BiblioContext => {
            let at = template
                .find(TASK_ANCHOR)
                .ok_or_else(|| Error::Template("template has no task statement to extend".into()))?
                + TASK_ANCHOR.len();
            Ok(format!(
                "{}\n{}\n{}",
                &template[..at],
                relation_paragraph(mode),
                &template[at..]
            ))
        }
    }
}

/// Single-pass `{{name}}` substitution. Values are inserted verbatim and never
/// rescanned; an unknown or unterminated placeholder is an error.
pub(crate) fn fill(template: &str, vars: &BTreeMap<&str, String>) -> Result<String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find("}}")
            .ok_or_else(|| Error::Template("unterminated placeholder".into()))?;
        let name = after[..end].trim();
        let value = vars
            .get(name)
            .ok_or_else(|| Error::Template(format!("no value for placeholder {{{{{name}}}}}")))?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Fill the prompt for `config.kind` at `stage`. `cluster_count` is the
/// number of clusters to describe (the partition size for structured kinds).
pub fn render_prompt(
    config: &PipelineConfig,
    stage: u8,
    instance: &BenchmarkInstance,
    cluster_count: usize,
    context: &str,
) -> Result<String> {
    let template = apply_variant(
        template_for(config.kind, stage)?,
        config.prompt_variant,
        config.relation,
    )?;
    let mut vars: BTreeMap<&str, String> = BTreeMap::new();
    vars.insert("query", instance.query.trim().to_string());
    vars.insert("target_cluster_count", cluster_count.to_string());
    vars.insert("word_limit", config.word_limit.to_string());
    vars.insert("max_refs", config.max_refs_per_cluster.to_string());
    vars.insert("relation", relation_name(config.relation).to_string());
    if let Some(name) = context_placeholder(config.kind, stage) {
        vars.insert(name, context.trim_end().to_string());
    }
    fill(&template, &vars)
}
