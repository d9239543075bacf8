use std::collections::BTreeMap;
use std::fmt::Write;

use crate::community::{ClusterId, Partition};
use crate::corpus::{BenchmarkInstance, PaperId, PaperRecord};
use crate::error::{Error, Result};

use super::{PipelineKind, SelectionSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ContextOptions {
    pub abstract_char_budget: Option<usize>,
}

fn abstract_for(paper: &PaperRecord, options: &ContextOptions) -> String {
    let text = paper.abstract_text.trim();
    match options.abstract_char_budget {
        Some(budget) if text.chars().count() > budget => {
            log::info!("paper {}: abstract truncated to {budget} characters", paper.paper_id);
            let cut: String = text.chars().take(budget).collect();
            format!("{}...", cut.trim_end())
        }
        _ => text.to_string(),
    }
}

fn record_block(paper: &PaperRecord, label: Option<ClusterId>, options: &ContextOptions) -> String {
    let mut s = format!(
        "paper_id: {}\ntitle: {}\nabstract: {}",
        paper.paper_id,
        paper.title.trim(),
        abstract_for(paper, options)
    );
    if let Some(c) = label {
        let _ = write!(s, "\ncluster: {c}");
    }
    s
}

fn label_of(partition: &Partition, id: PaperId) -> Result<ClusterId> {
    partition
        .label(id)
        .ok_or_else(|| Error::Config(format!("paper {id} has no cluster label")))
}

fn grouped(
    instance: &BenchmarkInstance,
    groups: &BTreeMap<ClusterId, Vec<PaperId>>,
    partition: Option<&Partition>,
    options: &ContextOptions,
) -> Result<String> {
    let mut sections = Vec::new();
    for (c, ids) in groups {
        let mut blocks = vec![format!("Cluster {c}:")];
        for &id in ids {
            let paper = instance
                .paper(id)
                .ok_or_else(|| Error::Config(format!("paper {id} is not in the corpus")))?;
            let label = partition.map(|p| label_of(p, id)).transpose()?;
            blocks.push(record_block(paper, label, options));
        }
        sections.push(blocks.join("\n\n"));
    }
    Ok(sections.join("\n\n"))
}

/// Evidence text for the first stage of `kind`: one record block per paper
/// (paper_id, title, abstract, plus `cluster` for labeled kinds). `Ranked`
/// groups the ranked papers under a heading per cluster.
pub fn build_context(
    kind: PipelineKind,
    instance: &BenchmarkInstance,
    partition: Option<&Partition>,
    ranking: Option<&BTreeMap<ClusterId, Vec<PaperId>>>,
    options: &ContextOptions,
) -> Result<String> {
    let need_partition = || partition.ok_or_else(|| Error::Config(format!("pipeline {kind} requires a partition")));
    match kind {
        PipelineKind::Blind => Ok(String::new()),
        PipelineKind::Corpus | PipelineKind::CorpusSelect => Ok(instance
            .papers
            .iter()
            .map(|p| record_block(p, None, options))
            .collect::<Vec<_>>()
            .join("\n\n")),
        PipelineKind::Labeled | PipelineKind::LabeledSelect => {
            let p = need_partition()?;
            let blocks = instance
                .papers
                .iter()
                .map(|paper| Ok(record_block(paper, Some(label_of(p, paper.paper_id)?), options)))
                .collect::<Result<Vec<_>>>()?;
            Ok(blocks.join("\n\n"))
        }
        PipelineKind::Ranked => {
            let p = need_partition()?;
            let ranking = ranking.ok_or_else(|| Error::Config("ranked pipeline requires a cluster ranking".into()))?;
            grouped(instance, ranking, Some(p), options)
        }
    }
}

/// Reduced second-stage context holding only the selected papers, grouped by
/// the cluster that selected them.
pub fn build_selected_context(
    instance: &BenchmarkInstance,
    selection: &SelectionSet,
    partition: Option<&Partition>,
    options: &ContextOptions,
) -> Result<String> {
    grouped(instance, &selection.selections, partition, options)
}
