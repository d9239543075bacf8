use super::*;
use crate::community::tune_resolution_to_k;
use crate::embedding::HashEmbedder;
use crate::graph::{build_graph, link_strength, GraphConfig};
use crate::pipelines::{run_pipeline, PipelineConfig, ShuffledEchoGenerator, TermEchoGenerator};
use crate::resolver::FixtureResolver;
use crate::synth::{vocabulary_blocked_corpus, SyntheticCorpusConfig};

struct Setup {
    instance: BenchmarkInstance,
    graph: RelationGraph,
    partition: Partition,
}

fn setup(seed: u64) -> Setup {
    let corpus = vocabulary_blocked_corpus(&SyntheticCorpusConfig {
        seed,
        ..Default::default()
    });
    let graph = build_graph(&corpus.instance.papers, &GraphConfig::default()).unwrap();
    let partition = tune_resolution_to_k(&graph, corpus.instance.target_k, seed)
        .unwrap()
        .partition;
    Setup {
        instance: corpus.instance,
        graph,
        partition,
    }
}

fn score(s: &Setup, kind: PipelineKind, generator: &dyn crate::pipelines::Generator) -> InstanceScores {
    let strengths = link_strength(&s.graph);
    let run = run_pipeline(
        &PipelineConfig::for_kind(kind),
        &s.instance,
        Some(&s.partition),
        Some(&strengths),
        generator,
    )
    .unwrap();
    let provider = HashEmbedder::default();
    let resolver = FixtureResolver::default();
    let evaluator = Evaluator {
        provider: &provider,
        scorer: &DefaultScorer::default(),
        resolver: &resolver,
    };
    evaluator
        .evaluate(&EvaluationInput {
            instance: &s.instance,
            graph: &s.graph,
            reference_partition: &s.partition,
            descriptions: &run.descriptions,
            method: Method::Pipeline(kind),
        })
        .unwrap()
}

#[test]
fn labeled_echo_beats_shuffled_control() {
    let s = setup(1);
    let echo = score(&s, PipelineKind::Labeled, &TermEchoGenerator);
    let control = score(&s, PipelineKind::Labeled, &ShuffledEchoGenerator { seed: 1 });
    let (a, b) = (echo.ari.unwrap(), control.ari.unwrap());
    assert!(a >= 0.8, "echo ari {a}");
    assert!(a > b, "echo {a} vs control {b}");
    assert_eq!(echo.reference_counts.invalid, 0);
    assert!(echo.reference_counts.in_corpus > 0);
    assert!(echo.rgc.is_some());
    assert!(echo.human_alignment.is_some());
}

#[test]
fn ranked_echo_recovers_structure() {
    let s = setup(2);
    let ranked = score(&s, PipelineKind::Ranked, &TermEchoGenerator);
    assert!(ranked.ari.unwrap() >= 0.8, "{:?}", ranked.ari);
}

#[test]
fn blind_scores_precision_not_rgc() {
    let s = setup(3);
    let blind = score(&s, PipelineKind::Blind, &TermEchoGenerator);
    assert!(blind.rgc.is_none());
    assert!(blind.blind.is_some());
    assert_eq!(blind.reference_counts.in_corpus, 0);
}

#[test]
fn human_method_and_rows() {
    let s = setup(4);
    let human = DescriptionSet::from_texts(s.instance.human_descriptions.as_ref().unwrap());
    let provider = HashEmbedder::default();
    let resolver = FixtureResolver::default();
    let evaluator = Evaluator {
        provider: &provider,
        scorer: &SentenceCosineScorer,
        resolver: &resolver,
    };
    let scores = evaluator
        .evaluate(&EvaluationInput {
            instance: &s.instance,
            graph: &s.graph,
            reference_partition: &s.partition,
            descriptions: &human,
            method: Method::Human,
        })
        .unwrap();
    assert!(scores.human_alignment.is_none());
    assert_eq!(scores.reference_counts.total(), 0);
    let rows = scores.to_rows();
    assert_eq!(rows.len(), METRICS.len());
    assert!(rows
        .iter()
        .all(|r| r.method == "human" && r.scorer == "sentence-cosine"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores.csv");
    write_scores_csv(&path, &rows).unwrap();
    assert_eq!(read_scores_csv(&path).unwrap(), rows);
}

#[test]
fn method_names_round_trip() {
    for k in PipelineKind::ALL {
        let m = Method::Pipeline(k);
        assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
    }
    assert_eq!("human".parse::<Method>().unwrap(), Method::Human);
    assert!("nonsense".parse::<Method>().is_err());
}
