//! Command-line front end. Every subcommand works on a directory layout
//! `<work-dir>/<instance_id>/<mode>/` so runs can be resumed and compared.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::{read_partition_csv, tune_resolution_with, write_partition_csv, Partition, ResolutionSearch};
use crate::corpus::{load_benchmark_manifest, write_corpus_csv, BenchmarkInstance, CsvOptions};
use crate::embedding::{CachedProvider, EmbeddingProvider, HashEmbedder, HttpEmbedder, HttpEmbedderConfig};
use crate::error::{Error, Result};
use crate::evaluation::{
    read_scores_csv, write_scores_csv, DefaultScorer, EvaluationInput, Evaluator, GreedyTokenScorer, Method, ScoreRow,
    SentenceCosineScorer, TextScorer,
};
use crate::graph::{
    build_graph, link_strength, write_edge_list, write_link_strengths, GraphConfig, RelationGraph, RelationMode,
};
use crate::pipelines::{
    read_descriptions_csv, run_pipeline, write_descriptions_csv, DescriptionSet, Generator, HttpGenerator,
    HttpGeneratorConfig, PipelineConfig, PipelineKind, ShuffledEchoGenerator, TermEchoGenerator, TranscriptGenerator,
};
use crate::report::{aggregate_all, emit_report, write_long_format, ReportFormat};
use crate::resolver::{
    CachedResolver, ExternalRecord, FixtureResolver, OpenAlexConfig, OpenAlexResolver, RecordResolver,
};
use crate::synth::{vocabulary_blocked_corpus, SyntheticCorpusConfig};

#[derive(Debug, Parser)]
#[command(
    name = "scimap",
    version,
    about = "Science mapping: relation graphs, clusters, cluster descriptions and their evaluation"
)]
pub struct Cli {
    /// Seed for clustering and mock generators (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// TOML configuration file.
    #[arg(long, global = true, env = "SCIMAP_CONFIG")]
    pub config: Option<PathBuf>,

    /// Directory for the embedding and resolver caches (overrides the config file).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,

    /// Use the hash embedder and the fixture resolver; never touch the network.
    #[arg(long, global = true)]
    pub offline: bool,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate manifests and corpora.
    Ingest(IngestArgs),
    /// Build a relation graph and export edges and link strengths.
    Graph(Workspace),
    /// Louvain with the resolution tuned to the target cluster count.
    Cluster(ClusterArgs),
    /// Run description pipelines.
    Generate(GenerateArgs),
    /// Score generated (and human) descriptions.
    Evaluate(EvaluateArgs),
    /// Aggregate score files into rank / median / win tables.
    Report(ReportArgs),
    /// Write synthetic benchmark instances with known structure.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    /// Write each corpus, with resolved citations, to `<dir>/<instance_id>/corpus.csv`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct Workspace {
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    #[arg(long, default_value = "work")]
    pub work_dir: PathBuf,
    /// Relation: bc (bibliographic coupling) or cit (direct citation).
    #[arg(long)]
    pub mode: Option<RelationMode>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub workspace: Workspace,
    /// Cluster count to aim for instead of the manifest's.
    #[arg(long)]
    pub target_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub workspace: Workspace,
    /// Pipelines to run (default: all six).
    #[arg(long = "pipeline")]
    pub pipelines: Vec<PipelineKind>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub workspace: Workspace,
    /// Pipelines to score (default: every description file present).
    #[arg(long = "pipeline")]
    pub pipelines: Vec<PipelineKind>,
    /// Skip the human descriptions.
    #[arg(long)]
    pub no_human: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Score files to aggregate.
    #[arg(long = "scores")]
    pub scores: Vec<PathBuf>,
    /// Also collect `<work-dir>/*/<mode>/scores.csv`.
    #[arg(long)]
    pub work_dir: Option<PathBuf>,
    #[arg(long, default_value = "bc")]
    pub mode: RelationMode,
    #[arg(long, default_value = "report")]
    pub out_dir: PathBuf,
    /// Formats of the summary table (default: both).
    #[arg(long = "format", value_enum)]
    pub formats: Vec<ReportFormat>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub instances: usize,
    #[arg(long, default_value_t = 4)]
    pub blocks: usize,
    #[arg(long, default_value_t = 10)]
    pub papers_per_block: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
}

/// Which mock or remote generator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorBackend {
    #[default]
    TermEcho,
    ShuffledEcho,
    Http,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSection {
    pub backend: GeneratorBackend,
    #[serde(flatten)]
    pub http: HttpGeneratorConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolverSection {
    /// CSV of records (`record_id,title,year,first_author_surname`) for offline runs.
    pub fixture: Option<PathBuf>,
    #[serde(flatten)]
    pub openalex: OpenAlexConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerChoice {
    #[default]
    Default,
    Sentence,
    Token,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationSection {
    pub scorer: ScorerChoice,
    /// Baseline for rescaling token F1; off when absent.
    pub rescale: Option<f64>,
}

/// Contents of the `--config` file. Every section is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    /// Embedding and resolver caches live here when set.
    pub cache_dir: Option<PathBuf>,
    pub graph: GraphConfig,
    pub search: ResolutionSearch,
    pub pipeline: PipelineConfig,
    pub generator: GeneratorSection,
    pub embedding: HttpEmbedderConfig,
    pub resolver: ResolverSection,
    pub evaluation: EvaluationSection,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config> {
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
            }
        }
    }
}

struct Ctx {
    config: Config,
    seed: u64,
    offline: bool,
}

impl Ctx {
    fn graph_config(&self, mode: Option<RelationMode>) -> GraphConfig {
        let mut g = self.config.graph.clone();
        if let Some(m) = mode {
            g.mode = m;
        }
        g
    }

    fn provider(&self) -> Result<Box<dyn EmbeddingProvider>> {
        let base: Box<dyn EmbeddingProvider> = if self.offline || self.config.embedding.endpoint.is_empty() {
            if !self.offline {
                log::info!("no embedding endpoint configured; using the hash embedder");
            }
            Box::new(HashEmbedder::default())
        } else {
            Box::new(HttpEmbedder::new(self.config.embedding.clone())?)
        };
        match &self.config.cache_dir {
            Some(dir) => Ok(Box::new(CachedProvider::open(base, dir.join("embeddings.jsonl"))?)),
            None => Ok(base),
        }
    }

    fn resolver(&self) -> Result<Box<dyn RecordResolver>> {
        let section = &self.config.resolver;
        let base: Box<dyn RecordResolver> = match (&section.fixture, self.offline) {
            (Some(path), _) => Box::new(FixtureResolver::from_csv(path)?),
            (None, true) => {
                log::info!("offline without a resolver fixture; every free-text reference will be unmatched");
                Box::new(FixtureResolver::default())
            }
            (None, false) => Box::new(OpenAlexResolver::new(section.openalex.clone())?),
        };
        match &self.config.cache_dir {
            Some(dir) => Ok(Box::new(CachedResolver::open(base, dir.join("resolver.jsonl"))?)),
            None => Ok(base),
        }
    }

    fn generator(&self) -> Result<Box<dyn Generator>> {
        let section = &self.config.generator;
        Ok(match section.backend {
            GeneratorBackend::TermEcho => Box::new(TermEchoGenerator),
            GeneratorBackend::ShuffledEcho => Box::new(ShuffledEchoGenerator { seed: self.seed }),
            GeneratorBackend::Http if self.offline => {
                return Err(Error::Config("the http generator cannot be used with --offline".into()))
            }
            GeneratorBackend::Http => Box::new(HttpGenerator::new(section.http.clone())?),
        })
    }

    fn scorer(&self) -> Box<dyn TextScorer> {
        let token = GreedyTokenScorer {
            rescale: self.config.evaluation.rescale,
        };
        match self.config.evaluation.scorer {
            ScorerChoice::Default => Box::new(DefaultScorer { token }),
            ScorerChoice::Sentence => Box::new(SentenceCosineScorer),
            ScorerChoice::Token => Box::new(token),
        }
    }
}

fn instance_dir(work: &Path, instance: &BenchmarkInstance, mode: RelationMode) -> PathBuf {
    work.join(&instance.instance_id).join(mode.to_string())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Run `f` for every manifest in parallel; output lines come back in manifest order.
fn per_instance<F>(manifests: &[PathBuf], f: F) -> Result<()>
where
    F: Fn(&BenchmarkInstance) -> Result<Vec<String>> + Sync,
{
    let results: Vec<Result<Vec<String>>> = manifests
        .par_iter()
        .map(|m| {
            let instance = load_benchmark_manifest(m)?;
            f(&instance)
        })
        .collect();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(lines) => lines.iter().for_each(|l| println!("{l}")),
            Err(e) => {
                log::error!("{e}");
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn build(instance: &BenchmarkInstance, config: &GraphConfig) -> Result<RelationGraph> {
    build_graph(&instance.papers, config)
}

fn load_partition(dir: &Path) -> Result<Option<Partition>> {
    let path = dir.join("partition.csv");
    if path.exists() {
        read_partition_csv(&path).map(Some)
    } else {
        Ok(None)
    }
}

fn missing_partition(dir: &Path) -> Error {
    Error::Config(format!(
        "{} not found; run `scimap cluster` first",
        dir.join("partition.csv").display()
    ))
}

fn ingest(ctx: &Ctx, args: &IngestArgs) -> Result<()> {
    let _ = ctx;
    per_instance(&args.manifests, |inst| {
        let refs: usize = inst.papers.iter().map(|p| p.raw_references.len()).sum();
        let links: usize = inst.papers.iter().map(|p| p.cited_in_corpus.len()).sum();
        if let Some(dir) = &args.out_dir {
            let d = dir.join(&inst.instance_id);
            create_dir(&d)?;
            write_corpus_csv(d.join("corpus.csv"), &inst.papers, &CsvOptions::default())?;
        }
        Ok(vec![format!(
            "{}: {} papers, {} references, {} in-corpus citations, target_k {}, human descriptions: {}",
            inst.instance_id,
            inst.papers.len(),
            refs,
            links,
            inst.target_k,
            inst.human_descriptions.as_ref().map_or(0, Vec::len)
        )])
    })
}

fn graph(ctx: &Ctx, ws: &Workspace) -> Result<()> {
    let config = ctx.graph_config(ws.mode);
    per_instance(&ws.manifests, |inst| {
        let g = build(inst, &config)?;
        let dir = instance_dir(&ws.work_dir, inst, config.mode);
        create_dir(&dir)?;
        write_edge_list(dir.join("edges.csv"), &g)?;
        write_link_strengths(dir.join("link_strength.csv"), &link_strength(&g))?;
        Ok(vec![format!(
            "{} [{}]: {} nodes, {} edges",
            inst.instance_id,
            config.mode,
            g.node_count(),
            g.edge_count()
        )])
    })
}

#[derive(Serialize)]
struct ClusterSummary {
    instance_id: String,
    mode: RelationMode,
    seed: u64,
    target_k: usize,
    achieved_k: usize,
    exact: bool,
    resolution: f64,
}

fn cluster(ctx: &Ctx, args: &ClusterArgs) -> Result<()> {
    let ws = &args.workspace;
    let config = ctx.graph_config(ws.mode);
    per_instance(&ws.manifests, |inst| {
        let g = build(inst, &config)?;
        let target = args.target_k.unwrap_or(inst.target_k);
        let result = tune_resolution_with(&g, target, ctx.seed, &ctx.config.search)?;
        let dir = instance_dir(&ws.work_dir, inst, config.mode);
        create_dir(&dir)?;
        write_partition_csv(dir.join("partition.csv"), &result.partition)?;
        let trace = dir.join("resolution_trace.csv");
        let mut w = csv::Writer::from_path(&trace)?;
        for probe in &result.trace {
            w.serialize(probe)?;
        }
        w.flush().map_err(|e| Error::io(&trace, e))?;
        write_json(
            &dir.join("cluster.json"),
            &ClusterSummary {
                instance_id: inst.instance_id.clone(),
                mode: config.mode,
                seed: ctx.seed,
                target_k: target,
                achieved_k: result.achieved_k,
                exact: result.exact,
                resolution: result.resolution,
            },
        )?;
        if !result.exact {
            log::warn!(
                "{}: no resolution gives {target} clusters; using {}",
                inst.instance_id,
                result.achieved_k
            );
        }
        Ok(vec![format!(
            "{} [{}]: {} clusters (target {target}, exact {}), resolution {:.6}",
            inst.instance_id, config.mode, result.achieved_k, result.exact, result.resolution
        )])
    })
}

fn kinds_or_all(kinds: &[PipelineKind]) -> Vec<PipelineKind> {
    if kinds.is_empty() {
        PipelineKind::ALL.to_vec()
    } else {
        kinds.to_vec()
    }
}

fn generate(ctx: &Ctx, args: &GenerateArgs) -> Result<()> {
    let ws = &args.workspace;
    let config = ctx.graph_config(ws.mode);
    let generator = ctx.generator()?;
    let kinds = kinds_or_all(&args.pipelines);
    per_instance(&ws.manifests, |inst| {
        let dir = instance_dir(&ws.work_dir, inst, config.mode);
        let g = build(inst, &config)?;
        let strengths = link_strength(&g);
        let partition = load_partition(&dir)?;
        create_dir(&dir.join("descriptions"))?;
        create_dir(&dir.join("transcripts"))?;
        let mut lines = Vec::new();
        for &kind in &kinds {
            if kind.needs_partition() && partition.is_none() {
                return Err(missing_partition(&dir));
            }
            let transcript = dir.join("transcripts").join(format!("{kind}.jsonl"));
            if transcript.exists() {
                fs::remove_file(&transcript).map_err(|e| Error::io(&transcript, e))?;
            }
            let logged = TranscriptGenerator::new(&*generator, &transcript)?;
            let pc = PipelineConfig {
                kind,
                relation: config.mode,
                ..ctx.config.pipeline.clone()
            };
            let run = match run_pipeline(&pc, inst, partition.as_ref(), Some(&strengths), &logged) {
                Ok(run) => run,
                Err(Error::PipelineFailed {
                    attempts,
                    message,
                    raw_output,
                }) => {
                    let failed = dir.join("descriptions").join(format!("{kind}.failed.txt"));
                    fs::write(&failed, &raw_output).map_err(|e| Error::io(&failed, e))?;
                    return Err(Error::PipelineFailed {
                        attempts,
                        message: format!(
                            "{} {kind}: {message} (raw output in {})",
                            inst.instance_id,
                            failed.display()
                        ),
                        raw_output,
                    });
                }
                Err(e) => return Err(e),
            };
            write_descriptions_csv(dir.join("descriptions").join(format!("{kind}.csv")), &run.descriptions)?;
            lines.push(format!(
                "{} [{}] {kind}: {} descriptions in {} attempt(s)",
                inst.instance_id,
                config.mode,
                run.descriptions.len(),
                run.attempts
            ));
        }
        Ok(lines)
    })
}

fn evaluate(ctx: &Ctx, args: &EvaluateArgs) -> Result<()> {
    let ws = &args.workspace;
    let config = ctx.graph_config(ws.mode);
    let provider = ctx.provider()?;
    let resolver = ctx.resolver()?;
    let scorer = ctx.scorer();
    let evaluator = Evaluator {
        provider: &*provider,
        scorer: &*scorer,
        resolver: &*resolver,
    };
    per_instance(&ws.manifests, |inst| {
        let dir = instance_dir(&ws.work_dir, inst, config.mode);
        let g = build(inst, &config)?;
        let partition = load_partition(&dir)?.ok_or_else(|| missing_partition(&dir))?;
        let mut sets: BTreeMap<Method, DescriptionSet> = BTreeMap::new();
        let explicit = !args.pipelines.is_empty();
        for kind in kinds_or_all(&args.pipelines) {
            let path = dir.join("descriptions").join(format!("{kind}.csv"));
            if path.exists() {
                sets.insert(Method::Pipeline(kind), read_descriptions_csv(&path)?);
            } else if explicit {
                return Err(Error::Config(format!(
                    "{} not found; run `scimap generate` first",
                    path.display()
                )));
            }
        }
        match (&inst.human_descriptions, config.mode) {
            (Some(h), RelationMode::Bc) if !args.no_human => {
                sets.insert(Method::Human, DescriptionSet::from_texts(h));
            }
            _ => {}
        }
        if sets.is_empty() {
            return Err(Error::Config(format!(
                "{}: nothing to evaluate in {}",
                inst.instance_id,
                dir.display()
            )));
        }
        let mut rows: Vec<ScoreRow> = Vec::new();
        let mut lines = Vec::new();
        for (method, set) in &sets {
            let scores = evaluator.evaluate(&EvaluationInput {
                instance: inst,
                graph: &g,
                reference_partition: &partition,
                descriptions: set,
                method: *method,
            })?;
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
            lines.push(format!(
                "{} [{}] {method}: coverage {} ari {} silhouette {} modularity {} human {} rgc {}",
                inst.instance_id,
                config.mode,
                fmt(scores.coverage),
                fmt(scores.ari),
                fmt(scores.silhouette),
                fmt(scores.modularity),
                fmt(scores.human_alignment),
                fmt(scores.rgc)
            ));
            rows.extend(scores.to_rows());
        }
        write_scores_csv(dir.join("scores.csv"), &rows)?;
        Ok(lines)
    })
}

fn report(args: &ReportArgs) -> Result<()> {
    let mut files = args.scores.clone();
    if let Some(work) = &args.work_dir {
        let entries = fs::read_dir(work).map_err(|e| Error::io(work, e))?;
        let mut found: Vec<PathBuf> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.path().join(args.mode.to_string()).join("scores.csv"))
            .filter(|p| p.exists())
            .collect();
        found.sort();
        files.extend(found);
    }
    if files.is_empty() {
        return Err(Error::Report("no score files given".into()));
    }
    let mut rows = Vec::new();
    for f in &files {
        rows.extend(read_scores_csv(f)?);
    }
    let table = aggregate_all(&rows)?;
    create_dir(&args.out_dir)?;
    let formats = if args.formats.is_empty() {
        vec![ReportFormat::Csv, ReportFormat::Markdown]
    } else {
        args.formats.clone()
    };
    for format in formats {
        let name = match format {
            ReportFormat::Csv => "report.csv",
            ReportFormat::Markdown => "report.md",
        };
        emit_report(&table, format, args.out_dir.join(name))?;
    }
    write_long_format(&rows, args.out_dir.join("scores_long.csv"))?;
    println!(
        "{} score file(s), {} summary rows written to {}",
        files.len(),
        table.len(),
        args.out_dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ManifestOut<'a> {
    instance_id: &'a str,
    query: &'a str,
    corpus_path: &'a str,
    human_descriptions_path: &'a str,
}

fn synth(ctx: &Ctx, args: &SynthArgs) -> Result<()> {
    create_dir(&args.out_dir)?;
    let mut records: BTreeMap<String, ExternalRecord> = BTreeMap::new();
    for i in 0..args.instances {
        let corpus = vocabulary_blocked_corpus(&SyntheticCorpusConfig {
            blocks: args.blocks,
            papers_per_block: args.papers_per_block,
            noise: args.noise,
            seed: ctx.seed + i as u64,
            ..Default::default()
        });
        let inst = &corpus.instance;
        let dir = args.out_dir.join(&inst.instance_id);
        create_dir(&dir)?;
        write_corpus_csv(dir.join("corpus.csv"), &inst.papers, &CsvOptions::default())?;
        let human = dir.join("human.csv");
        let mut w = csv::Writer::from_path(&human)?;
        w.write_record(["description"])?;
        for d in inst.human_descriptions.iter().flatten() {
            w.write_record([d])?;
        }
        w.flush().map_err(|e| Error::io(&human, e))?;
        let manifest = toml::to_string(&ManifestOut {
            instance_id: &inst.instance_id,
            query: &inst.query,
            corpus_path: "corpus.csv",
            human_descriptions_path: "human.csv",
        })
        .map_err(|e| Error::Config(e.to_string()))?;
        let mpath = dir.join("manifest.toml");
        fs::write(&mpath, manifest).map_err(|e| Error::io(&mpath, e))?;
        for p in &inst.papers {
            for key in p.reference_keys() {
                let id = format!(
                    "R{:08x}",
                    xxhash_rust::xxh3::xxh3_64(key.normalized_title.as_bytes()) as u32
                );
                records.entry(id.clone()).or_insert(ExternalRecord {
                    record_id: id,
                    title: key.normalized_title,
                    year: key.year,
                    first_author_surname: key.first_author_surname,
                });
            }
        }
        println!(
            "{}: {} papers in {}",
            inst.instance_id,
            inst.papers.len(),
            dir.display()
        );
    }
    let rpath = args.out_dir.join("records.csv");
    let mut w = csv::Writer::from_path(&rpath)?;
    w.write_record(["record_id", "title", "year", "first_author_surname"])?;
    for r in records.values() {
        w.write_record([
            r.record_id.clone(),
            r.title.clone(),
            r.year.map(|y| y.to_string()).unwrap_or_default(),
            r.first_author_surname.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&rpath, e))?;
    Ok(())
}

/// Run a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let mut config = Config::load(cli.config.as_deref())?;
    if let Some(dir) = &cli.cache_dir {
        config.cache_dir = Some(dir.clone());
    }
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let ctx = Ctx {
        config,
        seed,
        offline: cli.offline,
    };
    match &cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Graph(a) => graph(&ctx, a),
        Command::Cluster(a) => cluster(&ctx, a),
        Command::Generate(a) => generate(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Report(a) => report(a),
        Command::Synth(a) => synth(&ctx, a),
    }
}

/// Parse, run, and map the outcome to an exit status: 0 success, 1 usage,
/// 2 data error, 3 external-service failure.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
