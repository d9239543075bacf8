//! Seeded synthetic fixtures: planted-partition graphs and vocabulary-blocked
//! corpora with known cluster labels.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::corpus::{BenchmarkInstance, PaperId, PaperRecord};
use crate::graph::{RelationGraph, RelationMode};

/// Stochastic block model with equal blocks; node ids start at 1 and block
/// `b` holds ids `b*size+1 ..= (b+1)*size`. Edges have weight 1.
pub fn planted_partition_graph(
    blocks: usize,
    block_size: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> (RelationGraph, Partition) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (blocks * block_size) as u64;
    let block = |id: u64| (id - 1) / block_size as u64;
    let mut edges = Vec::new();
    for u in 1..=n {
        for v in (u + 1)..=n {
            let p = if block(u) == block(v) { p_in } else { p_out };
            if rng.gen_bool(p) {
                edges.push((u, v, 1.0));
            }
        }
    }
    let graph = RelationGraph::from_edges(RelationMode::Bc, 1..=n, edges).expect("generated edges are valid");
    let truth = Partition::from_labels((1..=n).map(|id| (id, block(id))));
    (graph, truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusConfig {
    pub blocks: usize,
    pub papers_per_block: usize,
    pub words_per_block: usize,
    pub refs_per_block: usize,
    pub refs_per_paper: usize,
    /// Chance that a title/abstract word or a reference comes from another block.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        SyntheticCorpusConfig {
            blocks: 4,
            papers_per_block: 10,
            words_per_block: 30,
            refs_per_block: 25,
            refs_per_paper: 8,
            noise: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub instance: BenchmarkInstance,
    pub planted: Partition,
    pub vocabularies: Vec<Vec<String>>,
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ru", "te", "sa", "no", "vi", "de", "po", "zu", "fa", "gi", "ho", "ne", "bra", "sti", "qua",
    "mor", "len",
];
const SURNAMES: &[&str] = &[
    "Abara", "Bello", "Castro", "Dunn", "Eriksen", "Fujita", "Garcia", "Haddad", "Ivanova", "Jensen",
];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(3..=4);
    (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Corpus whose papers draw title/abstract words and cited references from
/// a per-block pool, so both text similarity and coupling recover the blocks.
pub fn vocabulary_blocked_corpus(config: &SyntheticCorpusConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut seen = BTreeSet::new();
    let vocabularies: Vec<Vec<String>> = (0..config.blocks)
        .map(|_| {
            let mut words = Vec::new();
            while words.len() < config.words_per_block {
                let w = pseudo_word(&mut rng);
                if seen.insert(w.clone()) {
                    words.push(w);
                }
            }
            words
        })
        .collect();

    let pick_block = |rng: &mut ChaCha8Rng, home: usize| -> usize {
        if config.blocks > 1 && rng.gen_bool(config.noise) {
            let other = rng.gen_range(0..config.blocks - 1);
            if other >= home {
                other + 1
            } else {
                other
            }
        } else {
            home
        }
    };
    let word = |rng: &mut ChaCha8Rng, home: usize| -> String {
        let b = pick_block(rng, home);
        vocabularies[b].choose(rng).unwrap().clone()
    };

    let mut pools: Vec<Vec<String>> = Vec::new();
    for b in 0..config.blocks {
        let mut pool = Vec::new();
        for r in 0..config.refs_per_block {
            let title: Vec<String> = (0..5)
                .map(|_| vocabularies[b].choose(&mut rng).unwrap().clone())
                .collect();
            let surname = SURNAMES[(b * 7 + r) % SURNAMES.len()];
            let year = 1990 + rng.gen_range(0..25);
            pool.push(format!(
                "{surname}, A. ({year}). {} reference {}. Journal of Block {} Studies, {}, 1-10.",
                capitalize(&title.join(" ")),
                r + 1,
                b + 1,
                r + 1
            ));
        }
        pools.push(pool);
    }

    let mut papers = Vec::new();
    let mut labels = Vec::new();
    let mut id: PaperId = 0;
    for b in 0..config.blocks {
        for _ in 0..config.papers_per_block {
            id += 1;
            let title_words: Vec<String> = (0..6).map(|_| word(&mut rng, b)).collect();
            let mut paper = PaperRecord::new(id, capitalize(&title_words.join(" ")));
            let sentences: Vec<String> = (0..3)
                .map(|_| {
                    let ws: Vec<String> = (0..10).map(|_| word(&mut rng, b)).collect();
                    format!("{}.", capitalize(&ws.join(" ")))
                })
                .collect();
            paper.abstract_text = sentences.join(" ");
            paper.year = Some(2015 + rng.gen_range(0..8));
            paper.authors = vec![format!("{}, B.", SURNAMES[(id as usize) % SURNAMES.len()])];
            let mut refs = BTreeSet::new();
            while refs.len() < config.refs_per_paper.min(config.refs_per_block) {
                let pb = pick_block(&mut rng, b);
                refs.insert(pools[pb].choose(&mut rng).unwrap().clone());
            }
            paper.raw_references = refs.into_iter().collect();
            labels.push((id, b));
            papers.push(paper);
        }
    }

    let human_descriptions = (0..config.blocks)
        .map(|b| {
            let ws: Vec<&str> = vocabularies[b].iter().take(12).map(String::as_str).collect();
            format!("{}.", capitalize(&ws.join(" ")))
        })
        .collect();

    SyntheticCorpus {
        instance: BenchmarkInstance {
            instance_id: format!("synthetic-{}", config.seed),
            query: "synthetic block corpus".into(),
            papers,
            target_k: config.blocks,
            human_descriptions: Some(human_descriptions),
        },
        planted: Partition::from_labels(labels),
        vocabularies,
    }
}
