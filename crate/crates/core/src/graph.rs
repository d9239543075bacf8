//! Paper relation graphs: bibliographic coupling and direct citation, with
//! association-strength normalization, edge thresholds and link strength.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{PaperId, PaperRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationMode {
    /// Bibliographic coupling: shared cited references.
    Bc,
    /// Direct citation, projected to an undirected graph.
    Cit,
}

impl fmt::Display for RelationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationMode::Bc => "bc",
            RelationMode::Cit => "cit",
        })
    }
}

impl FromStr for RelationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bc" | "coupling" => Ok(RelationMode::Bc),
            "cit" | "citation" => Ok(RelationMode::Cit),
            other => Err(Error::Graph(format!("unknown relation mode {other:?}"))),
        }
    }
}

/// Weighted undirected paper graph. Each unordered pair is stored once with
/// the smaller id first; stored weights are strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationGraph {
    mode: RelationMode,
    nodes: Vec<PaperId>,
    edges: BTreeMap<(PaperId, PaperId), f64>,
    normalized: bool,
}

fn ordered(u: PaperId, v: PaperId) -> (PaperId, PaperId) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl RelationGraph {
    /// Graph with the given nodes and no edges.
    pub fn empty(mode: RelationMode, nodes: impl IntoIterator<Item = PaperId>) -> Self {
        let nodes: BTreeSet<PaperId> = nodes.into_iter().collect();
        RelationGraph {
            mode,
            nodes: nodes.into_iter().collect(),
            edges: BTreeMap::new(),
            normalized: false,
        }
    }

    /// Build from an explicit edge list. Parallel edges are summed.
    pub fn from_edges(
        mode: RelationMode,
        nodes: impl IntoIterator<Item = PaperId>,
        edges: impl IntoIterator<Item = (PaperId, PaperId, f64)>,
    ) -> Result<Self> {
        let mut g = Self::empty(mode, nodes);
        let node_set: BTreeSet<PaperId> = g.nodes.iter().copied().collect();
        for (u, v, w) in edges {
            if u == v {
                return Err(Error::Graph(format!("self-loop on node {u}")));
            }
            if !node_set.contains(&u) || !node_set.contains(&v) {
                return Err(Error::Graph(format!("edge ({u},{v}) references an unknown node")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Graph(format!("edge ({u},{v}) has non-positive weight {w}")));
            }
            *g.edges.entry(ordered(u, v)).or_insert(0.0) += w;
        }
        Ok(g)
    }

    pub fn mode(&self) -> RelationMode {
        self.mode
    }

    pub fn nodes(&self) -> &[PaperId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Weight of the pair in either orientation; 0 when absent.
    pub fn weight(&self, u: PaperId, v: PaperId) -> f64 {
        self.edges.get(&ordered(u, v)).copied().unwrap_or(0.0)
    }

    /// Edges as `(u, v, w)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (PaperId, PaperId, f64)> + '_ {
        self.edges.iter().map(|(&(u, v), &w)| (u, v, w))
    }

    /// Sum of edge weights, each unordered pair counted once (`w`, half of `2w`).
    pub fn total_weight(&self) -> f64 {
        self.edges.values().sum()
    }

    /// Copy with every weight multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut g = self.clone();
        for w in g.edges.values_mut() {
            *w *= factor;
        }
        g
    }

    /// Index of each node in [`RelationGraph::nodes`].
    pub fn index_of(&self) -> HashMap<PaperId, usize> {
        self.nodes.iter().enumerate().map(|(i, &id)| (id, i)).collect()
    }

    /// Neighbor lists by node index.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let index = self.index_of();
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (u, v, w) in self.edges() {
            let (iu, iv) = (index[&u], index[&v]);
            adj[iu].push((iv, w));
            adj[iv].push((iu, w));
        }
        adj
    }
}

/// Bibliographic coupling graph: `w_ij = |R_i ∩ R_j|` over normalized
/// reference identities (title and year).
pub fn coupling_graph(papers: &[PaperRecord]) -> RelationGraph {
    let mut citing: HashMap<(String, Option<i32>), BTreeSet<PaperId>> = HashMap::new();
    for p in papers {
        for key in p.reference_keys() {
            citing
                .entry((key.normalized_title, key.year))
                .or_default()
                .insert(p.paper_id);
        }
    }
    let mut g = RelationGraph::empty(RelationMode::Bc, papers.iter().map(|p| p.paper_id));
    for citers in citing.values() {
        let ids: Vec<PaperId> = citers.iter().copied().collect();
        for (a, &u) in ids.iter().enumerate() {
            for &v in &ids[a + 1..] {
                *g.edges.entry(ordered(u, v)).or_insert(0.0) += 1.0;
            }
        }
    }
    g
}

/// Undirected citation projection: `w_ij = c_ij + c_ji`.
pub fn citation_graph(papers: &[PaperRecord]) -> RelationGraph {
    let mut g = RelationGraph::empty(RelationMode::Cit, papers.iter().map(|p| p.paper_id));
    let ids: BTreeSet<PaperId> = g.nodes.iter().copied().collect();
    for p in papers {
        for &cited in &p.cited_in_corpus {
            if cited != p.paper_id && ids.contains(&cited) {
                *g.edges.entry(ordered(p.paper_id, cited)).or_insert(0.0) += 1.0;
            }
        }
    }
    g
}

pub fn build_raw_graph(papers: &[PaperRecord], mode: RelationMode) -> RelationGraph {
    match mode {
        RelationMode::Bc => coupling_graph(papers),
        RelationMode::Cit => citation_graph(papers),
    }
}

/// Replace each weight by `w_uv / (s_u · s_v)`, with `s` the raw link
/// strength of the input graph.
pub fn association_strength(graph: &RelationGraph) -> Result<RelationGraph> {
    if graph.normalized {
        return Err(Error::Graph("graph is already normalized".into()));
    }
    let strength = link_strength(graph);
    let mut g = graph.clone();
    for (&(u, v), w) in g.edges.iter_mut() {
        *w /= strength.get(u) * strength.get(v);
    }
    g.normalized = true;
    Ok(g)
}

/// Drop edges lighter than `min_weight`; all nodes are kept.
pub fn threshold_edges(graph: &RelationGraph, min_weight: f64) -> Result<RelationGraph> {
    if !(min_weight >= 0.0 && min_weight.is_finite()) {
        return Err(Error::Graph(format!(
            "min_weight must be a finite non-negative number, got {min_weight}"
        )));
    }
    let mut g = graph.clone();
    g.edges.retain(|_, w| *w >= min_weight);
    Ok(g)
}

/// Total incident edge weight per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkStrengthTable(BTreeMap<PaperId, f64>);

impl LinkStrengthTable {
    pub fn from_map(map: BTreeMap<PaperId, f64>) -> Self {
        LinkStrengthTable(map)
    }

    pub fn get(&self, id: PaperId) -> f64 {
        self.0.get(&id).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, id: PaperId) -> bool {
        self.0.contains_key(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (PaperId, f64)> + '_ {
        self.0.iter().map(|(&k, &v)| (k, v))
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    /// Ids by descending strength, ascending id on ties.
    pub fn ranked(&self) -> Vec<PaperId> {
        let mut ids: Vec<(PaperId, f64)> = self.iter().collect();
        ids.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ids.into_iter().map(|(id, _)| id).collect()
    }
}

pub fn link_strength(graph: &RelationGraph) -> LinkStrengthTable {
    let mut map: BTreeMap<PaperId, f64> = graph.nodes.iter().map(|&id| (id, 0.0)).collect();
    for (u, v, w) in graph.edges() {
        *map.get_mut(&u).unwrap() += w;
        *map.get_mut(&v).unwrap() += w;
    }
    LinkStrengthTable(map)
}

/// How a clustering graph is derived from a corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    pub mode: RelationMode,
    /// Apply association strength before clustering.
    pub normalize: bool,
    /// Threshold on raw weights, applied before normalization.
    pub min_raw_weight: f64,
    /// Threshold on normalized weights.
    pub min_normalized_weight: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            mode: RelationMode::Bc,
            normalize: true,
            min_raw_weight: 1.0,
            min_normalized_weight: 0.0,
        }
    }
}

impl GraphConfig {
    pub fn with_mode(mode: RelationMode) -> Self {
        GraphConfig {
            mode,
            ..Self::default()
        }
    }
}

/// Raw graph → raw threshold → (association strength → normalized threshold).
pub fn build_graph(papers: &[PaperRecord], config: &GraphConfig) -> Result<RelationGraph> {
    let raw = threshold_edges(&build_raw_graph(papers, config.mode), config.min_raw_weight)?;
    if config.normalize {
        threshold_edges(&association_strength(&raw)?, config.min_normalized_weight)
    } else {
        Ok(raw)
    }
}

/// Write `u,v,weight` rows.
pub fn write_edge_list(path: impl AsRef<Path>, graph: &RelationGraph) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["u", "v", "weight"])?;
    for (u, v, weight) in graph.edges() {
        w.write_record([u.to_string(), v.to_string(), weight.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write `paper_id,strength` rows in ranking order.
pub fn write_link_strengths(path: impl AsRef<Path>, table: &LinkStrengthTable) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["paper_id", "strength"])?;
    for id in table.ranked() {
        w.write_record([id.to_string(), table.get(id).to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn paper(id: PaperId, refs: &[&str]) -> PaperRecord {
        let mut p = PaperRecord::new(id, format!("Paper {id}"));
        p.raw_references = refs.iter().map(|r| r.to_string()).collect();
        p
    }

    #[test]
    fn coupling_counts_shared_references() {
        let g = coupling_graph(&[
            paper(1, &["Alpha", "Beta", "Gamma"]),
            paper(2, &["Beta", "Gamma", "Delta"]),
        ]);
        assert_eq!(g.weight(1, 2), 2.0);
        assert_eq!(g.weight(2, 1), 2.0);
        assert_eq!(g.mode(), RelationMode::Bc);
        assert!(!g.is_normalized());

        let g = coupling_graph(&[paper(1, &["Alpha"]), paper(2, &["Beta"])]);
        assert_eq!(g.edge_count(), 0);

        let five = ["One study", "Two study", "Three study", "Four study", "Five study"];
        let g = coupling_graph(&[paper(1, &five), paper(2, &five)]);
        assert_eq!(g.weight(1, 2), 5.0);
    }

    #[test]
    fn duplicate_reference_within_a_paper_counts_once() {
        let g = coupling_graph(&[paper(1, &["Alpha", "ALPHA!"]), paper(2, &["alpha"])]);
        assert_eq!(g.weight(1, 2), 1.0);
    }

    #[test]
    fn citation_projection_weights() {
        let mut a = PaperRecord::new(1, "A");
        let mut b = PaperRecord::new(2, "B");
        let c = PaperRecord::new(3, "C");
        a.cited_in_corpus.insert(2);
        let g = citation_graph(&[a.clone(), b.clone(), c.clone()]);
        assert_eq!(g.weight(1, 2), 1.0);
        assert_eq!(g.weight(1, 3), 0.0);
        b.cited_in_corpus.insert(1);
        let g = citation_graph(&[a, b, c]);
        assert_eq!(g.weight(1, 2), 2.0);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn association_strength_triangle_and_single_edge() {
        let tri =
            RelationGraph::from_edges(RelationMode::Bc, [1, 2, 3], [(1, 2, 1.0), (2, 3, 1.0), (1, 3, 1.0)]).unwrap();
        // hand computation: every s_u = 2, so 1 / (2 * 2)
        let n = association_strength(&tri).unwrap();
        for (_, _, w) in n.edges() {
            assert_eq!(w, 0.25);
        }
        assert!(n.is_normalized());
        assert!(association_strength(&n).is_err());

        let single = RelationGraph::from_edges(RelationMode::Bc, [1, 2, 9], [(1, 2, 4.0)]).unwrap();
        let n = association_strength(&single).unwrap();
        assert_eq!(n.weight(1, 2), 0.25);
        assert_eq!(link_strength(&n).get(9), 0.0);
        assert_eq!(n.node_count(), 3);
    }

    #[test]
    fn threshold_filters() {
        let g =
            RelationGraph::from_edges(RelationMode::Bc, [1, 2, 3, 4], [(1, 2, 0.1), (2, 3, 0.3), (3, 4, 0.5)]).unwrap();
        assert_eq!(threshold_edges(&g, 0.0).unwrap(), g);
        let t = threshold_edges(&g, 0.3).unwrap();
        assert_eq!(t.edge_count(), 2);
        let t = threshold_edges(&g, 0.6).unwrap();
        assert_eq!(t.edge_count(), 0);
        assert_eq!(t.node_count(), 4);
        assert!(threshold_edges(&g, -1.0).is_err());
    }

    #[test]
    fn link_strength_star_and_isolated() {
        let g = RelationGraph::from_edges(
            RelationMode::Bc,
            [1, 2, 3, 4, 5],
            [(1, 2, 1.0), (1, 3, 1.0), (1, 4, 1.0)],
        )
        .unwrap();
        let s = link_strength(&g);
        assert_eq!(s.get(1), 3.0);
        assert_eq!(s.get(5), 0.0);
        assert_eq!(s.ranked()[0], 1);
    }

    #[test]
    fn link_strength_matches_edge_list_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut edges = Vec::new();
        for u in 1..=8u64 {
            for v in (u + 1)..=8 {
                if rng.gen_bool(0.4) {
                    edges.push((u, v, rng.gen_range(0.1..3.0)));
                }
            }
        }
        let g = RelationGraph::from_edges(RelationMode::Bc, 1..=8, edges.clone()).unwrap();
        let s = link_strength(&g);
        for node in 1..=8u64 {
            let mut oracle = 0.0;
            for &(u, v, w) in &edges {
                if u == node || v == node {
                    oracle += w;
                }
            }
            assert!((s.get(node) - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(RelationGraph::from_edges(RelationMode::Bc, [1], [(1, 1, 1.0)]).is_err());
        assert!(RelationGraph::from_edges(RelationMode::Bc, [1, 2], [(1, 3, 1.0)]).is_err());
        assert!(RelationGraph::from_edges(RelationMode::Bc, [1, 2], [(1, 2, 0.0)]).is_err());
    }

    fn arb_graph() -> impl Strategy<Value = RelationGraph> {
        proptest::collection::vec((1u64..12, 1u64..12, 1u32..5), 0..30).prop_map(|raw| {
            let edges = raw
                .into_iter()
                .filter(|(u, v, _)| u != v)
                .map(|(u, v, w)| (u, v, w as f64));
            RelationGraph::from_edges(RelationMode::Bc, 1..12, edges).unwrap()
        })
    }

    proptest! {
        #[test]
        fn strength_total_is_twice_edge_weight(g in arb_graph()) {
            let s = link_strength(&g);
            prop_assert!((s.total() - 2.0 * g.total_weight()).abs() < 1e-9);
        }

        #[test]
        fn normalization_preserves_edge_presence(g in arb_graph()) {
            let n = association_strength(&g).unwrap();
            let before: Vec<_> = g.edges().map(|(u, v, _)| (u, v)).collect();
            let after: Vec<_> = n.edges().map(|(u, v, _)| (u, v)).collect();
            prop_assert_eq!(before, after);
            prop_assert!(n.edges().all(|(_, _, w)| w > 0.0));
        }

        #[test]
        fn coupling_weights_are_integers(refs in proptest::collection::vec(proptest::collection::vec("[a-e]{3}", 0..5), 2..6)) {
            let papers: Vec<PaperRecord> = refs.iter().enumerate().map(|(i, r)| {
                let mut p = PaperRecord::new(i as u64 + 1, "t");
                p.raw_references = r.clone();
                p
            }).collect();
            let g = coupling_graph(&papers);
            for (u, v, w) in g.edges() {
                prop_assert!(u < v);
                prop_assert_eq!(w.fract(), 0.0);
                prop_assert!(w >= 1.0);
            }
        }
    }
}
