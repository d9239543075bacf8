//! Louvain community detection, modularity, and a resolution search that
//! targets a fixed cluster count.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::PaperId;
use crate::error::{Error, Result};
use crate::graph::{LinkStrengthTable, RelationGraph};

pub type ClusterId = u32;

/// Paper → cluster assignment with labels `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: BTreeMap<PaperId, ClusterId>,
    k: usize,
}

impl Partition {
    /// Validate an assignment whose labels must be exactly `1..=k`.
    pub fn new(assignment: BTreeMap<PaperId, ClusterId>) -> Result<Self> {
        let labels: BTreeSet<ClusterId> = assignment.values().copied().collect();
        let k = labels.len();
        if assignment.is_empty() {
            return Err(Error::Community("partition must assign at least one node".into()));
        }
        if labels.iter().copied().ne(1..=k as ClusterId) {
            return Err(Error::Community(format!(
                "cluster labels {labels:?} are not the contiguous range 1..={k}"
            )));
        }
        Ok(Partition { assignment, k })
    }

    /// Canonical relabelling of arbitrary labels: clusters numbered from 1 by
    /// decreasing size, ties broken by smallest member id.
    pub fn from_labels<L: Ord + Clone>(labels: impl IntoIterator<Item = (PaperId, L)>) -> Self {
        let mut groups: BTreeMap<L, Vec<PaperId>> = BTreeMap::new();
        for (id, label) in labels {
            groups.entry(label).or_default().push(id);
        }
        let mut clusters: Vec<Vec<PaperId>> = groups.into_values().collect();
        for c in &mut clusters {
            c.sort_unstable();
        }
        clusters.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        let mut assignment = BTreeMap::new();
        for (idx, members) in clusters.iter().enumerate() {
            for &id in members {
                assignment.insert(id, idx as ClusterId + 1);
            }
        }
        Partition {
            assignment,
            k: clusters.len(),
        }
    }

    /// Everything in one cluster.
    pub fn single_cluster(ids: impl IntoIterator<Item = PaperId>) -> Self {
        Self::from_labels(ids.into_iter().map(|id| (id, 0u8)))
    }

    pub fn singletons(ids: impl IntoIterator<Item = PaperId>) -> Self {
        Self::from_labels(ids.into_iter().map(|id| (id, id)))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn label(&self, id: PaperId) -> Option<ClusterId> {
        self.assignment.get(&id).copied()
    }

    pub fn assignment(&self) -> &BTreeMap<PaperId, ClusterId> {
        &self.assignment
    }

    pub fn node_ids(&self) -> impl Iterator<Item = PaperId> + '_ {
        self.assignment.keys().copied()
    }

    pub fn labels(&self) -> BTreeSet<ClusterId> {
        self.assignment.values().copied().collect()
    }

    /// Members per cluster, ids ascending.
    pub fn clusters(&self) -> BTreeMap<ClusterId, Vec<PaperId>> {
        let mut out: BTreeMap<ClusterId, Vec<PaperId>> = BTreeMap::new();
        for (&id, &c) in &self.assignment {
            out.entry(c).or_default().push(id);
        }
        out
    }

    /// Restriction to the given nodes, canonically relabelled.
    pub fn restricted_to(&self, ids: &BTreeSet<PaperId>) -> Partition {
        Partition::from_labels(
            self.assignment
                .iter()
                .filter(|(id, _)| ids.contains(id))
                .map(|(&id, &c)| (id, c)),
        )
    }
}

/// Write `paper_id,cluster_id` rows.
pub fn write_partition_csv(path: impl AsRef<Path>, partition: &Partition) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["paper_id", "cluster_id"])?;
    for (id, c) in partition.assignment() {
        w.write_record([id.to_string(), c.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_partition_csv(path: impl AsRef<Path>) -> Result<Partition> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let mut assignment = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize, what: &str| -> Result<u64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Community(format!("{}: bad {what} in row {:?}", path.display(), rec)))
        };
        let id = parse(0, "paper_id")?;
        let c = parse(1, "cluster_id")? as ClusterId;
        if assignment.insert(id, c).is_some() {
            return Err(Error::Community(format!(
                "{}: paper {id} assigned twice",
                path.display()
            )));
        }
    }
    Partition::new(assignment)
}

fn check_covers(graph: &RelationGraph, partition: &Partition) -> Result<()> {
    if let Some(missing) = graph.nodes().iter().find(|id| partition.label(**id).is_none()) {
        return Err(Error::Community(format!(
            "partition does not assign graph node {missing}"
        )));
    }
    Ok(())
}

/// Newman modularity (resolution 1).
pub fn modularity(graph: &RelationGraph, partition: &Partition) -> Result<f64> {
    modularity_with_resolution(graph, partition, 1.0)
}

/// `Q(γ) = Σ_c [ in_c / 2w − γ (tot_c / 2w)² ]`, with `in_c` the ordered-pair
/// weight inside `c` and `tot_c` its summed degree. Zero-weight graphs give 0.
pub fn modularity_with_resolution(graph: &RelationGraph, partition: &Partition, resolution: f64) -> Result<f64> {
    check_covers(graph, partition)?;
    if graph.total_weight() == 0.0 {
        return Ok(0.0);
    }
    // tot_c is built from in_c and the cut so that a cluster holding every
    // edge gives in_c / 2w == tot_c / 2w == 1 exactly
    let mut inside: BTreeMap<ClusterId, f64> = BTreeMap::new();
    let mut cut: BTreeMap<ClusterId, f64> = BTreeMap::new();
    for (u, v, w) in graph.edges() {
        let (cu, cv) = (partition.label(u).unwrap(), partition.label(v).unwrap());
        if cu == cv {
            *inside.entry(cu).or_default() += w;
        } else {
            *cut.entry(cu).or_default() += w;
            *cut.entry(cv).or_default() += w;
        }
    }
    let clusters: BTreeSet<ClusterId> = inside.keys().chain(cut.keys()).copied().collect();
    let parts: Vec<(f64, f64)> = clusters
        .iter()
        .map(|c| {
            let i = 2.0 * inside.get(c).copied().unwrap_or(0.0);
            (i, i + cut.get(c).copied().unwrap_or(0.0))
        })
        .collect();
    let two_w: f64 = parts.iter().map(|&(_, tot)| tot).sum();
    let q = parts
        .iter()
        .map(|&(i, tot)| i / two_w - resolution * (tot / two_w).powi(2))
        .sum();
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LouvainOptions {
    /// Move isolated nodes into cluster 1 instead of keeping them as singletons.
    pub attach_isolated: bool,
    /// Cap on local-moving sweeps per level.
    pub max_sweeps: usize,
}

impl Default for LouvainOptions {
    fn default() -> Self {
        LouvainOptions {
            attach_isolated: false,
            max_sweeps: 1000,
        }
    }
}

/// One aggregation level. `self_w[i]` holds the ordered-pair weight inside
/// node `i`, so `degree[i] = self_w[i] + Σ_j adj[i][j]`.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    degree: Vec<f64>,
    self_w: Vec<f64>,
}

impl Level {
    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Greedy local moving; returns community per node and whether anything moved.
    fn local_moving(&self, resolution: f64, two_w: f64, rng: &mut ChaCha8Rng, max_sweeps: usize) -> (Vec<usize>, bool) {
        let n = self.len();
        let mut comm: Vec<usize> = (0..n).collect();
        let mut tot = self.degree.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);

        let mut neigh_w = vec![0.0f64; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut any_move = false;
        for _ in 0..max_sweeps {
            let mut moved = false;
            for &i in &order {
                let ki = self.degree[i];
                let ci = comm[i];
                for &c in &touched {
                    neigh_w[c] = 0.0;
                }
                touched.clear();
                for &(j, w) in &self.adj[i] {
                    let c = comm[j];
                    if neigh_w[c] == 0.0 && !touched.contains(&c) {
                        touched.push(c);
                    }
                    neigh_w[c] += w;
                }
                tot[ci] -= ki;
                let gain = |c: usize, wc: f64| wc - resolution * tot[c] * ki / two_w;
                let mut best = ci;
                let mut best_gain = gain(ci, neigh_w[ci]);
                let eps = 1e-10 * ki;
                for &c in &touched {
                    let g = gain(c, neigh_w[c]);
                    if g > best_gain + eps {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += ki;
                if best != ci {
                    comm[i] = best;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
            any_move = true;
        }
        (comm, any_move)
    }

    /// Collapse communities into nodes. `comm` must be renumbered `0..nc`.
    fn aggregate(&self, comm: &[usize], nc: usize) -> Level {
        let mut degree = vec![0.0; nc];
        let mut self_w = vec![0.0; nc];
        let mut links: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); nc];
        for i in 0..self.len() {
            let ci = comm[i];
            degree[ci] += self.degree[i];
            self_w[ci] += self.self_w[i];
            for &(j, w) in &self.adj[i] {
                let cj = comm[j];
                if ci == cj {
                    self_w[ci] += w;
                } else {
                    *links[ci].entry(cj).or_default() += w;
                }
            }
        }
        Level {
            adj: links.into_iter().map(|m| m.into_iter().collect()).collect(),
            degree,
            self_w,
        }
    }
}

fn renumber(comm: &mut [usize]) -> usize {
    let mut map = BTreeMap::new();
    for c in comm.iter_mut() {
        let next = map.len();
        *c = *map.entry(*c).or_insert(next);
    }
    map.len()
}

/// Louvain with default options.
pub fn louvain(graph: &RelationGraph, resolution: f64, seed: u64) -> Result<Partition> {
    louvain_with(graph, resolution, seed, &LouvainOptions::default())
}

/// Two-phase Louvain maximizing `Q(γ)`. Node visiting order is shuffled by
/// `seed`, so identical inputs give identical partitions.
pub fn louvain_with(graph: &RelationGraph, resolution: f64, seed: u64, options: &LouvainOptions) -> Result<Partition> {
    if graph.node_count() == 0 {
        return Err(Error::Community("cannot cluster an empty graph".into()));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::Community(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let adj = graph.adjacency();
    let degree: Vec<f64> = adj.iter().map(|n| n.iter().map(|(_, w)| w).sum()).collect();
    let two_w: f64 = degree.iter().sum();
    let n = adj.len();
    let mut membership: Vec<usize> = (0..n).collect();

    if two_w > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut level = Level {
            adj,
            degree,
            self_w: vec![0.0; n],
        };
        loop {
            let (mut comm, moved) = level.local_moving(resolution, two_w, &mut rng, options.max_sweeps);
            if !moved {
                break;
            }
            let nc = renumber(&mut comm);
            for m in membership.iter_mut() {
                *m = comm[*m];
            }
            if nc == level.len() {
                break;
            }
            level = level.aggregate(&comm, nc);
        }
    }

    let nodes = graph.nodes();
    let mut partition = Partition::from_labels(nodes.iter().zip(&membership).map(|(&id, &m)| (id, m)));
    if options.attach_isolated {
        let strengths = crate::graph::link_strength(graph);
        let isolated: BTreeSet<PaperId> = nodes.iter().copied().filter(|&id| strengths.get(id) == 0.0).collect();
        if isolated.len() < nodes.len() {
            let labels = partition
                .assignment()
                .iter()
                .map(|(&id, &c)| (id, if isolated.contains(&id) { 0 } else { c }));
            let merged: Vec<(PaperId, ClusterId)> = labels.collect();
            // cluster 0 is folded into the largest connected cluster
            let largest = partition
                .clusters()
                .into_iter()
                .find(|(_, m)| !m.iter().all(|id| isolated.contains(id)))
                .map(|(c, _)| c)
                .unwrap_or(1);
            partition =
                Partition::from_labels(merged.into_iter().map(|(id, c)| (id, if c == 0 { largest } else { c })));
        }
    }
    Ok(partition)
}

/// Bounds and budget of the resolution search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolutionSearch {
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub grid_points: usize,
    pub bisection_steps: usize,
    pub louvain: LouvainOptions,
}

impl Default for ResolutionSearch {
    fn default() -> Self {
        ResolutionSearch {
            gamma_lo: 0.1,
            gamma_hi: 10.0,
            grid_points: 25,
            bisection_steps: 20,
            louvain: LouvainOptions::default(),
        }
    }
}

/// One Louvain run during the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub resolution: f64,
    pub achieved_k: usize,
    /// Modularity at resolution 1.
    pub modularity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionSearchResult {
    pub resolution: f64,
    pub partition: Partition,
    pub achieved_k: usize,
    pub exact: bool,
    pub trace: Vec<Probe>,
}

/// Search γ so that Louvain yields `target_k` clusters, with the default
/// bounds (0.1–10, 25-point log grid, ≤ 20 bisection steps).
pub fn tune_resolution_to_k(graph: &RelationGraph, target_k: usize, seed: u64) -> Result<ResolutionSearchResult> {
    tune_resolution_with(graph, target_k, seed, &ResolutionSearch::default())
}

/// Coarse log grid then bisection between the first bracketing pair. The
/// first exact hit wins; otherwise the probe with k nearest the target
/// (smaller k on ties, earliest probe among equals). Only the cluster count
/// is targeted.
pub fn tune_resolution_with(
    graph: &RelationGraph,
    target_k: usize,
    seed: u64,
    search: &ResolutionSearch,
) -> Result<ResolutionSearchResult> {
    if target_k == 0 {
        return Err(Error::Community("target_k must be at least 1".into()));
    }
    if target_k > graph.node_count() {
        return Err(Error::Community(format!(
            "target_k {target_k} exceeds node count {}",
            graph.node_count()
        )));
    }
    if !(search.gamma_lo > 0.0 && search.gamma_hi >= search.gamma_lo && search.grid_points >= 1) {
        return Err(Error::Community("invalid resolution search bounds".into()));
    }

    let run = |gamma: f64| -> Result<(Probe, Partition)> {
        let partition = louvain_with(graph, gamma, seed, &search.louvain)?;
        let probe = Probe {
            resolution: gamma,
            achieved_k: partition.k(),
            modularity: modularity(graph, &partition)?,
        };
        log::info!(
            "resolution probe gamma={:.6} achieved_k={} Q={:.6}",
            probe.resolution,
            probe.achieved_k,
            probe.modularity
        );
        Ok((probe, partition))
    };

    let (lo, hi) = (search.gamma_lo.ln(), search.gamma_hi.ln());
    let steps = search.grid_points.max(2) - 1;
    let grid: Vec<f64> = if search.grid_points == 1 {
        vec![search.gamma_lo]
    } else {
        (0..=steps)
            .map(|i| (lo + (hi - lo) * i as f64 / steps as f64).exp())
            .collect()
    };
    let grid_results: Vec<(Probe, Partition)> = grid.par_iter().map(|&g| run(g)).collect::<Result<_>>()?;

    let mut trace = Vec::new();
    let mut best: Option<(Probe, Partition)> = None;
    let consider = |probe: &Probe, partition: &Partition, best: &mut Option<(Probe, Partition)>| {
        let better = match best {
            None => true,
            Some((b, _)) => {
                let d_new = probe.achieved_k.abs_diff(target_k);
                let d_old = b.achieved_k.abs_diff(target_k);
                d_new < d_old || (d_new == d_old && probe.achieved_k < b.achieved_k)
            }
        };
        if better {
            *best = Some((probe.clone(), partition.clone()));
        }
    };

    for (probe, partition) in &grid_results {
        trace.push(probe.clone());
        consider(probe, partition, &mut best);
        if probe.achieved_k == target_k {
            return Ok(finish(probe.clone(), partition.clone(), target_k, trace));
        }
    }

    let bracket = grid_results
        .windows(2)
        .find(|w| w[0].0.achieved_k < target_k && w[1].0.achieved_k > target_k)
        .map(|w| (w[0].0.resolution, w[1].0.resolution));
    if let Some((mut a, mut b)) = bracket {
        for _ in 0..search.bisection_steps {
            let mid = (a * b).sqrt();
            let (probe, partition) = run(mid)?;
            trace.push(probe.clone());
            consider(&probe, &partition, &mut best);
            match probe.achieved_k.cmp(&target_k) {
                std::cmp::Ordering::Equal => return Ok(finish(probe, partition, target_k, trace)),
                std::cmp::Ordering::Less => a = mid,
                std::cmp::Ordering::Greater => b = mid,
            }
        }
    }

    let (probe, partition) = best.expect("grid has at least one probe");
    Ok(finish(probe, partition, target_k, trace))
}

fn finish(probe: Probe, partition: Partition, target_k: usize, trace: Vec<Probe>) -> ResolutionSearchResult {
    ResolutionSearchResult {
        resolution: probe.resolution,
        achieved_k: partition.k(),
        exact: partition.k() == target_k,
        partition,
        trace,
    }
}

/// Top `k_top` papers of each cluster by descending link strength
/// (ascending id on ties).
pub fn rank_cluster_papers(
    partition: &Partition,
    strengths: &LinkStrengthTable,
    k_top: usize,
) -> Result<BTreeMap<ClusterId, Vec<PaperId>>> {
    if let Some(missing) = partition.node_ids().find(|&id| !strengths.contains(id)) {
        return Err(Error::Community(format!("no link strength for paper {missing}")));
    }
    Ok(partition
        .clusters()
        .into_iter()
        .map(|(c, mut members)| {
            members.sort_by(|&a, &b| strengths.get(b).total_cmp(&strengths.get(a)).then(a.cmp(&b)));
            members.truncate(k_top);
            (c, members)
        })
        .collect())
}
