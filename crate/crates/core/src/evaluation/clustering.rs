use std::collections::{BTreeMap, BTreeSet};

use crate::community::{modularity, ClusterId, Partition};
use crate::corpus::PaperId;
use crate::embedding::{cosine, EmbeddingVector};
use crate::error::{Error, Result};
use crate::graph::RelationGraph;

use super::scorer::max_cosine;

/// Mean over `corpus` atoms of the best cosine against any `descriptions` atom.
pub fn semantic_coverage(corpus: &[EmbeddingVector], descriptions: &[EmbeddingVector]) -> Result<f64> {
    if corpus.is_empty() || descriptions.is_empty() {
        return Err(Error::Metric(
            "coverage needs non-empty corpus and description atoms".into(),
        ));
    }
    let mut sum = 0.0;
    for s in corpus {
        sum += max_cosine(s, descriptions)?;
    }
    Ok(sum / corpus.len() as f64)
}

/// Paper assignments to the nearest description, keeping the description ids.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedPartition {
    pub assignment: BTreeMap<PaperId, ClusterId>,
}

impl InducedPartition {
    /// Canonically relabelled partition (descriptions that attract no paper vanish).
    pub fn partition(&self) -> Partition {
        Partition::from_labels(self.assignment.iter().map(|(&p, &c)| (p, c)))
    }
}

/// Assign each paper to the description with the highest cosine; ties go
/// to the lowest cluster id.
pub fn induce_partition(
    papers: &[(PaperId, EmbeddingVector)],
    descriptions: &[(ClusterId, EmbeddingVector)],
) -> Result<InducedPartition> {
    if descriptions.is_empty() {
        return Err(Error::Metric("cannot induce a partition without descriptions".into()));
    }
    let mut order: Vec<&(ClusterId, EmbeddingVector)> = descriptions.iter().collect();
    order.sort_by_key(|(c, _)| *c);
    let mut assignment = BTreeMap::new();
    for (pid, v) in papers {
        let mut best: Option<(ClusterId, f64)> = None;
        for (c, d) in &order {
            let s = cosine(v, d)?;
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((*c, s));
            }
        }
        assignment.insert(*pid, best.expect("non-empty descriptions").0);
    }
    Ok(InducedPartition { assignment })
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index from the contingency table of two partitions of the
/// same node set. Degenerate cases with a zero denominator score 1.
pub fn ari(a: &Partition, b: &Partition) -> Result<f64> {
    let na: BTreeSet<PaperId> = a.node_ids().collect();
    let nb: BTreeSet<PaperId> = b.node_ids().collect();
    if na != nb {
        let only_a = na.difference(&nb).count();
        let only_b = nb.difference(&na).count();
        return Err(Error::Metric(format!(
            "partitions cover different nodes ({only_a} only in the first, {only_b} only in the second)"
        )));
    }
    let n = na.len() as u64;
    let mut table: BTreeMap<(ClusterId, ClusterId), u64> = BTreeMap::new();
    let mut rows: BTreeMap<ClusterId, u64> = BTreeMap::new();
    let mut cols: BTreeMap<ClusterId, u64> = BTreeMap::new();
    for (id, &la) in a.assignment() {
        let lb = b.label(*id).expect("same node set");
        *table.entry((la, lb)).or_default() += 1;
        *rows.entry(la).or_default() += 1;
        *cols.entry(lb).or_default() += 1;
    }
    let index: f64 = table.values().map(|&x| choose2(x)).sum();
    let sum_a: f64 = rows.values().map(|&x| choose2(x)).sum();
    let sum_b: f64 = cols.values().map(|&x| choose2(x)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = (sum_a + sum_b) / 2.0;
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Mean silhouette under cosine distance. Singleton clusters score 0.
/// Papers missing from `embeddings` are ignored.
pub fn silhouette(embeddings: &BTreeMap<PaperId, EmbeddingVector>, partition: &Partition) -> Result<f64> {
    let mut members: BTreeMap<ClusterId, Vec<&EmbeddingVector>> = BTreeMap::new();
    for (id, v) in embeddings {
        let c = partition
            .label(*id)
            .ok_or_else(|| Error::Metric(format!("paper {id} has no cluster")))?;
        members.entry(c).or_default().push(v);
    }
    if members.len() < 2 {
        return Err(Error::Metric(format!(
            "silhouette needs at least 2 clusters, got {}",
            members.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (&c, vs) in &members {
        for (i, v) in vs.iter().enumerate() {
            count += 1;
            if vs.len() == 1 {
                continue;
            }
            let mut intra = 0.0;
            for (j, w) in vs.iter().enumerate() {
                if i != j {
                    intra += 1.0 - cosine(v, w)?;
                }
            }
            let a = intra / (vs.len() - 1) as f64;
            let mut b = f64::INFINITY;
            for (&o, ws) in &members {
                if o == c {
                    continue;
                }
                let mut d = 0.0;
                for w in ws {
                    d += 1.0 - cosine(v, w)?;
                }
                b = b.min(d / ws.len() as f64);
            }
            let m = a.max(b);
            if m > 0.0 {
                total += (b - a) / m;
            }
        }
    }
    Ok(total / count as f64)
}

/// Modularity of an induced partition on the relation graph.
pub fn induced_modularity(graph: &RelationGraph, induced: &Partition) -> Result<f64> {
    modularity(graph, induced)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Pair-counting ARI: classify every unordered pair directly.
    pub(crate) fn ari_oracle(a: &[u32], b: &[u32]) -> f64 {
        let n = a.len();
        let (mut both, mut only_a, mut only_b, mut neither) = (0f64, 0f64, 0f64, 0f64);
        for i in 0..n {
            for j in i + 1..n {
                match (a[i] == a[j], b[i] == b[j]) {
                    (true, true) => both += 1.0,
                    (true, false) => only_a += 1.0,
                    (false, true) => only_b += 1.0,
                    (false, false) => neither += 1.0,
                }
            }
        }
        let pairs = both + only_a + only_b + neither;
        if pairs == 0.0 {
            return 1.0;
        }
        let sa = both + only_a;
        let sb = both + only_b;
        let expected = sa * sb / pairs;
        let max = (sa + sb) / 2.0;
        if max == expected {
            return 1.0;
        }
        (both - expected) / (max - expected)
    }

    fn part(labels: &[u32]) -> Partition {
        Partition::from_labels(labels.iter().enumerate().map(|(i, &l)| (i as PaperId + 1, l)))
    }

    fn unit(v: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn ari_basic_cases() {
        let a = part(&[1, 1, 2, 2, 3, 3]);
        assert_eq!(ari(&a, &a).unwrap(), 1.0);
        assert_eq!(ari(&a, &part(&[7, 7, 7, 7, 7, 7])).unwrap(), 0.0);
        assert!(ari(&a, &part(&[1, 1, 2])).is_err());
    }

    #[test]
    fn ari_matches_pair_counting_on_random_partitions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.gen_range(2..=12);
            let a: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=4)).collect();
            let b: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=4)).collect();
            let got = ari(&part(&a), &part(&b)).unwrap();
            assert!((got - ari_oracle(&a, &b)).abs() < 1e-12, "{a:?} {b:?}");
        }
    }

    #[test]
    fn coverage_cases() {
        let s = vec![unit(&[1.0, 0.0]), unit(&[0.0, 1.0])];
        assert!((semantic_coverage(&s, &s).unwrap() - 1.0).abs() < 1e-12);
        let b = vec![unit(&[1.0, 1.0])];
        let one = semantic_coverage(&s[..1], &b).unwrap();
        assert!((one - cosine(&s[0], &b[0]).unwrap()).abs() < 1e-15);
        assert!(semantic_coverage(&[], &b).is_err());
        assert!(semantic_coverage(&s, &[]).is_err());
    }

    #[test]
    fn coverage_matches_double_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut random = |n: usize| -> Vec<EmbeddingVector> {
            (0..n)
                .map(|_| unit(&(0..16).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()))
                .collect()
        };
        let s = random(10);
        let b = random(4);
        let mut oracle = 0.0;
        for x in &s {
            let mut best = f64::NEG_INFINITY;
            for y in &b {
                let dot: f64 = x.values().iter().zip(y.values()).map(|(p, q)| p * q).sum();
                best = best.max(dot);
            }
            oracle += best;
        }
        oracle /= s.len() as f64;
        assert!((semantic_coverage(&s, &b).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn induce_partition_rules() {
        let papers = vec![
            (1, unit(&[1.0, 0.0, 0.0])),
            (2, unit(&[0.0, 1.0, 0.0])),
            (3, unit(&[0.0, 0.0, 1.0])),
        ];
        let descs = vec![
            (2, unit(&[0.0, 1.0, 0.0])),
            (1, unit(&[1.0, 0.0, 0.0])),
            (3, unit(&[0.0, 0.0, 1.0])),
        ];
        let ind = induce_partition(&papers, &descs).unwrap();
        assert_eq!(ind.assignment, BTreeMap::from([(1, 1), (2, 2), (3, 3)]));
        let same = vec![(5, unit(&[1.0, 1.0, 1.0])), (4, unit(&[1.0, 1.0, 1.0]))];
        let ind = induce_partition(&papers, &same).unwrap();
        assert!(ind.assignment.values().all(|&c| c == 4));
        assert_eq!(ind.partition().k(), 1);
        assert!(induce_partition(&papers, &[]).is_err());
    }

    /// Direct silhouette over index lists.
    fn silhouette_oracle(points: &[Vec<f64>], labels: &[u32]) -> f64 {
        let dist = |i: usize, j: usize| {
            let dot: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| a * b).sum();
            let na: f64 = points[i].iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = points[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            1.0 - dot / (na * nb)
        };
        let n = points.len();
        let mut s = 0.0;
        for i in 0..n {
            let same: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
            if same.is_empty() {
                continue;
            }
            let a = same.iter().map(|&j| dist(i, j)).sum::<f64>() / same.len() as f64;
            let others: BTreeSet<u32> = labels.iter().copied().filter(|&l| l != labels[i]).collect();
            let b = others
                .iter()
                .map(|&l| {
                    let js: Vec<usize> = (0..n).filter(|&j| labels[j] == l).collect();
                    js.iter().map(|&j| dist(i, j)).sum::<f64>() / js.len() as f64
                })
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                s += (b - a) / m;
            }
        }
        s / n as f64
    }

    #[test]
    fn silhouette_cases() {
        let blob = |c: f64, n: usize| -> Vec<Vec<f64>> { (0..n).map(|i| vec![c, 1.0 - c, 0.001 * i as f64]).collect() };
        let mut pts = blob(1.0, 5);
        pts.extend(blob(0.0, 5));
        let labels: Vec<u32> = (0..10).map(|i| if i < 5 { 1 } else { 2 }).collect();
        let emb: BTreeMap<PaperId, EmbeddingVector> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| (i as PaperId + 1, unit(p)))
            .collect();
        assert!(silhouette(&emb, &part(&labels)).unwrap() > 0.9);

        let same: BTreeMap<PaperId, EmbeddingVector> = (1..=4).map(|i| (i, unit(&[1.0, 2.0]))).collect();
        assert_eq!(silhouette(&same, &part(&[1, 1, 2, 2])).unwrap(), 0.0);
        assert!(silhouette(&same, &part(&[1, 1, 1, 1])).is_err());

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let pts: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<u32> = (0..10).map(|i| [1, 2, 3][i % 3]).collect();
        let emb: BTreeMap<PaperId, EmbeddingVector> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| (i as PaperId + 1, unit(p)))
            .collect();
        let got = silhouette(&emb, &part(&labels)).unwrap();
        assert!((got - silhouette_oracle(&pts, &labels)).abs() < 1e-12);
    }

    #[test]
    fn induced_modularity_matches_louvain_q() {
        let (g, _) = crate::synth::planted_partition_graph(3, 8, 0.8, 0.05, 4);
        let p = crate::community::louvain(&g, 1.0, 1).unwrap();
        assert_eq!(induced_modularity(&g, &p).unwrap(), modularity(&g, &p).unwrap());
        let one = Partition::single_cluster(g.nodes().iter().copied());
        assert!(induced_modularity(&g, &one).unwrap().abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn ari_symmetric_and_relabel_invariant(a in proptest::collection::vec(1u32..5, 2..12), seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<u32> = a.iter().map(|_| rng.gen_range(1..5)).collect();
            let x = ari(&part(&a), &part(&b)).unwrap();
            prop_assert!((x - ari(&part(&b), &part(&a)).unwrap()).abs() < 1e-12);
            let relabelled: Vec<u32> = a.iter().map(|l| 10 - l).collect();
            prop_assert!((x - ari(&part(&relabelled), &part(&b)).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&x));
        }

        #[test]
        fn coverage_monotone_in_descriptions(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut random = |n: usize| -> Vec<EmbeddingVector> {
                (0..n).map(|_| unit(&(0..8).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>())).collect()
            };
            let s = random(6);
            let mut b = random(2);
            let before = semantic_coverage(&s, &b).unwrap();
            b.extend(random(1));
            prop_assert!(semantic_coverage(&s, &b).unwrap() >= before);
        }

        #[test]
        fn induce_partition_ignores_description_order(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut vec = || unit(&(0..6).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
            let papers: Vec<(PaperId, EmbeddingVector)> = (1..=8).map(|i| (i, vec())).collect();
            let descs: Vec<(ClusterId, EmbeddingVector)> = (1..=4).map(|c| (c, vec())).collect();
            let mut rev = descs.clone();
            rev.reverse();
            prop_assert_eq!(induce_partition(&papers, &descs).unwrap(), induce_partition(&papers, &rev).unwrap());
        }
    }
}
