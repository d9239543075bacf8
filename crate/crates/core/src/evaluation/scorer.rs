use crate::embedding::{cosine, pairwise_similarity, EmbeddingProvider, EmbeddingVector, SimilarityMatrix};
use crate::error::{Error, Result};

use super::alignment::{optimal_alignment, Assignment};

/// Pairwise text similarity used for matching generated to human descriptions.
pub trait TextScorer: Send + Sync {
    /// Identifier recorded next to every score.
    fn id(&self) -> String;

    /// `rows × cols` scores of `a[u]` against `b[v]`.
    fn score_matrix(&self, a: &[String], b: &[String], provider: &dyn EmbeddingProvider) -> Result<SimilarityMatrix>;
}

/// Cosine of whole-text embeddings.
#[derive(Debug, Clone, Copy, Default)]
pub struct SentenceCosineScorer;

impl TextScorer for SentenceCosineScorer {
    fn id(&self) -> String {
        "sentence-cosine".into()
    }

    fn score_matrix(&self, a: &[String], b: &[String], provider: &dyn EmbeddingProvider) -> Result<SimilarityMatrix> {
        let ea = provider.embed_texts(a)?;
        let eb = provider.embed_texts(b)?;
        pairwise_similarity(&ea, &eb)
    }
}

/// Greedy token matching F1: each token of one text is matched to its most
/// similar token in the other; precision and recall are the mean maxima.
/// With `rescale = Some(baseline)`, F1 becomes `(F1 − baseline)/(1 − baseline)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyTokenScorer {
    pub rescale: Option<f64>,
}

impl GreedyTokenScorer {
    pub fn f1(&self, candidate: &[EmbeddingVector], reference: &[EmbeddingVector]) -> Result<f64> {
        if candidate.is_empty() || reference.is_empty() {
            return Ok(0.0);
        }
        let sim = pairwise_similarity(candidate, reference)?;
        let precision = (0..sim.rows())
            .map(|r| sim.row(r).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .sum::<f64>()
            / sim.rows() as f64;
        let t = sim.transpose();
        let recall = (0..t.rows())
            .map(|r| t.row(r).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .sum::<f64>()
            / t.rows() as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Ok(match self.rescale {
            Some(b) if b < 1.0 => (f1 - b) / (1.0 - b),
            _ => f1,
        })
    }
}

fn tokens_of(provider: &dyn EmbeddingProvider, text: &str) -> Result<Vec<EmbeddingVector>> {
    provider.embed_tokens(text).unwrap_or_else(|| {
        Err(Error::Metric(format!(
            "provider {} has no token embeddings",
            provider.provider_id()
        )))
    })
}

impl TextScorer for GreedyTokenScorer {
    fn id(&self) -> String {
        match self.rescale {
            Some(b) => format!("greedy-token-f1(rescale={b})"),
            None => "greedy-token-f1".into(),
        }
    }

    fn score_matrix(&self, a: &[String], b: &[String], provider: &dyn EmbeddingProvider) -> Result<SimilarityMatrix> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::Metric("score matrix needs non-empty inputs".into()));
        }
        let ta = a.iter().map(|t| tokens_of(provider, t)).collect::<Result<Vec<_>>>()?;
        let tb = b.iter().map(|t| tokens_of(provider, t)).collect::<Result<Vec<_>>>()?;
        let rows = ta
            .iter()
            .map(|x| tb.iter().map(|y| self.f1(x, y)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        SimilarityMatrix::from_rows(rows)
    }
}

/// Greedy token F1 when the provider exposes token vectors, sentence cosine otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultScorer {
    pub token: GreedyTokenScorer,
}

impl DefaultScorer {
    fn pick(&self, provider: &dyn EmbeddingProvider) -> Box<dyn TextScorer + '_> {
        if provider.embed_tokens("probe").is_some() {
            Box::new(self.token)
        } else {
            Box::new(SentenceCosineScorer)
        }
    }

    /// Id of the scorer that would run against `provider`.
    pub fn resolved_id(&self, provider: &dyn EmbeddingProvider) -> String {
        self.pick(provider).id()
    }
}

impl TextScorer for DefaultScorer {
    fn id(&self) -> String {
        format!("default({})", self.token.id())
    }

    fn score_matrix(&self, a: &[String], b: &[String], provider: &dyn EmbeddingProvider) -> Result<SimilarityMatrix> {
        self.pick(provider).score_matrix(a, b, provider)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumanAlignment {
    pub assignment: Assignment,
    /// Mean matched score.
    pub score: f64,
}

/// Match generated descriptions to human ones one-to-one and average the
/// matched scores.
pub fn human_alignment(
    generated: &[String],
    human: &[String],
    scorer: &dyn TextScorer,
    provider: &dyn EmbeddingProvider,
) -> Result<HumanAlignment> {
    if generated.len() != human.len() {
        return Err(Error::Metric(format!(
            "{} generated descriptions cannot be matched one-to-one with {} human descriptions",
            generated.len(),
            human.len()
        )));
    }
    let matrix = scorer.score_matrix(generated, human, provider)?;
    let assignment = optimal_alignment(&matrix)?;
    let score = assignment.mean();
    Ok(HumanAlignment { assignment, score })
}

/// Best cosine of `v` against any of `others`.
pub(crate) fn max_cosine(v: &EmbeddingVector, others: &[EmbeddingVector]) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for o in others {
        best = best.max(cosine(v, o)?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashEmbedder;

    #[test]
    fn default_scorer_uses_tokens_when_available() {
        let p = HashEmbedder::default();
        assert_eq!(DefaultScorer::default().resolved_id(&p), "greedy-token-f1");
    }

    #[test]
    fn identical_texts_score_one() {
        let p = HashEmbedder::default();
        let texts = vec![
            "graph neural networks for molecules".to_string(),
            "supply chain resilience".to_string(),
        ];
        for scorer in [&SentenceCosineScorer as &dyn TextScorer, &GreedyTokenScorer::default()] {
            let m = scorer.score_matrix(&texts, &texts, &p).unwrap();
            assert!((m.get(0, 0) - 1.0).abs() < 1e-9 && (m.get(1, 1) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn alignment_recovers_permutation() {
        let p = HashEmbedder::default();
        let human: Vec<String> = [
            "digital twins in manufacturing",
            "blockchain supply chains",
            "deep reinforcement learning",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let generated = vec![human[2].clone(), human[0].clone(), human[1].clone()];
        let a = human_alignment(&generated, &human, &SentenceCosineScorer, &p).unwrap();
        assert_eq!(a.assignment.pairs, vec![(0, 2), (1, 0), (2, 1)]);
        assert!((a.score - 1.0).abs() < 1e-9);
        assert!(human_alignment(&generated[..2], &human, &SentenceCosineScorer, &p).is_err());
    }

    #[test]
    fn rescale_maps_baseline_to_zero() {
        let v = vec![EmbeddingVector::new(vec![1.0, 0.0]).unwrap()];
        let s = GreedyTokenScorer { rescale: Some(0.5) };
        assert!((s.f1(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        let w = vec![EmbeddingVector::new(vec![1.0, 1.0]).unwrap()];
        let raw = GreedyTokenScorer::default().f1(&v, &w).unwrap();
        assert!((s.f1(&v, &w).unwrap() - (raw - 0.5) / 0.5).abs() < 1e-12);
    }
}
