//! Text canonicalization and fuzzy title similarity.
//!
//! Title similarity is the token-set ratio on a 0–100 scale: both strings are
//! split into token sets, the shared tokens form a common prefix, and the best
//! indel ratio among the three prefix/remainder combinations is returned. It
//! tolerates venue or author clutter around a title as well as small typos.

/// Minimum title score (inclusive) for two titles to count as the same work.
pub const TITLE_MATCH_THRESHOLD: f64 = 80.0;

/// Lowercase, replace every non-alphanumeric character with a space and
/// collapse runs of whitespace.
pub fn normalize_text(text: &str) -> String {
    let mapped: String = text
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalized surname: lowercase alphanumerics only.
pub fn normalize_surname(name: &str) -> Option<String> {
    let s: String = name
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_alphanumeric())
        .collect();
    (!s.is_empty()).then_some(s)
}

fn lcs_len(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &ca in a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Indel similarity `100 · 2·LCS / (|a| + |b|)` over characters.
pub fn ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let total = a.len() + b.len();
    if total == 0 {
        return 100.0;
    }
    100.0 * (2 * lcs_len(&a, &b)) as f64 / total as f64
}

/// Sorted, de-duplicated tokens of a normalized string, precomputed so that
/// repeated comparisons against the same title stay cheap.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSet {
    tokens: Vec<String>,
}

impl TokenSet {
    pub fn new(text: &str) -> Self {
        let mut tokens: Vec<String> = normalize_text(text)
            .split(' ')
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect();
        tokens.sort();
        tokens.dedup();
        TokenSet { tokens }
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

fn joined_len(parts: &[&str]) -> usize {
    if parts.is_empty() {
        return 0;
    }
    parts.iter().map(|p| p.chars().count()).sum::<usize>() + parts.len() - 1
}

/// Token-set ratio of two strings, 0–100. Inputs are normalized with
/// [`normalize_text`] first; an empty token set scores 0.
pub fn token_set_ratio(a: &str, b: &str) -> f64 {
    token_set_ratio_sets(&TokenSet::new(a), &TokenSet::new(b))
}

/// [`token_set_ratio`] over precomputed token sets.
///
/// The three compared strings all start with the shared-token prefix, and an
/// LCS of two strings with a common prefix is that prefix plus the LCS of the
/// remainders, so only the non-shared remainders need the quadratic pass.
pub fn token_set_ratio_sets(a: &TokenSet, b: &TokenSet) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (mut sect, mut diff_ab, mut diff_ba) = (Vec::new(), Vec::new(), Vec::new());
    let (mut i, mut j) = (0, 0);
    while i < a.tokens.len() || j < b.tokens.len() {
        match (a.tokens.get(i), b.tokens.get(j)) {
            (Some(x), Some(y)) if x == y => {
                sect.push(x.as_str());
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x < y => {
                diff_ab.push(x.as_str());
                i += 1;
            }
            (Some(_), Some(y)) => {
                diff_ba.push(y.as_str());
                j += 1;
            }
            (Some(x), None) => {
                diff_ab.push(x.as_str());
                i += 1;
            }
            (None, Some(y)) => {
                diff_ba.push(y.as_str());
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }

    let s = joined_len(&sect);
    // remainder after the shared prefix, including the separating space
    let rest = |diff: &[&str]| -> String {
        let body = diff.join(" ");
        if s > 0 && !body.is_empty() {
            format!(" {body}")
        } else {
            body
        }
    };
    let rest_ab: Vec<char> = rest(&diff_ab).chars().collect();
    let rest_ba: Vec<char> = rest(&diff_ba).chars().collect();
    let len_ab = s + rest_ab.len();
    let len_ba = s + rest_ba.len();

    let mut best = 0.0f64;
    if s > 0 {
        best = best
            .max(100.0 * (2 * s) as f64 / (s + len_ab) as f64)
            .max(100.0 * (2 * s) as f64 / (s + len_ba) as f64);
    }
    let lcs = s + lcs_len(&rest_ab, &rest_ba);
    best.max(100.0 * (2 * lcs) as f64 / (len_ab + len_ba) as f64)
}

/// Whether two titles clear [`TITLE_MATCH_THRESHOLD`].
pub fn titles_match(a: &str, b: &str) -> bool {
    token_set_ratio(a, b) >= TITLE_MATCH_THRESHOLD
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_collapses_case_punct_whitespace() {
        assert_eq!(normalize_text("DEEP   LEARNING!!"), "deep learning");
        assert_eq!(normalize_text("  Graph-based,  models. "), "graph based models");
        assert_eq!(normalize_text("!!!"), "");
    }

    #[test]
    fn ratio_basic_values() {
        assert_eq!(ratio("abcde", "abcde"), 100.0);
        assert_eq!(ratio("abcde", "abcdx"), 80.0);
        assert_eq!(ratio("abc", "xyz"), 0.0);
    }

    #[test]
    fn token_set_handles_typo_and_reordering() {
        assert!(token_set_ratio("Attention is all you ned", "Attention Is All You Need") >= 80.0);
        assert_eq!(token_set_ratio("learning deep", "Deep Learning"), 100.0);
        // subset of tokens scores 100 under the token-set construction
        assert_eq!(token_set_ratio("deep learning", "deep learning nature 2015"), 100.0);
    }

    #[test]
    fn token_set_exact_boundaries() {
        assert_eq!(token_set_ratio("abcde", "abcdx"), 80.0);
        let a = format!("{}{}", "a".repeat(79), "b".repeat(21));
        let b = format!("{}{}", "a".repeat(79), "c".repeat(21));
        assert_eq!(token_set_ratio(&a, &b), 79.0);
        assert!(!titles_match(&a, &b));
        assert!(titles_match("abcde", "abcdx"));
    }

    /// Builds the three compared strings literally and runs the full ratio.
    fn naive_token_set_ratio(a: &str, b: &str) -> f64 {
        use std::collections::BTreeSet;
        let na = normalize_text(a);
        let nb = normalize_text(b);
        let ta: BTreeSet<&str> = na.split(' ').filter(|t| !t.is_empty()).collect();
        let tb: BTreeSet<&str> = nb.split(' ').filter(|t| !t.is_empty()).collect();
        if ta.is_empty() || tb.is_empty() {
            return 0.0;
        }
        let sect = ta.intersection(&tb).copied().collect::<Vec<_>>().join(" ");
        let ab = ta.difference(&tb).copied().collect::<Vec<_>>().join(" ");
        let ba = tb.difference(&ta).copied().collect::<Vec<_>>().join(" ");
        let glue = |p: &str, r: &str| {
            [p, r]
                .iter()
                .filter(|x| !x.is_empty())
                .copied()
                .collect::<Vec<_>>()
                .join(" ")
        };
        let cab = glue(&sect, &ab);
        let cba = glue(&sect, &ba);
        let mut best = ratio(&cab, &cba);
        if !sect.is_empty() {
            best = best.max(ratio(&sect, &cab)).max(ratio(&sect, &cba));
        }
        best
    }

    proptest::proptest! {
        #[test]
        fn prefix_split_matches_naive(a in "[a-d ]{0,24}", b in "[a-d ]{0,24}") {
            proptest::prop_assert_eq!(token_set_ratio(&a, &b), naive_token_set_ratio(&a, &b));
        }

        #[test]
        fn token_set_ratio_is_symmetric(a in "[a-e ,.]{0,30}", b in "[a-e ,.]{0,30}") {
            proptest::prop_assert_eq!(token_set_ratio(&a, &b), token_set_ratio(&b, &a));
        }
    }

    #[test]
    fn empty_inputs_score_zero() {
        assert_eq!(token_set_ratio("", "abc"), 0.0);
        assert_eq!(token_set_ratio("...", "..."), 0.0);
    }
}
