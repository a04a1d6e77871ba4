use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RougeVariant {
    R1,
    R2,
    RL,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub variant: RougeVariant,
    pub entity_masked: bool,
}

impl RougeScore {
    fn from_counts(hits: usize, cand: usize, reference: usize, variant: RougeVariant) -> Self {
        if cand == 0 || reference == 0 {
            return RougeScore {
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
                variant,
                entity_masked: false,
            };
        }
        let precision = hits as f64 / cand as f64;
        let recall = hits as f64 / reference as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        RougeScore {
            precision,
            recall,
            f1,
            variant,
            entity_masked: false,
        }
    }

    pub fn masked(mut self) -> Self {
        self.entity_masked = true;
        self
    }
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts
                .entry(w.iter().map(AsRef::as_ref).collect())
                .or_default() += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap. A side with fewer than `n` tokens scores zero.
pub fn rouge_n<T: AsRef<str>>(candidate: &[T], reference: &[T], n: usize) -> RougeScore {
    assert!(n >= 1, "rouge_n requires n >= 1");
    let variant = if n == 1 {
        RougeVariant::R1
    } else {
        RougeVariant::R2
    };
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let hits: usize = cand
        .iter()
        .map(|(g, c)| (*c).min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    let cand_total = candidate.len().saturating_sub(n - 1);
    let ref_total = reference.len().saturating_sub(n - 1);
    RougeScore::from_counts(hits, cand_total, ref_total, variant)
}

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: AsRef<str>>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> RougeScore {
    let l = lcs_len(candidate, reference);
    RougeScore::from_counts(l, candidate.len(), reference.len(), RougeVariant::RL)
}

/// Drops every token that belongs to an entity surface, comparing
/// case-folded tokens against the tokenized surfaces.
pub fn strip_entities<T: AsRef<str>, E: AsRef<str>>(tokens: &[T], entities: &[E]) -> Vec<String> {
    let banned: std::collections::HashSet<String> = entities
        .iter()
        .flat_map(|e| tokenize(e.as_ref()))
        .map(|t| t.to_lowercase())
        .collect();
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !banned.contains(&t.to_lowercase()))
        .map(str::to_owned)
        .collect()
}

/// Tokens used for ROUGE: lowercased, punctuation-only tokens removed.
pub fn rouge_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .map(|t| t.to_lowercase())
        .collect()
}
