use std::collections::HashSet;

use super::round_half_up;
use crate::text::word_tokens;

/// Share of word tokens in `text` that belong to `vocabulary`. Empty text gives 0.
pub fn framing_overlap(text: &str, vocabulary: &HashSet<&str>) -> f64 {
    let (hits, total) = overlap_counts(text, vocabulary);
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// `(tokens in vocabulary, tokens)` for one text.
pub fn overlap_counts(text: &str, vocabulary: &HashSet<&str>) -> (usize, usize) {
    let tokens = word_tokens(text);
    let hits = tokens
        .iter()
        .filter(|t| vocabulary.contains(t.as_str()))
        .count();
    (hits, tokens.len())
}

/// Pooled proportion over many texts: total hits over total tokens.
pub fn pooled_overlap<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    vocabulary: &HashSet<&str>,
) -> f64 {
    let (hits, total) = texts
        .into_iter()
        .map(|t| overlap_counts(t, vocabulary))
        .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Renders a proportion and its change as `"10% (−2)"`, both in whole
/// percentage points, using a true minus sign.
pub fn render_overlap_cell(after: f64, before: f64) -> String {
    let pct = round_half_up(after * 100.0, 0) as i64;
    let delta = round_half_up((after - before) * 100.0, 0) as i64;
    let sign = match delta {
        d if d < 0 => format!("\u{2212}{}", -d),
        d => format!("+{d}"),
    };
    format!("{pct}% ({sign})")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn simple_proportions() {
        let vocab: HashSet<&str> = ["court", "law", "judge"].into();
        let text = "the court and the law and the judge and more words here to make exactly twenty tokens total ok yes";
        assert_eq!(word_tokens(text).len(), 20);
        assert_eq!(framing_overlap(text, &vocab), 0.15);
        assert_eq!(framing_overlap("nothing relevant", &vocab), 0.0);
        assert_eq!(framing_overlap("", &vocab), 0.0);
    }

    #[test]
    fn cell_rendering() {
        assert_eq!(render_overlap_cell(0.10, 0.12), "10% (\u{2212}2)");
        assert_eq!(render_overlap_cell(0.25, 0.25), "25% (+0)");
        assert_eq!(render_overlap_cell(0.305, 0.10), "31% (+21)");
    }

    proptest! {
        #[test]
        fn appending_vocab_word_never_lowers_hits(words in proptest::collection::vec("[a-d]{1,3}", 0..15)) {
            let vocab: HashSet<&str> = ["a", "bb", "cd"].into();
            let text = words.join(" ");
            let (h0, t0) = overlap_counts(&text, &vocab);
            let (h1, t1) = overlap_counts(&format!("{text} bb"), &vocab);
            prop_assert_eq!(h1, h0 + 1);
            prop_assert_eq!(t1, t0 + 1);
            prop_assert!((0.0..=1.0).contains(&framing_overlap(&text, &vocab)));
        }
    }
}
