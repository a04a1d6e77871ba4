//! Named-entity surfaces for s2 sentences.
//!
//! The default extractor is a capitalization heuristic. Pre-computed entities
//! from any external tagger can be supplied through an `entities.jsonl`
//! sidecar instead.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{tokenize_spans, TokenSpan};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// Character offsets into the source sentence.
    pub start: usize,
    pub end: usize,
}

pub trait EntityExtractor: Send + Sync {
    fn extract(&self, instance_id: &str, sentence: &str) -> Result<Vec<Entity>>;
}

/// Capitalized words that open clauses rather than name things.
const FUNCTION_WORDS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "he", "she", "it", "we", "they", "i",
    "you", "his", "her", "its", "our", "their", "but", "and", "or", "so", "yet", "in", "on", "at",
    "for", "from", "to", "of", "by", "with", "if", "when", "while", "after", "before", "as",
    "there", "here", "what", "who", "why", "how", "some", "many", "most", "all", "no", "not",
    "yes", "mr", "mrs", "ms",
];

/// Maximal runs of capitalized tokens, with initials and short titles plus
/// their period absorbed into the run. The sentence-initial word is dropped from a
/// run unless it is an all-caps acronym, which is kept as its own entity.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicExtractor;

fn is_capitalized(tok: &TokenSpan) -> bool {
    let mut chars = tok.text.chars();
    matches!(chars.next(), Some(c) if c.is_uppercase())
}

fn is_acronym(tok: &TokenSpan) -> bool {
    let letters = tok.text.chars().filter(|c| c.is_alphabetic()).count();
    letters >= 2
        && tok
            .text
            .chars()
            .all(|c| c.is_uppercase() || c == '.' || c == '&')
}

/// Initials and short titles whose period is split off by the tokenizer
/// (`K`, `Sen`, `Gov`).
fn is_short_abbreviation(tok: &TokenSpan) -> bool {
    is_capitalized(tok)
        && tok.text.chars().count() <= 4
        && tok.text.chars().all(char::is_alphabetic)
}

fn is_function_word(tok: &TokenSpan) -> bool {
    FUNCTION_WORDS.contains(&tok.text.to_lowercase().as_str())
}

impl HeuristicExtractor {
    pub fn extract_text(&self, sentence: &str) -> Vec<Entity> {
        let tokens = tokenize_spans(sentence);
        let chars: Vec<char> = sentence.chars().collect();
        let first_word = tokens
            .iter()
            .position(|t| t.text.chars().next().is_some_and(char::is_alphanumeric));

        let mut runs: Vec<Vec<usize>> = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            if !is_capitalized(&tokens[i]) {
                i += 1;
                continue;
            }
            let mut run = vec![i];
            let mut j = i;
            loop {
                if is_short_abbreviation(&tokens[j])
                    && tokens
                        .get(j + 1)
                        .is_some_and(|t| t.text == "." && t.start == tokens[j].end)
                    && tokens.get(j + 2).is_some_and(is_capitalized)
                {
                    run.extend([j + 1, j + 2]);
                    j += 2;
                } else if tokens.get(j + 1).is_some_and(is_capitalized) {
                    run.push(j + 1);
                    j += 1;
                } else {
                    break;
                }
            }
            i = run.last().copied().unwrap_or(i) + 1;
            runs.push(run);
        }

        let mut out = Vec::new();
        for mut run in runs {
            if Some(run[0]) == first_word {
                let head = &tokens[run[0]];
                if is_acronym(head) {
                    out.push(entity_from(&chars, &tokens, &[run[0]]));
                }
                run.remove(0);
            }
            while run
                .first()
                .is_some_and(|&k| tokens[k].text == "." || is_function_word(&tokens[k]))
            {
                run.remove(0);
            }
            if run.is_empty() {
                continue;
            }
            if run.len() == 1 && tokens[run[0]].text.chars().count() == 1 {
                continue;
            }
            out.push(entity_from(&chars, &tokens, &run));
        }
        out
    }
}

fn entity_from(chars: &[char], tokens: &[TokenSpan], run: &[usize]) -> Entity {
    let start = tokens[run[0]].start;
    let end = tokens[*run.last().expect("non-empty run")].end;
    Entity {
        surface: chars[start..end].iter().collect(),
        kind: None,
        start,
        end,
    }
}

impl EntityExtractor for HeuristicExtractor {
    fn extract(&self, _instance_id: &str, sentence: &str) -> Result<Vec<Entity>> {
        Ok(self.extract_text(sentence))
    }
}

pub fn extract_entities(text: &str) -> Vec<Entity> {
    HeuristicExtractor.extract_text(text)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SidecarRecord {
    pub instance_id: String,
    pub entities: Vec<Entity>,
}

/// Entities pre-computed by an external tagger, keyed by instance id.
#[derive(Debug, Clone, Default)]
pub struct SidecarExtractor {
    by_id: HashMap<String, Vec<Entity>>,
}

impl SidecarExtractor {
    pub fn from_records(records: impl IntoIterator<Item = SidecarRecord>) -> Self {
        SidecarExtractor {
            by_id: records
                .into_iter()
                .map(|r| (r.instance_id, r.entities))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (n, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: SidecarRecord = serde_json::from_str(line).map_err(|e| {
                Error::parse(path.display().to_string(), format!("line {}", n + 1), e)
            })?;
            records.push(rec);
        }
        Ok(Self::from_records(records))
    }

    /// Fails with every id that has no entry.
    pub fn check_covers<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let missing: Vec<String> = ids
            .into_iter()
            .filter(|id| !self.by_id.contains_key(*id))
            .map(str::to_owned)
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingEntities(missing))
        }
    }
}

impl EntityExtractor for SidecarExtractor {
    fn extract(&self, instance_id: &str, _sentence: &str) -> Result<Vec<Entity>> {
        self.by_id
            .get(instance_id)
            .cloned()
            .ok_or_else(|| Error::MissingEntities(vec![instance_id.to_owned()]))
    }
}

/// Case-insensitive dedup keeping first-occurrence order.
pub fn dedup_surfaces(entities: &[Entity]) -> Vec<String> {
    let mut seen = HashSet::new();
    entities
        .iter()
        .filter(|e| seen.insert(e.surface.to_lowercase()))
        .map(|e| e.surface.clone())
        .collect()
}

/// Jaccard similarity over case-folded surfaces. Two empty sets score 0.
pub fn entity_jaccard<A: AsRef<str>, B: AsRef<str>>(a: &[A], b: &[B]) -> f64 {
    let a: HashSet<String> = a.iter().map(|s| s.as_ref().to_lowercase()).collect();
    let b: HashSet<String> = b.iter().map(|s| s.as_ref().to_lowercase()).collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surfaces(text: &str) -> Vec<String> {
        extract_entities(text)
            .into_iter()
            .map(|e| e.surface)
            .collect()
    }

    #[test]
    fn senator_example() {
        let s = surfaces("Senator Alan K. Simpson, Republican of Arizona");
        assert!(s.contains(&"Alan K. Simpson".to_string()), "{s:?}");
        assert!(s.contains(&"Arizona".to_string()), "{s:?}");
        assert!(!s.iter().any(|x| x.contains("Senator")), "{s:?}");
    }

    #[test]
    fn no_capitals_no_entities() {
        assert!(surfaces("the presence of illegal aliens").is_empty());
    }

    #[test]
    fn acronym_at_start() {
        assert_eq!(surfaces("WHO reported"), vec!["WHO"]);
    }

    #[test]
    fn multiword_and_function_words() {
        assert_eq!(
            surfaces("Officials said the Supreme Court rejected it."),
            vec!["Supreme Court"]
        );
        assert_eq!(surfaces("He said: \"The Senate voted.\""), vec!["Senate"]);
        assert_eq!(surfaces("Then I left for the U.S. yesterday"), vec!["U.S."]);
        assert_eq!(surfaces("The plan B was fine"), Vec::<String>::new());
        assert_eq!(surfaces("It was Mr. Smith again"), vec!["Smith"]);
    }

    #[test]
    fn offsets_slice_back_to_surface() {
        let text = "Während Sen. José García met the EU and Gov. Brown in São Paulo.";
        let chars: Vec<char> = text.chars().collect();
        let ents = extract_entities(text);
        assert!(!ents.is_empty());
        for e in ents {
            assert_eq!(chars[e.start..e.end].iter().collect::<String>(), e.surface);
        }
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(
            entity_jaccard(&["Congress", "Simpson"], &["Congress", "Simpson"]),
            1.0
        );
        assert_eq!(entity_jaccard(&["Congress"], &["Senate"]), 0.0);
        assert_eq!(entity_jaccard(&["Congress", "Simpson"], &["Congress"]), 0.5);
        assert_eq!(entity_jaccard::<&str, &str>(&[], &[]), 0.0);
        assert_eq!(entity_jaccard(&["CONGRESS"], &["congress"]), 1.0);
    }

    #[test]
    fn dedup_is_case_insensitive() {
        let ents = extract_entities("Officials in Texas and TEXAS met Texas officials");
        assert_eq!(dedup_surfaces(&ents), vec!["Texas"]);
    }

    #[test]
    fn sidecar_lists_missing_ids() {
        let side = SidecarExtractor::from_records([SidecarRecord {
            instance_id: "a".into(),
            entities: vec![Entity {
                surface: "Congress".into(),
                kind: Some("ORG".into()),
                start: 0,
                end: 8,
            }],
        }]);
        assert_eq!(side.extract("a", "").unwrap()[0].surface, "Congress");
        match side.check_covers(["a", "b", "c"]) {
            Err(Error::MissingEntities(ids)) => assert_eq!(ids, vec!["b", "c"]),
            other => panic!("{other:?}"),
        }
        assert!(side.extract("z", "").is_err());
    }

    proptest! {
        #[test]
        fn jaccard_properties(a in proptest::collection::vec("[a-cA-C]{1,2}", 0..6),
                              b in proptest::collection::vec("[a-cA-C]{1,2}", 0..6)) {
            let ab = entity_jaccard(&a, &b);
            let ba = entity_jaccard(&b, &a);
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
            let fa: HashSet<String> = a.iter().map(|s| s.to_lowercase()).collect();
            let fb: HashSet<String> = b.iter().map(|s| s.to_lowercase()).collect();
            prop_assert_eq!(ab == 1.0, fa == fb && !fa.is_empty());
        }

        #[test]
        fn extractor_is_deterministic_and_offsets_hold(text in "[A-Za-z .,]{0,80}") {
            let a = extract_entities(&text);
            prop_assert_eq!(&a, &extract_entities(&text));
            let chars: Vec<char> = text.chars().collect();
            for e in a {
                prop_assert!(!e.surface.is_empty());
                prop_assert_eq!(chars[e.start..e.end].iter().collect::<String>(), e.surface);
            }
        }
    }
}
