//! Seeded generator for small corpora in the media-frames JSON layout.
//! Used by tests, benchmarks and offline demos; the text is word salad with
//! frame-typical vocabulary, named entities and span annotations.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::frame::{Frame, Topic};
use crate::seed::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub articles_per_topic: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            articles_per_topic: 40,
            min_sentences: 5,
            max_sentences: 9,
            seed: 7,
        }
    }
}

const COMMON: &[&str] = &[
    "said",
    "would",
    "new",
    "year",
    "state",
    "people",
    "also",
    "many",
    "some",
    "other",
    "first",
    "last",
    "more",
    "most",
    "week",
    "month",
    "time",
    "city",
    "county",
    "group",
    "report",
    "public",
    "local",
    "national",
    "federal",
    "official",
    "officials",
    "plan",
    "issue",
    "debate",
    "question",
    "change",
    "support",
    "oppose",
    "expected",
    "called",
    "told",
    "asked",
    "added",
    "noted",
    "argued",
    "warned",
    "believed",
    "reported",
    "announced",
    "several",
    "recent",
    "major",
    "early",
    "late",
    "long",
    "short",
    "small",
    "large",
    "important",
    "current",
    "former",
    "future",
    "possible",
    "likely",
    "clear",
    "strong",
    "different",
    "general",
    "political",
    "social",
    "family",
    "families",
    "community",
    "members",
    "leaders",
    "residents",
    "voters",
    "citizens",
    "students",
    "workers",
    "children",
    "parents",
    "women",
    "men",
    "number",
    "percent",
    "half",
    "part",
    "side",
    "view",
    "position",
    "move",
    "effort",
    "decision",
    "action",
    "response",
    "proposal",
    "measure",
    "policy",
    "program",
    "system",
    "process",
    "result",
    "effect",
    "impact",
    "reason",
    "case",
    "fact",
    "point",
    "way",
    "days",
    "years",
    "today",
    "yesterday",
    "morning",
    "evening",
    "still",
    "already",
    "again",
    "never",
    "often",
    "only",
    "even",
    "much",
    "well",
    "however",
    "because",
    "while",
    "after",
    "before",
    "during",
    "against",
    "between",
    "through",
    "about",
    "over",
    "under",
    "around",
    "without",
    "within",
    "across",
    "toward",
];

fn frame_words(frame: Frame) -> &'static [&'static str] {
    match frame {
        Frame::Economic => &[
            "industry",
            "million",
            "tobacco",
            "smoking",
            "cost",
            "costs",
            "tax",
            "taxes",
            "billion",
            "market",
            "business",
            "businesses",
            "jobs",
            "economy",
            "economic",
            "money",
            "revenue",
            "budget",
            "sales",
            "prices",
            "profit",
            "companies",
            "company",
            "spending",
            "dollars",
            "funds",
            "insurance",
            "wages",
            "trade",
            "growth",
            "financial",
            "investment",
        ],
        Frame::Legality => &[
            "court",
            "law",
            "judge",
            "supreme",
            "constitutional",
            "ruling",
            "rights",
            "legal",
            "justices",
            "appeals",
            "lawsuit",
            "statute",
            "amendment",
            "attorney",
            "lawyers",
            "marriage",
            "sex",
            "same",
            "unconstitutional",
            "decided",
            "opinion",
            "federal",
            "jurisdiction",
            "precedent",
            "plaintiffs",
            "defendants",
            "filed",
            "overturned",
            "upheld",
            "clause",
            "legislation",
            "hearing",
        ],
        Frame::Policy => &[
            "bill",
            "house",
            "ban",
            "senate",
            "legislature",
            "vote",
            "votes",
            "voted",
            "governor",
            "lawmakers",
            "proposal",
            "republicans",
            "democrats",
            "committee",
            "campaign",
            "election",
            "reform",
            "regulation",
            "regulations",
            "congress",
            "administration",
            "sponsor",
            "veto",
            "passed",
            "introduced",
            "amend",
            "restrictions",
            "policies",
            "representatives",
            "assembly",
            "session",
            "agenda",
        ],
        Frame::Crime => &[
            "police",
            "murder",
            "penalty",
            "death",
            "prison",
            "killed",
            "crime",
            "crimes",
            "arrested",
            "charged",
            "guilty",
            "execution",
            "executed",
            "sentence",
            "sentenced",
            "victim",
            "victims",
            "officers",
            "shooting",
            "violence",
            "jail",
            "inmates",
            "convicted",
            "trial",
            "prosecutors",
            "homicide",
            "robbery",
            "gang",
            "weapon",
            "suspect",
            "jury",
            "gun",
        ],
    }
}

const FIRST: &[&str] = &[
    "Alan", "Maria", "James", "Linda", "Robert", "Susan", "David", "Karen", "Thomas", "Nancy",
    "Daniel", "Helen",
];
const LAST: &[&str] = &[
    "Simpson", "Garcia", "Walker", "Chen", "Brooks", "Reed", "Foster", "Hayes", "Morales",
    "Sullivan", "Porter", "Lambert",
];
const ORGS: &[&str] = &[
    "Congress",
    "the Senate",
    "NRA",
    "FDA",
    "ACLU",
    "the Supreme Court",
    "Philip Morris",
    "Amnesty International",
];
const PLACES: &[&str] = &[
    "Arizona",
    "Texas",
    "Ohio",
    "California",
    "Florida",
    "Boston",
    "Chicago",
    "Virginia",
];
const SOURCES: &[&str] = &[
    "Daily Ledger",
    "Evening Courier",
    "Morning Star",
    "Herald Tribune",
];

/// Primary codes per frame, plus an unmapped code for unlabeled spans.
fn codes(frame: Frame) -> &'static [f64] {
    match frame {
        Frame::Economic => &[1.0, 1.2],
        Frame::Legality => &[5.0, 5.1],
        Frame::Policy => &[6.0, 6.2, 13.0, 13.1],
        Frame::Crime => &[7.0, 7.3],
    }
}
const UNMAPPED: &[f64] = &[2.0, 9.3, 11.0, 15.0];

fn pick<'a, R: Rng>(rng: &mut R, list: &'a [&'a str]) -> &'a str {
    list.choose(rng).copied().unwrap_or("")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map_or_else(String::new, |f| {
        f.to_uppercase().collect::<String>() + c.as_str()
    })
}

/// One sentence: an opener, frame-biased filler words, an entity mention.
/// Roughly one in twelve sentences is too short or too long for the filter.
fn sentence<R: Rng>(rng: &mut R, frame: Option<Frame>) -> String {
    let person = format!("{} {}", pick(rng, FIRST), pick(rng, LAST));
    let roll = rng.gen_range(0..24);
    if roll == 0 {
        return format!("{} agreed.", capitalize(pick(rng, COMMON)));
    }
    let n_words = if roll == 1 {
        rng.gen_range(52..60)
    } else {
        rng.gen_range(7..20)
    };
    let mut words = Vec::with_capacity(n_words + 6);
    for _ in 0..n_words {
        let w = match frame {
            Some(f) if rng.gen_bool(0.45) => pick(rng, frame_words(f)),
            _ => pick(rng, COMMON),
        };
        words.push(w.to_owned());
    }
    let at = rng.gen_range(1..words.len());
    let mention = match rng.gen_range(0..4) {
        0 => pick(rng, ORGS).to_owned(),
        1 => format!("in {}", pick(rng, PLACES)),
        2 => format!("{person} of {}", pick(rng, PLACES)),
        _ => String::new(),
    };
    if !mention.is_empty() {
        words.insert(at, mention);
    }
    let opener = match rng.gen_range(0..4) {
        0 => format!("{person} said the"),
        1 => "The".to_owned(),
        2 => format!("According to {},", pick(rng, ORGS)),
        _ => format!("Sen. {person} argued that"),
    };
    format!("{opener} {}.", words.join(" "))
}

fn article<R: Rng>(rng: &mut R, spec: &SyntheticSpec, topic: Topic, n: usize) -> (String, Value) {
    let id = format!("{}-{n:05}", topic.as_str());
    let count = rng.gen_range(spec.min_sentences..=spec.max_sentences);
    let mut text = String::new();
    let mut by_annotator: BTreeMap<&str, Vec<Value>> = BTreeMap::new();
    for _ in 0..count {
        let frame = if rng.gen_bool(0.8) {
            Some(*Frame::ALL.choose(rng).expect("frames"))
        } else {
            None
        };
        let s = sentence(rng, frame);
        if !text.is_empty() {
            text.push(' ');
        }
        let start = text.chars().count();
        text.push_str(&s);
        let end = text.chars().count();
        let len = end - start;
        let mut span = |annotator: &'static str, code: f64, rng: &mut R| {
            let a = start + rng.gen_range(0..len / 3);
            let b = end - rng.gen_range(0..len / 3);
            by_annotator
                .entry(annotator)
                .or_default()
                .push(json!({"start": a, "end": b, "code": code}));
        };
        match frame {
            Some(f) => {
                span("annotator_a", *codes(f).choose(rng).expect("codes"), rng);
                if rng.gen_bool(0.15) {
                    let other = *Frame::ALL.choose(rng).expect("frames");
                    span(
                        "annotator_b",
                        *codes(other).choose(rng).expect("codes"),
                        rng,
                    );
                }
            }
            None if rng.gen_bool(0.5) => {
                span("annotator_b", *UNMAPPED.choose(rng).expect("codes"), rng)
            }
            None => {}
        }
    }
    if rng.gen_bool(0.05) {
        let len = text.chars().count();
        by_annotator
            .entry("annotator_a")
            .or_default()
            .push(json!({"start": len - 3, "end": len + 40, "code": 1.0}));
    }
    let framing: serde_json::Map<String, Value> = by_annotator
        .into_iter()
        .map(|(k, v)| (k.to_owned(), Value::Array(v)))
        .collect();
    let entry = json!({
        "title": format!("{} report {n}", capitalize(topic.as_str()).replace('_', " ")),
        "source": pick(rng, SOURCES),
        "year": 1990 + rng.gen_range(0..22),
        "text": text,
        "annotations": {"framing": framing},
    });
    (id, entry)
}

/// Topic file contents keyed by topic.
pub fn generate(spec: &SyntheticSpec, topics: &[Topic]) -> BTreeMap<Topic, Value> {
    topics
        .iter()
        .map(|&topic| {
            let mut rng = stream(spec.seed, topic.as_str(), 0);
            let entries: serde_json::Map<String, Value> = (0..spec.articles_per_topic)
                .map(|n| article(&mut rng, spec, topic, n))
                .collect();
            (topic, Value::Object(entries))
        })
        .collect()
}

/// Writes `{topic}.json` files into `dir`.
pub fn write_corpus(dir: &Path, spec: &SyntheticSpec, topics: &[Topic]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (topic, value) in generate(spec, topics) {
        let path = dir.join(format!("{topic}.json"));
        let raw = serde_json::to_string_pretty(&value).expect("corpus serializes");
        fs::write(&path, raw).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_topic_file;

    #[test]
    fn deterministic_and_parseable() {
        let spec = SyntheticSpec::default();
        let a = generate(&spec, &[Topic::Tobacco]);
        assert_eq!(a, generate(&spec, &[Topic::Tobacco]));
        let raw = serde_json::to_string(&a[&Topic::Tobacco]).unwrap();
        let (articles, _dropped) = parse_topic_file("tobacco.json", Topic::Tobacco, &raw).unwrap();
        assert_eq!(articles.len(), spec.articles_per_topic);
        assert!(articles
            .iter()
            .all(|x| x.spans.iter().all(|s| s.end <= x.text.chars().count())));
        assert!(articles.iter().map(|x| x.spans.len()).sum::<usize>() > articles.len());
    }
}
