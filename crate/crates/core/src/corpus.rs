//! Media-frames-corpus ingest and article-level splits.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::frame::{Split, Topic};

/// A framing span. Offsets are character (not byte) offsets into
/// [`Article::text`], end exclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSpan {
    pub start: usize,
    pub end: usize,
    pub code: f64,
    pub annotator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub topic: Topic,
    pub source: String,
    pub year: i64,
    pub title: String,
    pub text: String,
    pub spans: Vec<FrameSpan>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub articles: usize,
    pub dropped_spans: usize,
}

/// Loads `{topic}.json` for every requested topic from `dir`.
pub fn load_corpus(dir: &Path, topics: &BTreeSet<Topic>) -> Result<Vec<Article>> {
    load_corpus_with_report(dir, topics, Exec::default()).map(|(articles, _)| articles)
}

pub fn load_corpus_with_report(
    dir: &Path,
    topics: &BTreeSet<Topic>,
    exec: Exec,
) -> Result<(Vec<Article>, LoadReport)> {
    let topics: Vec<Topic> = topics.iter().copied().collect();
    let per_topic = exec.try_map(&topics, |topic| {
        let path = dir.join(format!("{topic}.json"));
        let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        parse_topic_file(&path.display().to_string(), *topic, &raw)
    })?;

    let mut report = LoadReport::default();
    let mut articles = Vec::new();
    let mut seen = HashSet::new();
    for (batch, dropped) in per_topic {
        report.dropped_spans += dropped;
        for article in batch {
            if !seen.insert(article.id.clone()) {
                return Err(Error::parse(
                    dir.display().to_string(),
                    article.id,
                    "duplicate article id across topic files",
                ));
            }
            articles.push(article);
        }
    }
    report.articles = articles.len();
    if report.dropped_spans > 0 {
        log::warn!(
            "dropped {} out-of-bounds or empty spans",
            report.dropped_spans
        );
    }
    Ok((articles, report))
}

/// Parses one topic file in the MFC layout. Returns the articles (sorted by
/// id) and the number of spans dropped for falling outside the text.
pub fn parse_topic_file(file: &str, topic: Topic, raw: &str) -> Result<(Vec<Article>, usize)> {
    let root: Value = serde_json::from_str(raw).map_err(|e| Error::parse(file, "<root>", e))?;
    let entries = root
        .as_object()
        .ok_or_else(|| Error::parse(file, "<root>", "expected an object keyed by article id"))?;

    let mut dropped = 0;
    let mut articles = Vec::with_capacity(entries.len());
    for (id, entry) in entries {
        let (article, d) = parse_entry(file, topic, id, entry)?;
        dropped += d;
        articles.push(article);
    }
    articles.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((articles, dropped))
}

fn parse_entry(file: &str, topic: Topic, id: &str, entry: &Value) -> Result<(Article, usize)> {
    let key = |k: &str| format!("{id}.{k}");
    let obj = entry
        .as_object()
        .ok_or_else(|| Error::parse(file, id, "expected an object"))?;
    let string_field = |k: &str| -> Result<String> {
        obj.get(k)
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| Error::parse(file, key(k), "missing or not a string"))
    };
    let text = string_field("text")?;
    let title = string_field("title")?;
    let source = string_field("source")?;
    let year = obj
        .get("year")
        .and_then(|v| {
            v.as_i64()
                .or_else(|| v.as_str().and_then(|s| s.trim().parse().ok()))
        })
        .ok_or_else(|| Error::parse(file, key("year"), "missing or not an integer"))?;

    let annotations = obj
        .get("annotations")
        .and_then(Value::as_object)
        .ok_or_else(|| Error::parse(file, key("annotations"), "missing or not an object"))?;

    let text_len = text.chars().count();
    let mut spans = Vec::new();
    let mut dropped = 0;
    match annotations.get("framing") {
        None | Some(Value::Null) => {}
        Some(Value::Object(by_annotator)) => {
            for (annotator, list) in by_annotator {
                let list_key = key(&format!("annotations.framing.{annotator}"));
                let items = list
                    .as_array()
                    .ok_or_else(|| Error::parse(file, &list_key, "expected a list of spans"))?;
                for (i, item) in items.iter().enumerate() {
                    let item_key = format!("{list_key}[{i}]");
                    let start = offset(item.get("start")).ok_or_else(|| {
                        Error::parse(
                            file,
                            format!("{item_key}.start"),
                            "missing or not an offset",
                        )
                    })?;
                    let end = offset(item.get("end")).ok_or_else(|| {
                        Error::parse(file, format!("{item_key}.end"), "missing or not an offset")
                    })?;
                    let code = number(item.get("code")).ok_or_else(|| {
                        Error::parse(file, format!("{item_key}.code"), "missing or not a number")
                    })?;
                    if start >= end || end > text_len || code <= 0.0 {
                        dropped += 1;
                        continue;
                    }
                    spans.push(FrameSpan {
                        start,
                        end,
                        code,
                        annotator: annotator.clone(),
                    });
                }
            }
        }
        Some(_) => {
            return Err(Error::parse(
                file,
                key("annotations.framing"),
                "expected an object",
            ))
        }
    }

    Ok((
        Article {
            id: id.to_owned(),
            topic,
            source,
            year,
            title,
            text,
            spans,
        },
        dropped,
    ))
}

fn offset(v: Option<&Value>) -> Option<usize> {
    let v = v?;
    v.as_u64().map(|n| n as usize).or_else(|| {
        v.as_f64()
            .filter(|f| *f >= 0.0 && f.fract() == 0.0)
            .map(|f| f as usize)
    })
}

fn number(v: Option<&Value>) -> Option<f64> {
    let v = v?;
    v.as_f64()
        .or_else(|| v.as_str().and_then(|s| s.trim().parse().ok()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub assignment: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn get(&self, article_id: &str) -> Option<Split> {
        self.assignment.get(article_id).copied()
    }

    pub fn count(&self, split: Split) -> usize {
        self.assignment.values().filter(|s| **s == split).count()
    }
}

/// Per topic: shuffle the sorted article ids with a seeded ChaCha stream,
/// take the first `val_per_topic` as validation, the next `test_per_topic`
/// as test and the rest as training.
pub fn assign_splits(
    articles: &[Article],
    seed: u64,
    val_per_topic: usize,
    test_per_topic: usize,
) -> Result<SplitAssignment> {
    let mut by_topic: BTreeMap<Topic, Vec<&str>> = BTreeMap::new();
    for a in articles {
        by_topic.entry(a.topic).or_default().push(&a.id);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = BTreeMap::new();
    for (topic, mut ids) in by_topic {
        let need = val_per_topic + test_per_topic;
        if ids.len() <= need {
            return Err(Error::TooFewArticles {
                topic,
                have: ids.len(),
                need,
            });
        }
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        for (i, id) in ids.into_iter().enumerate() {
            let split = if i < val_per_topic {
                Split::Validation
            } else if i < need {
                Split::Test
            } else {
                Split::Train
            };
            assignment.insert(id.to_owned(), split);
        }
    }
    Ok(SplitAssignment { seed, assignment })
}
