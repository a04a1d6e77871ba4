//! Fill-in-the-blank instances: ⟨s1, s2, s3⟩ around every framed sentence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Article, SplitAssignment};
use crate::entity::{dedup_surfaces, EntityExtractor};
use crate::error::{Error, Result};
use crate::frame::{Frame, FrameCodeMap, Split, Topic};
use crate::text::{segment_with, Sentence, SentenceSplitter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub article_id: String,
    pub topic: Topic,
    pub split: Split,
    pub frame: Frame,
    pub all_frames: BTreeSet<Frame>,
    pub s1: Sentence,
    pub s2: Sentence,
    pub s3: Sentence,
    pub entities: Vec<String>,
}

impl Instance {
    /// Restores token lists, which are not serialized.
    pub fn retokenize(&mut self) {
        self.s1.retokenize();
        self.s2.retokenize();
        self.s3.retokenize();
    }

    pub fn sort_key(&self) -> (&str, usize, Frame) {
        (&self.article_id, self.s2.start, self.frame)
    }
}

/// A sentence carries frame `f` when any span mapping to `f` overlaps it by
/// at least one character.
pub fn label_sentences(
    article: &Article,
    sentences: &[Sentence],
    codes: &FrameCodeMap,
) -> Vec<BTreeSet<Frame>> {
    let mapped: Vec<(usize, usize, Frame)> = article
        .spans
        .iter()
        .filter_map(|s| codes.map_code(s.code).map(|f| (s.start, s.end, f)))
        .collect();
    sentences
        .iter()
        .map(|sent| {
            mapped
                .iter()
                .filter(|(start, end, _)| *start < sent.end && sent.start < *end)
                .map(|(_, _, f)| *f)
                .collect()
        })
        .collect()
}

pub struct InstanceBuilder<'a> {
    pub codes: &'a FrameCodeMap,
    pub splitter: &'a dyn SentenceSplitter,
    pub extractor: &'a dyn EntityExtractor,
}

impl InstanceBuilder<'_> {
    /// One instance per (labeled interior sentence, frame label). First and
    /// last sentences never become s2.
    pub fn build(&self, article: &Article, splits: &SplitAssignment) -> Result<Vec<Instance>> {
        let split = splits.get(&article.id).ok_or_else(|| {
            Error::Config(format!("article {} has no split assignment", article.id))
        })?;
        let sentences = segment_with(self.splitter, &article.text);
        let labels = label_sentences(article, &sentences, self.codes);

        let mut out = Vec::new();
        for idx in 1..sentences.len().saturating_sub(1) {
            let frames = &labels[idx];
            for &frame in frames {
                let id = format!("{}:{:04}:{}", article.id, idx, frame);
                let entities = self.extractor.extract(&id, &sentences[idx].text)?;
                out.push(Instance {
                    id,
                    article_id: article.id.clone(),
                    topic: article.topic,
                    split,
                    frame,
                    all_frames: frames.clone(),
                    s1: sentences[idx - 1].clone(),
                    s2: sentences[idx].clone(),
                    s3: sentences[idx + 1].clone(),
                    entities: dedup_surfaces(&entities),
                });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterBounds {
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Allowed relative deviation of |s2| from the mean of |s1| and |s3|.
    pub tolerance: f64,
}

impl Default for FilterBounds {
    fn default() -> Self {
        FilterBounds {
            min_tokens: 5,
            max_tokens: 50,
            tolerance: 0.5,
        }
    }
}

impl FilterBounds {
    /// Every sentence within `[min, max]` tokens, and |s2| within
    /// `[(1 - tol)·m, (1 + tol)·m]` for `m = (|s1| + |s3|) / 2`, all bounds
    /// inclusive with no rounding of `m`.
    pub fn accepts(&self, n1: usize, n2: usize, n3: usize) -> bool {
        let in_range = |n: usize| (self.min_tokens..=self.max_tokens).contains(&n);
        if !(in_range(n1) && in_range(n2) && in_range(n3)) {
            return false;
        }
        let mean = (n1 + n3) as f64 / 2.0;
        let n2 = n2 as f64;
        n2 >= (1.0 - self.tolerance) * mean && n2 <= (1.0 + self.tolerance) * mean
    }
}

pub fn filter_instances(instances: Vec<Instance>, bounds: &FilterBounds) -> Vec<Instance> {
    instances
        .into_iter()
        .filter(|i| bounds.accepts(i.s1.token_count(), i.s2.token_count(), i.s3.token_count()))
        .collect()
}

/// Instance counts per frame and split, before and after length filtering.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub built: usize,
    pub retained: usize,
    pub counts: BTreeMap<Frame, BTreeMap<Split, usize>>,
}

impl BuildStats {
    pub fn from_instances(built: usize, retained: &[Instance]) -> Self {
        let mut counts: BTreeMap<Frame, BTreeMap<Split, usize>> = BTreeMap::new();
        for frame in Frame::ALL {
            counts.insert(frame, Split::ALL.iter().map(|s| (*s, 0)).collect());
        }
        for inst in retained {
            *counts
                .entry(inst.frame)
                .or_default()
                .entry(inst.split)
                .or_default() += 1;
        }
        BuildStats {
            built,
            retained: retained.len(),
            counts,
        }
    }

    pub fn retention(&self) -> f64 {
        if self.built == 0 {
            0.0
        } else {
            self.retained as f64 / self.built as f64
        }
    }

    pub fn count(&self, frame: Frame, split: Split) -> usize {
        self.counts
            .get(&frame)
            .and_then(|m| m.get(&split))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self, split: Split) -> usize {
        Frame::ALL.iter().map(|f| self.count(*f, split)).sum()
    }

    /// Frames as rows (e, l, p, c), splits as columns, plus the totals row.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "| # | Frame | Training | Validation | Test |");
        let _ = writeln!(out, "|---|---|---:|---:|---:|");
        for frame in Frame::ALL {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                frame.code(),
                frame.label(),
                self.count(frame, Split::Train),
                self.count(frame, Split::Validation),
                self.count(frame, Split::Test)
            );
        }
        let _ = writeln!(
            out,
            "|   | All four frames | {} | {} | {} |",
            self.total(Split::Train),
            self.total(Split::Validation),
            self.total(Split::Test)
        );
        let _ = writeln!(
            out,
            "\nretention: {:.2}% ({} of {} instances kept by the length filter)",
            100.0 * self.retention(),
            self.retained,
            self.built
        );
        out
    }
}
