use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::frame::Frame;
use crate::text::word_tokens;

/// How per-document `tf·idf` values of a word are combined within a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Sum,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameVocabulary {
    pub frame: Frame,
    pub entries: Vec<(String, f64)>,
}

impl FrameVocabulary {
    pub fn words(&self) -> HashSet<&str> {
        self.entries.iter().map(|(w, _)| w.as_str()).collect()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.iter().any(|(w, _)| w == word)
    }

    /// `rank\tword\tscore` lines, scores with six decimals.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, (w, s)) in self.entries.iter().enumerate() {
            let _ = writeln!(out, "{}\t{w}\t{s:.6}", i + 1);
        }
        out
    }

    pub fn parse(frame: Frame, raw: &str) -> Option<Self> {
        let mut entries = Vec::new();
        for line in raw
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        {
            let mut cols = line.split('\t');
            let (_, word, score) = (cols.next()?, cols.next()?, cols.next()?);
            entries.push((word.to_owned(), score.parse().ok()?));
        }
        Some(FrameVocabulary { frame, entries })
    }
}

/// Term counts of one document.
type Doc = HashMap<String, usize>;

/// A frozen document collection: one document per (sentence, frame) pair,
/// with document frequencies taken over all frames together.
#[derive(Debug, Clone, Default)]
pub struct VocabularyCorpus {
    docs: BTreeMap<Frame, Vec<Doc>>,
    df: HashMap<String, usize>,
    n_docs: usize,
}

impl VocabularyCorpus {
    pub fn from_documents<S: AsRef<str> + Sync>(documents: &[(Frame, S)], exec: Exec) -> Self {
        let counted: Vec<(Frame, Doc)> = exec.map(documents, |(frame, text)| {
            let mut tf = Doc::new();
            for w in word_tokens(text.as_ref()) {
                *tf.entry(w).or_default() += 1;
            }
            (*frame, tf)
        });
        let mut corpus = VocabularyCorpus::default();
        for (frame, tf) in counted {
            for w in tf.keys() {
                *corpus.df.entry(w.clone()).or_default() += 1;
            }
            corpus.docs.entry(frame).or_default().push(tf);
            corpus.n_docs += 1;
        }
        corpus
    }

    pub fn document_count(&self) -> usize {
        self.n_docs
    }

    pub fn idf(&self, word: &str) -> Option<f64> {
        self.df
            .get(word)
            .map(|&df| (self.n_docs as f64 / df as f64).ln())
    }

    /// Ranks every word seen in the frame's documents by aggregated `tf·idf`,
    /// descending, ties broken by the word, and keeps the first `k`.
    pub fn vocabulary(
        &self,
        frame: Frame,
        k: usize,
        aggregation: Aggregation,
    ) -> Result<FrameVocabulary> {
        let docs = self
            .docs
            .get(&frame)
            .filter(|d| !d.is_empty())
            .ok_or(Error::EmptyFrame(frame))?;
        let mut scores: HashMap<&str, f64> = HashMap::new();
        for doc in docs {
            for (w, &tf) in doc {
                let v = tf as f64 * self.idf(w).unwrap_or(0.0);
                let slot = scores.entry(w.as_str()).or_insert(0.0);
                match aggregation {
                    Aggregation::Sum => *slot += v,
                    Aggregation::Max => *slot = slot.max(v),
                }
            }
        }
        let mut entries: Vec<(String, f64)> =
            scores.into_iter().map(|(w, s)| (w.to_owned(), s)).collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        entries.truncate(k);
        Ok(FrameVocabulary { frame, entries })
    }
}

pub fn build_frame_vocabulary<S: AsRef<str> + Sync>(
    documents: &[(Frame, S)],
    frame: Frame,
    k: usize,
    aggregation: Aggregation,
) -> Result<FrameVocabulary> {
    VocabularyCorpus::from_documents(documents, Exec::Sequential).vocabulary(frame, k, aggregation)
}
