//! Tokenization and sentence segmentation.
//!
//! All offsets produced here are character offsets, matching the offsets the
//! corpus uses for its span annotations.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub start: usize,
    pub end: usize,
    #[serde(skip)]
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn new(text: String, start: usize, end: usize) -> Self {
        let tokens = tokenize(&text);
        Sentence {
            text,
            start,
            end,
            tokens,
        }
    }

    /// Recomputes `tokens` after deserialization.
    pub fn retokenize(&mut self) {
        self.tokens = tokenize(&self.text);
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }
}

/// A token with its `[start, end)` character range in the source string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSpan {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Whitespace tokenization with leading and trailing punctuation split off
/// into one token per character. A trailing period stays attached when the
/// word already has an inner period (`U.S.`). Case is preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_spans(text).into_iter().map(|t| t.text).collect()
}

pub fn tokenize_spans(text: &str) -> Vec<TokenSpan> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars, start, i, &mut out);
    }
    out
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<TokenSpan>) {
    let is_word = |c: char| c.is_alphanumeric();
    let mut lead = start;
    while lead < end && !is_word(chars[lead]) {
        out.push(span(chars, lead, lead + 1));
        lead += 1;
    }
    if lead == end {
        return;
    }
    let mut core_end = end;
    while !is_word(chars[core_end - 1]) {
        core_end -= 1;
    }
    if core_end < end && chars[core_end] == '.' && chars[lead..core_end].contains(&'.') {
        core_end += 1;
    }
    out.push(span(chars, lead, core_end));
    for k in core_end..end {
        out.push(span(chars, k, k + 1));
    }
}

fn span(chars: &[char], start: usize, end: usize) -> TokenSpan {
    TokenSpan {
        text: chars[start..end].iter().collect(),
        start,
        end,
    }
}

/// Lowercased, purely alphabetic word tokens. This is the unit used for
/// frame vocabularies and framing-word overlap.
pub fn word_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.chars().all(char::is_alphabetic))
        .map(|t| t.to_lowercase())
        .collect()
}

/// Produces `[start, end)` character ranges of sentences.
pub trait SentenceSplitter: Send + Sync {
    fn split(&self, text: &str) -> Vec<(usize, usize)>;
}

const ABBREVIATIONS: &[&str] = &[
    "Mr.", "Mrs.", "Ms.", "Dr.", "Sen.", "Sens.", "Rep.", "Reps.", "Gov.", "Lt.", "Gen.", "Col.",
    "Sgt.", "Capt.", "Cmdr.", "Adm.", "Maj.", "Prof.", "Rev.", "Hon.", "Pres.", "Atty.", "Supt.",
    "Det.", "St.", "Mt.", "Ft.", "Jr.", "Sr.", "Inc.", "Corp.", "Co.", "Ltd.", "Bros.", "No.",
    "Nos.", "Jan.", "Feb.", "Mar.", "Apr.", "Aug.", "Sept.", "Sep.", "Oct.", "Nov.", "Dec.",
    "Ala.", "Ariz.", "Ark.", "Calif.", "Colo.", "Conn.", "Del.", "Fla.", "Ga.", "Ill.", "Ind.",
    "Kan.", "Ky.", "La.", "Md.", "Mass.", "Mich.", "Minn.", "Miss.", "Mo.", "Mont.", "Neb.",
    "Nev.", "Okla.", "Ore.", "Pa.", "Tenn.", "Tex.", "Va.", "Vt.", "Wash.", "Wis.", "Wyo.", "vs.",
    "etc.", "approx.",
];

/// Rule-based splitter: a break follows `.`, `!` or `?` (plus any closing
/// quotes or brackets) when whitespace and then a capital letter come next,
/// unless the word ending in `.` is a known abbreviation or an initial.
/// Blank lines always break.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleSplitter;

impl RuleSplitter {
    fn is_abbreviation(word: &[char]) -> bool {
        let word: String = word
            .iter()
            .skip_while(|c| matches!(c, '"' | '\'' | '(' | '[' | '“' | '‘'))
            .collect();
        if ABBREVIATIONS.contains(&word.as_str()) {
            return true;
        }
        // capital initials ("K.") and dotted acronyms ("U.S.", "a.m.")
        let bytes: Vec<char> = word.chars().collect();
        !bytes.is_empty()
            && bytes.len().is_multiple_of(2)
            && bytes.chunks(2).all(|p| p[0].is_alphabetic() && p[1] == '.')
            && (bytes.len() > 2 || bytes[0].is_uppercase())
    }
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '”' | '’')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '“' | '‘')
}

impl SentenceSplitter for RuleSplitter {
    fn split(&self, text: &str) -> Vec<(usize, usize)> {
        let chars: Vec<char> = text.chars().collect();
        let n = chars.len();
        let mut cuts = Vec::new();
        let mut i = 0;
        while i < n {
            let c = chars[i];
            if c == '\n' {
                let mut j = i + 1;
                while j < n && chars[j].is_whitespace() && chars[j] != '\n' {
                    j += 1;
                }
                if j < n && chars[j] == '\n' {
                    cuts.push(i);
                    i = j;
                    continue;
                }
            }
            if matches!(c, '.' | '!' | '?') {
                let mut j = i + 1;
                while j < n && is_closer(chars[j]) {
                    j += 1;
                }
                let mut k = j;
                while k < n && chars[k].is_whitespace() {
                    k += 1;
                }
                let mut m = k;
                while m < n && is_opener(chars[m]) {
                    m += 1;
                }
                let capital_next = k > j && m < n && chars[m].is_uppercase();
                if capital_next {
                    let word_start = chars[..=i]
                        .iter()
                        .rposition(|c| c.is_whitespace())
                        .map_or(0, |p| p + 1);
                    if c != '.' || !Self::is_abbreviation(&chars[word_start..=i]) {
                        cuts.push(j);
                        i = j;
                        continue;
                    }
                }
            }
            i += 1;
        }

        let mut ranges = Vec::with_capacity(cuts.len() + 1);
        let mut start = 0;
        for cut in cuts.into_iter().chain(std::iter::once(n)) {
            if let Some(r) = trim_range(&chars, start, cut) {
                ranges.push(r);
            }
            start = cut;
        }
        ranges
    }
}

fn trim_range(chars: &[char], mut start: usize, mut end: usize) -> Option<(usize, usize)> {
    while start < end && chars[start].is_whitespace() {
        start += 1;
    }
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    (start < end).then_some((start, end))
}

/// Segments with the default [`RuleSplitter`].
pub fn segment_sentences(text: &str) -> Vec<Sentence> {
    segment_with(&RuleSplitter, text)
}

pub fn segment_with(splitter: &dyn SentenceSplitter, text: &str) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    splitter
        .split(text)
        .into_iter()
        .map(|(s, e)| Sentence::new(chars[s..e].iter().collect(), s, e))
        .collect()
}
