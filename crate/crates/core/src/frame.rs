//! Closed vocabularies shared by every stage: frames, topics and splits.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the four merged frames.
///
/// Ordering follows the table order `e, l, p, c`, which is also the order
/// used when sorting instances and rendering reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Frame {
    #[serde(rename = "e")]
    Economic,
    #[serde(rename = "l")]
    Legality,
    #[serde(rename = "p")]
    Policy,
    #[serde(rename = "c")]
    Crime,
}

impl Frame {
    pub const ALL: [Frame; 4] = [
        Frame::Economic,
        Frame::Legality,
        Frame::Policy,
        Frame::Crime,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Frame::Economic => "e",
            Frame::Legality => "l",
            Frame::Policy => "p",
            Frame::Crime => "c",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Frame::Economic => "Economic",
            Frame::Legality => "Legality c.a.j.",
            Frame::Policy => "Policy p.a.e. + Political",
            Frame::Crime => "Crime",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Frame {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "e" | "economic" => Ok(Frame::Economic),
            "l" | "legality" => Ok(Frame::Legality),
            "p" | "policy" | "political" => Ok(Frame::Policy),
            "c" | "crime" => Ok(Frame::Crime),
            other => Err(format!(
                "unknown frame `{other}` (expected one of e, l, p, c)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    DeathPenalty,
    GunControl,
    Immigration,
    SameSexMarriage,
    Tobacco,
}

impl Topic {
    pub const ALL: [Topic; 5] = [
        Topic::DeathPenalty,
        Topic::GunControl,
        Topic::Immigration,
        Topic::SameSexMarriage,
        Topic::Tobacco,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Topic::DeathPenalty => "death_penalty",
            Topic::GunControl => "gun_control",
            Topic::Immigration => "immigration",
            Topic::SameSexMarriage => "same_sex_marriage",
            Topic::Tobacco => "tobacco",
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Topic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Topic::ALL
            .into_iter()
            .find(|t| t.as_str() == norm)
            .ok_or_else(|| format!("unknown topic `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

/// Lookup table from a major frame code (the integer part of a span code)
/// to one of the four frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, Frame>", into = "BTreeMap<String, Frame>")]
pub struct FrameCodeMap(BTreeMap<u32, Frame>);

impl FrameCodeMap {
    pub fn new(entries: impl IntoIterator<Item = (u32, Frame)>) -> Self {
        FrameCodeMap(entries.into_iter().collect())
    }

    /// Maps a decimal span code such as `6.2` to its frame. Codes whose major
    /// part is not in the table, and non-positive codes, map to `None`.
    pub fn map_code(&self, code: f64) -> Option<Frame> {
        if !code.is_finite() || code <= 0.0 {
            return None;
        }
        let major = code.floor();
        if major > u32::MAX as f64 {
            return None;
        }
        self.0.get(&(major as u32)).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, Frame)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }
}

impl Default for FrameCodeMap {
    /// Policy Frames Codebook majors: Economic=1, Legality=5, Policy=6,
    /// Crime=7, Political=13 (merged into Policy).
    fn default() -> Self {
        FrameCodeMap::new([
            (1, Frame::Economic),
            (5, Frame::Legality),
            (6, Frame::Policy),
            (7, Frame::Crime),
            (13, Frame::Policy),
        ])
    }
}

impl TryFrom<BTreeMap<String, Frame>> for FrameCodeMap {
    type Error = String;

    fn try_from(raw: BTreeMap<String, Frame>) -> Result<Self, Self::Error> {
        raw.into_iter()
            .map(|(k, v)| {
                k.trim()
                    .parse::<u32>()
                    .map(|code| (code, v))
                    .map_err(|_| format!("frame code `{k}` is not a positive integer"))
            })
            .collect::<Result<BTreeMap<_, _>, _>>()
            .map(FrameCodeMap)
    }
}

impl From<FrameCodeMap> for BTreeMap<String, Frame> {
    fn from(map: FrameCodeMap) -> Self {
        map.0.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

/// Convenience wrapper over the default table.
pub fn map_code_to_frame(code: f64) -> Option<Frame> {
    FrameCodeMap::default().map_code(code)
}
