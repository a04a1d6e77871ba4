use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GenerationBackend, GenerationError, GenerationRequest};
use crate::error::{Error, Result};
use crate::frame::Frame;

/// One recorded generation. Generated-output files are valid replay input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub instance_id: String,
    #[serde(default)]
    pub target_frame: Option<Frame>,
    #[serde(alias = "s2")]
    pub generated: String,
}

/// Serves recorded generations by instance id, preferring an exact
/// `(instance_id, target_frame)` match over a frame-less record.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    id: String,
    records: HashMap<(String, Option<Frame>), String>,
}

impl ReplayBackend {
    pub fn from_records(
        id: impl Into<String>,
        records: impl IntoIterator<Item = ReplayRecord>,
    ) -> Self {
        ReplayBackend {
            id: id.into(),
            records: records
                .into_iter()
                .map(|r| ((r.instance_id, r.target_frame), r.generated))
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
            records.push(serde_json::from_str::<ReplayRecord>(line).map_err(|e| {
                Error::parse(path.display().to_string(), format!("line {}", n + 1), e)
            })?);
        }
        let name = path.file_name().map_or_else(
            || path.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        Ok(Self::from_records(format!("replay:{name}"), records))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl GenerationBackend for ReplayBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn generate_raw(&self, request: &GenerationRequest) -> Result<String, GenerationError> {
        let id = request.instance_id.clone();
        self.records
            .get(&(id.clone(), Some(request.frame)))
            .or_else(|| self.records.get(&(id.clone(), None)))
            .cloned()
            .ok_or(GenerationError::NotRecorded(id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::Variant;
    use std::io::Write;

    fn req(id: &str, frame: Frame) -> GenerationRequest {
        GenerationRequest {
            instance_id: id.into(),
            s1: String::new(),
            s3: String::new(),
            frame,
            entities: vec![],
            variant: Variant::default(),
            max_tokens: 8,
            prompt_only: false,
        }
    }

    #[test]
    fn replays_by_id_and_frame() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"instance_id":"a","s2":"generic"}}"#).unwrap();
        writeln!(
            f,
            r#"{{"instance_id":"a","target_frame":"c","generated":"crime one"}}"#
        )
        .unwrap();
        writeln!(f).unwrap();
        let b = ReplayBackend::load(f.path()).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b.backend_id().starts_with("replay:"));
        assert_eq!(
            b.generate_raw(&req("a", Frame::Crime)).unwrap(),
            "crime one"
        );
        assert_eq!(
            b.generate_raw(&req("a", Frame::Economic)).unwrap(),
            "generic"
        );
        assert_eq!(
            b.generate_raw(&req("b", Frame::Economic)).unwrap_err(),
            GenerationError::NotRecorded("b".into())
        );
    }

    #[test]
    fn bad_line_names_location() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "{{not json").unwrap();
        let err = ReplayBackend::load(f.path()).unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }
}
