//! Run configuration: a flat TOML file plus a `[frame_code_map]` table.
//!
//! ```toml
//! corpus_dir = "mfc"
//! seed = 13
//! topics = ["immigration", "tobacco"]
//! backend = "mock"
//!
//! [frame_code_map]
//! 1 = "e"
//! 5 = "l"
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frame::{FrameCodeMap, Topic};
use crate::gateway::{BatchOptions, RetryPolicy};
use crate::instance::FilterBounds;
use crate::metrics::Aggregation;
use crate::strategy::EpochBudget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_dir: PathBuf,
    pub seed: u64,
    pub topics: Vec<Topic>,
    pub frame_code_map: FrameCodeMap,
    pub val_per_topic: usize,
    pub test_per_topic: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub tolerance: f64,
    /// JSONL entity sidecar keyed by instance id; heuristic extraction when unset.
    pub entities_file: Option<PathBuf>,
    pub vocab_k: usize,
    pub vocab_aggregation: Aggregation,
    pub neg_ratio: f64,
    pub max_epochs: u32,
    pub adversarial_epochs: u32,
    /// `mock`, `replay:FILE` or `http:URL`.
    pub backend: String,
    pub concurrency_limit: usize,
    pub retries: u32,
    pub timeout_secs: u64,
    pub generation_max_tokens: u32,
    pub prompt_only: bool,
    /// Test instances reframed per source frame; all when unset.
    pub eval_per_frame: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let bounds = FilterBounds::default();
        let budget = EpochBudget::default();
        RunConfig {
            corpus_dir: PathBuf::from("mfc"),
            seed: 13,
            topics: Topic::ALL.to_vec(),
            frame_code_map: FrameCodeMap::default(),
            val_per_topic: 600,
            test_per_topic: 600,
            min_tokens: bounds.min_tokens,
            max_tokens: bounds.max_tokens,
            tolerance: bounds.tolerance,
            entities_file: None,
            vocab_k: 100,
            vocab_aggregation: Aggregation::Sum,
            neg_ratio: 1.0,
            max_epochs: budget.max_epochs,
            adversarial_epochs: budget.adversarial_epochs,
            backend: "mock".into(),
            concurrency_limit: 4,
            retries: 2,
            timeout_secs: 60,
            generation_max_tokens: 64,
            prompt_only: false,
            eval_per_frame: None,
        }
    }
}

/// Fields that change artifact contents. Paths, the backend choice and
/// transport tuning are left out so the hash is machine independent.
#[derive(Serialize)]
struct Hashed<'a> {
    seed: u64,
    topics: BTreeSet<Topic>,
    frame_code_map: &'a FrameCodeMap,
    val_per_topic: usize,
    test_per_topic: usize,
    min_tokens: usize,
    max_tokens: usize,
    tolerance: f64,
    entities: &'a str,
    vocab_k: usize,
    vocab_aggregation: Aggregation,
    neg_ratio: f64,
    max_epochs: u32,
    adversarial_epochs: u32,
    generation_max_tokens: u32,
    prompt_only: bool,
    eval_per_frame: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(raw: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(raw).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.min_tokens == 0 || self.max_tokens == 0 {
            return fail("token bounds must be positive".into());
        }
        if self.min_tokens > self.max_tokens {
            return fail(format!(
                "min_tokens {} exceeds max_tokens {}",
                self.min_tokens, self.max_tokens
            ));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1.0) {
            return fail(format!(
                "tolerance must lie in (0, 1], got {}",
                self.tolerance
            ));
        }
        if self.vocab_k == 0 {
            return fail("vocab_k must be at least 1".into());
        }
        if !(self.neg_ratio.is_finite() && self.neg_ratio >= 0.0) {
            return fail(format!(
                "neg_ratio must be non-negative, got {}",
                self.neg_ratio
            ));
        }
        if self.topics.is_empty() {
            return fail("at least one topic is required".into());
        }
        if self.concurrency_limit == 0 {
            return fail("concurrency_limit must be at least 1".into());
        }
        if self.generation_max_tokens == 0 {
            return fail("generation_max_tokens must be at least 1".into());
        }
        if self.eval_per_frame == Some(0) {
            return fail("eval_per_frame must be at least 1 when set".into());
        }
        let b = self.backend.as_str();
        if !(b == "mock" || b.starts_with("replay:") || b.starts_with("http:")) {
            return fail(format!(
                "backend must be mock, replay:FILE or http:URL, got `{b}`"
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the content-relevant settings.
    pub fn hash(&self) -> String {
        let entities = self
            .entities_file
            .as_ref()
            .and_then(|p| p.file_name())
            .map_or_else(
                || "heuristic".to_owned(),
                |n| n.to_string_lossy().into_owned(),
            );
        let hashed = Hashed {
            seed: self.seed,
            topics: self.topics.iter().copied().collect(),
            frame_code_map: &self.frame_code_map,
            val_per_topic: self.val_per_topic,
            test_per_topic: self.test_per_topic,
            min_tokens: self.min_tokens,
            max_tokens: self.max_tokens,
            tolerance: self.tolerance,
            entities: &entities,
            vocab_k: self.vocab_k,
            vocab_aggregation: self.vocab_aggregation,
            neg_ratio: self.neg_ratio,
            max_epochs: self.max_epochs,
            adversarial_epochs: self.adversarial_epochs,
            generation_max_tokens: self.generation_max_tokens,
            prompt_only: self.prompt_only,
            eval_per_frame: self.eval_per_frame,
        };
        let json = serde_json::to_vec(&hashed).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn topic_set(&self) -> BTreeSet<Topic> {
        self.topics.iter().copied().collect()
    }

    pub fn filter_bounds(&self) -> FilterBounds {
        FilterBounds {
            min_tokens: self.min_tokens,
            max_tokens: self.max_tokens,
            tolerance: self.tolerance,
        }
    }

    pub fn epoch_budget(&self) -> EpochBudget {
        EpochBudget {
            max_epochs: self.max_epochs,
            adversarial_epochs: self.adversarial_epochs,
        }
    }

    pub fn batch_options(&self) -> BatchOptions {
        BatchOptions {
            concurrency_limit: self.concurrency_limit,
            retry: RetryPolicy {
                retries: self.retries,
                ..RetryPolicy::default()
            },
            max_tokens: self.generation_max_tokens,
            prompt_only: self.prompt_only,
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}
