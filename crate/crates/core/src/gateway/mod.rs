//! Uniform access to generation backends and the batch reframing driver.
//!
//! A backend maps one [`GenerationRequest`] to one sentence. The batch
//! driver fans requests out over a bounded set of worker threads and
//! collects results in input order.

mod http;
mod mock;
mod replay;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::Frame;
use crate::instance::Instance;
use crate::strategy::Variant;

pub use http::{run_conformance, ConformanceCheck, HttpBackend};
pub use mock::{mock_generate, MockBackend};
pub use replay::{ReplayBackend, ReplayRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerationError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned {status}: {message}")]
    Backend { status: u16, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("empty generation")]
    Empty,
    #[error("no recorded generation for {0}")]
    NotRecorded(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl GenerationError {
    /// Transport failures and 5xx responses are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            GenerationError::Transport(_) => true,
            GenerationError::Backend { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    /// Not part of the wire protocol; used by replay backends and for
    /// failure reports.
    #[serde(skip)]
    pub instance_id: String,
    pub s1: String,
    pub s3: String,
    pub frame: Frame,
    pub entities: Vec<String>,
    pub variant: Variant,
    pub max_tokens: u32,
    /// Baseline mode: the backend conditions on s1 alone.
    pub prompt_only: bool,
}

impl GenerationRequest {
    pub fn for_instance(
        instance: &Instance,
        target: Frame,
        variant: Variant,
        max_tokens: u32,
    ) -> Self {
        GenerationRequest {
            instance_id: instance.id.clone(),
            s1: instance.s1.text.clone(),
            s3: instance.s3.text.clone(),
            frame: target,
            entities: if variant.use_n {
                instance.entities.clone()
            } else {
                Vec::new()
            },
            variant,
            max_tokens,
            prompt_only: false,
        }
    }
}

pub trait GenerationBackend: Send + Sync {
    fn backend_id(&self) -> &str;

    /// One raw generation attempt; no retries, no post-processing.
    fn generate_raw(&self, request: &GenerationRequest) -> Result<String, GenerationError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub retries: u32,
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 2,
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub text: String,
    pub backend_id: String,
    pub latency: Duration,
    pub attempts: u32,
}

/// First non-empty line, trimmed.
fn one_line(text: &str) -> Option<String> {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .map(str::to_owned)
}

pub fn generate(
    backend: &dyn GenerationBackend,
    request: &GenerationRequest,
    policy: RetryPolicy,
) -> Result<Generation, GenerationError> {
    if request.max_tokens == 0 {
        return Err(GenerationError::InvalidRequest(
            "max_tokens must be at least 1".into(),
        ));
    }
    let started = Instant::now();
    let mut attempt = 0;
    loop {
        attempt += 1;
        match backend.generate_raw(request) {
            Ok(raw) => {
                let text = one_line(&raw).ok_or(GenerationError::Empty)?;
                return Ok(Generation {
                    text,
                    backend_id: backend.backend_id().to_owned(),
                    latency: started.elapsed(),
                    attempts: attempt,
                });
            }
            Err(e) if e.is_retryable() && attempt <= policy.retries => {
                log::debug!("{}: attempt {attempt} failed: {e}", request.instance_id);
                thread::sleep(policy.backoff * attempt);
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReframedInstance {
    pub instance_id: String,
    pub variant: Variant,
    pub source_frame: Frame,
    pub target_frame: Frame,
    pub generated: String,
    pub backend_id: String,
    pub provenance_marker: bool,
}

impl ReframedInstance {
    pub fn is_intra_frame(&self) -> bool {
        self.source_frame == self.target_frame
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub instance_id: String,
    pub target_frame: Frame,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub concurrency_limit: usize,
    pub retry: RetryPolicy,
    pub max_tokens: u32,
    pub prompt_only: bool,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            concurrency_limit: 4,
            retry: RetryPolicy::default(),
            max_tokens: 64,
            prompt_only: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BatchOutcome {
    pub outputs: Vec<ReframedInstance>,
    pub failures: Vec<GenerationFailure>,
    pub total_latency: Duration,
}

/// One generation per (instance, target frame), instance-major. At most
/// `concurrency_limit` requests are in flight; output order is the input
/// order whatever the completion order. Failures are collected and the run
/// continues.
pub fn reframe_batch(
    instances: &[Instance],
    targets: &[Frame],
    variant: Variant,
    backend: &dyn GenerationBackend,
    options: &BatchOptions,
) -> BatchOutcome {
    let jobs: Vec<(&Instance, Frame)> = instances
        .iter()
        .flat_map(|i| targets.iter().map(move |t| (i, *t)))
        .collect();
    let slots: Vec<Mutex<Option<Result<Generation, GenerationError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = options.concurrency_limit.max(1).min(jobs.len());

    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some((instance, target)) = jobs.get(k) else {
                    break;
                };
                let mut request =
                    GenerationRequest::for_instance(instance, *target, variant, options.max_tokens);
                request.prompt_only = options.prompt_only;
                let result = generate(backend, &request, options.retry);
                *slots[k].lock().expect("result slot poisoned") = Some(result);
            });
        }
    });

    let mut outcome = BatchOutcome::default();
    for ((instance, target), slot) in jobs.iter().zip(slots) {
        match slot.into_inner().expect("result slot poisoned") {
            Some(Ok(gen)) => {
                outcome.total_latency += gen.latency;
                outcome.outputs.push(ReframedInstance {
                    instance_id: instance.id.clone(),
                    variant,
                    source_frame: instance.frame,
                    target_frame: *target,
                    generated: gen.text,
                    backend_id: gen.backend_id,
                    provenance_marker: true,
                });
            }
            Some(Err(e)) => outcome.failures.push(GenerationFailure {
                instance_id: instance.id.clone(),
                target_frame: *target,
                error: e.to_string(),
            }),
            None => unreachable!("every job index is claimed by exactly one worker"),
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{Split, Topic};
    use crate::text::Sentence;
    use std::collections::BTreeSet;
    use std::sync::atomic::AtomicU32;

    fn instances(n: usize) -> Vec<Instance> {
        (0..n)
            .map(|k| {
                let frame = Frame::ALL[k % 4];
                Instance {
                    id: format!("i{k:03}"),
                    article_id: "a".into(),
                    topic: Topic::Tobacco,
                    split: Split::Test,
                    frame,
                    all_frames: BTreeSet::from([frame]),
                    s1: Sentence::new(format!("Before {k}."), 0, 1),
                    s2: Sentence::new(format!("Middle {k}."), 2, 3),
                    s3: Sentence::new(format!("After {k}."), 4, 5),
                    entities: vec!["Congress".into()],
                }
            })
            .collect()
    }

    /// Sleeps a job-dependent time and tracks peak concurrency.
    struct Probe {
        in_flight: AtomicUsize,
        peak: AtomicUsize,
        fail_id: Option<String>,
    }

    impl Probe {
        fn new(fail_id: Option<&str>) -> Self {
            Probe {
                in_flight: AtomicUsize::new(0),
                peak: AtomicUsize::new(0),
                fail_id: fail_id.map(str::to_owned),
            }
        }
    }

    impl GenerationBackend for Probe {
        fn backend_id(&self) -> &str {
            "probe"
        }

        fn generate_raw(&self, r: &GenerationRequest) -> Result<String, GenerationError> {
            let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            let n: u64 = r.instance_id[1..].parse().unwrap();
            thread::sleep(Duration::from_millis((7 * n) % 5));
            self.in_flight.fetch_sub(1, Ordering::SeqCst);
            if self.fail_id.as_deref() == Some(r.instance_id.as_str()) && r.frame == Frame::Crime {
                return Err(GenerationError::Backend {
                    status: 400,
                    message: "bad".into(),
                });
            }
            Ok(format!("  {} to {}\nsecond line", r.instance_id, r.frame))
        }
    }

    #[test]
    fn batch_cardinality_order_and_bound() {
        let probe = Probe::new(None);
        let insts = instances(15);
        let opts = BatchOptions {
            concurrency_limit: 3,
            ..BatchOptions::default()
        };
        let out = reframe_batch(&insts, &Frame::ALL, Variant::default(), &probe, &opts);
        assert_eq!(out.outputs.len(), 60);
        assert!(out.failures.is_empty());
        assert!(probe.peak.load(Ordering::SeqCst) <= 3);
        for (k, r) in out.outputs.iter().enumerate() {
            assert_eq!(r.instance_id, insts[k / 4].id);
            assert_eq!(r.target_frame, Frame::ALL[k % 4]);
            assert_eq!(
                r.generated,
                format!("{} to {}", r.instance_id, r.target_frame)
            );
            assert!(r.provenance_marker);
        }
        let intra = out.outputs.iter().filter(|r| r.is_intra_frame()).count();
        assert_eq!(intra, 15);
    }

    #[test]
    fn intra_frame_flag() {
        let insts = instances(4);
        let out = reframe_batch(
            &insts[..1],
            &[insts[0].frame],
            Variant::default(),
            &Probe::new(None),
            &BatchOptions::default(),
        );
        assert!(out.outputs.iter().all(ReframedInstance::is_intra_frame));
    }

    #[test]
    fn partial_failure_is_collected() {
        let probe = Probe::new(Some("i007"));
        let out = reframe_batch(
            &instances(15),
            &Frame::ALL,
            Variant::default(),
            &probe,
            &BatchOptions::default(),
        );
        assert_eq!(out.outputs.len(), 59);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].instance_id, "i007");
        assert_eq!(out.failures[0].target_frame, Frame::Crime);
    }

    struct Flaky(AtomicU32, u32);

    impl GenerationBackend for Flaky {
        fn backend_id(&self) -> &str {
            "flaky"
        }
        fn generate_raw(&self, _: &GenerationRequest) -> Result<String, GenerationError> {
            if self.0.fetch_add(1, Ordering::SeqCst) < self.1 {
                Err(GenerationError::Transport("timeout".into()))
            } else {
                Ok("fine".into())
            }
        }
    }

    #[test]
    fn retries_then_fails() {
        let req = GenerationRequest::for_instance(
            &instances(1)[0],
            Frame::Economic,
            Variant::default(),
            8,
        );
        let policy = RetryPolicy {
            retries: 2,
            backoff: Duration::ZERO,
        };
        let g = generate(&Flaky(AtomicU32::new(0), 2), &req, policy).unwrap();
        assert_eq!(g.attempts, 3);
        assert_eq!(g.text, "fine");
        let e = generate(&Flaky(AtomicU32::new(0), 3), &req, policy).unwrap_err();
        assert!(matches!(e, GenerationError::Transport(_)));
    }

    struct Blank;
    impl GenerationBackend for Blank {
        fn backend_id(&self) -> &str {
            "blank"
        }
        fn generate_raw(&self, _: &GenerationRequest) -> Result<String, GenerationError> {
            Ok(" \n  ".into())
        }
    }

    #[test]
    fn empty_generation_is_an_error() {
        let mut req = GenerationRequest::for_instance(
            &instances(1)[0],
            Frame::Economic,
            Variant::default(),
            8,
        );
        let e = generate(&Blank, &req, RetryPolicy::default()).unwrap_err();
        assert_eq!(e.to_string(), "empty generation");
        req.max_tokens = 0;
        assert!(matches!(
            generate(&Blank, &req, RetryPolicy::default()),
            Err(GenerationError::InvalidRequest(_))
        ));
    }

    #[test]
    fn entities_only_sent_for_n_variants() {
        let inst = &instances(1)[0];
        assert!(
            GenerationRequest::for_instance(inst, Frame::Crime, "SA".parse().unwrap(), 8)
                .entities
                .is_empty()
        );
        assert_eq!(
            GenerationRequest::for_instance(inst, Frame::Crime, "SNA".parse().unwrap(), 8).entities,
            vec!["Congress"]
        );
    }
}
