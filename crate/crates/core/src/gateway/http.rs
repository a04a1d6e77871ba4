//! Client side of the `/v1` generation protocol.
//!
//! ```text
//! POST /v1/generate  {"s1","s3","frame","entities":[..],"variant","max_tokens","prompt_only"}
//!                    -> 200 {"s2": string} | 4xx {"error": string}
//! GET  /v1/health    -> {"status": "ok", "backend_id": string}
//! ```

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{GenerationBackend, GenerationError, GenerationRequest};
use crate::frame::Frame;
use crate::strategy::Variant;

#[derive(Serialize)]
struct WireRequest<'a> {
    s1: &'a str,
    s3: &'a str,
    frame: Frame,
    entities: &'a [String],
    variant: Variant,
    max_tokens: u32,
    prompt_only: bool,
}

impl<'a> From<&'a GenerationRequest> for WireRequest<'a> {
    fn from(r: &'a GenerationRequest) -> Self {
        WireRequest {
            s1: &r.s1,
            s3: &r.s3,
            frame: r.frame,
            entities: &r.entities,
            variant: r.variant,
            max_tokens: r.max_tokens,
            prompt_only: r.prompt_only,
        }
    }
}

#[derive(Deserialize)]
struct WireResponse {
    s2: String,
}

#[derive(Deserialize)]
struct WireError {
    error: String,
}

#[derive(Debug, Deserialize)]
pub struct Health {
    pub status: String,
    pub backend_id: String,
}

pub struct HttpBackend {
    base: String,
    agent: ureq::Agent,
    id: String,
}

fn transport(e: ureq::Error) -> GenerationError {
    match e {
        ureq::Error::Status(status, resp) => {
            let body = resp.into_string().unwrap_or_default();
            let message = serde_json::from_str::<WireError>(&body).map_or(body, |w| w.error);
            GenerationError::Backend { status, message }
        }
        ureq::Error::Transport(t) => GenerationError::Transport(t.to_string()),
    }
}

impl HttpBackend {
    /// Checks `/v1/health` and adopts the reported backend id.
    pub fn connect(base_url: &str, timeout: Duration) -> Result<Self, GenerationError> {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        let base = base_url.trim_end_matches('/').to_owned();
        let health = Self::health_of(&agent, &base)?;
        if health.status != "ok" {
            return Err(GenerationError::Protocol(format!(
                "backend status is `{}`",
                health.status
            )));
        }
        Ok(HttpBackend {
            base,
            agent,
            id: health.backend_id,
        })
    }

    fn health_of(agent: &ureq::Agent, base: &str) -> Result<Health, GenerationError> {
        let resp = agent
            .get(&format!("{base}/v1/health"))
            .call()
            .map_err(transport)?;
        resp.into_json::<Health>()
            .map_err(|e| GenerationError::Protocol(format!("health response: {e}")))
    }

    pub fn health(&self) -> Result<Health, GenerationError> {
        Self::health_of(&self.agent, &self.base)
    }

    /// Sends an arbitrary body to `/v1/generate`; used by conformance probes.
    fn post_raw(&self, body: &str) -> Result<(u16, String), GenerationError> {
        match self
            .agent
            .post(&format!("{}/v1/generate", self.base))
            .set("Content-Type", "application/json")
            .send_string(body)
        {
            Ok(resp) => {
                let status = resp.status();
                Ok((status, resp.into_string().unwrap_or_default()))
            }
            Err(ureq::Error::Status(status, resp)) => {
                Ok((status, resp.into_string().unwrap_or_default()))
            }
            Err(e) => Err(transport(e)),
        }
    }
}

impl GenerationBackend for HttpBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn generate_raw(&self, request: &GenerationRequest) -> Result<String, GenerationError> {
        let resp = self
            .agent
            .post(&format!("{}/v1/generate", self.base))
            .send_json(WireRequest::from(request))
            .map_err(transport)?;
        let body = resp
            .into_string()
            .map_err(|e| GenerationError::Transport(e.to_string()))?;
        serde_json::from_str::<WireResponse>(&body)
            .map(|r| r.s2)
            .map_err(|e| GenerationError::Protocol(format!("malformed response `{body}`: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConformanceCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Protocol conformance probes against a running backend: health, one
/// generation per frame, malformed-request rejection and prompt-only
/// invariance to s3.
pub fn run_conformance(base_url: &str, timeout: Duration) -> Vec<ConformanceCheck> {
    let mut checks = Vec::new();
    let backend = match HttpBackend::connect(base_url, timeout) {
        Ok(b) => {
            checks.push(ConformanceCheck {
                name: "health",
                passed: true,
                detail: format!("backend_id={}", b.backend_id()),
            });
            b
        }
        Err(e) => {
            checks.push(ConformanceCheck {
                name: "health",
                passed: false,
                detail: e.to_string(),
            });
            return checks;
        }
    };

    let base_request = |frame: Frame| GenerationRequest {
        instance_id: "conformance".into(),
        s1: "The state legislature met on Tuesday.".into(),
        s3: "The vote is expected next week.".into(),
        frame,
        entities: vec!["Congress".into()],
        variant: Variant::new(false, true, false),
        max_tokens: 32,
        prompt_only: false,
    };

    for frame in Frame::ALL {
        let name = match frame {
            Frame::Economic => "generate_e",
            Frame::Legality => "generate_l",
            Frame::Policy => "generate_p",
            Frame::Crime => "generate_c",
        };
        let (passed, detail) = match backend.generate_raw(&base_request(frame)) {
            Ok(s2) if !s2.trim().is_empty() && !s2.trim().contains('\n') => (true, s2),
            Ok(s2) => (false, format!("not a non-empty single line: {s2:?}")),
            Err(e) => (false, e.to_string()),
        };
        checks.push(ConformanceCheck {
            name,
            passed,
            detail,
        });
    }

    let (passed, detail) = match backend.post_raw("{\"s1\": \"unterminated") {
        Ok((400, body)) => match serde_json::from_str::<WireError>(&body) {
            Ok(w) => (true, format!("400: {}", w.error)),
            Err(_) => (false, format!("400 without an error object: {body}")),
        },
        Ok((status, body)) => (false, format!("expected 400, got {status}: {body}")),
        Err(e) => (false, e.to_string()),
    };
    checks.push(ConformanceCheck {
        name: "malformed_request_400",
        passed,
        detail,
    });

    let mut a = base_request(Frame::Economic);
    a.prompt_only = true;
    let mut b = a.clone();
    b.s3 = "A completely different closing sentence about something else.".into();
    let (passed, detail) = match (backend.generate_raw(&a), backend.generate_raw(&b)) {
        (Ok(x), Ok(y)) if x == y => (true, x),
        (Ok(x), Ok(y)) => (false, format!("outputs differ: {x:?} vs {y:?}")),
        (Err(e), _) | (_, Err(e)) => (false, e.to_string()),
    };
    checks.push(ConformanceCheck {
        name: "prompt_only_ignores_s3",
        passed,
        detail,
    });
    checks
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};
    use std::sync::Arc;
    use std::thread;

    #[derive(Clone, Copy)]
    enum Mode {
        Good,
        FailFirst(u32),
        BadJson,
        Reject,
        IgnorePromptOnly,
    }

    struct Server {
        url: String,
        seen: Arc<std::sync::Mutex<Vec<String>>>,
    }

    fn serve(mode: Mode) -> Server {
        let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
        let url = format!("http://{}", server.server_addr().to_ip().unwrap());
        let seen = Arc::new(std::sync::Mutex::new(Vec::new()));
        let seen2 = Arc::clone(&seen);
        let failures = AtomicU32::new(0);
        thread::spawn(move || {
            for mut req in server.incoming_requests() {
                let mut body = String::new();
                req.as_reader().read_to_string(&mut body).unwrap();
                let (status, out) = match (req.method(), req.url()) {
                    (tiny_http::Method::Get, "/v1/health") => {
                        (200, r#"{"status":"ok","backend_id":"toy-1"}"#.to_string())
                    }
                    (tiny_http::Method::Post, "/v1/generate") => {
                        seen2.lock().unwrap().push(body.clone());
                        match serde_json::from_str::<serde_json::Value>(&body) {
                            Err(_) => (400, r#"{"error":"malformed json"}"#.to_string()),
                            Ok(v) => match mode {
                                Mode::FailFirst(n)
                                    if failures.fetch_add(1, Ordering::SeqCst) < n =>
                                {
                                    (503, r#"{"error":"loading"}"#.to_string())
                                }
                                Mode::BadJson => (200, "not json".to_string()),
                                Mode::Reject => {
                                    (422, r#"{"error":"unsupported frame"}"#.to_string())
                                }
                                _ => {
                                    let prompt_only = v["prompt_only"].as_bool().unwrap();
                                    let s3 =
                                        if prompt_only && !matches!(mode, Mode::IgnorePromptOnly) {
                                            ""
                                        } else {
                                            v["s3"].as_str().unwrap()
                                        };
                                    let s2 = format!(
                                        "{} {} {}",
                                        v["frame"].as_str().unwrap(),
                                        v["s1"].as_str().unwrap(),
                                        s3
                                    );
                                    (200, serde_json::json!({ "s2": s2 }).to_string())
                                }
                            },
                        }
                    }
                    _ => (404, r#"{"error":"not found"}"#.to_string()),
                };
                let _ = req.respond(tiny_http::Response::from_string(out).with_status_code(status));
            }
        });
        Server { url, seen }
    }

    fn request() -> GenerationRequest {
        GenerationRequest {
            instance_id: "i1".into(),
            s1: "One.".into(),
            s3: "Three.".into(),
            frame: Frame::Legality,
            entities: vec!["Congress".into()],
            variant: Variant::new(true, true, true),
            max_tokens: 16,
            prompt_only: false,
        }
    }

    #[test]
    fn wire_format_is_exact() {
        let body = serde_json::to_string(&WireRequest::from(&request())).unwrap();
        assert_eq!(
            body,
            r#"{"s1":"One.","s3":"Three.","frame":"l","entities":["Congress"],"variant":"SFNA","max_tokens":16,"prompt_only":false}"#
        );
    }

    #[test]
    fn health_and_generate() {
        let s = serve(Mode::Good);
        let b = HttpBackend::connect(&s.url, Duration::from_secs(5)).unwrap();
        assert_eq!(b.backend_id(), "toy-1");
        assert_eq!(b.generate_raw(&request()).unwrap(), "l One. Three.");
        let sent = s.seen.lock().unwrap()[0].clone();
        assert!(sent.contains(r#""variant":"SFNA""#));
    }

    #[test]
    fn retries_on_503() {
        let s = serve(Mode::FailFirst(2));
        let b = HttpBackend::connect(&s.url, Duration::from_secs(5)).unwrap();
        let policy = super::super::RetryPolicy {
            retries: 2,
            backoff: Duration::ZERO,
        };
        let g = super::super::generate(&b, &request(), policy).unwrap();
        assert_eq!(g.attempts, 3);
    }

    #[test]
    fn client_errors_are_structured() {
        let s = serve(Mode::Reject);
        let b = HttpBackend::connect(&s.url, Duration::from_secs(5)).unwrap();
        let e = b.generate_raw(&request()).unwrap_err();
        assert_eq!(
            e,
            GenerationError::Backend {
                status: 422,
                message: "unsupported frame".into()
            }
        );
        assert!(!e.is_retryable());

        let s = serve(Mode::BadJson);
        let b = HttpBackend::connect(&s.url, Duration::from_secs(5)).unwrap();
        assert!(matches!(
            b.generate_raw(&request()),
            Err(GenerationError::Protocol(_))
        ));
    }

    #[test]
    fn unreachable_backend() {
        let e = HttpBackend::connect("http://127.0.0.1:9", Duration::from_millis(500))
            .err()
            .unwrap();
        assert!(e.is_retryable());
    }

    #[test]
    fn conformance_suite() {
        let s = serve(Mode::Good);
        let checks = run_conformance(&s.url, Duration::from_secs(5));
        assert_eq!(checks.len(), 7);
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");

        let s = serve(Mode::IgnorePromptOnly);
        let checks = run_conformance(&s.url, Duration::from_secs(5));
        let probe = checks
            .iter()
            .find(|c| c.name == "prompt_only_ignores_s3")
            .unwrap();
        assert!(!probe.passed);
    }
}
