use rand::seq::SliceRandom;

use super::{GenerationBackend, GenerationError, GenerationRequest};
use crate::frame::Frame;
use crate::seed::{fnv1a, stream};

/// Keywords per frame; the first one always appears in the output.
fn keywords(frame: Frame) -> &'static [&'static str] {
    match frame {
        Frame::Economic => &["industry", "million", "tobacco", "smoking"],
        Frame::Legality => &["court", "law", "judge", "supreme"],
        Frame::Policy => &["bill", "house", "ban", "state"],
        Frame::Crime => &["police", "murder", "penalty", "death"],
    }
}

const TEMPLATES: &[&str] = &[
    "{subject} said the {k1} would weigh on the {k2} debate.",
    "According to {subject}, the {k1} question now shapes the {k2} outlook.",
    "{subject} pointed to the {k1} and the {k2} as the main concern.",
];

/// Deterministic template output: up to three request entities plus the
/// frame's keywords. Identical request and seed give an identical sentence.
/// In prompt-only mode s3 and entities are ignored.
pub fn mock_generate(request: &GenerationRequest, seed: u64) -> String {
    let key = if request.prompt_only {
        format!("{}|{}|{}", request.frame, request.variant, request.s1)
    } else {
        format!(
            "{}|{}|{}|{}|{}",
            request.frame,
            request.variant,
            request.s1,
            request.s3,
            request.entities.join("\u{1f}")
        )
    };
    let mut rng = stream(seed, &key, u64::from(request.max_tokens));
    let words = keywords(request.frame);
    let k2 = words[1..].choose(&mut rng).copied().unwrap_or(words[0]);
    let template = TEMPLATES.choose(&mut rng).copied().unwrap_or(TEMPLATES[0]);

    let entities: &[String] = if request.prompt_only {
        &[]
    } else {
        &request.entities
    };
    let subject = match entities.iter().take(3).collect::<Vec<_>>().as_slice() {
        [] => "Officials".to_owned(),
        [one] => (*one).clone(),
        [a, b] => format!("{a} and {b}"),
        [a, b, c] => format!("{a}, {b} and {c}"),
        _ => unreachable!(),
    };
    template
        .replace("{subject}", &subject)
        .replace("{k1}", words[0])
        .replace("{k2}", k2)
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
    id: String,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        MockBackend {
            seed,
            id: format!("mock-{:08x}", fnv1a(&seed.to_le_bytes()) as u32),
        }
    }
}

impl GenerationBackend for MockBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn generate_raw(&self, request: &GenerationRequest) -> Result<String, GenerationError> {
        Ok(mock_generate(request, self.seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::Variant;

    fn req(frame: Frame, entities: &[&str]) -> GenerationRequest {
        GenerationRequest {
            instance_id: "x".into(),
            s1: "Before.".into(),
            s3: "After.".into(),
            frame,
            entities: entities.iter().map(|s| s.to_string()).collect(),
            variant: Variant::default(),
            max_tokens: 32,
            prompt_only: false,
        }
    }

    #[test]
    fn crime_with_entity() {
        let out = mock_generate(&req(Frame::Crime, &["Congress"]), 1);
        assert!(out.contains("Congress") && out.contains("police"), "{out}");
    }

    #[test]
    fn economic_without_entities() {
        let out = mock_generate(&req(Frame::Economic, &[]), 1);
        assert!(out.contains("industry"), "{out}");
    }

    #[test]
    fn deterministic_per_seed() {
        let r = req(Frame::Legality, &["A", "B", "C", "D"]);
        assert_eq!(mock_generate(&r, 3), mock_generate(&r, 3));
        let out = mock_generate(&r, 3);
        assert!(out.contains("A, B and C") && !out.contains('D'), "{out}");
        assert!(out.contains("court"));
    }

    #[test]
    fn prompt_only_ignores_s3_and_entities() {
        let mut a = req(Frame::Policy, &["Congress"]);
        a.prompt_only = true;
        let mut b = a.clone();
        b.s3 = "Something else entirely.".into();
        b.entities.clear();
        assert_eq!(mock_generate(&a, 0), mock_generate(&b, 0));
        assert!(!mock_generate(&a, 0).contains("Congress"));
    }
}
