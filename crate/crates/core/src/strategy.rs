//! Training-set emission for the eight strategy variants.
//!
//! Three independent switches select a variant: framed-language pretraining
//! (F), named-entity serialization (N) and adversarial negatives (A).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entity::entity_jaccard;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::frame::{Frame, Split};
use crate::instance::Instance;
use crate::seed::stream;

pub const MASK: &str = "[MASK]";
pub const NE_OPEN: &str = "[NE]";
pub const NE_CLOSE: &str = "[/NE]";
const ENTITY_SEP: &str = "; ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Variant {
    pub use_f: bool,
    pub use_n: bool,
    pub use_a: bool,
}

impl Variant {
    pub fn new(use_f: bool, use_n: bool, use_a: bool) -> Self {
        Variant {
            use_f,
            use_n,
            use_a,
        }
    }

    pub fn name(self) -> &'static str {
        match (self.use_f, self.use_n, self.use_a) {
            (false, false, false) => "S0",
            (true, false, false) => "SF",
            (false, true, false) => "SN",
            (false, false, true) => "SA",
            (true, true, false) => "SFN",
            (true, false, true) => "SFA",
            (false, true, true) => "SNA",
            (true, true, true) => "SFNA",
        }
    }
}

/// All eight variants in table order: S0, SF, SN, SA, SFN, SFA, SNA, SFNA.
pub fn enumerate_variants() -> [Variant; 8] {
    [
        Variant::new(false, false, false),
        Variant::new(true, false, false),
        Variant::new(false, true, false),
        Variant::new(false, false, true),
        Variant::new(true, true, false),
        Variant::new(true, false, true),
        Variant::new(false, true, true),
        Variant::new(true, true, true),
    ]
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace(['_', '∅'], "");
        let norm = match norm.as_str() {
            "S" | "SEMPTY" | "SNONE" => "S0".to_string(),
            _ => norm,
        };
        enumerate_variants()
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| {
                format!("unknown variant `{s}` (expected S0, SF, SN, SA, SFN, SFA, SNA or SFNA)")
            })
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleKind {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub input: String,
    pub target: String,
    pub frame: Frame,
    pub variant: Variant,
    pub kind: ExampleKind,
    pub source_instance_id: String,
    pub negative_source_id: Option<String>,
}

pub fn serialize_parts(s1: &str, entities: &[String], s3: &str, with_entities: bool) -> String {
    if with_entities {
        if entities.is_empty() {
            format!("{s1} {NE_OPEN} {NE_CLOSE} {s3}")
        } else {
            format!(
                "{s1} {NE_OPEN} {} {NE_CLOSE} {s3}",
                entities.join(ENTITY_SEP)
            )
        }
    } else {
        format!("{s1} {MASK} {s3}")
    }
}

/// `"{s1} [MASK] {s3}"`, or `"{s1} [NE] e1; e2 [/NE] {s3}"` with entities.
pub fn serialize_input(instance: &Instance, with_entities: bool) -> String {
    serialize_parts(
        &instance.s1.text,
        &instance.entities,
        &instance.s3.text,
        with_entities,
    )
}

/// Parsed form of a serialized input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedInput {
    pub s1: String,
    /// `None` for `[MASK]` inputs.
    pub entities: Option<Vec<String>>,
    pub s3: String,
}

/// Inverse of [`serialize_parts`] for inputs whose parts contain no reserved
/// tokens.
pub fn parse_input(input: &str) -> Option<ParsedInput> {
    fn strip_one_space_end(s: &str) -> &str {
        s.strip_suffix(' ').unwrap_or(s)
    }
    fn strip_one_space_start(s: &str) -> &str {
        s.strip_prefix(' ').unwrap_or(s)
    }
    if let Some((left, right)) = input.split_once(NE_OPEN) {
        let (middle, right) = right.split_once(NE_CLOSE)?;
        let middle = middle.strip_prefix(' ')?.strip_suffix(' ').unwrap_or("");
        let entities = if middle.is_empty() {
            Vec::new()
        } else {
            middle.split(ENTITY_SEP).map(str::to_owned).collect()
        };
        return Some(ParsedInput {
            s1: strip_one_space_end(left).to_owned(),
            entities: Some(entities),
            s3: strip_one_space_start(right).to_owned(),
        });
    }
    let (left, right) = input.split_once(MASK)?;
    Some(ParsedInput {
        s1: strip_one_space_end(left).to_owned(),
        entities: None,
        s3: strip_one_space_start(right).to_owned(),
    })
}

/// Rejects instances whose text or entities contain a reserved token, or
/// entities containing the entity separator.
pub fn check_reserved(instance: &Instance) -> Result<()> {
    let texts = [&instance.s1.text, &instance.s2.text, &instance.s3.text];
    for text in texts.into_iter().chain(instance.entities.iter()) {
        for token in [MASK, NE_OPEN, NE_CLOSE] {
            if text.contains(token) {
                return Err(Error::ReservedToken {
                    id: instance.id.clone(),
                    token: token.to_owned(),
                });
            }
        }
    }
    for e in &instance.entities {
        if e.contains(';') || e.trim().is_empty() || e.trim() != e {
            return Err(Error::ReservedToken {
                id: instance.id.clone(),
                token: ";".to_owned(),
            });
        }
    }
    Ok(())
}

fn require_training(instances: &[Instance]) -> Result<()> {
    match instances.iter().find(|i| i.split != Split::Train) {
        Some(i) => Err(Error::NonTrainingInstance(i.id.clone())),
        None => Ok(()),
    }
}

fn positive(instance: &Instance, variant: Variant) -> TrainingExample {
    TrainingExample {
        input: serialize_input(instance, variant.use_n),
        target: instance.s2.text.clone(),
        frame: instance.frame,
        variant,
        kind: ExampleKind::Positive,
        source_instance_id: instance.id.clone(),
        negative_source_id: None,
    }
}

/// Pooled positives over every frame, for framed-language pretraining.
/// Multi-label sentences appear once per frame label.
pub fn build_pretrain_set(
    instances: &[Instance],
    variant: Variant,
) -> Result<Vec<TrainingExample>> {
    require_training(instances)?;
    let mut sorted: Vec<&Instance> = instances.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    sorted
        .into_iter()
        .map(|i| {
            check_reserved(i)?;
            Ok(positive(i, variant))
        })
        .collect()
}

/// Positives for validation-based model selection; no split restriction.
pub fn build_validation_set(
    instances: &[Instance],
    frame: Option<Frame>,
    variant: Variant,
) -> Vec<TrainingExample> {
    let mut sorted: Vec<&Instance> = instances
        .iter()
        .filter(|i| frame.is_none_or(|f| i.frame == f))
        .collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    sorted.into_iter().map(|i| positive(i, variant)).collect()
}

fn eligible(instance: &Instance, candidate: &Instance) -> bool {
    candidate.id != instance.id && candidate.s2.text != instance.s2.text
}

/// Chooses the output sentence for one negative example.
///
/// Candidates are the pool members of `frame` other than `instance` itself
/// (and other than copies of its s2). With `use_n` the candidate with the
/// highest entity Jaccard wins, ties going to the smallest id; otherwise the
/// pick is uniform over candidates in id order, seeded by `seed` and the
/// instance id.
pub fn select_adversarial_target<'a>(
    instance: &Instance,
    frame: Frame,
    pool: &'a [Instance],
    use_n: bool,
    seed: u64,
) -> Result<&'a Instance> {
    let mut candidates: Vec<&Instance> = pool
        .iter()
        .filter(|c| c.frame == frame && eligible(instance, c))
        .collect();
    if candidates.is_empty() {
        return Err(Error::EmptyPool(frame));
    }
    candidates.sort_by(|a, b| a.id.cmp(&b.id));
    if use_n {
        let mut best = candidates[0];
        let mut best_score = entity_jaccard(&instance.entities, &best.entities);
        for c in &candidates[1..] {
            let score = entity_jaccard(&instance.entities, &c.entities);
            if score > best_score {
                best = c;
                best_score = score;
            }
        }
        Ok(best)
    } else {
        let mut rng = stream(seed, &instance.id, 0);
        Ok(candidates[rng.gen_range(0..candidates.len())])
    }
}

/// Indexed form of [`select_adversarial_target`] for whole training sets:
/// entity overlap is found through an inverted index instead of a scan.
pub struct AdversarialSampler<'a> {
    frame: Frame,
    pool: Vec<&'a Instance>,
    entity_sets: Vec<HashSet<String>>,
    by_entity: HashMap<String, Vec<usize>>,
    by_id: HashMap<&'a str, usize>,
    by_text: HashMap<&'a str, Vec<usize>>,
}

impl<'a> AdversarialSampler<'a> {
    pub fn new(frame: Frame, pool: &'a [Instance]) -> Self {
        let mut members: Vec<&Instance> = pool.iter().filter(|i| i.frame == frame).collect();
        members.sort_by(|a, b| a.id.cmp(&b.id));
        let entity_sets: Vec<HashSet<String>> = members
            .iter()
            .map(|i| i.entities.iter().map(|e| e.to_lowercase()).collect())
            .collect();
        let mut by_entity: HashMap<String, Vec<usize>> = HashMap::new();
        for (idx, set) in entity_sets.iter().enumerate() {
            for e in set {
                by_entity.entry(e.clone()).or_default().push(idx);
            }
        }
        let by_id = members
            .iter()
            .enumerate()
            .map(|(i, m)| (m.id.as_str(), i))
            .collect();
        let mut by_text: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, m) in members.iter().enumerate() {
            by_text.entry(m.s2.text.as_str()).or_default().push(i);
        }
        AdversarialSampler {
            frame,
            pool: members,
            entity_sets,
            by_entity,
            by_id,
            by_text,
        }
    }

    /// Pool positions that may not be chosen for `instance`, ascending.
    fn excluded(&self, instance: &Instance) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .by_text
            .get(instance.s2.text.as_str())
            .cloned()
            .unwrap_or_default();
        if let Some(&i) = self.by_id.get(instance.id.as_str()) {
            out.push(i);
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The `round`-th choice for `instance`: round 0 equals
    /// [`select_adversarial_target`]. Later rounds walk down the ranking
    /// (entity mode) or draw from a fresh stream (random mode).
    pub fn select(
        &self,
        instance: &Instance,
        use_n: bool,
        seed: u64,
        round: u64,
    ) -> Result<&'a Instance> {
        let excluded = self.excluded(instance);
        let available = self.pool.len() - excluded.len();
        if available == 0 {
            return Err(Error::EmptyPool(self.frame));
        }
        if !use_n {
            let mut rng = stream(seed, &instance.id, round);
            let mut pos = rng.gen_range(0..available);
            for &x in &excluded {
                if x <= pos {
                    pos += 1;
                }
            }
            return Ok(self.pool[pos]);
        }

        let query: HashSet<String> = instance.entities.iter().map(|e| e.to_lowercase()).collect();
        let mut overlap: HashMap<usize, usize> = HashMap::new();
        for e in &query {
            for &idx in self.by_entity.get(e).into_iter().flatten() {
                *overlap.entry(idx).or_default() += 1;
            }
        }
        let mut ranked: Vec<(f64, usize)> = overlap
            .into_iter()
            .filter(|(idx, _)| excluded.binary_search(idx).is_err())
            .map(|(idx, inter)| {
                let union = query.len() + self.entity_sets[idx].len() - inter;
                (inter as f64 / union as f64, idx)
            })
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

        let round = (round as usize) % available;
        if round < ranked.len() {
            return Ok(self.pool[ranked[round].1]);
        }
        // zero-similarity candidates follow in id order
        let scored: HashSet<usize> = ranked.iter().map(|r| r.1).collect();
        let mut skip = round - ranked.len();
        for (idx, inst) in self.pool.iter().enumerate() {
            if scored.contains(&idx) || excluded.binary_search(&idx).is_ok() {
                continue;
            }
            if skip == 0 {
                return Ok(inst);
            }
            skip -= 1;
        }
        unreachable!("round is reduced modulo the available candidates")
    }
}

/// Frame-specific training set: positives of `frame` in id order, then (for
/// adversarial variants) `⌊neg_ratio · |positives|⌋` negatives in source-id
/// order. Negatives keep the positive's serialized input and replace the
/// target with another sentence of the same frame.
pub fn build_finetune_set(
    instances: &[Instance],
    frame: Frame,
    variant: Variant,
    seed: u64,
    neg_ratio: f64,
) -> Result<Vec<TrainingExample>> {
    build_finetune_set_with(instances, frame, variant, seed, neg_ratio, Exec::default())
}

pub fn build_finetune_set_with(
    instances: &[Instance],
    frame: Frame,
    variant: Variant,
    seed: u64,
    neg_ratio: f64,
    exec: Exec,
) -> Result<Vec<TrainingExample>> {
    require_training(instances)?;
    if !(neg_ratio.is_finite() && neg_ratio >= 0.0) {
        return Err(Error::Config(format!(
            "neg_ratio must be a non-negative number, got {neg_ratio}"
        )));
    }
    let mut positives: Vec<&Instance> = instances.iter().filter(|i| i.frame == frame).collect();
    if positives.is_empty() {
        return Err(Error::NoTrainingInstances(frame));
    }
    positives.sort_by(|a, b| a.id.cmp(&b.id));
    for p in &positives {
        check_reserved(p)?;
    }

    let mut out: Vec<TrainingExample> = positives.iter().map(|i| positive(i, variant)).collect();
    if !variant.use_a {
        return Ok(out);
    }

    let n = positives.len();
    let wanted = (neg_ratio * n as f64).floor() as usize;
    let jobs: Vec<(usize, u64)> = if wanted <= n {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream(seed, &format!("negatives:{frame}"), 0));
        let mut chosen: Vec<usize> = order.into_iter().take(wanted).collect();
        chosen.sort_unstable();
        chosen.into_iter().map(|i| (i, 0)).collect()
    } else {
        let mut jobs: Vec<(usize, u64)> = (0..wanted).map(|j| (j % n, (j / n) as u64)).collect();
        jobs.sort_unstable();
        jobs
    };

    let sampler = AdversarialSampler::new(frame, instances);
    let negatives = exec.try_map(&jobs, |&(src, round)| {
        let source = positives[src];
        let target = sampler.select(source, variant.use_n, seed, round)?;
        Ok::<_, Error>(TrainingExample {
            input: serialize_input(source, variant.use_n),
            target: target.s2.text.clone(),
            frame,
            variant,
            kind: ExampleKind::Negative,
            source_instance_id: source.id.clone(),
            negative_source_id: Some(target.id.clone()),
        })
    })?;
    out.extend(negatives);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Keep the checkpoint that scores best on `validation_file`, within the
    /// epoch budget.
    Validation,
    /// Train for exactly the epoch budget.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub file: String,
    pub kinds: Vec<ExampleKind>,
    pub epochs: u32,
    pub selection: Selection,
    pub validation_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPlan {
    pub variant: Variant,
    pub frame: Frame,
    pub phases: Vec<Phase>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochBudget {
    pub max_epochs: u32,
    pub adversarial_epochs: u32,
}

impl Default for EpochBudget {
    fn default() -> Self {
        EpochBudget {
            max_epochs: 10,
            adversarial_epochs: 3,
        }
    }
}

pub fn train_file(variant: Variant, frame: Frame) -> String {
    format!("train/{variant}/{frame}.jsonl")
}

pub fn pretrain_file(variant: Variant) -> String {
    format!("train/{variant}/pretrain.jsonl")
}

pub fn valid_file(variant: Variant, frame: Option<Frame>) -> String {
    match frame {
        Some(f) => format!("valid/{variant}/{f}.jsonl"),
        None => format!("valid/{variant}/pretrain.jsonl"),
    }
}

pub fn plan_file(variant: Variant, frame: Frame) -> String {
    format!("plan/{variant}/{frame}.json")
}

/// Pretraining on the pooled set (F only), fine-tuning on the frame's
/// positives, then a fixed-length adversarial phase on positives plus
/// negatives (A only).
pub fn emit_training_plan(variant: Variant, frame: Frame, budget: EpochBudget) -> TrainingPlan {
    let mut phases = Vec::with_capacity(3);
    if variant.use_f {
        phases.push(Phase {
            name: "pretrain".into(),
            file: pretrain_file(variant),
            kinds: vec![ExampleKind::Positive],
            epochs: budget.max_epochs,
            selection: Selection::Validation,
            validation_file: Some(valid_file(variant, None)),
        });
    }
    phases.push(Phase {
        name: "finetune".into(),
        file: train_file(variant, frame),
        kinds: vec![ExampleKind::Positive],
        epochs: budget.max_epochs,
        selection: Selection::Validation,
        validation_file: Some(valid_file(variant, Some(frame))),
    });
    if variant.use_a {
        phases.push(Phase {
            name: "adversarial".into(),
            file: train_file(variant, frame),
            kinds: vec![ExampleKind::Positive, ExampleKind::Negative],
            epochs: budget.adversarial_epochs,
            selection: Selection::Fixed,
            validation_file: None,
        });
    }
    TrainingPlan {
        variant,
        frame,
        phases,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Topic;
    use crate::text::Sentence;
    use std::collections::BTreeSet;

    pub(crate) fn inst(id: &str, frame: Frame, s2: &str, entities: &[&str]) -> Instance {
        Instance {
            id: id.into(),
            article_id: "a".into(),
            topic: Topic::Immigration,
            split: Split::Train,
            frame,
            all_frames: BTreeSet::from([frame]),
            s1: Sentence::new("A.".into(), 0, 2),
            s2: Sentence::new(s2.into(), 3, 3 + s2.len()),
            s3: Sentence::new("B.".into(), 100, 102),
            entities: entities.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn serialize_examples() {
        let mut i = inst("x", Frame::Economic, "mid", &[]);
        assert_eq!(serialize_input(&i, false), "A. [MASK] B.");
        assert_eq!(serialize_input(&i, true), "A. [NE] [/NE] B.");
        i.entities = vec!["Congress".into(), "Simpson".into()];
        assert_eq!(
            serialize_input(&i, true),
            "A. [NE] Congress; Simpson [/NE] B."
        );
        assert_eq!(serialize_input(&i, false), "A. [MASK] B.");
    }

    #[test]
    fn parse_inverts_serialize() {
        let e = vec!["Congress".to_string(), "Alan K. Simpson".to_string()];
        let p = parse_input(&serialize_parts("First one.", &e, "Last one.", true)).unwrap();
        assert_eq!(p.s1, "First one.");
        assert_eq!(p.entities, Some(e));
        assert_eq!(p.s3, "Last one.");
        let p = parse_input(&serialize_parts("x", &[], "y", true)).unwrap();
        assert_eq!(p.entities, Some(vec![]));
        let p = parse_input(&serialize_parts("x", &[], "y", false)).unwrap();
        assert_eq!((p.s1.as_str(), p.entities, p.s3.as_str()), ("x", None, "y"));
        assert!(parse_input("no tokens here").is_none());
    }

    #[test]
    fn reserved_tokens_rejected() {
        let i = inst("x", Frame::Economic, "a [NE] b", &[]);
        assert!(matches!(
            check_reserved(&i),
            Err(Error::ReservedToken { .. })
        ));
        let i = inst("x", Frame::Economic, "fine", &["A; B"]);
        assert!(check_reserved(&i).is_err());
        assert!(check_reserved(&inst("x", Frame::Economic, "fine", &["A B"])).is_ok());
    }

    #[test]
    fn variant_lattice() {
        let all = enumerate_variants();
        let names: BTreeSet<&str> = all.iter().map(|v| v.name()).collect();
        assert_eq!(names.len(), 8);
        let triples: BTreeSet<(bool, bool, bool)> =
            all.iter().map(|v| (v.use_f, v.use_n, v.use_a)).collect();
        assert_eq!(triples.len(), 8);
        for v in all {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!(
            "s_fna".parse::<Variant>().unwrap(),
            Variant::new(true, true, true)
        );
        assert!("SX".parse::<Variant>().is_err());
    }

    #[test]
    fn pretrain_pools_all_frames() {
        let mut pool = Vec::new();
        for f in Frame::ALL {
            for k in 0..10 {
                pool.push(inst(&format!("{f}{k:02}"), f, &format!("s {f} {k}"), &[]));
            }
        }
        let set = build_pretrain_set(&pool, Variant::new(true, false, false)).unwrap();
        assert_eq!(set.len(), 40);
        assert!(set.iter().all(|e| e.kind == ExampleKind::Positive));

        // multi-label duplicate kept once per label
        let mut dup = inst("d:p", Frame::Policy, "same", &[]);
        dup.all_frames = BTreeSet::from([Frame::Policy, Frame::Crime]);
        let mut dup2 = dup.clone();
        dup2.id = "d:c".into();
        dup2.frame = Frame::Crime;
        let set = build_pretrain_set(&[dup, dup2], Variant::default()).unwrap();
        assert_eq!(set.iter().filter(|e| e.target == "same").count(), 2);

        let mut bad = inst("v", Frame::Crime, "x", &[]);
        bad.split = Split::Validation;
        assert!(matches!(
            build_pretrain_set(&[bad], Variant::default()),
            Err(Error::NonTrainingInstance(_))
        ));
    }

    #[test]
    fn argmax_and_tie_rule() {
        let me = inst("q", Frame::Crime, "query", &["Congress", "Simpson"]);
        let pool = vec![
            inst("A", Frame::Crime, "a", &["Congress", "Senate", "House"]), // 1/4
            inst("B", Frame::Crime, "b", &["congress", "SIMPSON"]),         // 1
            inst("C", Frame::Crime, "c", &[]),                              // 0
            inst("D", Frame::Economic, "d", &["Congress", "Simpson"]),      // wrong frame
        ];
        let got = select_adversarial_target(&me, Frame::Crime, &pool, true, 0).unwrap();
        assert_eq!(got.id, "B");

        let pool = vec![
            inst("i12", Frame::Crime, "a", &["Congress", "Ohio"]),
            inst("i07", Frame::Crime, "b", &["Congress", "Iowa"]),
        ];
        let me = inst("q", Frame::Crime, "query", &["Congress"]);
        assert_eq!(
            select_adversarial_target(&me, Frame::Crime, &pool, true, 0)
                .unwrap()
                .id,
            "i07"
        );
    }

    #[test]
    fn excludes_self_and_same_text() {
        let me = inst("q", Frame::Crime, "same", &["X"]);
        let pool = vec![
            me.clone(),
            inst("r", Frame::Crime, "same", &["X"]),
            inst("s", Frame::Crime, "other", &[]),
        ];
        assert_eq!(
            select_adversarial_target(&me, Frame::Crime, &pool, true, 0)
                .unwrap()
                .id,
            "s"
        );
        let only_self = vec![me.clone()];
        assert!(matches!(
            select_adversarial_target(&me, Frame::Crime, &only_self, false, 0),
            Err(Error::EmptyPool(Frame::Crime))
        ));
    }

    #[test]
    fn random_pick_is_seeded() {
        let pool: Vec<Instance> = (0..100)
            .map(|k| inst(&format!("c{k:03}"), Frame::Legality, &format!("t{k}"), &[]))
            .collect();
        let me = inst("q", Frame::Legality, "query", &[]);
        let a = select_adversarial_target(&me, Frame::Legality, &pool, false, 42)
            .unwrap()
            .id
            .clone();
        let b = select_adversarial_target(&me, Frame::Legality, &pool, false, 42)
            .unwrap()
            .id
            .clone();
        assert_eq!(a, b);
        let picks: BTreeSet<String> = (0..20)
            .map(|s| {
                select_adversarial_target(&me, Frame::Legality, &pool, false, s)
                    .unwrap()
                    .id
                    .clone()
            })
            .collect();
        assert!(picks.len() > 1);
    }

    #[test]
    fn sampler_round_zero_matches_direct_selection() {
        let pool: Vec<Instance> = (0..40)
            .map(|k| {
                let ents: Vec<String> = (0..(k % 4)).map(|j| format!("E{}", (k + j) % 6)).collect();
                let refs: Vec<&str> = ents.iter().map(String::as_str).collect();
                inst(
                    &format!("c{k:03}"),
                    Frame::Policy,
                    &format!("t{}", k % 30),
                    &refs,
                )
            })
            .collect();
        let sampler = AdversarialSampler::new(Frame::Policy, &pool);
        for q in &pool {
            for use_n in [true, false] {
                let direct = select_adversarial_target(q, Frame::Policy, &pool, use_n, 9).unwrap();
                let indexed = sampler.select(q, use_n, 9, 0).unwrap();
                assert_eq!(direct.id, indexed.id);
            }
        }
    }

    #[test]
    fn finetune_counts_and_order() {
        let pool: Vec<Instance> = (0..100)
            .map(|k| {
                inst(
                    &format!("p{k:03}"),
                    Frame::Economic,
                    &format!("text {k}"),
                    &["Congress"],
                )
            })
            .collect();
        let sa = build_finetune_set(
            &pool,
            Frame::Economic,
            Variant::new(false, false, true),
            1,
            1.0,
        )
        .unwrap();
        assert_eq!(sa.len(), 200);
        assert!(sa[..100].iter().all(|e| e.kind == ExampleKind::Positive));
        assert!(sa[100..].iter().all(|e| e.kind == ExampleKind::Negative));
        assert!(sa[100..]
            .windows(2)
            .all(|w| w[0].source_instance_id <= w[1].source_instance_id));
        for neg in &sa[100..] {
            let src = pool
                .iter()
                .find(|i| i.id == neg.source_instance_id)
                .unwrap();
            assert_ne!(neg.target, src.s2.text);
            assert_eq!(neg.input, serialize_input(src, false));
            let target = pool
                .iter()
                .find(|i| Some(&i.id) == neg.negative_source_id.as_ref())
                .unwrap();
            assert_eq!(target.frame, Frame::Economic);
        }

        let half = build_finetune_set(
            &pool,
            Frame::Economic,
            Variant::new(false, true, true),
            1,
            0.5,
        )
        .unwrap();
        assert_eq!(half.len(), 150);
        let double = build_finetune_set(
            &pool,
            Frame::Economic,
            Variant::new(false, true, true),
            1,
            2.0,
        )
        .unwrap();
        assert_eq!(double.len(), 300);

        let s0 = build_finetune_set(
            &pool,
            Frame::Economic,
            Variant::new(false, false, false),
            1,
            1.0,
        )
        .unwrap();
        let sf = build_finetune_set(
            &pool,
            Frame::Economic,
            Variant::new(true, false, false),
            1,
            1.0,
        )
        .unwrap();
        let strip = |v: Vec<TrainingExample>| {
            v.into_iter()
                .map(|e| (e.input, e.target, e.kind))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(s0), strip(sf));

        assert!(matches!(
            build_finetune_set(&pool, Frame::Crime, Variant::default(), 1, 1.0),
            Err(Error::NoTrainingInstances(Frame::Crime))
        ));
        assert!(build_finetune_set(&pool, Frame::Economic, Variant::default(), 1, -1.0).is_err());
    }

    #[test]
    fn finetune_is_deterministic_across_exec_modes() {
        let pool: Vec<Instance> = (0..60)
            .map(|k| inst(&format!("p{k:03}"), Frame::Crime, &format!("text {k}"), &[]))
            .collect();
        let v = Variant::new(true, false, true);
        let a = build_finetune_set_with(&pool, Frame::Crime, v, 5, 1.0, Exec::Sequential).unwrap();
        let b = build_finetune_set_with(&pool, Frame::Crime, v, 5, 1.0, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn plan_phases() {
        let b = EpochBudget::default();
        let p = emit_training_plan("SFNA".parse().unwrap(), Frame::Economic, b);
        assert_eq!(p.phases.len(), 3);
        assert_eq!(p.phases[2].epochs, 3);
        assert_eq!(p.phases[2].selection, Selection::Fixed);
        assert_eq!(p.phases[0].name, "pretrain");
        assert_eq!(
            emit_training_plan(Variant::default(), Frame::Crime, b)
                .phases
                .len(),
            1
        );
        let sf = emit_training_plan("SF".parse().unwrap(), Frame::Crime, b);
        assert_eq!(
            sf.phases
                .iter()
                .map(|p| p.name.as_str())
                .collect::<Vec<_>>(),
            vec!["pretrain", "finetune"]
        );
        assert_eq!(sf.phases[1].file, "train/SF/c.jsonl");
    }
}
