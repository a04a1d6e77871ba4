//! Pipeline stages over a working directory. Each stage reads the artifacts
//! of earlier stages and writes its own through the [`Workspace`].

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::{assign_splits, load_corpus_with_report, Article, LoadReport, SplitAssignment};
use crate::entity::{Entity, EntityExtractor, HeuristicExtractor, SidecarExtractor};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::frame::{Frame, Split};
use crate::gateway::{
    reframe_batch, GenerationBackend, GenerationFailure, HttpBackend, MockBackend,
    ReframedInstance, ReplayBackend,
};
use crate::instance::{filter_instances, BuildStats, Instance, InstanceBuilder};
use crate::io::Workspace;
use crate::metrics::{
    pooled_overlap, render_overlap_cell, rouge_l, rouge_n, rouge_tokens, strip_entities,
    FrameVocabulary, VocabularyCorpus,
};
use crate::reporting::{
    aggregate_scores, load_annotations, majority_agreement, pilot_rows, render_crowd,
    render_crowd_tsv, render_directions, render_pilot, render_pilot_tsv,
};
use crate::seed::stream;
use crate::strategy::{
    build_finetune_set_with, build_pretrain_set, build_validation_set, check_reserved,
    emit_training_plan, enumerate_variants, plan_file, pretrain_file, train_file, valid_file,
    TrainingExample, Variant,
};
use crate::text::RuleSplitter;

pub const ARTICLES: &str = "articles.jsonl";
pub const SPLITS: &str = "splits.json";
pub const INSTANCES: &str = "instances.jsonl";
pub const STATS_MD: &str = "stats.md";
pub const STATS_JSON: &str = "stats.json";
pub const ROUGE_TSV: &str = "eval/rouge.tsv";
pub const OVERLAP_TSV: &str = "eval/overlap.tsv";
pub const RUN_REPORT: &str = "report/run.md";

pub fn vocab_file(frame: Frame) -> String {
    format!("vocab/{frame}.txt")
}

pub fn generated_file(variant: Variant, target: Frame) -> String {
    format!("generated/{variant}/{target}.jsonl")
}

pub fn failures_file(variant: Variant) -> String {
    format!("generated/{variant}/failures.jsonl")
}

/// Resolves `mock`, `replay:FILE` or `http:URL` (`http://host` also works).
pub fn make_backend(spec: &str, cfg: &RunConfig) -> Result<Box<dyn GenerationBackend>> {
    if spec == "mock" {
        return Ok(Box::new(MockBackend::new(cfg.seed)));
    }
    if let Some(file) = spec.strip_prefix("replay:") {
        return Ok(Box::new(ReplayBackend::load(Path::new(file))?));
    }
    if let Some(rest) = spec.strip_prefix("http:") {
        let url = if rest.starts_with("//") {
            format!("http:{rest}")
        } else if rest.contains("://") {
            rest.to_owned()
        } else {
            format!("http://{rest}")
        };
        return Ok(Box::new(HttpBackend::connect(&url, cfg.timeout())?));
    }
    Err(Error::Config(format!(
        "unknown backend `{spec}`; use mock, replay:FILE or http:URL"
    )))
}

/// Collects instance ids without extracting anything.
struct NoEntities;

impl EntityExtractor for NoEntities {
    fn extract(&self, _: &str, _: &str) -> Result<Vec<Entity>> {
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmitSummary {
    /// Relative path and example count of every file written.
    pub files: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReframeSummary {
    pub outputs: usize,
    pub failures: Vec<GenerationFailure>,
    pub backend_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeRow {
    pub variant: Variant,
    pub n: usize,
    pub r1: f64,
    pub r2: f64,
    pub rl: f64,
    pub r1_masked: f64,
    pub rl_masked: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapCell {
    pub variant: Variant,
    pub frame: Frame,
    pub after: f64,
    pub before: f64,
}

impl OverlapCell {
    pub fn render(&self) -> String {
        render_overlap_cell(self.after, self.before)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AutoEval {
    pub rouge: Vec<RougeRow>,
    pub overlap: Vec<OverlapCell>,
}

pub struct Pipeline {
    pub cfg: RunConfig,
    pub ws: Workspace,
    pub exec: Exec,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, workdir: &Path, exec: Exec) -> Result<Self> {
        cfg.validate()?;
        let ws = Workspace::open(workdir, cfg.hash())?;
        Ok(Pipeline { cfg, ws, exec })
    }

    pub fn ingest(&self) -> Result<LoadReport> {
        let (articles, report) =
            load_corpus_with_report(&self.cfg.corpus_dir, &self.cfg.topic_set(), self.exec)?;
        self.ws.write_jsonl(ARTICLES, &articles, "ingest")?;
        Ok(report)
    }

    fn articles(&self) -> Result<Vec<Article>> {
        self.ws.read_jsonl(ARTICLES, "ingest")
    }

    pub fn split(&self) -> Result<SplitAssignment> {
        let articles = self.articles()?;
        let splits = assign_splits(
            &articles,
            self.cfg.seed,
            self.cfg.val_per_topic,
            self.cfg.test_per_topic,
        )?;
        self.ws.write_json(SPLITS, &splits, "split")?;
        Ok(splits)
    }

    pub fn build(&self) -> Result<BuildStats> {
        let articles = self.articles()?;
        let splits: SplitAssignment = self.ws.read_json(SPLITS, "split")?;
        let heuristic = HeuristicExtractor;
        let sidecar = match &self.cfg.entities_file {
            Some(path) => Some(SidecarExtractor::load(path)?),
            None => None,
        };
        let build_with = |extractor: &dyn EntityExtractor| -> Result<Vec<Instance>> {
            let builder = InstanceBuilder {
                codes: &self.cfg.frame_code_map,
                splitter: &RuleSplitter,
                extractor,
            };
            Ok(self
                .exec
                .try_map(&articles, |a| builder.build(a, &splits))?
                .into_iter()
                .flatten()
                .collect())
        };
        let built = match &sidecar {
            Some(side) => {
                let probe = build_with(&NoEntities)?;
                side.check_covers(probe.iter().map(|i| i.id.as_str()))?;
                build_with(side)?
            }
            None => build_with(&heuristic)?,
        };
        for inst in &built {
            check_reserved(inst)?;
        }
        let total = built.len();
        let mut kept = filter_instances(built, &self.cfg.filter_bounds());
        kept.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let stats = BuildStats::from_instances(total, &kept);
        self.ws.write_jsonl(INSTANCES, &kept, "build")?;
        self.ws.write(STATS_MD, &stats.render_table(), "build")?;
        self.ws.write_json(STATS_JSON, &stats, "build")?;
        Ok(stats)
    }

    pub fn instances(&self) -> Result<Vec<Instance>> {
        let mut all: Vec<Instance> = self.ws.read_jsonl(INSTANCES, "build")?;
        for i in &mut all {
            i.retokenize();
        }
        Ok(all)
    }

    pub fn vocab(&self) -> Result<Vec<FrameVocabulary>> {
        let instances = self.instances()?;
        let docs: Vec<(Frame, &str)> = instances
            .iter()
            .filter(|i| i.split == Split::Train)
            .map(|i| (i.frame, i.s2.text.as_str()))
            .collect();
        let corpus = VocabularyCorpus::from_documents(&docs, self.exec);
        let mut out = Vec::with_capacity(4);
        for frame in Frame::ALL {
            let v = corpus.vocabulary(frame, self.cfg.vocab_k, self.cfg.vocab_aggregation)?;
            self.ws.write(&vocab_file(frame), &v.render(), "vocab")?;
            out.push(v);
        }
        Ok(out)
    }

    pub fn vocabularies(&self) -> Result<Vec<FrameVocabulary>> {
        Frame::ALL
            .iter()
            .map(|&f| {
                let raw = self.ws.read_text(&vocab_file(f), "vocab")?;
                FrameVocabulary::parse(f, &raw).ok_or_else(|| {
                    Error::parse(
                        vocab_file(f),
                        "<body>",
                        "expected rank, word and score columns",
                    )
                })
            })
            .collect()
    }

    /// Training, validation and plan files for the given variants and frames.
    pub fn emit_train(&self, variants: &[Variant], frames: &[Frame]) -> Result<EmitSummary> {
        let instances = self.instances()?;
        let train: Vec<Instance> = instances
            .iter()
            .filter(|i| i.split == Split::Train)
            .cloned()
            .collect();
        let valid: Vec<Instance> = instances
            .iter()
            .filter(|i| i.split == Split::Validation)
            .cloned()
            .collect();
        let jobs: Vec<(Variant, Frame)> = variants
            .iter()
            .flat_map(|v| frames.iter().map(move |f| (*v, *f)))
            .collect();
        let sets = self.exec.try_map(&jobs, |&(v, f)| {
            build_finetune_set_with(
                &train,
                f,
                v,
                self.cfg.seed,
                self.cfg.neg_ratio,
                Exec::Sequential,
            )
        })?;

        let mut summary = EmitSummary::default();
        let mut put = |rel: String, examples: &[TrainingExample]| -> Result<()> {
            self.ws.write_jsonl(&rel, examples, "emit-train")?;
            summary.files.insert(rel, examples.len());
            Ok(())
        };
        for &v in variants {
            if v.use_f {
                put(pretrain_file(v), &build_pretrain_set(&train, v)?)?;
                put(valid_file(v, None), &build_validation_set(&valid, None, v))?;
            }
        }
        for (&(v, f), set) in jobs.iter().zip(&sets) {
            put(train_file(v, f), set)?;
            put(
                valid_file(v, Some(f)),
                &build_validation_set(&valid, Some(f), v),
            )?;
            let plan = emit_training_plan(v, f, self.cfg.epoch_budget());
            self.ws.write_json(&plan_file(v, f), &plan, "emit-train")?;
        }
        Ok(summary)
    }

    /// Test instances chosen for reframing: all of them, or a seeded sample
    /// of `eval_per_frame` per source frame. Sorted by id.
    pub fn eval_selection(&self, instances: &[Instance]) -> Vec<Instance> {
        let mut out = Vec::new();
        for frame in Frame::ALL {
            let mut pool: Vec<&Instance> = instances
                .iter()
                .filter(|i| i.split == Split::Test && i.frame == frame)
                .collect();
            pool.sort_by(|a, b| a.id.cmp(&b.id));
            if let Some(k) = self.cfg.eval_per_frame {
                pool.shuffle(&mut stream(self.cfg.seed, &format!("eval:{frame}"), 0));
                pool.truncate(k);
            }
            out.extend(pool.into_iter().cloned());
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    pub fn reframe(
        &self,
        variant: Variant,
        targets: &[Frame],
        backend: &dyn GenerationBackend,
    ) -> Result<ReframeSummary> {
        let instances = self.instances()?;
        let selection = self.eval_selection(&instances);
        let outcome = reframe_batch(
            &selection,
            targets,
            variant,
            backend,
            &self.cfg.batch_options(),
        );
        for &t in targets {
            let records: Vec<&ReframedInstance> = outcome
                .outputs
                .iter()
                .filter(|r| r.target_frame == t)
                .collect();
            self.ws
                .write_jsonl(&generated_file(variant, t), &records, "reframe")?;
        }
        self.ws
            .write_jsonl(&failures_file(variant), &outcome.failures, "reframe")?;
        for f in &outcome.failures {
            log::warn!(
                "generation failed for {} -> {}: {}",
                f.instance_id,
                f.target_frame,
                f.error
            );
        }
        Ok(ReframeSummary {
            outputs: outcome.outputs.len(),
            failures: outcome.failures,
            backend_id: backend.backend_id().to_owned(),
        })
    }

    fn generated(&self) -> Result<Vec<(Variant, Vec<ReframedInstance>)>> {
        let mut out = Vec::new();
        for v in enumerate_variants() {
            let mut records = Vec::new();
            let mut any = false;
            for f in Frame::ALL {
                let rel = generated_file(v, f);
                if self.ws.path(&rel).exists() {
                    any = true;
                    records.extend(self.ws.read_jsonl::<ReframedInstance>(&rel, "reframe")?);
                }
            }
            if any {
                out.push((v, records));
            }
        }
        if out.is_empty() {
            return Err(Error::MissingArtifact {
                path: self.ws.path("generated"),
                command: "reframe",
            });
        }
        Ok(out)
    }

    /// ROUGE over intra-frame generations and framing-word overlap per
    /// target frame, before and after reframing.
    pub fn eval_auto(&self) -> Result<AutoEval> {
        let instances = self.instances()?;
        let by_id: HashMap<&str, &Instance> =
            instances.iter().map(|i| (i.id.as_str(), i)).collect();
        let vocabs = self.vocabularies()?;
        let generated = self.generated()?;
        let lookup = |r: &ReframedInstance| {
            by_id.get(r.instance_id.as_str()).copied().ok_or_else(|| {
                Error::Config(format!(
                    "generated record refers to unknown instance {}",
                    r.instance_id
                ))
            })
        };

        let mut result = AutoEval::default();
        for (variant, records) in &generated {
            let variant = *variant;
            let intra: Vec<&ReframedInstance> =
                records.iter().filter(|r| r.is_intra_frame()).collect();
            let scores = self.exec.try_map(&intra, |r| {
                let inst = lookup(r)?;
                let cand = rouge_tokens(&r.generated);
                let reference = rouge_tokens(&inst.s2.text);
                let cand_m = strip_entities(&cand, &inst.entities);
                let ref_m = strip_entities(&reference, &inst.entities);
                Ok::<_, Error>([
                    rouge_n(&cand, &reference, 1).f1,
                    rouge_n(&cand, &reference, 2).f1,
                    rouge_l(&cand, &reference).f1,
                    rouge_n(&cand_m, &ref_m, 1).f1,
                    rouge_l(&cand_m, &ref_m).f1,
                ])
            })?;
            let n = scores.len();
            let mean = |k: usize| {
                if n == 0 {
                    0.0
                } else {
                    scores.iter().map(|s| s[k]).sum::<f64>() / n as f64
                }
            };
            result.rouge.push(RougeRow {
                variant,
                n,
                r1: mean(0),
                r2: mean(1),
                rl: mean(2),
                r1_masked: mean(3),
                rl_masked: mean(4),
            });

            for vocab in &vocabs {
                let words = vocab.words();
                let subset: Vec<&ReframedInstance> = records
                    .iter()
                    .filter(|r| r.target_frame == vocab.frame)
                    .collect();
                if subset.is_empty() {
                    continue;
                }
                let sources = subset
                    .iter()
                    .map(|r| lookup(r).map(|i| i.s2.text.as_str()))
                    .collect::<Result<Vec<_>>>()?;
                result.overlap.push(OverlapCell {
                    variant,
                    frame: vocab.frame,
                    after: pooled_overlap(subset.iter().map(|r| r.generated.as_str()), &words),
                    before: pooled_overlap(sources, &words),
                });
            }
        }
        self.write_auto_eval(&result)?;
        Ok(result)
    }

    fn write_auto_eval(&self, eval: &AutoEval) -> Result<()> {
        let pct = |x: f64| format!("{:.2}", crate::metrics::round_half_up(x * 100.0, 2));
        let mut tsv = String::from("variant\tR1\tR2\tRL\tR1_masked\tRL_masked\tn\n");
        let mut md = String::from(
            "# ROUGE F1 (intra-frame)\n\n| Approach | R-1 | R-2 | R-L | R-1 w/o entities | R-L w/o entities | n |\n|---|---:|---:|---:|---:|---:|---:|\n",
        );
        for r in &eval.rouge {
            let cells = [r.r1, r.r2, r.rl, r.r1_masked, r.rl_masked].map(pct);
            let _ = writeln!(tsv, "{}\t{}\t{}", r.variant, cells.join("\t"), r.n);
            let _ = writeln!(md, "| {} | {} | {} |", r.variant, cells.join(" | "), r.n);
        }
        self.ws.write(ROUGE_TSV, &tsv, "eval auto")?;
        self.ws.write("eval/rouge.md", &md, "eval auto")?;

        let variants: Vec<Variant> = eval.rouge.iter().map(|r| r.variant).collect();
        let cell =
            |v: Variant, f: Frame| eval.overlap.iter().find(|c| c.variant == v && c.frame == f);
        let mut tsv = String::from("variant\te\tl\tp\tc\n");
        let mut md = String::from("# Framing-word overlap\n\n| Approach | Economic | Legality | Policy | Crime |\n|---|---|---|---|---|\n");
        let mut raw = String::from("variant\tframe\tafter\tbefore\n");
        for v in variants {
            let cells: Vec<String> = Frame::ALL
                .iter()
                .map(|f| cell(v, *f).map_or_else(|| "–".into(), OverlapCell::render))
                .collect();
            let _ = writeln!(tsv, "{v}\t{}", cells.join("\t"));
            let _ = writeln!(md, "| {v} | {} |", cells.join(" | "));
            for f in Frame::ALL {
                if let Some(c) = cell(v, f) {
                    let _ = writeln!(raw, "{v}\t{f}\t{:.6}\t{:.6}", c.after, c.before);
                }
            }
        }
        self.ws.write(OVERLAP_TSV, &tsv, "eval auto")?;
        self.ws.write("eval/overlap.md", &md, "eval auto")?;
        self.ws.write("eval/overlap_raw.tsv", &raw, "eval auto")
    }

    /// Crowd scores and direction matrices from a CSV export, and the pilot
    /// ranking from a separate pilot export when given, else from the same one.
    pub fn eval_manual(&self, annotations: &Path, pilot: Option<&Path>) -> Result<()> {
        let records = load_annotations(annotations)?;
        let pilot_records = match pilot {
            Some(p) => load_annotations(p)?,
            None => records.clone(),
        };
        let rows = pilot_rows(&pilot_records)?;
        self.ws
            .write("report/pilot.md", &render_pilot(&rows)?, "eval manual")?;
        self.ws
            .write("report/pilot.tsv", &render_pilot_tsv(&rows)?, "eval manual")?;
        let table = aggregate_scores(&records)?;
        let agreement = majority_agreement(&records);
        self.ws.write(
            "report/crowd.md",
            &render_crowd(&table, &agreement),
            "eval manual",
        )?;
        self.ws
            .write("report/crowd.tsv", &render_crowd_tsv(&table), "eval manual")?;
        let (md, tsv) = render_directions(&records)?;
        self.ws.write("report/directions.md", &md, "eval manual")?;
        self.ws.write("report/directions.tsv", &tsv, "eval manual")
    }

    /// Consolidated report. Refuses to run when any artifact was produced
    /// under another config hash or changed since it was written.
    pub fn report(&self) -> Result<String> {
        self.ws.read(INSTANCES, "build")?;
        self.ws.verify()?;
        let mut out = format!(
            "# Run report\n\nConfig hash: `{}`\n\n## Instances\n\n",
            self.ws.config_hash()
        );
        out.push_str(&self.ws.read_text(STATS_MD, "build")?);

        if let Ok(vocabs) = self.vocabularies() {
            out.push_str("\n## Top framing words\n\n| Economic | Legality | Policy | Crime |\n|---|---|---|---|\n");
            for rank in 0..10 {
                let words: Vec<&str> = vocabs
                    .iter()
                    .map(|v| v.entries.get(rank).map_or("", |e| e.0.as_str()))
                    .collect();
                if words.iter().all(|w| w.is_empty()) {
                    break;
                }
                let _ = writeln!(out, "| {} |", words.join(" | "));
            }
        }
        for (rel, title) in [
            ("eval/rouge.md", "Automatic evaluation"),
            ("eval/overlap.md", ""),
            ("report/pilot.md", "Manual evaluation"),
            ("report/crowd.md", ""),
        ] {
            if self.ws.path(rel).exists() {
                if !title.is_empty() {
                    let _ = writeln!(out, "\n## {title}\n");
                }
                let body = self.ws.read_text(rel, "eval auto")?;
                let _ = writeln!(out, "{}", body.replacen("# ", "### ", 1));
            }
        }

        out.push_str("\n## Artifacts\n\n| File | Stage | SHA-256 |\n|---|---|---|\n");
        for (rel, entry) in self.ws.manifest() {
            if rel != RUN_REPORT {
                let _ = writeln!(
                    out,
                    "| {rel} | {} | `{}` |",
                    entry.command,
                    &entry.sha256[..16]
                );
            }
        }
        self.ws.write(RUN_REPORT, &out, "report")?;
        Ok(out)
    }

    /// Every stage from ingest to report with the configured backend, all
    /// variants and all four target frames.
    pub fn run_all(&self) -> Result<Vec<ReframeSummary>> {
        self.ingest()?;
        self.split()?;
        self.build()?;
        self.vocab()?;
        let variants = enumerate_variants();
        self.emit_train(&variants, &Frame::ALL)?;
        let backend = make_backend(&self.cfg.backend, &self.cfg)?;
        let mut summaries = Vec::new();
        for v in variants {
            summaries.push(self.reframe(v, &Frame::ALL, backend.as_ref())?);
        }
        self.eval_auto()?;
        self.report()?;
        Ok(summaries)
    }
}
