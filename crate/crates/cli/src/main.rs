use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use reframe_core::gateway::run_conformance;
use reframe_core::pipeline::{make_backend, ARTICLES};
use reframe_core::strategy::enumerate_variants;
use reframe_core::synthetic::{write_corpus, SyntheticSpec};
use reframe_core::{Exec, Frame, Pipeline, RunConfig, Topic, Variant};

#[derive(Parser)]
#[command(
    name = "reframe",
    version,
    about = "Build, train-set emission and evaluation for sentence reframing"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding all artifacts of a run.
    #[arg(long, global = true, default_value = "work")]
    workdir: PathBuf,
    /// Disable data parallelism.
    #[arg(long, global = true)]
    sequential: bool,
    #[arg(long, global = true)]
    corpus_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated topics.
    #[arg(long, global = true, value_delimiter = ',')]
    topics: Option<Vec<Topic>>,
    #[arg(long, global = true)]
    val_per_topic: Option<usize>,
    #[arg(long, global = true)]
    test_per_topic: Option<usize>,
    #[arg(long, global = true)]
    entities_file: Option<PathBuf>,
    #[arg(long, global = true)]
    neg_ratio: Option<f64>,
    #[arg(long, global = true)]
    adversarial_epochs: Option<u32>,
    /// mock, replay:FILE or http:URL
    #[arg(long, global = true)]
    backend: Option<String>,
    #[arg(long, global = true)]
    concurrency_limit: Option<usize>,
    #[arg(long, global = true)]
    eval_per_frame: Option<usize>,
    #[arg(long, global = true)]
    prompt_only: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse topic files into articles.jsonl.
    Ingest {
        /// Extra copy of articles.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assign articles to train, validation and test.
    Split,
    /// Build and length-filter instances; prints the per-frame counts.
    Build,
    /// Per-frame TF-IDF word lists.
    Vocab {
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Training, validation and plan files.
    EmitTrain {
        /// One variant (S0 … SFNA); all eight when omitted.
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        frame: Option<Frame>,
    },
    /// Generate reframed sentences for the evaluation selection.
    Reframe {
        #[arg(long)]
        variant: Variant,
        /// Target frames; all four when omitted.
        #[arg(long = "target-frame", value_delimiter = ',')]
        target_frames: Vec<Frame>,
    },
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Consolidated report; fails when artifacts come from different configs.
    Report,
    /// Protocol conformance checks against a running backend.
    CheckBackend {
        #[arg(long)]
        url: String,
    },
    /// Every stage from ingest to report.
    Run,
    /// Write a small synthetic corpus in the expected layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        articles_per_topic: usize,
    },
    /// Print the effective configuration as TOML.
    ShowConfig,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// ROUGE and framing-word overlap.
    Auto,
    /// Score tables from exported human judgments.
    Manual {
        #[arg(long)]
        annotations: PathBuf,
        /// Separate pilot-study export for the ranking table.
        #[arg(long)]
        pilot: Option<PathBuf>,
    },
}

fn load_config(g: &Global, top_k: Option<usize>) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($field:ident <- $value:expr),* $(,)?) => {$(
            if let Some(v) = $value.clone() {
                cfg.$field = v;
            }
        )*};
    }
    set!(
        corpus_dir <- g.corpus_dir,
        seed <- g.seed,
        topics <- g.topics,
        val_per_topic <- g.val_per_topic,
        test_per_topic <- g.test_per_topic,
        neg_ratio <- g.neg_ratio,
        adversarial_epochs <- g.adversarial_epochs,
        backend <- g.backend,
        concurrency_limit <- g.concurrency_limit,
        vocab_k <- top_k,
    );
    if g.entities_file.is_some() {
        cfg.entities_file = g.entities_file.clone();
    }
    if g.eval_per_frame.is_some() {
        cfg.eval_per_frame = g.eval_per_frame;
    }
    if g.prompt_only {
        cfg.prompt_only = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    let top_k = match &cli.command {
        Command::Vocab { top_k } => *top_k,
        _ => None,
    };
    let cfg = load_config(g, top_k)?;
    let exec = if g.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };

    match cli.command {
        Command::ShowConfig => {
            print!("{}", cfg.to_toml());
            println!("# config_hash = \"{}\"", cfg.hash());
            return Ok(ExitCode::SUCCESS);
        }
        Command::Synth {
            out,
            articles_per_topic,
        } => {
            let spec = SyntheticSpec {
                articles_per_topic,
                seed: cfg.seed,
                ..SyntheticSpec::default()
            };
            write_corpus(&out, &spec, &cfg.topics)?;
            println!(
                "wrote {} topic files to {}",
                cfg.topics.len(),
                out.display()
            );
            return Ok(ExitCode::SUCCESS);
        }
        Command::CheckBackend { url } => {
            let checks = run_conformance(&url, cfg.timeout());
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            let ok = checks.iter().all(|c| c.passed);
            return Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            });
        }
        _ => {}
    }

    let pipeline = Pipeline::new(cfg, &g.workdir, exec)?;
    match cli.command {
        Command::Ingest { out } => {
            let report = pipeline.ingest()?;
            println!(
                "{} articles, {} spans dropped",
                report.articles, report.dropped_spans
            );
            if let Some(out) = out {
                copy(&pipeline.ws.path(ARTICLES), &out)?;
            }
        }
        Command::Split => {
            let s = pipeline.split()?;
            println!("{} articles assigned (seed {})", s.assignment.len(), s.seed);
        }
        Command::Build => print!("{}", pipeline.build()?.render_table()),
        Command::Vocab { .. } => {
            for v in pipeline.vocab()? {
                let top: Vec<&str> = v.entries.iter().take(10).map(|e| e.0.as_str()).collect();
                println!(
                    "{}: {} words; top: {}",
                    v.frame,
                    v.entries.len(),
                    top.join(", ")
                );
            }
        }
        Command::EmitTrain { variant, frame } => {
            let variants: Vec<Variant> =
                variant.map_or_else(|| enumerate_variants().to_vec(), |v| vec![v]);
            let frames: Vec<Frame> = frame.map_or_else(|| Frame::ALL.to_vec(), |f| vec![f]);
            let summary = pipeline.emit_train(&variants, &frames)?;
            for (file, n) in &summary.files {
                println!("{file}\t{n}");
            }
        }
        Command::Reframe {
            variant,
            target_frames,
        } => {
            let targets = if target_frames.is_empty() {
                Frame::ALL.to_vec()
            } else {
                target_frames
            };
            let backend = make_backend(&pipeline.cfg.backend, &pipeline.cfg)?;
            let s = pipeline.reframe(variant, &targets, backend.as_ref())?;
            println!(
                "{variant}: {} generated by {}, {} failed",
                s.outputs,
                s.backend_id,
                s.failures.len()
            );
            if !s.failures.is_empty() {
                eprintln!("failures written to generated/{variant}/failures.jsonl");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Eval(EvalCommand::Auto) => {
            let e = pipeline.eval_auto()?;
            info!(
                "{} ROUGE rows, {} overlap cells",
                e.rouge.len(),
                e.overlap.len()
            );
            print!("{}", pipeline.ws.read_text("eval/rouge.md", "eval auto")?);
            print!("{}", pipeline.ws.read_text("eval/overlap.md", "eval auto")?);
        }
        Command::Eval(EvalCommand::Manual { annotations, pilot }) => {
            pipeline.eval_manual(&annotations, pilot.as_deref())?;
            print!(
                "{}",
                pipeline.ws.read_text("report/pilot.md", "eval manual")?
            );
        }
        Command::Report => print!("{}", pipeline.report()?),
        Command::Run => {
            let failures: usize = pipeline.run_all()?.iter().map(|s| s.failures.len()).sum();
            println!(
                "report written to {}",
                pipeline.ws.path("report/run.md").display()
            );
            if failures > 0 {
                bail!("{failures} generations failed");
            }
        }
        Command::ShowConfig | Command::Synth { .. } | Command::CheckBackend { .. } => {
            unreachable!()
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn copy(from: &Path, to: &Path) -> Result<()> {
    std::fs::copy(from, to)
        .with_context(|| format!("copying {} to {}", from.display(), to.display()))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
