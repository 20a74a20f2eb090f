use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use movesmith_cli::server::{router, AppState};
use movesmith_core::eval::{
    collect_runs, evaluate, generate_perturbed_corpus, host_strata, read_gold, render_table,
    write_gold, MatchMode,
};
use movesmith_core::llm::MockBehavior;
use movesmith_core::model::{build_index, ProjectIndex};
use movesmith_core::pipeline::{Pipeline, PipelineConfig, RunRecord, RunStore};

#[derive(Debug, Parser)]
#[command(
    name = "movesmith",
    version,
    about = "Move-method recommendations for Java projects"
)]
struct Cli {
    /// Java source root; repeatable. Defaults to the current directory.
    #[arg(long = "root", global = true)]
    roots: Vec<PathBuf>,
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Where run records are kept.
    #[arg(long, global = true, default_value = ".movesmith/runs")]
    runs: PathBuf,
    /// Answer with the offline similarity mock unless the config names another mock.
    #[arg(long, global = true)]
    mock_llm: bool,
    /// Use the local TF-IDF embedder even if the config asks for a remote one.
    #[arg(long, global = true)]
    local_embeddings: bool,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the project and report what was indexed.
    Index {
        /// Also write the index as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recommend up to three moves for one class.
    Recommend {
        /// Qualified class name.
        class: String,
    },
    /// Apply recommendation N (1-based) of a stored run.
    Apply { run: String, n: usize },
    /// Score the pipeline against a gold set.
    Eval {
        /// JSON lines gold file.
        #[arg(long)]
        gold: PathBuf,
        /// Match methods by name only.
        #[arg(long)]
        name_only: bool,
    },
    /// Copy the project and move methods away to build a gold set.
    Perturb {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Destination for the mutated copy.
        #[arg(long)]
        out: PathBuf,
        /// Gold file; defaults to <out>/gold.jsonl.
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Serve the JSON API (and optionally the dashboard assets).
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: SocketAddr,
        /// Directory with built dashboard assets.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

impl Cli {
    fn roots(&self) -> Vec<PathBuf> {
        if self.roots.is_empty() {
            vec![PathBuf::from(".")]
        } else {
            self.roots.clone()
        }
    }

    fn index(&self) -> Result<ProjectIndex> {
        let index = build_index(&self.roots()).context("indexing failed")?;
        for w in &index.warnings {
            log::warn!("{w}");
        }
        Ok(index)
    }

    fn pipeline_config(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if self.mock_llm && config.chat.mock.is_none() {
            config.chat.mock = Some(MockBehavior::SimilarityOracle);
        }
        if self.local_embeddings {
            config.embedding.remote = false;
        }
        Ok(config)
    }

    fn print<T: serde::Serialize>(&self, value: &T, text: impl FnOnce() -> String) {
        if self.json {
            println!(
                "{}",
                serde_json::to_string_pretty(value).expect("output serializes")
            );
        } else {
            print!("{}", text());
        }
    }
}

fn describe_run(rec: &RunRecord) -> String {
    let mut out = format!(
        "run {} for {}: {} recommendation(s)\n",
        rec.run_id,
        rec.host,
        rec.recommendations.len()
    );
    for r in &rec.recommendations {
        out += &format!("\n{}. {} -> {}\n", r.rank, r.method.method, r.target);
        if !r.method_rationale.is_empty() {
            out += &format!("   method: {}\n", r.method_rationale);
        }
        if !r.target_rationale.is_empty() {
            out += &format!("   target: {}\n", r.target_rationale);
        }
        if let Some(diff) = &r.diff {
            out += &format!("\n{diff}");
        }
    }
    for w in &rec.warnings {
        out += &format!("warning: {w}\n");
    }
    out
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Index { out } => {
            let index = cli.index()?;
            if let Some(out) = out {
                std::fs::write(out, index.to_json())
                    .with_context(|| format!("cannot write {}", out.display()))?;
            }
            let summary = serde_json::json!({
                "classes": index.classes.len(),
                "methods": index.method_count(),
                "files": index.files.len(),
                "warnings": index.warnings,
            });
            cli.print(&summary, || {
                format!(
                    "{} classes, {} methods in {} files, {} warning(s)\n",
                    index.classes.len(),
                    index.method_count(),
                    index.files.len(),
                    index.warnings.len()
                )
            });
        }
        Command::Recommend { class } => {
            let index = cli.index()?;
            let pipeline = Pipeline::from_config(cli.pipeline_config()?)?;
            let rec = pipeline.recommend(&index, class)?;
            RunStore::new(&cli.runs).save(&rec)?;
            cli.print(&rec, || describe_run(&rec));
        }
        Command::Apply { run, n } => {
            if *n == 0 {
                bail!("recommendations are numbered from 1");
            }
            let applied = RunStore::new(&cli.runs).apply(run, n - 1)?;
            cli.print(&applied.result, || {
                format!(
                    "applied: {} file(s) changed, {} call site(s) rewritten\n",
                    applied.result.files_changed.len(),
                    applied.result.call_sites_rewritten
                )
            });
        }
        Command::Eval { gold, name_only } => {
            let index = cli.index()?;
            let gold = read_gold(gold)?;
            let config = cli.pipeline_config()?;
            let embedder = config.embedder(&index)?;
            let pipeline = Pipeline::from_config(config)?;
            let runs = collect_runs(&pipeline, &index, embedder.as_ref(), &gold)?;
            let mode = if *name_only {
                MatchMode::NameOnly
            } else {
                MatchMode::Signature
            };
            let result = evaluate(&gold, &runs, &host_strata(&index, &gold), mode)?;
            cli.print(&result, || render_table(&result));
        }
        Command::Perturb { n, seed, out, gold } => {
            let index = cli.index()?;
            let corpus = generate_perturbed_corpus(&index, *n, *seed, out)?;
            let gold_path = gold.clone().unwrap_or_else(|| out.join("gold.jsonl"));
            write_gold(&gold_path, &corpus.gold)?;
            cli.print(&corpus, || {
                format!(
                    "moved {} method(s) into {}, gold set in {}\n",
                    corpus.gold.len(),
                    out.display(),
                    gold_path.display()
                )
            });
        }
        Command::Serve { bind, ui } => {
            let index = cli.index()?;
            let pipeline = Pipeline::from_config(cli.pipeline_config()?)?;
            let state = AppState::new(pipeline, RunStore::new(&cli.runs), index);
            serve(*bind, router(state, ui.clone()))?;
        }
    }
    Ok(())
}

fn serve(bind: SocketAddr, app: axum::Router) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind).await?;
        log::info!("listening on {}", listener.local_addr()?);
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app).await?;
        Ok(())
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
