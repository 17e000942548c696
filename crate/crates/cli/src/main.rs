use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ifx_cli::config::ExperimentConfig;
use ifx_cli::run::{self, RunError};
use serde_json::json;

/// Environment variable naming a directory for cached results.
const CACHE_ENV: &str = "IFX_CACHE_DIR";

#[derive(Parser)]
#[command(name = "ifx", version, about = "Spectra, indices and dynamics of lattice interface operators")]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (overrides the config's output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON or TOML config.
    Run { config: PathBuf },
    /// Check a config and its model without running the task.
    Validate { config: PathBuf },
    /// List catalog models with their default parameters.
    ListModels,
}

fn fail(e: RunError) -> ExitCode {
    let diag = json!({ "error": e.kind(), "message": e.message(), "exit_code": e.exit_code() });
    eprintln!("{diag}");
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ifx_core::linalg::sequential_dense_kernels();
    if let Some(n) = cli.workers {
        if n == 0 {
            return fail(RunError::Config("--workers must be positive".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(RunError::Numerical(e.into()));
        }
    }
    match cli.command {
        Command::ListModels => {
            for m in ifx_core::models::list() {
                println!("{}  {}", m.name, m.summary);
                for (k, v) in &m.params {
                    println!("    {k} = {}", serde_json::to_string(v).expect("json"));
                }
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => {
            let result = ExperimentConfig::load(&config)
                .map_err(RunError::from)
                .and_then(|cfg| run::build_model(&cfg).map(|_| cfg));
            match result {
                Ok(cfg) => {
                    println!("{}", json!({ "valid": true, "task": cfg.task.name(), "config_hash": cfg.hash() }));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Run { config } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e.into()),
            };
            let out_dir = cli
                .out
                .or_else(|| cfg.output.as_ref().map(|o| o.dir.clone()))
                .unwrap_or_else(|| PathBuf::from("results"));
            let cache = std::env::var_os(CACHE_ENV).map(PathBuf::from);
            let hash = cfg.hash();
            let (out, cached) = match cache.as_deref().and_then(|c| run::load_cached(c, &hash)) {
                Some(o) => (o, true),
                None => match run::execute(&cfg) {
                    Ok(o) => (o, false),
                    Err(e) => return fail(e),
                },
            };
            if let (Some(c), false) = (&cache, cached) {
                if let Err(e) = run::store_cached(c, &out) {
                    eprintln!("warning: could not cache results: {e:#}");
                }
            }
            let written = match run::write_artifacts(&out_dir, &out) {
                Ok(w) => w,
                Err(e) => return fail(RunError::Numerical(e)),
            };
            for p in &written {
                println!("{}", p.display());
            }
            if out.passed {
                ExitCode::SUCCESS
            } else {
                fail(RunError::Numerical(anyhow::anyhow!(
                    "task {} finished but its check failed; see {}",
                    cfg.task.name(),
                    out_dir.display()
                )))
            }
        }
    }
}
