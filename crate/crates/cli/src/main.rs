//! `branchwise` command-line driver.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use branchwise::analysis::{
    merge_logs, render_report, write_analyses, AnalysisKind, AnalysisOptions, Component,
    ANALYSIS_DIR,
};
use branchwise::config::RunConfig;
use branchwise::dataset::load_dataset;
use branchwise::executor::{run_all, ExecContext, ExistingRun};
use branchwise::search_space::{branch_id, data_collection_key, enumerate_branches};
use branchwise::Error;
use clap::{Args, Parser, Subcommand};

const LOG_ROOT_ENV: &str = "BRANCHWISE_LOG_ROOT";
const DEFAULT_LOG_ROOT: &str = "logs";

#[derive(Parser)]
#[command(
    name = "branchwise",
    version,
    about = "Enumerate, run and analyze pipeline search spaces"
)]
struct Cli {
    /// Log root; overrides the config file and $BRANCHWISE_LOG_ROOT.
    #[arg(long, global = true)]
    log_root: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count (and optionally list) the branches of a config's search space.
    Enumerate {
        #[arg(long)]
        config: PathBuf,
        /// Print every branch id.
        #[arg(long)]
        list: bool,
        #[arg(long, value_delimiter = ',')]
        seed_list: Option<Vec<u64>>,
    },
    /// Execute every branch and write the run's LogDir tree.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        run_id: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        seed_list: Option<Vec<u64>>,
        /// Replace an existing run with the same id.
        #[arg(long, conflicts_with = "resume")]
        overwrite: bool,
        /// Keep finished branch records of an existing run and execute the rest.
        #[arg(long)]
        resume: bool,
    },
    /// Write analysis CSVs for one, several or all runs.
    Analyze {
        #[command(flatten)]
        scope: Scope,
        /// Analyses to run (default: all).
        #[arg(value_delimiter = ',')]
        analyses: Vec<String>,
        #[arg(long, default_value = "Macro_F1")]
        metric: String,
        #[arg(long, value_delimiter = ',')]
        component: Vec<String>,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 100)]
        n_trees: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Output directory (default: <log root>/analysis).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a plain-text summary of one, several or all runs.
    Report {
        #[command(flatten)]
        scope: Scope,
        #[arg(long, default_value = "Macro_F1")]
        metric: String,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Write the report to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Scope {
    /// Config file, used only for its log root.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "run_ids")]
    run_id: Option<String>,
    #[arg(long, value_delimiter = ',')]
    run_ids: Option<Vec<String>>,
    /// Skip malformed branch records instead of failing.
    #[arg(long)]
    lenient: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::UnknownRun(_) => 2,
        Error::RunExists(_) => 3,
        Error::Io { .. } | Error::MalformedRecord { .. } => 4,
        _ => 1,
    }
}

fn log_root(flag: Option<&Path>, config: Option<&RunConfig>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = config.and_then(|c| c.log_root.clone()) {
        return p;
    }
    std::env::var_os(LOG_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_LOG_ROOT))
}

fn load_config(path: &Path, seeds: Option<Vec<u64>>) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seeds {
        cfg.search_space.seeds = s;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let flag_root = cli.log_root.as_deref();
    match cli.command {
        Command::Enumerate {
            config,
            list,
            seed_list,
        } => {
            let cfg = load_config(&config, seed_list)?;
            let branches = enumerate_branches(&cfg.search_space)?;
            let mut keys: Vec<String> = branches.iter().map(data_collection_key).collect();
            keys.sort();
            keys.dedup();
            println!("branches: {}", branches.len());
            println!("data collections: {}", keys.len());
            if list {
                let mut out = std::io::stdout().lock();
                for b in &branches {
                    // a closed pipe (`| head`) just ends the listing
                    if writeln!(out, "{}", branch_id(b)).is_err() {
                        break;
                    }
                }
            }
        }
        Command::Run {
            config,
            run_id,
            workers,
            seed_list,
            overwrite,
            resume,
        } => {
            let cfg = load_config(&config, seed_list)?;
            let run_id = run_id.or_else(|| cfg.run_id.clone()).ok_or_else(|| {
                Error::config("run_id", "pass --run-id or set run_id in the config")
            })?;
            let workers = workers.unwrap_or(cfg.workers);
            if workers == 0 {
                return Err(Error::config("workers", "must be at least 1"));
            }
            let root = log_root(flag_root, Some(&cfg));
            let dataset = load_dataset(&cfg.dataset.path, cfg.dataset.schema)?;
            let ctx = ExecContext {
                transform: cfg.transform.clone(),
                model_specs: cfg.model_specs(),
            };
            let existing = if overwrite {
                ExistingRun::Overwrite
            } else if resume {
                ExistingRun::Resume
            } else {
                ExistingRun::Refuse
            };
            let s = run_all(
                &cfg.search_space,
                &dataset,
                &ctx,
                &run_id,
                &root,
                workers,
                existing,
            )?;
            println!("run: {}", s.run_id);
            println!("branches: {}", s.branch_count);
            println!("reused: {}", s.reused);
            println!("failures: {}", s.failures.len());
            println!("merged: {}", s.merged_csv.display());
            println!("elapsed: {:.2}s", s.elapsed_secs);
            if !s.failures.is_empty() {
                log::warn!(
                    "{} branch(es) failed; see {}",
                    s.failures.len(),
                    s.merged_csv
                        .with_file_name(branchwise::executor::FAILURES_CSV)
                        .display()
                );
            }
        }
        Command::Analyze {
            scope,
            analyses,
            metric,
            component,
            top_n,
            lambda,
            n_trees,
            seed,
            alpha,
            out,
        } => {
            let kinds: Vec<AnalysisKind> = if analyses.is_empty() {
                AnalysisKind::ALL.to_vec()
            } else {
                analyses
                    .iter()
                    .map(|a| AnalysisKind::from_str(a).map_err(|m| Error::config("analyses", m)))
                    .collect::<Result<_, _>>()?
            };
            let components: Vec<Component> = component
                .iter()
                .map(|c| Component::from_str(c).map_err(|m| Error::config("component", m)))
                .collect::<Result<_, _>>()?;
            let (root, table) = scoped_table(flag_root, &scope)?;
            let opts = AnalysisOptions {
                metric,
                components,
                top_n,
                lambda,
                n_trees,
                seed,
                alpha,
                skip_inapplicable: analyses.is_empty(),
            };
            let dir = out.unwrap_or_else(|| root.join(ANALYSIS_DIR));
            for p in write_analyses(&dir, &table, &kinds, &opts)? {
                println!("{}", p.display());
            }
        }
        Command::Report {
            scope,
            metric,
            lambda,
            alpha,
            out,
        } => {
            let (_, table) = scoped_table(flag_root, &scope)?;
            let text = render_report(&table, &metric, lambda, alpha)?;
            match out {
                Some(p) => branchwise::executor::write_atomic(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn scoped_table(
    flag_root: Option<&Path>,
    scope: &Scope,
) -> Result<(PathBuf, branchwise::analysis::MergedTable), Error> {
    let cfg = scope.config.as_deref().map(RunConfig::load).transpose()?;
    let root = log_root(flag_root, cfg.as_ref());
    let ids: Option<Vec<String>> = match (&scope.run_id, &scope.run_ids) {
        (Some(id), _) => Some(vec![id.clone()]),
        (None, Some(ids)) => Some(ids.clone()),
        (None, None) => None,
    };
    let table = merge_logs(&root, ids.as_deref(), scope.lenient)?;
    Ok((root, table))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
