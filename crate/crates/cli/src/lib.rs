//! The `intent` command-line tool and session service.

pub mod commands;
pub mod server;

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use intent_core::agents::{AgentKind, Hyper, DEFAULT_K};
use intent_core::conflict::{DetectConfig, DEFAULT_DELTA};
use intent_core::pipeline::{TrainPlan, DEFAULT_DAYS};
use intent_core::session::SessionStore;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] intent_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad file: {0}")]
    Format(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status: 2 for misuse, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "intent", version, about = "Long/short-term intention modeling pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct PlanArgs {
    /// Seed of every training run.
    #[arg(long, default_value_t = 7)]
    pub train_seed: u64,
    /// Epoch cap for pooled pretraining.
    #[arg(long, default_value_t = 10)]
    pub pretrain_epochs: usize,
    /// Epoch cap for fine-tuning.
    #[arg(long, default_value_t = 50)]
    pub max_epochs: usize,
}

impl PlanArgs {
    pub fn plan(&self) -> TrainPlan {
        TrainPlan {
            hyper: Hyper {
                max_epochs: self.max_epochs,
                ..Hyper::default()
            },
            pretrain_epochs: self.pretrain_epochs,
            seed: self.train_seed,
            ..TrainPlan::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate personas and write logs, ground truth and schedules.
    Generate {
        #[arg(long)]
        personas: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DAYS)]
        days: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// World configuration; the built-in apartment when omitted.
        #[arg(long)]
        world: Option<PathBuf>,
    },
    /// Pretrain base agents on every participant of a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Agent kinds to train; all five when omitted.
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<AgentKind>,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Fine-tune base agents per participant and write manifest.json.
    Finetune {
        #[arg(long)]
        data: PathBuf,
        /// Directory given to `train --out`.
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        participants: Vec<String>,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Score structured agents and the baseline on each test split.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Where to write the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a log through the conflict detector.
    Detect {
        #[arg(long)]
        log: PathBuf,
        /// Embed ground-truth intention texts instead of running agents.
        /// Every event is judged: the duration gate does not apply.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        /// Judge every event instead of only those reaching a planned routine.
        #[arg(long)]
        no_duration_gate: bool,
        /// Only judge events of the chronological test split.
        #[arg(long)]
        test_split: bool,
        /// Where to write the reports as JSON Lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Start the session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory of session logs.
        #[arg(long, env = server::DATA_DIR_ENV, default_value = "sessions")]
        data_dir: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        world: Option<PathBuf>,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { personas, days, seed, out, world } => {
            let index = commands::generate(&personas, days, seed, &out, world.as_deref())?;
            print_json(&index)
        }
        Command::Train { data, out, kinds, plan } => {
            let kinds = if kinds.is_empty() { AgentKind::ALL.to_vec() } else { kinds };
            for (kind, r) in commands::train(&data, &out, &plan.plan(), &kinds)? {
                println!(
                    "{kind}: {} epochs, best validation loss {:.5} at epoch {}",
                    r.epochs_run, r.best_val_loss, r.best_epoch
                );
            }
            Ok(())
        }
        Command::Finetune { data, base, out, participants, plan } => {
            let manifest = commands::finetune(&data, &base, &out, &plan.plan(), &participants)?;
            println!(
                "wrote {} with {} participants",
                out.join("manifest.json").display(),
                manifest.participants.len()
            );
            Ok(())
        }
        Command::Eval { data, manifest, out } => {
            let report = commands::eval(&data, &manifest, &TrainPlan::default())?;
            if let Some(out) = out {
                commands::write_metrics(&out, &report)?;
            }
            print!("{}", report.to_table());
            Ok(())
        }
        Command::Detect {
            log,
            oracle,
            manifest,
            world,
            delta,
            k,
            no_duration_gate,
            test_split,
            out,
        } => {
            if !(0.0..=2.0).contains(&delta) {
                return Err(CliError::Usage(format!("--delta {delta} outside [0, 2]")));
            }
            let config = DetectConfig {
                delta,
                k,
                duration_gate: !(no_duration_gate || oracle),
            };
            let outcome = commands::detect(
                &log,
                world.as_deref(),
                manifest.as_deref(),
                oracle,
                config,
                test_split,
                &TrainPlan::default(),
            )?;
            if let Some(out) = out {
                commands::write_reports(&out, &outcome.reports)?;
            }
            let raised = outcome.reports.iter().filter(|r| r.r_conf == 1).count();
            print_json(&serde_json::json!({
                "v": 1,
                "participant": outcome.participant,
                "judged": outcome.reports.len(),
                "raised": raised,
                "scores": outcome.scores,
            }))
        }
        Command::Serve {
            port,
            host,
            data_dir,
            manifest,
            world,
        } => {
            let world = commands::load_world(world.as_deref())?;
            let store = SessionStore::new(data_dir, world, manifest)?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::io(Path::new("<runtime>"), e))?;
            runtime
                .block_on(server::serve(server::AppState::new(store), SocketAddr::new(host, port)))
                .map_err(|e| CliError::io(Path::new("<listener>"), e))
        }
    }
}
