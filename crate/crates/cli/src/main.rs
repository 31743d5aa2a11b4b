use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use flowstate::attacks::{AttackKind, AttackSpec};
use flowstate::bundle::ModelBundle;
use flowstate::config::PipelineConfig;
use flowstate::flow::DEFAULT_ERROR_CAP;
use flowstate_cli::commands::{self, SCORED_FILE};
use flowstate_cli::service::{self, Triage};

/// Learn a state machine from benign NetFlow traffic and score test captures
/// by how often their traces visit each state.
#[derive(Debug, Parser)]
#[command(name = "flowstate", version)]
struct Cli {
    /// Pipeline config (TOML). Flags given on the command line override it.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides the encoder seed, the evaluation seed and the attack seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More logging; repeat for trace output.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn a model from the training capture and write the model file.
    Train {
        /// Training CSV; defaults to `data.train` in the config.
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long, short, default_value = "model.json")]
        out: PathBuf,
    },
    /// Score a test capture and write verdicts.csv, groups.csv and scored.json.
    Score {
        #[arg(long, short, default_value = "model.json")]
        model: PathBuf,
        /// Test CSV; defaults to `data.test` in the config.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, default_value = "scored")]
        out_dir: PathBuf,
        /// Alert threshold; defaults to the one stored in the model.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Rewrite the malicious rows of a test capture with an evasion attack.
    Attack {
        #[arg(long, short, default_value = "model.json")]
        model: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        /// padding, random_replacement, window_replacement or frequency_replacement
        #[arg(long)]
        kind: String,
        /// Minimum count of a feature tuple for frequency replacement.
        #[arg(long, default_value_t = 100)]
        min_count: usize,
        /// Window length for window replacement.
        #[arg(long, default_value_t = 10)]
        window: usize,
        /// Output CSV; a `.provenance.json` sidecar is written next to it.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run the repeated experiment over all models and attack conditions.
    Eval {
        #[arg(long)]
        repetitions: Option<usize>,
        /// Defaults to `eval.out_dir` in the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Serve the triage HTTP API over a scored run.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, short, default_value = "model.json")]
    model: PathBuf,
    /// The scored.json written by `score`.
    #[arg(long, default_value = "scored/scored.json")]
    scored: PathBuf,
    /// Append-only verdict journal, replayed on start.
    #[arg(long, default_value = "verdicts.jsonl")]
    journal: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
    #[arg(long, short, default_value_t = 8080)]
    port: u16,
}

fn config(cli: &Cli) -> Result<Option<PipelineConfig>> {
    cli.config
        .as_deref()
        .map(|p| commands::load_config(p, cli.seed))
        .transpose()
}

fn required(cfg: Option<PipelineConfig>) -> Result<PipelineConfig> {
    cfg.context("this command needs --config")
}

fn data_path(flag: Option<PathBuf>, cfg: Option<&PipelineConfig>, which: &str) -> Result<PathBuf> {
    let from_cfg = cfg.and_then(|c| match which {
        "train" => c.data.train.clone(),
        _ => c.data.test.clone(),
    });
    flag.or(from_cfg)
        .with_context(|| format!("no {which} file: pass --{which} or set data.{which} in the config"))
}

fn load_bundle(path: &Path) -> Result<ModelBundle> {
    ModelBundle::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli)?;
    match cli.command {
        Command::Train { train, out } => {
            let mut cfg = required(cfg)?;
            cfg.data.train = Some(data_path(train, Some(&cfg), "train")?);
            let report = commands::train(&cfg, &out)?;
            print!("{report}");
            println!("model written to {}", out.display());
        }
        Command::Score { model, test, out_dir, threshold } => {
            let bundle = load_bundle(&model)?;
            let test = data_path(test, cfg.as_ref(), "test")?;
            let cap = cfg.as_ref().map_or(DEFAULT_ERROR_CAP, |c| c.data.error_cap);
            let scored = commands::score(&bundle, &test, cap, threshold, &out_dir)?;
            println!(
                "{} traces, threshold {}, {} alert groups",
                scored.verdicts.len(),
                scored.threshold,
                scored.groups.len()
            );
            for g in scored.groups.iter().take(10) {
                println!("  root cause {:>5}  size {:>6}  top {:.4}", g.root_cause, g.size, g.top_score);
            }
            println!("written to {}", out_dir.join(SCORED_FILE).display());
        }
        Command::Attack { model, test, kind, min_count, window, out } => {
            let bundle = load_bundle(&model)?;
            let test = data_path(test, cfg.as_ref(), "test")?;
            let spec = AttackSpec {
                kind: kind.parse::<AttackKind>()?,
                seed: cli.seed.unwrap_or(0),
                min_count,
                window,
            };
            let prov = commands::attack(&bundle, &test, spec, &out)?;
            println!(
                "{}: rewrote {} of {} malicious rows into {}",
                spec.kind.name(),
                prov.rewritten_rows,
                prov.malicious_rows,
                out.display()
            );
        }
        Command::Eval { repetitions, out_dir } => {
            let mut cfg = required(cfg)?;
            if let Some(r) = repetitions {
                cfg.eval.repetitions = r;
            }
            let out_dir = out_dir.unwrap_or_else(|| cfg.eval.out_dir.clone());
            let report = commands::eval(&cfg, &out_dir)?;
            print!("{}", report.table());
            println!("report written to {}", out_dir.display());
        }
        Command::Serve(args) => {
            let triage = Triage::load(&args.model, &args.scored, &args.journal)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = service::bind(SocketAddr::new(args.bind, args.port)).await?;
                service::serve(listener, Arc::new(triage)).await
            })?;
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn,flowstate_cli=info",
        1 => "debug",
        _ => "trace",
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level)),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
