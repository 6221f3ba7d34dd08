use std::fs;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use fsa_core::fuzzy::Defuzzifier;
use fsa_core::scenario::parse_transcript;
use fsa_core::store::FileStore;
use fsa_core::CriterionScores;
use fsa_gateway::cli;
use fsa_gateway::config::{FileConfig, Overrides, Settings};
use fsa_gateway::server::{router, AppState};

#[derive(Debug, Parser)]
#[command(name = "fsa", version, about = "Fuzzy supervisor for simulated clinical encounters")]
struct Cli {
    /// TOML config file. Flags and environment variables override it.
    #[arg(long, env = "FSA_CONFIG", global = true)]
    config: Option<PathBuf>,
    /// Directory holding session logs and the session index.
    #[arg(long, env = "FSA_DATA_DIR", global = true)]
    data_dir: Option<PathBuf>,
    /// Rule file to use instead of the bundled one.
    #[arg(long, env = "FSA_RULES", global = true)]
    rules: Option<PathBuf>,
    /// Directory of scenario JSON files to use instead of the bundled ones.
    #[arg(long, env = "FSA_SCENARIOS", global = true)]
    scenarios: Option<PathBuf>,
    /// Base URL of an external classifier (`POST {url}/score`).
    #[arg(long, env = "FSA_CLASSIFIER_URL", global = true)]
    classifier_url: Option<String>,
    #[arg(long, env = "FSA_CLASSIFIER_TIMEOUT_MS", global = true)]
    classifier_timeout_ms: Option<u64>,
    #[arg(long, env = "FSA_PORT", global = true)]
    port: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve the HTTP and WebSocket API.
    Serve,
    /// Run a transcript of student events offline and print the decisions.
    Replay {
        transcript: PathBuf,
        #[arg(long, default_value = "chest_pain")]
        scenario: String,
        /// One JSON object per event instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Evaluate the rule base for four crisp scores.
    Infer {
        #[arg(long, value_parser = unit_interval)]
        prof: f64,
        #[arg(long, value_parser = unit_interval)]
        rel: f64,
        #[arg(long, value_parser = unit_interval)]
        eth: f64,
        #[arg(long, value_parser = unit_interval)]
        dist: f64,
        #[arg(long)]
        defuzzifier: Option<Defuzzifier>,
    },
    /// Rule file utilities.
    Rules {
        #[command(subcommand)]
        command: RulesCommand,
    },
}

#[derive(Debug, Subcommand)]
enum RulesCommand {
    /// Parse and validate a rule file; exit status 1 on any error.
    Check { file: Option<PathBuf> },
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{x} is outside [0, 1]"))
    }
}

fn settings(cli: &Cli) -> anyhow::Result<Settings> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let over = Overrides {
        data_dir: cli.data_dir.clone(),
        rules: cli.rules.clone(),
        scenarios: cli.scenarios.clone(),
        classifier_url: cli.classifier_url.clone(),
        classifier_timeout_ms: cli.classifier_timeout_ms,
        port: cli.port,
    };
    Settings::resolve(over, file)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("FSA_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let settings = settings(&cli)?;
    match cli.command {
        Command::Serve => serve(settings),
        Command::Replay { transcript, scenario, json } => {
            let text = fs::read_to_string(&transcript).with_context(|| format!("reading {}", transcript.display()))?;
            let events = parse_transcript(&text).map_err(|e| anyhow!("{}: {e}", transcript.display()))?;
            let scenarios = settings.scenarios()?;
            let scenario = scenarios.get(&scenario).cloned().ok_or_else(|| anyhow!("unknown scenario `{scenario}`"))?;
            let supervisor = settings.supervisor(true)?;
            let steps = cli::replay(&supervisor, scenario, &events)?;
            let out = if json { cli::trace_json(&events, &steps) } else { cli::trace_table(&events, &steps) };
            print!("{out}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Infer { prof, rel, eth, dist, defuzzifier } => {
            let mut engine = settings.engine()?;
            if let Some(d) = defuzzifier {
                engine = engine.with_defuzzifier(d);
            }
            let decision = engine.evaluate(&CriterionScores::new(prof, rel, eth, dist)?)?;
            print!("{}", cli::describe_decision(&engine, &decision));
            Ok(ExitCode::SUCCESS)
        }
        Command::Rules { command: RulesCommand::Check { file } } => {
            let text = match file.or(settings.rules.clone()) {
                Some(path) => fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?,
                None => fsa_core::rules::DEFAULT_RULES.to_string(),
            };
            let (report, failed) = cli::check_rules(&text);
            print!("{report}");
            Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
    }
}

fn serve(settings: Settings) -> anyhow::Result<ExitCode> {
    let store = FileStore::open(&settings.data_dir)
        .with_context(|| format!("opening data directory {}", settings.data_dir.display()))?;
    let state = AppState::new(settings.supervisor(true)?, store, settings.scenarios()?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let addr = SocketAddr::from(([0, 0, 0, 0], settings.port));
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        anyhow::Ok(())
    })?;
    Ok(ExitCode::SUCCESS)
}
