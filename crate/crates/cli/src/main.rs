use std::path::PathBuf;
use std::process::ExitCode;

use cbli_core::config::{ExperimentConfig, OracleKind, ScenarioKind};
use cbli_core::data::MaskKind;
use cbli_core::{Error, ErrorKind};
use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "cbli", version, about = "Jump-start contextual bandits from synthetic pairwise preferences")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Preset to start from: donation or vaccine.
    #[arg(long, global = true, value_parser = parse_scenario)]
    scenario: Option<ScenarioKind>,
    /// Override one config value, e.g. `--set run.steps=500`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample synthetic users with personas and context vectors.
    GenUsers {
        #[arg(long)]
        users: Option<usize>,
    },
    /// Ask the preference oracle and write a preference dataset.
    GenPrefs {
        #[arg(long, value_parser = parse_oracle)]
        oracle: Option<OracleKind>,
        /// Simulated oracle only: weight of coin-flip answers.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Pre-train a LinUCB model on the preference dataset.
    Pretrain {
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Fine-tune the pre-trained model and a cold start online.
    Run {
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Fine-tune on a recorded conjoint log as a sleeping bandit.
    Replay {
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, value_parser = parse_mask)]
        mask: Option<MaskKind>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Evaluate without updating the model.
        #[arg(long)]
        no_update: bool,
    },
    /// Compare simulated and expected pairwise win totals.
    CheckRank {
        /// Comma-separated utilities, e.g. 0.9,0.5,0.1.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        p: Vec<f64>,
        #[arg(long, default_value_t = cbli_core::config::DEFAULT_RANK_TRIALS)]
        trials: u64,
        #[arg(long)]
        json: bool,
    },
    /// Tabulate run summaries.
    Report {
        /// summary.json files or directories holding one; the runs
        /// directory when empty.
        paths: Vec<PathBuf>,
    },
    /// Write a synthetic conjoint log and its schema.
    SynthLog {
        #[arg(long, default_value_t = 2000)]
        participants: usize,
        #[arg(long, default_value_t = cbli_core::scenario::TASKS_PER_PARTICIPANT)]
        tasks: usize,
    },
}

fn parse_scenario(s: &str) -> Result<ScenarioKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_oracle(s: &str) -> Result<OracleKind, String> {
    match s {
        "llm" => Ok(OracleKind::Llm),
        "bernoulli" => Ok(OracleKind::Bernoulli),
        "replay" => Ok(OracleKind::Replay),
        other => Err(format!("unknown oracle `{other}` (llm, bernoulli, replay)")),
    }
}

fn parse_mask(s: &str) -> Result<MaskKind, String> {
    MaskKind::ALL
        .into_iter()
        .find(|m| m.as_str() == s)
        .ok_or_else(|| format!("unknown mask `{s}`"))
}

fn load_config(g: &Global) -> cbli_core::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load_with(g.config.as_deref(), g.scenario)?;
    if let Some(seed) = g.seed {
        config.seed = seed;
    }
    if let Some(dir) = &g.output_dir {
        config.paths.output = dir.clone();
    }
    for s in &g.set {
        config = config.set(s)?;
    }
    Ok(config)
}

fn apply(command: &Command, config: &mut ExperimentConfig) {
    match command {
        Command::GenUsers { users } => {
            if let Some(n) = users {
                config.generation.users = *n;
            }
        }
        Command::GenPrefs { oracle, noise } => {
            if let Some(k) = oracle {
                config.oracle.kind = *k;
            }
            if let Some(n) = noise {
                config.oracle.noise = *n;
            }
        }
        Command::Pretrain { steps } => {
            if steps.is_some() {
                config.pretrain.steps = *steps;
            }
        }
        Command::Run { steps, repetitions } => {
            if let Some(t) = steps {
                config.run.steps = *t;
            }
            if let Some(r) = repetitions {
                config.run.repetitions = *r;
            }
        }
        Command::Replay {
            log,
            schema,
            mask,
            steps,
            repetitions,
            no_update,
        } => {
            if log.is_some() {
                config.paths.log = log.clone();
            }
            if schema.is_some() {
                config.paths.schema = schema.clone();
            }
            if let Some(m) = mask {
                config.run.mask = *m;
            }
            if let Some(t) = steps {
                config.run.steps = *t;
            }
            if let Some(r) = repetitions {
                config.run.repetitions = *r;
            }
            if *no_update {
                config.run.update = false;
            }
        }
        Command::CheckRank { .. } | Command::Report { .. } | Command::SynthLog { .. } => {}
    }
}

fn execute(cli: Cli) -> cbli_core::Result<()> {
    let mut config = load_config(&cli.global)?;
    apply(&cli.command, &mut config);
    config.validate()?;
    if let Some(jobs) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    }
    let ctx = commands::Context::new(config);
    match cli.command {
        Command::GenUsers { .. } => ctx.gen_users(),
        Command::GenPrefs { .. } => ctx.gen_prefs(),
        Command::Pretrain { .. } => ctx.pretrain(),
        Command::Run { .. } => ctx.run(),
        Command::Replay { .. } => ctx.replay(),
        Command::CheckRank { p, trials, json } => ctx.check_rank(&p, trials, json),
        Command::Report { paths } => ctx.report(&paths),
        Command::SynthLog { participants, tasks } => ctx.synth_log(participants, tasks),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::OracleFatal => 4,
        ErrorKind::Other => 1,
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
