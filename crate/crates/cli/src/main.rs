use std::path::PathBuf;
use std::process::ExitCode;

use adequacy_cli::config::parse_ladder;
use adequacy_cli::{Config, Pipeline, Step};
use adequacy_core::Error;
use clap::{Parser, Subcommand};

/// Capacity expansion, system-defining events and weather-year resilience.
#[derive(Parser, Debug)]
#[command(name = "adequacy", version, about)]
struct Cli {
    /// TOML or JSON run configuration.
    #[arg(long, global = true, env = "ADEQUACY_CONFIG")]
    config: Option<PathBuf>,

    /// Output root; scenario artifacts go to `<out>/<name>/`.
    #[arg(long, global = true, env = "ADEQUACY_OUT", default_value = "out")]
    out: PathBuf,

    /// Worker threads for independent solves (0 = all cores).
    #[arg(long, global = true, env = "ADEQUACY_JOBS", default_value_t = 0)]
    jobs: usize,

    /// Overrides the config's master seed.
    #[arg(long, global = true, env = "ADEQUACY_SEED")]
    seed: Option<u64>,

    /// Threshold multipliers for sweeps, e.g. `1,0.75,0.5,0.25`.
    #[arg(long, global = true, env = "ADEQUACY_THRESHOLD_LADDER", value_parser = parse_ladder)]
    threshold_ladder: Option<Vec<f64>>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate synthetic weather years.
    Synth,
    /// Solve the design LP of every weather year.
    Solve,
    /// Detect system-defining events in every design solution.
    Detect,
    /// Cluster events and assign type tags.
    Cluster,
    /// Operate every design in every weather year.
    Validate,
    /// Wasserstein similarity of weather years.
    Similarity,
    /// Resilience metrics and rankings per weather year.
    Report,
    /// Run every step in order.
    All,
    /// Event robustness across scenario variations.
    Sweep,
}

fn error_json(kind: &str, message: &str, code: u8) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message, "exit_code": code } }).to_string()
}

fn run(cli: &Cli) -> Result<(), Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config (or ADEQUACY_CONFIG) is required".into()))?;
    let mut config = Config::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let steps = {
        let pipeline = Pipeline::new(config.clone(), cli.out.clone(), cli.threshold_ladder.clone())?;
        match cli.command {
            Command::Synth => vec![Step::Synth],
            Command::Solve => vec![Step::Solve],
            Command::Detect => vec![Step::Detect],
            Command::Cluster => vec![Step::Cluster],
            Command::Validate => vec![Step::Validate],
            Command::Similarity => vec![Step::Similarity],
            Command::Report => vec![Step::Report],
            Command::Sweep => vec![Step::Sweep],
            Command::All => pipeline.all_steps(),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        let mut pipeline = Pipeline::new(config, cli.out.clone(), cli.threshold_ladder.clone())?;
        for step in steps {
            let hit = pipeline.run(step)?;
            println!("{}: {}", step.as_str(), if hit { "cached" } else { "done" });
        }
        Ok(())
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_json("usage", &e.to_string(), 2));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e {
                Error::Config(_) | Error::InvalidArgument(_) => 2,
                _ => 1,
            };
            eprintln!("{}", error_json(e.kind(), &e.to_string(), code));
            ExitCode::from(code)
        }
    }
}
