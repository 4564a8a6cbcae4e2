use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use al_lab_core::acquisition::Strategy;
use al_lab_core::data::{gen_blobs, load_dataset, save_dataset, BlobParams};
use al_lab_core::engine::{
    analyze_initial_pool, average_rows, compare, informativeness_csv, write_outputs, ConfigError,
    EngineError, AGGREGATE_FILE, REPORTS_FILE,
};
use al_lab_core::{AlConfig, Dataset, OracleToken};
use clap::{Args, Parser, Subcommand};

use crate::service;

/// Environment variable naming the service's persistence root.
pub const DATA_DIR_ENV: &str = "AL_LAB_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "al-lab", version, about = "Pool-based active-learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a Gaussian-blob dataset (CSV plus metadata sidecar).
    GenData(GenData),
    /// Run the configured strategy over every seed with a simulated oracle.
    Run(RunArgs),
    /// Run several strategies from a shared initial pool.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated strategy names.
        #[arg(long, value_delimiter = ',', required = true)]
        strategies: Vec<Strategy>,
    },
    /// Informativeness table for the initial-pool model of each seed.
    Analyze {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated strategy names; defaults to every supported one.
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<Strategy>,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.3,0.5,1.0")]
        fractions: Vec<f64>,
    },
    /// Serve the interactive labeling API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Debug, Args)]
struct GenData {
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 500)]
    per_class: usize,
    #[arg(long, default_value_t = 4)]
    dims: usize,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 0.35)]
    overlap: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip train-split standardization.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Dataset CSV; a `.meta.json` sidecar is applied when present.
    #[arg(long)]
    data: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

/// A failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl CliError {
    fn failure(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn config(file: &Path, e: &ConfigError) -> Self {
        Self {
            code: 2,
            message: format!("bad config {}: at {}: {}", file.display(), e.path, e.message),
        }
    }
}

/// Parses arguments, runs the command, and reports errors on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("al-lab: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenData(args) => gen_data(args),
        Command::Run(args) => {
            let (config, dataset) = load_inputs(&args)?;
            let strategy = config.strategy;
            experiment(&args, config, &dataset, &[strategy])
        }
        Command::Compare { run, strategies } => {
            let (config, dataset) = load_inputs(&run)?;
            experiment(&run, config, &dataset, &strategies)
        }
        Command::Analyze {
            run,
            strategies,
            fractions,
        } => analyze(&run, strategies, &fractions),
        Command::Serve { port, host } => serve(&host, port),
    }
}

fn gen_data(args: GenData) -> Result<(), CliError> {
    let params = BlobParams {
        classes: args.classes,
        per_class: args.per_class,
        dims: args.dims,
        spread: args.spread,
        overlap: args.overlap,
        seed: args.seed,
    };
    let mut dataset = gen_blobs(&params).map_err(|e| CliError::failure(e.to_string()))?;
    if !args.raw {
        dataset = dataset.normalize();
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::failure(format!("{}: {e}", dir.display())))?;
    }
    save_dataset(&dataset, &args.out)
        .map_err(|e| CliError::failure(format!("{}: {e}", args.out.display())))?;
    println!(
        "wrote {} ({} samples, d={}, C={})",
        args.out.display(),
        dataset.len(),
        dataset.dims(),
        dataset.class_count()
    );
    Ok(())
}

fn load_inputs(args: &RunArgs) -> Result<(AlConfig, Dataset), CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::failure(format!("{}: {e}", args.config.display())))?;
    let config = AlConfig::from_json(&text).map_err(|e| CliError::config(&args.config, &e))?;
    let dataset = load_dataset(&args.data)
        .map_err(|e| CliError::failure(format!("{}: {e}", args.data.display())))?;
    config
        .budget_for(&dataset)
        .map_err(|e| CliError::config(&args.config, &e))?;
    Ok((config, dataset))
}

fn experiment(
    args: &RunArgs,
    config: AlConfig,
    dataset: &Dataset,
    strategies: &[Strategy],
) -> Result<(), CliError> {
    for &s in strategies {
        config
            .check_strategy(s)
            .map_err(|e| CliError::config(&args.config, &e))?;
    }
    let token = OracleToken::ground_truth();
    let outcomes = compare(&config, strategies, dataset, &token);
    let failures = write_outputs(&args.out, &outcomes)
        .map_err(|e| CliError::failure(format!("{}: {e}", args.out.display())))?;
    println!(
        "wrote {} and {} under {}",
        REPORTS_FILE,
        AGGREGATE_FILE,
        args.out.display()
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::failure(format!("some runs failed: {}", failures.join("; "))))
    }
}

fn analyze(args: &RunArgs, strategies: Vec<Strategy>, fractions: &[f64]) -> Result<(), CliError> {
    let (config, dataset) = load_inputs(args)?;
    let strategies = if strategies.is_empty() {
        Strategy::ALL
            .into_iter()
            .filter(|&s| config.check_strategy(s).is_ok())
            .collect()
    } else {
        strategies
    };
    let token = OracleToken::ground_truth();
    let mut per_seed = Vec::new();
    for &seed in &config.seeds {
        let (_, rows) = analyze_initial_pool(&config, &dataset, seed, &strategies, fractions, &token)
            .map_err(|e| match e {
                EngineError::Config(c) => CliError::config(&args.config, &c),
                other => CliError::failure(format!("seed {seed}: {other}")),
            })?;
        per_seed.push(rows);
    }
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::failure(format!("{}: {e}", args.out.display())))?;
    let path = args.out.join("informativeness.csv");
    fs::write(&path, informativeness_csv(&average_rows(&per_seed)))
        .map_err(|e| CliError::failure(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn serve(host: &str, port: u16) -> Result<(), CliError> {
    let root = std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("al-lab-data"));
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| CliError::failure(format!("bad address {host}:{port}: {e}")))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::failure(e.to_string()))?;
    runtime
        .block_on(service::serve(addr, root))
        .map_err(|e| CliError::failure(e.to_string()))
}
