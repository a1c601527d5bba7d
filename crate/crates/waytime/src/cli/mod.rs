//! The `waytime` command line: gen-data, train, solve, eval, plot.
//!
//! Every subcommand resolves its settings from an optional JSON config
//! (`--config`, which also accepts a previous run manifest) overridden by
//! flags, and writes `<command>.manifest.json` into the output directory.

mod eval;
mod gen_data;
mod plot;
mod solve;
mod train;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use waytime_core::seqmodel::Precision;

use crate::manifest::load_config;

pub use eval::EvalConfig;
pub use gen_data::GenDataConfig;
pub use plot::PlotConfig;
pub use solve::SolveConfig;
pub use train::TrainRunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] crate::Error),
}

impl From<waytime_core::Error> for CliError {
    fn from(e: waytime_core::Error) -> Self {
        Self::Runtime(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "waytime", version, about = "Minimum-snap trajectories with learned time allocation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON config (or a previous run manifest); flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for every file the command writes.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core. 1 is fully deterministic.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Same as `--threads 1`.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[arg(long, global = true, value_enum)]
    pub precision: Option<PrecisionArg>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PrecisionArg {
    F32,
    F64,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::F32 => Precision::F32,
            PrecisionArg::F64 => Precision::F64,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label curves (synthetic or from a JSONL file) into a dataset.
    GenData(gen_data::GenDataArgs),
    /// Train the transformer or the fixed-size MLP bank.
    Train(train::TrainArgs),
    /// Allocate times and solve one waypoint path.
    Solve(solve::SolveArgs),
    /// Cost report, histograms, attention statistics, OOD evaluation.
    Eval(eval::EvalArgs),
    /// SVG from a trajectory, cost report or attention CSV.
    Plot(plot::PlotArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Train(_) => "train",
            Command::Solve(_) => "solve",
            Command::Eval(_) => "eval",
            Command::Plot(_) => "plot",
        }
    }
}

/// Settings shared by every command.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Common {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub threads: usize,
}

impl Default for Common {
    fn default() -> Self {
        Self { out_dir: PathBuf::from("."), seed: 0, threads: 0 }
    }
}

impl Common {
    fn apply(&mut self, g: &GlobalArgs) {
        if let Some(d) = &g.out_dir {
            self.out_dir = d.clone();
        }
        if let Some(s) = g.seed {
            self.seed = s;
        }
        if let Some(t) = g.threads {
            self.threads = t;
        }
        if g.deterministic {
            self.threads = 1;
        }
    }

    fn prepare_out_dir(&self) -> CliResult<()> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| crate::Error::io(&self.out_dir, e))?;
        Ok(())
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn pool(&self) -> CliResult<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| CliError::Runtime(crate::Error::Format(format!("thread pool: {e}"))))
    }
}

fn base_config<T: DeserializeOwned + Default>(g: &GlobalArgs, command: &str) -> CliResult<T> {
    match &g.config {
        Some(p) => Ok(load_config(p, command)?),
        None => Ok(T::default()),
    }
}

fn write_manifest<C: Serialize>(
    common: &Common,
    command: &str,
    config: &C,
    inputs: &[&Path],
    outputs: &[&Path],
) -> CliResult<()> {
    let mut m = crate::manifest::RunManifest::new(command, config)?;
    for p in inputs {
        m.input(p)?;
    }
    for p in outputs {
        m.output(p)?;
    }
    m.write(&common.out(&format!("{command}.manifest.json")))?;
    Ok(())
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().format_timestamp(None).try_init();
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.global.verbose);
    let name = cli.command.name();
    let result = match &cli.command {
        Command::GenData(a) => gen_data::run(&cli.global, a),
        Command::Train(a) => train::run(&cli.global, a),
        Command::Solve(a) => solve::run(&cli.global, a),
        Command::Eval(a) => eval::run(&cli.global, a),
        Command::Plot(a) => plot::run(&cli.global, a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("waytime {name}: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("waytime {name}: {e}");
            EXIT_RUNTIME
        }
    }
}
