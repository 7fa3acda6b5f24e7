use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use corridor_cli::{analyze, simulate, sweep, AnalyzeOptions, ConfigFile, Overrides};

/// Vicsek, social-force and combined crowd models in a periodic corridor.
#[derive(Parser)]
#[command(name = "corridor", version)]
struct Cli {
    /// Size of the worker pool for independent runs (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble at one parameter point.
    Simulate {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        set: Set,
        /// Record the cluster width w(t) and fit its growth exponent.
        #[arg(long)]
        fit_width: bool,
        /// Write particle snapshots every this many steps.
        #[arg(long)]
        snapshot_every: Option<u64>,
    },
    /// Run the [sweep] grid of a configuration.
    Sweep {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        set: Set,
        /// Keep finished rows of an existing sweep.csv.
        #[arg(long)]
        resume: bool,
    },
    /// Summarise series directories written by `simulate`.
    Analyze {
        /// Directories holding series_*.csv files.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long, env = "CORRIDOR_OUT", default_value = "corridor-out")]
        out: PathBuf,
        /// Require a w column and fit w(t) ~ t^alpha.
        #[arg(long)]
        fit_width: bool,
        /// Steps discarded before averaging phi.
        #[arg(long)]
        warmup: Option<u64>,
    },
}

#[derive(Args)]
struct Io {
    /// TOML configuration; defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "CORRIDOR_OUT", default_value = "corridor-out")]
    out: PathBuf,
}

#[derive(Args)]
struct Set {
    /// Base seed (0 to 2^63 - 1).
    #[arg(long, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    seed: Option<u64>,
    /// Model: vm, vm-dd, sfm, sfm-vm, or a variant such as vm-pbc.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    v0: Option<f64>,
    #[arg(long)]
    ly: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
}

impl Set {
    fn overrides(&self) -> Overrides {
        Overrides {
            model: self.model.clone(),
            eta: self.eta,
            v0: self.v0,
            ly: self.ly,
            steps: self.steps,
            warmup: self.warmup,
            runs: self.runs,
            seed: self.seed,
            ..Overrides::default()
        }
    }
}

fn load(io: &Io) -> anyhow::Result<ConfigFile> {
    match &io.config {
        Some(path) => ConfigFile::load(path),
        None => Ok(ConfigFile::default()),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match cli.command {
        Command::Simulate {
            io,
            set,
            fit_width,
            snapshot_every,
        } => {
            let mut cfg = load(&io)?;
            Overrides {
                fit_width,
                snapshot_every,
                ..set.overrides()
            }
            .apply_run(&mut cfg)?;
            simulate(&cfg, &io.out)
        }
        Command::Sweep { io, set, resume } => {
            let mut cfg = load(&io)?;
            set.overrides().apply_sweep(&mut cfg)?;
            sweep(&cfg, &io.out, resume)
        }
        Command::Analyze {
            dirs,
            out,
            fit_width,
            warmup,
        } => analyze(&dirs, &out, &AnalyzeOptions { fit_width, warmup }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
