use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scsat::config::ExperimentConfig;
use scsat::Error;

mod commands;

#[derive(Parser)]
#[command(name = "scsat", version, about = "Coupled density evolution, generalized potentials and SC BICM-ID EXIT analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run coupled density evolution and report a saturation verdict.
    De(Common),
    /// Compute the generalized potential, its minima and the coordinate map check.
    Potential(Common),
    /// Build the EXIT chart of a 16-QAM labeling with a regular LDPC decoder.
    ExitChart(Common),
    /// Operator gap sweeps, PDE relaxation and the stationary boundary value problem.
    Continuum(Common),
    /// Build and verify a spatially coupled interleaver.
    Interleaver(Common),
    /// Threshold report: SNR thresholds for BICM, erasure thresholds for LDPC systems.
    Thresholds(Common),
}

/// Options shared by every subcommand. Named flags take precedence over
/// `--set`, which takes precedence over `--config`.
#[derive(Args, Debug)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dump_config: bool,
    /// Cap on worker threads.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    r: Option<String>,
    /// Number of sections.
    #[arg(long = "L")]
    sections: Option<String>,
    /// Coupling width.
    #[arg(long = "W")]
    w: Option<String>,
    /// Bits per section.
    #[arg(long = "M")]
    m: Option<String>,
    #[arg(long)]
    mapping: Option<String>,
    #[arg(long)]
    snr: Option<String>,
    #[arg(long)]
    smoothing: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl Common {
    fn config(&self) -> scsat::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for kv in &self.set {
            cfg.apply_override(kv)?;
        }
        let named = [
            ("system", &self.system),
            ("eps", &self.eps),
            ("l", &self.l),
            ("r", &self.r),
            ("L", &self.sections),
            ("W", &self.w),
            ("M", &self.m),
            ("mapping", &self.mapping),
            ("snr", &self.snr),
            ("smoothing", &self.smoothing),
            ("alpha", &self.alpha),
            ("task", &self.task),
            ("seed", &self.seed),
            ("out", &self.out),
        ];
        for (key, value) in named {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() || matches!(e, Error::Io(_) | Error::Model(_)) {
        2
    } else {
        3
    }
}

fn run(cli: Cli) -> scsat::Result<()> {
    let (common, cmd): (&Common, fn(&ExperimentConfig) -> scsat::Result<()>) = match &cli.command {
        Command::De(c) => (c, commands::de),
        Command::Potential(c) => (c, commands::potential),
        Command::ExitChart(c) => (c, commands::exit_chart),
        Command::Continuum(c) => (c, commands::continuum),
        Command::Interleaver(c) => (c, commands::interleaver),
        Command::Thresholds(c) => (c, commands::thresholds),
    };
    let cfg = common.config()?;
    if common.dump_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    cfg.validate()?;
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))?;
    }
    cmd(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scsat: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
