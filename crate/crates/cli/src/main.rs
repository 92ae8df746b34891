//! `dynoid`: generate closed-loop data, train window-state models, evaluate free-run
//! prediction, sweep autoencoder compression and check observability error bounds.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynoid::datagen::SystemKind;
use dynoid::Error;

use crate::config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "dynoid", version, about = "Neural state-space identification experiments")]
struct Cli {
    /// JSON experiment config; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for every artifact.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Base seed for all random streams.
    #[arg(long, global = true, env = "DYNOID_SEED")]
    seed: Option<u64>,

    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the closed-loop plant and write header.json + dataset.jsonl.
    GenData(DataArgs),
    /// Train one model per window size: ell{N}/model.json and ell{N}/loss.csv.
    Train(TrainArgs),
    /// Score free-run prediction on the test split: eval.csv and eval_summary.csv.
    Eval(WindowArgs),
    /// Train autoencoders over rates x windows: sweep.csv and ell{N}/rate{P}/autoencoder.json.
    Reduce(ReduceArgs),
    /// Monte Carlo check of the state estimation error bound: diagnostics.json/.csv.
    Diagnose(DiagnoseArgs),
    /// gen-data, train, eval and reduce in one go.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Plant to simulate: tank or drone2d.
    #[arg(long)]
    system: Option<String>,

    /// Output noise standard deviation (every channel).
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Debug, Args)]
struct WindowArgs {
    /// Comma-separated window sizes.
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<usize>>,

    /// Free-run steps scored per test trajectory.
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    window: WindowArgs,

    #[arg(long)]
    epochs: Option<usize>,

    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,

    /// Comma-separated hidden layer widths; "" for none.
    #[arg(long, value_parser = parse_widths)]
    hidden: Option<Widths>,

    /// Steps per truncated backpropagation window.
    #[arg(long)]
    chunk_len: Option<usize>,

    /// Trajectories per minibatch.
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Debug, Args)]
struct ReduceArgs {
    #[command(flatten)]
    window: WindowArgs,

    /// Comma-separated compression rates in [0, 1].
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,

    #[arg(long)]
    ae_epochs: Option<usize>,

    #[arg(long)]
    ae_lr: Option<f64>,

    /// Comma-separated encoder hidden widths (the decoder mirrors them); "" for a linear map.
    #[arg(long, value_parser = parse_widths)]
    ae_hidden: Option<Widths>,

    /// Add the one-step prediction error through the frozen output map.
    #[arg(long)]
    joint: bool,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    /// Window length of the inversion.
    #[arg(long)]
    ell: Option<usize>,

    /// Output noise standard deviation.
    #[arg(long)]
    noise: Option<f64>,

    #[arg(long)]
    trials: Option<usize>,

    /// Samples for each of the Lipschitz and observability estimates.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    train: TrainArgs,

    /// Comma-separated compression rates in [0, 1].
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,

    #[arg(long)]
    ae_epochs: Option<usize>,

    #[arg(long)]
    ae_lr: Option<f64>,

    #[arg(long, value_parser = parse_widths)]
    ae_hidden: Option<Widths>,

    #[arg(long)]
    joint: bool,
}

// A newtype so clap treats the whole list as one value and accepts "".
#[derive(Debug, Clone)]
struct Widths(Vec<usize>);

fn parse_widths(s: &str) -> Result<Widths, String> {
    if s.trim().is_empty() {
        return Ok(Widths(Vec::new()));
    }
    s.split(',')
        .map(|w| w.trim().parse::<usize>().map_err(|e| format!("{w:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Widths)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl DataArgs {
    fn apply(self, cfg: &mut ExperimentConfig) -> dynoid::Result<()> {
        if let Some(s) = self.system {
            cfg.system = s.parse::<SystemKind>()?;
        }
        if let Some(n) = self.noise {
            cfg.tank.noise_sigma = n;
            cfg.drone.noise_sigma = [n; 3];
        }
        Ok(())
    }
}

impl WindowArgs {
    fn apply(self, cfg: &mut ExperimentConfig) {
        set(&mut cfg.windows, self.windows);
        set(&mut cfg.horizon, self.horizon);
    }
}

impl TrainArgs {
    fn apply(self, cfg: &mut ExperimentConfig) {
        self.window.apply(cfg);
        set(&mut cfg.train.epochs, self.epochs);
        set(&mut cfg.train.adam.lr, self.lr);
        set(&mut cfg.train.hidden, self.hidden.map(|w| w.0));
        set(&mut cfg.train.chunk_len, self.chunk_len);
        set(&mut cfg.train.batch_size, self.batch_size);
    }
}

fn apply_ae(
    cfg: &mut ExperimentConfig,
    rates: Option<Vec<f64>>,
    epochs: Option<usize>,
    lr: Option<f64>,
    hidden: Option<Widths>,
    joint: bool,
) {
    set(&mut cfg.rates, rates);
    set(&mut cfg.autoencoder.epochs, epochs);
    set(&mut cfg.autoencoder.adam.lr, lr);
    set(&mut cfg.autoencoder.hidden, hidden.map(|w| w.0));
    cfg.autoencoder.joint |= joint;
}

/// 2 usage, 3 I/O, 4 numeric or training failure.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Shape { .. } | Error::Usage(_) | Error::Capability(_) => 2,
        Error::Io { .. } | Error::Parse { .. } | Error::Version { .. } => 3,
        Error::Numeric(_) | Error::Training { .. } | Error::Controller(_) => 4,
    }
}

fn run(cli: Cli) -> dynoid::Result<()> {
    if let Some(n) = cli.threads {
        dynoid::exec::set_threads(n)?;
    }
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    let out = cli.out;
    match cli.command {
        Command::GenData(a) => {
            a.apply(&mut cfg)?;
            commands::prepare(&cfg, &out, true)?;
            commands::gen_data(&cfg, &out)
        }
        Command::Train(a) => {
            a.apply(&mut cfg);
            commands::prepare(&cfg, &out, false)?;
            commands::train(&cfg, &out)
        }
        Command::Eval(a) => {
            a.apply(&mut cfg);
            commands::prepare(&cfg, &out, false)?;
            commands::eval(&cfg, &out)
        }
        Command::Reduce(a) => {
            a.window.apply(&mut cfg);
            apply_ae(&mut cfg, a.rates, a.ae_epochs, a.ae_lr, a.ae_hidden, a.joint);
            commands::prepare(&cfg, &out, false)?;
            commands::reduce(&cfg, &out)
        }
        Command::Diagnose(a) => {
            set(&mut cfg.diagnostics.ell, a.ell);
            set(&mut cfg.diagnostics.noise_sigma, a.noise);
            set(&mut cfg.diagnostics.n_trials, a.trials);
            set(&mut cfg.diagnostics.constant_samples, a.samples);
            commands::prepare(&cfg, &out, true)?;
            commands::diagnose(&cfg, &out)
        }
        Command::Sweep(a) => {
            a.data.apply(&mut cfg)?;
            a.train.apply(&mut cfg);
            apply_ae(&mut cfg, a.rates, a.ae_epochs, a.ae_lr, a.ae_hidden, a.joint);
            commands::prepare(&cfg, &out, true)?;
            commands::gen_data(&cfg, &out)?;
            commands::train(&cfg, &out)?;
            commands::eval(&cfg, &out)?;
            commands::reduce(&cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
