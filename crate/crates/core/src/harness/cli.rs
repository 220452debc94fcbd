//! Command-line front end.
//!
//! Exit codes: `0` success, `1` runtime or config failure (one-line
//! diagnostic on stderr), `2` usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::{ExperimentConfig, Preset, SweepAxis};
use super::experiment::{run_experiment, slot_stream};
use super::output::{emit_config, emit_outputs, emit_slots, read_metrics_csv, render_svg, PLOT_FILE};
use super::validate::run_all;
use crate::error::{Error, Result};
use crate::predictor::{dataset_rmse, save_model, train, write_loss_csv, ModelShape, PredictorModel, TrainingConfig};
use crate::traffic::{parse_trace, sliding_pairs};

/// Output directory used when `--out` is absent.
pub const OUT_DIR_ENV: &str = "SHRA_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "shra", version, about = "Random-access simulator for massive IoT uplinks")]
pub struct Cli {
    /// Override the RNG seed of the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $SHRA_OUT_DIR or ./results].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured experiment and write metrics, plot and per-slot stream.
    Simulate(RunOverrides),
    /// Run a figure preset, or the config's sweep when no preset is named.
    Sweep {
        #[arg(value_enum)]
        preset: Option<PresetArg>,
        #[command(flatten)]
        overrides: RunOverrides,
    },
    /// Fit the load predictor to a per-slot count trace.
    Train(TrainArgs),
    /// Re-render a plot from an existing metrics CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t = AxisArg::ActiveDevices)]
        axis: AxisArg,
    },
    /// Run the built-in invariant checks (and check `--config` if given).
    Validate,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    Fig2,
    Fig3,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Fig2 => Preset::Fig2,
            PresetArg::Fig3 => Preset::Fig3,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AxisArg {
    Preambles,
    ActiveDevices,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Preambles => SweepAxis::Preambles,
            AxisArg::ActiveDevices => SweepAxis::ActiveDevices,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunOverrides {
    /// Override slots per replication.
    #[arg(long)]
    pub slots: Option<usize>,
    /// Override replications per point.
    #[arg(long)]
    pub replications: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// One non-negative count per line.
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    /// Width of both LSTM layers and the attention projection.
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 1)]
    pub batch_size: usize,
}

/// Parses `std::env::args` and runs; the binary's whole `main`.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn base_config(cli: &Cli, preset: Option<Preset>, overrides: &RunOverrides) -> Result<ExperimentConfig> {
    let mut cfg = match (preset, &cli.config) {
        (Some(p), _) => p.config(),
        (None, Some(path)) => ExperimentConfig::load(path)?,
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(s) = overrides.slots {
        cfg.slots = s;
    }
    if let Some(r) = overrides.replications {
        cfg.replications = r;
    }
    cfg.validated()
}

pub fn run(cli: Cli) -> Result<()> {
    let out = out_dir(&cli);
    match &cli.command {
        Command::Simulate(overrides) => {
            let cfg = base_config(&cli, None, overrides)?;
            let metrics = run_experiment(&cfg)?;
            let mut written = emit_outputs(&metrics, &out)?;
            written.push(emit_slots(&slot_stream(&cfg)?, &out)?);
            written.push(emit_config(&cfg, None, &out)?);
            report_written(&written, metrics.runtime.as_secs_f64());
        }
        Command::Sweep { preset, overrides } => {
            let preset = preset.map(Preset::from);
            let cfg = base_config(&cli, preset, overrides)?;
            let metrics = run_experiment(&cfg)?;
            let mut written = emit_outputs(&metrics, &out)?;
            written.push(emit_config(&cfg, preset, &out)?);
            report_written(&written, metrics.runtime.as_secs_f64());
        }
        Command::Train(args) => run_train(&cli, args, &out)?,
        Command::Plot { csv, axis } => {
            let rows = read_metrics_csv(csv)?;
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let path = out.join(PLOT_FILE);
            fs::write(&path, render_svg((*axis).into(), &rows)).map_err(|e| Error::io(&path, e))?;
            println!("wrote {}", path.display());
        }
        Command::Validate => {
            if let Some(path) = &cli.config {
                ExperimentConfig::load(path)?;
                println!("PASS config: {}", path.display());
            }
            let reports = run_all(cli.seed.unwrap_or(42))?;
            let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name).collect();
            for r in &reports {
                println!("{r}");
            }
            if !failed.is_empty() {
                return Err(Error::Domain(format!("failed checks: {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}

fn report_written(paths: &[PathBuf], seconds: f64) {
    for p in paths {
        println!("wrote {}", p.display());
    }
    println!("runtime {seconds:.2} s");
}

fn run_train(cli: &Cli, args: &TrainArgs, out: &Path) -> Result<()> {
    let text = fs::read_to_string(&args.trace).map_err(|e| Error::io(&args.trace, e))?;
    let counts = parse_trace(&text).map_err(|m| Error::parse(&args.trace, m))?;
    if args.window == 0 || args.hidden == 0 {
        return Err(Error::InvalidConfig(
            vec!["window and hidden must be at least 1".into()],
        ));
    }
    let dataset = sliding_pairs(&counts, args.window);
    if dataset.is_empty() {
        return Err(Error::Parse {
            path: args.trace.clone(),
            message: format!("{} counts are too few for window {}", counts.len(), args.window),
        });
    }
    let shape = ModelShape {
        hidden1: args.hidden,
        attention: args.hidden,
        hidden2: args.hidden,
        window: args.window,
        ..ModelShape::default()
    };
    let seed = cli.seed.unwrap_or(42);
    let cfg = TrainingConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed,
    };
    let (model, loss) = train(PredictorModel::random(shape, seed), &dataset, &cfg)?;

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let model_path = out.join("model.bin");
    save_model(&model, &model_path)?;
    let loss_path = out.join("loss.csv");
    let mut buf = Vec::new();
    write_loss_csv(&mut buf, &loss).map_err(|e| Error::io(&loss_path, e))?;
    fs::write(&loss_path, buf).map_err(|e| Error::io(&loss_path, e))?;
    println!("wrote {}", model_path.display());
    println!("wrote {}", loss_path.display());
    println!(
        "{} windows, {} parameters, final RMSE {:.4}",
        dataset.len(),
        model.param_count(),
        dataset_rmse(&model, &dataset)?
    );
    Ok(())
}
