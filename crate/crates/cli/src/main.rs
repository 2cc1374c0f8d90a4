use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cellbalance_core::ctp::{Forecaster, ScoreVector};
use cellbalance_core::pipeline::{
    balance_stage, gen_stage, predict_stage, resolve_layout, run_pipeline, train_stage, RunConfig, Stage, StageError,
};
use cellbalance_core::report::{format_table, reference_table, TotalsPair};
use cellbalance_core::trafficgen::Dataset;
use cellbalance_core::{io, Error};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cellbalance",
    version,
    about = "Forecast microcell traffic and rebalance hexagonal cells"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name (wnl1, wnl2) or layout JSON file.
    #[arg(long)]
    layout: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        /// Output directory for the dataset files.
        #[arg(long)]
        out: PathBuf,
        /// Steps per test series.
        #[arg(long)]
        length: Option<usize>,
        /// Steps in the pooled training series.
        #[arg(long)]
        train_length: Option<usize>,
    },
    /// Train the four quantity models on a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory for the model files.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Forecast per-microcell scores with trained models.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        models: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Test step to forecast (defaults to one past the last test step).
        #[arg(long)]
        step: Option<usize>,
    },
    /// Balance a score CSV over a layout.
    Balance {
        #[command(flatten)]
        common: Common,
        /// CSV with `microcell` and `score` columns.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        include_second_ring: bool,
        #[arg(long)]
        svg: bool,
    },
    /// Print the metrics table for before/after totals.
    Report {
        /// JSON files with `before`/`after` or `totals_before`/`totals_after`.
        #[arg(long = "input", required_unless_present = "reference")]
        inputs: Vec<PathBuf>,
        /// Use the two built-in worked examples.
        #[arg(long, conflicts_with = "inputs")]
        reference: bool,
    },
    /// gen, train, predict and balance in one go.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        include_second_ring: bool,
        #[arg(long)]
        svg: bool,
    },
}

enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numeric() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        let msg = e.to_string();
        match (e.stage, e.source.is_numeric()) {
            (Stage::Config, _) => Failure::Usage(msg),
            (_, true) => Failure::Numeric(msg),
            (_, false) => Failure::Data(msg),
        }
    }
}

fn base_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).map_err(|e| Failure::Usage(format!("config: {e}")))?,
        None => RunConfig::default(),
    };
    if let Some(layout) = &common.layout {
        cfg.layout = layout.clone();
    }
    Ok(cfg)
}

fn at<T>(stage: Stage, r: cellbalance_core::Result<T>) -> Result<T, Failure> {
    r.map_err(|source| StageError { stage, source }.into())
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gen {
            common,
            seed,
            out,
            length,
            train_length,
        } => {
            let mut cfg = base_config(&common)?;
            if let Some(n) = length {
                cfg.gen.split.test_len = n;
            }
            if let Some(n) = train_length {
                cfg.gen.split.train_len = n;
            }
            let (layout, layout_ref) = at(Stage::Config, resolve_layout(&cfg.layout))?;
            let ds = at(Stage::Gen, gen_stage(&layout, &layout_ref, &cfg.gen, seed, &out))?;
            println!(
                "wrote {} microcells x {} test steps, {} training steps to {}",
                ds.manifest.specs.microcells.len(),
                ds.manifest.split.test_len,
                ds.train.len(),
                out.display()
            );
        }
        Command::Train {
            common,
            seed,
            dataset,
            out,
            epochs,
        } => {
            let mut cfg = base_config(&common)?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            let ds = at(Stage::Train, Dataset::load(&dataset))?;
            let (_, summary) = at(Stage::Train, train_stage(&ds, &cfg.train, seed, &out))?;
            for (kind, rep) in &summary.reports {
                println!("{kind:<3} loss {:.6} -> {:.6}", rep.losses[0], rep.final_loss());
            }
            println!("models written to {}", out.display());
        }
        Command::Predict {
            common,
            dataset,
            models,
            out,
            step,
        } => {
            let cfg = base_config(&common)?;
            let step = step.or(cfg.forecast_step);
            let ds = at(Stage::Predict, Dataset::load(&dataset))?;
            let forecaster = at(Stage::Predict, Forecaster::load(&models))?;
            let forecast = at(Stage::Predict, predict_stage(&ds, &forecaster, step, &out))?;
            println!("{} scores written to {}", forecast.rows.len(), out.display());
        }
        Command::Balance {
            common,
            scores,
            out,
            include_second_ring,
            svg,
        } => {
            let mut cfg = base_config(&common)?;
            cfg.include_second_ring |= include_second_ring;
            cfg.svg |= svg;
            let (layout, _) = at(Stage::Config, resolve_layout(&cfg.layout))?;
            let scores = at(Stage::Balance, ScoreVector::read_csv(&scores))?;
            let (result, report) = at(
                Stage::Balance,
                balance_stage(&layout, &scores, cfg.scope_rule(), cfg.svg, &out),
            )?;
            print_balance(&report.totals_before, &report.totals_after, result.added.len());
            println!("report written to {}", out.join("balance.json").display());
        }
        Command::Report { inputs, reference } => {
            if reference {
                print!("{}", reference_table());
            } else {
                let pairs = inputs
                    .iter()
                    .map(|p| at(Stage::Report, io::read_json::<TotalsPair>(p)).map(|t| (label(p), t)))
                    .collect::<Result<Vec<_>, _>>()?;
                let entries: Vec<(&str, &TotalsPair)> = pairs.iter().map(|(n, t)| (n.as_str(), t)).collect();
                print!("{}", at(Stage::Report, format_table(&entries))?);
            }
        }
        Command::Run {
            common,
            seed,
            out,
            include_second_ring,
            svg,
        } => {
            let mut cfg = base_config(&common)?;
            if seed.is_some() {
                cfg.seed = seed;
            }
            if let Some(out) = out {
                cfg.out = out;
            }
            cfg.include_second_ring |= include_second_ring;
            cfg.svg |= svg;
            if cfg.seed.is_none() {
                return Err(Failure::Usage("run needs --seed or a seed in the config file".into()));
            }
            let summary = run_pipeline(&cfg)?;
            print_balance(
                &summary.report.totals_before,
                &summary.report.totals_after,
                summary.balance.added.len(),
            );
            println!("outputs in {}", summary.out.display());
        }
    }
    Ok(())
}

fn label(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn print_balance(before: &[f64], after: &[f64], moved: usize) {
    println!("hex       before        after");
    for (i, (b, a)) in before.iter().zip(after).enumerate() {
        println!("{i:>3} {b:>12.4} {a:>12.4}");
    }
    println!("{moved} microcells transferred");
    if before.len() >= 2 {
        let pair = TotalsPair {
            before: before.to_vec(),
            after: after.to_vec(),
        };
        if let Ok(table) = format_table(&[("result", &pair)]) {
            print!("{table}");
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NUMERIC)
        }
    }
}
