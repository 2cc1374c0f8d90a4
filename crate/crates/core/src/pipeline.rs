//! File-based stages and the end-to-end run.
//!
//! ```text
//! <out>/dataset/        manifest.json, T.csv, P1.csv, P2.csv, P3.csv, train.csv
//! <out>/models/         model_T.json .. model_P3.json, train_report.json
//! <out>/forecast.csv    microcell,T_hat,P1_act,P2_act,P3_act,score
//! <out>/balance.json    balance report with metrics
//! <out>/metrics.csv     iteration,lvc,lf,par
//! <out>/before.svg, <out>/after.svg   (optional)
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ctp::{
    forecast_scores, train_segments, Forecast, Forecaster, LstmModel, ScoreVector, TrainConfig, TrainReport,
};
use crate::error::{Error, Result};
use crate::hexgrid::{HexLayout, LayoutFile, ScopeRule};
use crate::io;
use crate::metrics::trace_table;
use crate::pct::{balance, Assignment, BalanceResult};
use crate::report::BalanceReport;
use crate::rng::derive_seed;
use crate::svg::{render, SvgOptions};
use crate::trafficgen::{build_dataset, default_specs, Dataset, GenConfig, Kind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Gen,
    Train,
    Predict,
    Balance,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Gen => "gen",
            Stage::Train => "train",
            Stage::Predict => "predict",
            Stage::Balance => "balance",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("[{stage}] {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Settings shared by all stages; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Preset name (`wnl1`, `wnl2`) or path to a layout JSON file.
    pub layout: String,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub gen: GenConfig,
    pub train: TrainConfig,
    pub include_second_ring: bool,
    pub svg: bool,
    /// Test step to forecast; defaults to the day after the test series.
    pub forecast_step: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            layout: "wnl1".into(),
            out: PathBuf::from("out"),
            seed: None,
            gen: GenConfig::default(),
            train: TrainConfig::default(),
            include_second_ring: false,
            svg: false,
            forecast_step: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    pub fn scope_rule(&self) -> ScopeRule {
        ScopeRule {
            include_second_ring: self.include_second_ring,
        }
    }
}

/// Resolves a preset name or a layout file path.
pub fn resolve_layout(spec: &str) -> Result<(HexLayout, String)> {
    if let Some(layout) = HexLayout::preset(spec) {
        return Ok((layout, spec.to_owned()));
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Error::InvalidInput(format!(
            "layout {spec:?} is neither a preset (wnl1, wnl2) nor an existing file"
        )));
    }
    let file: LayoutFile = io::read_json(path)?;
    let layout = HexLayout::from_file(&file)?;
    let name = path
        .file_stem()
        .map_or_else(|| spec.to_owned(), |s| s.to_string_lossy().into_owned());
    Ok((layout, name))
}

pub fn gen_stage(layout: &HexLayout, layout_ref: &str, cfg: &GenConfig, seed: u64, dir: &Path) -> Result<Dataset> {
    let specs = default_specs(layout, cfg, seed)?;
    let dataset = build_dataset(layout, layout_ref, &specs, cfg.split, seed)?;
    dataset.write(dir)?;
    Ok(dataset)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub config: TrainConfig,
    pub reports: Vec<(Kind, TrainReport)>,
}

pub const TRAIN_REPORT_FILE: &str = "train_report.json";

/// Trains the four quantity models on the pooled training chunks, one thread
/// per model. Each model is seeded from `seed` and its kind, so the result
/// does not depend on scheduling.
pub fn train_stage(dataset: &Dataset, cfg: &TrainConfig, seed: u64, dir: &Path) -> Result<(Forecaster, TrainSummary)> {
    let results: Vec<Result<(LstmModel, TrainReport)>> = std::thread::scope(|s| {
        let handles: Vec<_> = Kind::ALL
            .into_iter()
            .map(|kind| {
                let cfg = TrainConfig {
                    seed: derive_seed(seed, kind.index() as u64, 0x7EA1),
                    ..*cfg
                };
                let segments = dataset.train_segments(kind);
                s.spawn(move || train_segments(&segments, &cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    });
    let mut models = Vec::with_capacity(4);
    let mut reports = Vec::with_capacity(4);
    for (kind, r) in Kind::ALL.into_iter().zip(results) {
        let (m, rep) = r.map_err(|e| match e {
            Error::Numeric(msg) => Error::Numeric(format!("{kind} model: {msg}")),
            other => other,
        })?;
        models.push(m);
        reports.push((kind, rep));
    }
    let models: [LstmModel; 4] = models.try_into().expect("four models");
    let forecaster = Forecaster::new(models)?;
    forecaster.write(dir)?;
    let summary = TrainSummary {
        config: TrainConfig { seed, ..*cfg },
        reports,
    };
    io::write_json(&dir.join(TRAIN_REPORT_FILE), &summary)?;
    Ok((forecaster, summary))
}

pub fn predict_stage(dataset: &Dataset, forecaster: &Forecaster, step: Option<usize>, out: &Path) -> Result<Forecast> {
    let t = step.unwrap_or(dataset.manifest.split.test_len);
    let forecast = forecast_scores(forecaster, dataset, t)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    forecast.write_csv(out)?;
    Ok(forecast)
}

/// Balances `scores` and writes `balance.json`, `metrics.csv` and optionally
/// `before.svg`/`after.svg` into `dir`.
pub fn balance_stage(
    layout: &HexLayout,
    scores: &ScoreVector,
    rule: ScopeRule,
    svg: bool,
    dir: &Path,
) -> Result<(BalanceResult, BalanceReport)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let result = balance(scores, layout, rule)?;
    let report = BalanceReport::from_result(&result)?;
    report.write(&dir.join("balance.json"))?;
    if layout.n_hex() >= 2 {
        trace_table(&result.trace)?.write(&dir.join("metrics.csv"))?;
    }
    if svg {
        for (name, assignment) in [
            ("before", Assignment::identity(layout)),
            ("after", result.assignment.clone()),
        ] {
            let opts = SvgOptions {
                title: Some(name),
                scores: Some(scores.as_slice()),
                scale: None,
            };
            let path = dir.join(format!("{name}.svg"));
            std::fs::write(&path, render(layout, &assignment, &opts)).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok((result, report))
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out: PathBuf,
    pub train: TrainSummary,
    pub forecast: Forecast,
    pub balance: BalanceResult,
    pub report: BalanceReport,
}

/// gen, train, predict, balance; each stage reads its inputs back from disk.
pub fn run_pipeline(cfg: &RunConfig) -> std::result::Result<RunSummary, StageError> {
    let seed = cfg
        .seed
        .ok_or_else(|| Error::InvalidInput("a seed is required".into()))
        .at(Stage::Config)?;
    let (layout, layout_ref) = resolve_layout(&cfg.layout).at(Stage::Config)?;
    let out = cfg.out.clone();
    let dataset_dir = out.join("dataset");
    let models_dir = out.join("models");
    let forecast_path = out.join("forecast.csv");

    gen_stage(&layout, &layout_ref, &cfg.gen, seed, &dataset_dir).at(Stage::Gen)?;

    let dataset = Dataset::load(&dataset_dir).at(Stage::Train)?;
    let (_, train) = train_stage(&dataset, &cfg.train, seed, &models_dir).at(Stage::Train)?;

    let forecaster = Forecaster::load(&models_dir).at(Stage::Predict)?;
    let forecast = predict_stage(&dataset, &forecaster, cfg.forecast_step, &forecast_path).at(Stage::Predict)?;

    let scores = ScoreVector::read_csv(&forecast_path).at(Stage::Balance)?;
    let (balance, report) = balance_stage(&layout, &scores, cfg.scope_rule(), cfg.svg, &out).at(Stage::Balance)?;

    Ok(RunSummary {
        out,
        train,
        forecast,
        balance,
        report,
    })
}
