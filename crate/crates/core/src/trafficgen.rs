//! Synthetic per-microcell traffic and priority series.
//!
//! One timestep is one day; weekends are the steps with `t mod 7` in `{5, 6}`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hexgrid::HexLayout;
use crate::io::{self, fmt9, Table};
use crate::rng::{derive_seed, Stream};

pub const WEEK: usize = 7;
pub const PRIORITY_FLOOR: f64 = 0.01;
pub const PRIORITY_CEIL: f64 = 0.99;

/// The four forecast quantities of a microcell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kind {
    T,
    P1,
    P2,
    P3,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::T, Kind::P1, Kind::P2, Kind::P3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::T => "T",
            Kind::P1 => "P1",
            Kind::P2 => "P2",
            Kind::P3 => "P3",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown series kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub kind: Kind,
    pub values: Vec<f64>,
}

/// Base level shape of a traffic series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// No weekday/weekend variation.
    Flat,
    /// Weekend days scaled by `weekend_ratio`.
    Weekly { weekend_ratio: f64 },
    /// Level scaled by `post_ratio` from `changepoint_step` onward.
    Changepoint { changepoint_step: usize, post_ratio: f64 },
}

impl Scenario {
    pub fn label(&self) -> &'static str {
        match self {
            Scenario::Flat => "S1",
            Scenario::Weekly { .. } => "S2",
            Scenario::Changepoint { .. } => "S3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub base: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn flat(base: f64, noise_sigma: f64, seed: u64) -> Self {
        Self {
            scenario: Scenario::Flat,
            base,
            noise_sigma,
            seed,
        }
    }

    pub fn validate(&self, length: usize) -> Result<()> {
        if !(self.base.is_finite() && self.base > 0.0) {
            return Err(Error::InvalidSpec(format!("base must be positive, got {}", self.base)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "noise sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        match self.scenario {
            Scenario::Flat => {}
            Scenario::Weekly { weekend_ratio } => {
                if !(weekend_ratio.is_finite() && weekend_ratio > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "weekend ratio must be positive, got {weekend_ratio}"
                    )));
                }
            }
            Scenario::Changepoint {
                changepoint_step,
                post_ratio,
            } => {
                if !(post_ratio.is_finite() && post_ratio > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "post ratio must be positive, got {post_ratio}"
                    )));
                }
                if changepoint_step >= length {
                    return Err(Error::InvalidSpec(format!(
                        "changepoint step {changepoint_step} outside series of length {length}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Noise-free level at step `t`.
    pub fn base_pattern(&self, t: usize) -> f64 {
        match self.scenario {
            Scenario::Flat => self.base,
            Scenario::Weekly { weekend_ratio } => {
                if t % WEEK >= 5 {
                    self.base * weekend_ratio
                } else {
                    self.base
                }
            }
            Scenario::Changepoint {
                changepoint_step,
                post_ratio,
            } => {
                if t >= changepoint_step {
                    self.base * post_ratio
                } else {
                    self.base
                }
            }
        }
    }
}

/// `values[t] = max(0, base_pattern(t) + sigma * z_t)`.
pub fn gen_traffic(spec: &ScenarioSpec, length: usize) -> Result<Series> {
    if length == 0 {
        return Err(Error::InvalidSpec("series length must be at least 1".into()));
    }
    spec.validate(length)?;
    let mut rng = Stream::new(spec.seed);
    let values = (0..length)
        .map(|t| (spec.base_pattern(t) + spec.noise_sigma * rng.standard_normal()).max(0.0))
        .collect();
    Ok(Series { kind: Kind::T, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrioritySpec {
    pub base: [f64; 3],
    pub sigma: f64,
    pub seed: u64,
}

/// Perturbs each share by `sigma * z`, clips to `[0.01, 0.99]` and renormalizes.
pub fn gen_priorities(base: [f64; 3], sigma: f64, length: usize, seed: u64) -> Result<(Series, Series, Series)> {
    if base.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
        return Err(Error::InvalidSpec(format!(
            "priority shares must be positive, got {base:?}"
        )));
    }
    if (base.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSpec(format!(
            "priority shares must sum to 1, got {base:?}"
        )));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidSpec(format!(
            "priority sigma must be non-negative, got {sigma}"
        )));
    }
    if length == 0 {
        return Err(Error::InvalidSpec("series length must be at least 1".into()));
    }
    let mut rng = Stream::new(seed);
    let mut out = [
        Vec::with_capacity(length),
        Vec::with_capacity(length),
        Vec::with_capacity(length),
    ];
    for _ in 0..length {
        let mut step = base;
        for p in &mut step {
            *p = (*p + sigma * rng.standard_normal()).clamp(PRIORITY_FLOOR, PRIORITY_CEIL);
        }
        let total: f64 = step.iter().sum();
        for (series, p) in out.iter_mut().zip(step) {
            series.push(p / total);
        }
    }
    let [p1, p2, p3] = out;
    Ok((
        Series {
            kind: Kind::P1,
            values: p1,
        },
        Series {
            kind: Kind::P2,
            values: p2,
        },
        Series {
            kind: Kind::P3,
            values: p3,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Split {
    pub train_len: usize,
    pub test_len: usize,
}

impl Default for Split {
    fn default() -> Self {
        Self {
            train_len: 2800,
            test_len: 77,
        }
    }
}

/// Generator settings for one stretch of data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicrocellSpec {
    pub traffic: ScenarioSpec,
    pub priorities: PrioritySpec,
}

/// One contiguous block of the pooled training context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainChunk {
    pub length: usize,
    pub spec: MicrocellSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpecs {
    pub microcells: Vec<MicrocellSpec>,
    pub train_chunks: Vec<TrainChunk>,
}

/// Knobs for [`default_specs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub split: Split,
    pub base_range: (f64, f64),
    pub noise_sigma: f64,
    pub priority_sigma: f64,
    pub chunk_len: usize,
    pub weekend_high: f64,
    pub weekend_low: f64,
    pub rise_ratio: f64,
    pub drop_ratio: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            split: Split::default(),
            base_range: (40.0, 80.0),
            noise_sigma: 1.0,
            priority_sigma: 0.02,
            chunk_len: 28,
            weekend_high: 1.5,
            weekend_low: 0.7,
            rise_ratio: 1.5,
            drop_ratio: 0.6,
        }
    }
}

const TRAIN_DOMAIN: u64 = 1 << 40;
const PRIORITY_TAG: u64 = 4;

fn draw_priorities(rng: &mut Stream) -> [f64; 3] {
    let p1 = rng.uniform_range(0.2, 0.5);
    let p2 = rng.uniform_range(0.2, 0.4);
    [p1, p2, 1.0 - p1 - p2]
}

/// Default per-microcell and training-context specs.
///
/// Microcell `i` follows scenario `i mod 4`: flat, weekly (weekends high or
/// low on alternate blocks of four), changepoint rise, changepoint drop. The
/// changepoints of alternate blocks fall 14 steps before the end of the test
/// series (recent past) or a quarter of the way in (distant past). The
/// training context is split into chunks: the first quarter flat, the second
/// weekly, the remaining half changepoint, each chunk with its own base.
pub fn default_specs(layout: &HexLayout, cfg: &GenConfig, seed: u64) -> Result<DatasetSpecs> {
    let Split { train_len, test_len } = cfg.split;
    if test_len < 2 || train_len < 2 || cfg.chunk_len < 2 {
        return Err(Error::InvalidSpec("series and chunk lengths must be at least 2".into()));
    }
    let (lo, hi) = cfg.base_range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidSpec(format!("invalid base range {lo}..{hi}")));
    }
    let mut rng = Stream::new(derive_seed(seed, u64::MAX, u64::MAX));

    let microcells = (0..layout.n_triangles())
        .map(|i| {
            let block = (i / 4) % 2;
            let scenario = match i % 4 {
                0 => Scenario::Flat,
                1 => Scenario::Weekly {
                    weekend_ratio: if block == 0 { cfg.weekend_high } else { cfg.weekend_low },
                },
                r => Scenario::Changepoint {
                    changepoint_step: if block == 0 {
                        test_len.saturating_sub(14).max(1)
                    } else {
                        test_len / 4
                    },
                    post_ratio: if r == 2 { cfg.rise_ratio } else { cfg.drop_ratio },
                },
            };
            MicrocellSpec {
                traffic: ScenarioSpec {
                    scenario,
                    base: rng.uniform_range(lo, hi),
                    noise_sigma: cfg.noise_sigma,
                    seed: 0,
                },
                priorities: PrioritySpec {
                    base: draw_priorities(&mut rng),
                    sigma: cfg.priority_sigma,
                    seed: 0,
                },
            }
        })
        .collect();

    let n_chunks = train_len.div_ceil(cfg.chunk_len);
    let train_chunks = (0..n_chunks)
        .map(|c| {
            let start = c * cfg.chunk_len;
            let length = cfg.chunk_len.min(train_len - start);
            let scenario = if 4 * start < train_len {
                Scenario::Flat
            } else if 2 * start < train_len {
                Scenario::Weekly {
                    weekend_ratio: if c % 2 == 0 { cfg.weekend_high } else { cfg.weekend_low },
                }
            } else {
                let lo_step = (length / 5).max(1);
                let hi_step = (4 * length / 5).max(lo_step + 1);
                Scenario::Changepoint {
                    changepoint_step: lo_step + rng.below(hi_step - lo_step),
                    post_ratio: if c % 2 == 0 { cfg.rise_ratio } else { cfg.drop_ratio },
                }
            };
            TrainChunk {
                length,
                spec: MicrocellSpec {
                    traffic: ScenarioSpec {
                        scenario,
                        base: rng.uniform_range(lo, hi),
                        noise_sigma: cfg.noise_sigma,
                        seed: 0,
                    },
                    priorities: PrioritySpec {
                        base: draw_priorities(&mut rng),
                        sigma: cfg.priority_sigma,
                        seed: 0,
                    },
                },
            }
        })
        .collect();

    Ok(DatasetSpecs {
        microcells,
        train_chunks,
    })
}

/// The four series of one microcell (or of the training context).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesSet {
    values: [Vec<f64>; 4],
}

impl SeriesSet {
    pub fn new(values: [Vec<f64>; 4]) -> Self {
        Self { values }
    }

    pub fn get(&self, kind: Kind) -> &[f64] {
        &self.values[kind.index()]
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn generate(spec: &MicrocellSpec, length: usize) -> Result<Self> {
        let t = gen_traffic(&spec.traffic, length)?;
        let p = &spec.priorities;
        let (p1, p2, p3) = gen_priorities(p.base, p.sigma, length, p.seed)?;
        Ok(Self::new([t.values, p1.values, p2.values, p3.values]))
    }

    fn extend(&mut self, other: SeriesSet) {
        for (dst, src) in self.values.iter_mut().zip(other.values) {
            dst.extend(src);
        }
    }

    fn map(&mut self, f: impl Fn(f64) -> f64) {
        for v in self.values.iter_mut().flatten() {
            *v = f(*v);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub layout_ref: String,
    pub split: Split,
    pub specs: DatasetSpecs,
}

/// Pooled training context plus one test series set per microcell.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub train: SeriesSet,
    pub test: Vec<SeriesSet>,
}

fn reseed(spec: &MicrocellSpec, seed: u64, stream: u64) -> MicrocellSpec {
    MicrocellSpec {
        traffic: ScenarioSpec {
            seed: derive_seed(seed, stream, Kind::T.index() as u64),
            ..spec.traffic
        },
        priorities: PrioritySpec {
            seed: derive_seed(seed, stream, PRIORITY_TAG),
            ..spec.priorities
        },
    }
}

/// Generates every series. Each stream is seeded from `seed`, the microcell
/// (or chunk) index and a kind tag; the effective seeds land in the manifest.
/// Values are rounded to their serialized precision so that a dataset and its
/// reloaded copy are identical.
pub fn build_dataset(
    layout: &HexLayout,
    layout_ref: &str,
    specs: &DatasetSpecs,
    split: Split,
    seed: u64,
) -> Result<Dataset> {
    if specs.microcells.len() != layout.n_triangles() {
        return Err(Error::SizeMismatch {
            what: "microcell specs",
            expected: layout.n_triangles(),
            got: specs.microcells.len(),
        });
    }
    let chunk_total: usize = specs.train_chunks.iter().map(|c| c.length).sum();
    if chunk_total != split.train_len {
        return Err(Error::SizeMismatch {
            what: "training chunk lengths",
            expected: split.train_len,
            got: chunk_total,
        });
    }

    let microcells: Vec<MicrocellSpec> = specs
        .microcells
        .iter()
        .enumerate()
        .map(|(i, s)| reseed(s, seed, i as u64))
        .collect();
    let train_chunks: Vec<TrainChunk> = specs
        .train_chunks
        .iter()
        .enumerate()
        .map(|(c, chunk)| TrainChunk {
            length: chunk.length,
            spec: reseed(&chunk.spec, seed, TRAIN_DOMAIN + c as u64),
        })
        .collect();

    let round = |x: f64| -> f64 { fmt9(x).parse().expect("formatted float") };
    let mut train = SeriesSet::default();
    for chunk in &train_chunks {
        train.extend(SeriesSet::generate(&chunk.spec, chunk.length)?);
    }
    train.map(round);
    let test = microcells
        .iter()
        .map(|s| {
            let mut set = SeriesSet::generate(s, split.test_len)?;
            set.map(round);
            Ok(set)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Dataset {
        manifest: DatasetManifest {
            seed,
            layout_ref: layout_ref.to_owned(),
            split,
            specs: DatasetSpecs {
                microcells,
                train_chunks,
            },
        },
        train,
        test,
    })
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAIN_FILE: &str = "train.csv";

pub fn kind_file(kind: Kind) -> String {
    format!("{}.csv", kind.name())
}

fn step_header(first: &str, len: usize) -> Vec<String> {
    std::iter::once(first.to_owned())
        .chain((0..len).map(|t| format!("t{t}")))
        .collect()
}

impl Dataset {
    pub fn n_microcells(&self) -> usize {
        self.test.len()
    }

    /// The training series of `kind`, split at chunk boundaries.
    pub fn train_segments(&self, kind: Kind) -> Vec<&[f64]> {
        let mut rest = self.train.get(kind);
        let mut out = Vec::with_capacity(self.manifest.specs.train_chunks.len());
        for chunk in &self.manifest.specs.train_chunks {
            let (head, tail) = rest.split_at(chunk.length.min(rest.len()));
            out.push(head);
            rest = tail;
        }
        out
    }

    /// Writes `manifest.json`, `T.csv`, `P1.csv`, `P2.csv`, `P3.csv` (test
    /// rows per microcell) and `train.csv` (one training row per kind).
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        io::write_json(&dir.join(MANIFEST_FILE), &self.manifest)?;
        let test_len = self.manifest.split.test_len;
        for kind in Kind::ALL {
            let mut table = Table::new(step_header("microcell", test_len));
            for (i, set) in self.test.iter().enumerate() {
                let mut row = vec![i.to_string()];
                row.extend(set.get(kind).iter().map(|&v| fmt9(v)));
                table.push(row);
            }
            table.write(&dir.join(kind_file(kind)))?;
        }
        let mut table = Table::new(step_header("kind", self.manifest.split.train_len));
        for kind in Kind::ALL {
            let mut row = vec![kind.name().to_owned()];
            row.extend(self.train.get(kind).iter().map(|&v| fmt9(v)));
            table.push(row);
        }
        table.write(&dir.join(TRAIN_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: DatasetManifest = io::read_json(&dir.join(MANIFEST_FILE))?;
        let Split { train_len, test_len } = manifest.split;
        let n = manifest.specs.microcells.len();

        let mut test: Vec<[Vec<f64>; 4]> = vec![Default::default(); n];
        for kind in Kind::ALL {
            let path = dir.join(kind_file(kind));
            let table = Table::read(&path)?;
            let header = step_header("microcell", test_len);
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            table.expect_header(&path, &header)?;
            if table.rows.len() != n {
                return Err(Error::format(
                    &path,
                    format!("expected {n} microcell rows, found {}", table.rows.len()),
                ));
            }
            for (i, row) in table.rows.iter().enumerate() {
                if io::parse_usize(&path, &row[0])? != i {
                    return Err(Error::format(&path, format!("row {i} has microcell {:?}", row[0])));
                }
                test[i][kind.index()] = row[1..]
                    .iter()
                    .map(|f| io::parse_f64(&path, f))
                    .collect::<Result<_>>()?;
            }
        }

        let path = dir.join(TRAIN_FILE);
        let table = Table::read(&path)?;
        let header = step_header("kind", train_len);
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        table.expect_header(&path, &header)?;
        let mut train: [Vec<f64>; 4] = Default::default();
        let mut seen = [false; 4];
        for row in &table.rows {
            let kind: Kind = row[0].parse()?;
            seen[kind.index()] = true;
            train[kind.index()] = row[1..]
                .iter()
                .map(|f| io::parse_f64(&path, f))
                .collect::<Result<_>>()?;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::format(
                &path,
                format!("missing training row for {}", Kind::ALL[k]),
            ));
        }

        Ok(Self {
            manifest,
            train: SeriesSet::new(train),
            test: test.into_iter().map(SeriesSet::new).collect(),
        })
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
