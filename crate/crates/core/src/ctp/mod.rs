//! Next-day traffic and priority forecasting, priority activation and
//! traffic scores.

pub mod lstm;
pub mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use lstm::{grad_check, Gate, GateCache, LstmModel, ModelFile, Scaler};
pub use train::{predict_next, rolling_forecast, train, train_segments, TrainConfig, TrainReport};

use crate::error::{Error, Result};
use crate::hexgrid::TRIANGLES_PER_HEX;
use crate::io::{self, fmt9, Table};
use crate::trafficgen::{Dataset, Kind};

/// Softmax over three raw priority forecasts.
pub fn softmax3(p1: f64, p2: f64, p3: f64) -> (f64, f64, f64) {
    let m = p1.max(p2).max(p3);
    let (e1, e2, e3) = ((p1 - m).exp(), (p2 - m).exp(), (p3 - m).exp());
    let total = e1 + e2 + e3;
    (e1 / total, e2 / total, e3 / total)
}

pub const PRIORITY_WEIGHTS: [f64; 3] = [4.0, 2.0, 1.0];

/// Priority-weighted load `4 T p1 + 2 T p2 + T p3`.
pub fn traffic_score(traffic: f64, p1: f64, p2: f64, p3: f64) -> Result<f64> {
    if !(traffic.is_finite() && traffic >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "traffic must be non-negative, got {traffic}"
        )));
    }
    let shares = [p1, p2, p3];
    if shares.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (p1 + p2 + p3 - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "priority shares must be non-negative and sum to 1, got {shares:?}"
        )));
    }
    Ok(PRIORITY_WEIGHTS.iter().zip(shares).map(|(w, p)| w * traffic * p).sum())
}

/// Per-microcell traffic scores in flat `24 * hex + local` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() || !scores.len().is_multiple_of(TRIANGLES_PER_HEX) {
            return Err(Error::InvalidInput(format!(
                "score vector length {} is not a positive multiple of {TRIANGLES_PER_HEX}",
                scores.len()
            )));
        }
        if let Some(i) = scores.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "score {i} must be finite and non-negative, got {}",
                scores[i]
            )));
        }
        Ok(Self(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_hex(&self) -> usize {
        self.0.len() / TRIANGLES_PER_HEX
    }

    /// Reads the `score` column of a CSV that also has a `microcell` column
    /// (a forecast file, or a hand-written `microcell,score` table).
    pub fn read_csv(path: &Path) -> Result<Self> {
        let table = Table::read(path)?;
        let col = |name: &str| {
            table
                .header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::format(path, format!("missing column {name:?}")))
        };
        let (mc, sc) = (col("microcell")?, col("score")?);
        let mut scores = vec![None; table.rows.len()];
        for row in &table.rows {
            let i = io::parse_usize(path, &row[mc])?;
            let slot = scores
                .get_mut(i)
                .ok_or_else(|| Error::format(path, format!("microcell {i} out of range")))?;
            if slot.replace(io::parse_f64(path, &row[sc])?).is_some() {
                return Err(Error::format(path, format!("duplicate microcell {i}")));
            }
        }
        let scores = scores
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .expect("one row per index");
        Self::new(scores).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// The four per-quantity models.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecaster {
    models: [LstmModel; 4],
}

impl Forecaster {
    pub fn new(models: [LstmModel; 4]) -> Result<Self> {
        let w = models[0].window();
        if models.iter().any(|m| m.window() != w) {
            return Err(Error::InvalidInput(
                "all four models must share one window length".into(),
            ));
        }
        Ok(Self { models })
    }

    pub fn model(&self, kind: Kind) -> &LstmModel {
        &self.models[kind.index()]
    }

    pub fn window(&self) -> usize {
        self.models[0].window()
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let load = |k: Kind| -> Result<LstmModel> {
            let file: ModelFile = io::read_json(&dir.join(model_file(k)))?;
            LstmModel::try_from(file)
        };
        Self::new([load(Kind::T)?, load(Kind::P1)?, load(Kind::P2)?, load(Kind::P3)?])
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for k in Kind::ALL {
            io::write_json(&dir.join(model_file(k)), &ModelFile::from(self.model(k)))?;
        }
        Ok(())
    }
}

pub fn model_file(kind: Kind) -> String {
    format!("model_{}.json", kind.name())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub traffic: f64,
    pub priorities: [f64; 3],
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub rows: Vec<ForecastRow>,
}

pub const FORECAST_HEADER: [&str; 6] = ["microcell", "T_hat", "P1_act", "P2_act", "P3_act", "score"];

impl Forecast {
    pub fn scores(&self) -> ScoreVector {
        ScoreVector::new(self.rows.iter().map(|r| r.score).collect()).expect("forecast scores are valid")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut t = Table::new(FORECAST_HEADER);
        for (i, r) in self.rows.iter().enumerate() {
            let [p1, p2, p3] = r.priorities;
            t.push(vec![
                i.to_string(),
                fmt9(r.traffic),
                fmt9(p1),
                fmt9(p2),
                fmt9(p3),
                fmt9(r.score),
            ]);
        }
        t.write(path)
    }
}

/// Forecasts step `t` of every microcell's test series from the preceding
/// window: traffic and raw priorities per quantity model, softmax over the
/// priorities, predicted traffic clamped at 0, then the traffic score.
/// `t` may equal the test length, which forecasts the day after the data.
pub fn forecast_scores(forecaster: &Forecaster, dataset: &Dataset, t: usize) -> Result<Forecast> {
    let w = forecaster.window();
    let len = dataset.manifest.split.test_len;
    if t < w || t > len {
        return Err(Error::InvalidInput(format!(
            "forecast step {t} must lie in {w}..={len}"
        )));
    }
    if dataset.test.is_empty() || !dataset.test.len().is_multiple_of(TRIANGLES_PER_HEX) {
        return Err(Error::InvalidInput(format!(
            "dataset has {} microcells, not a positive multiple of {TRIANGLES_PER_HEX}",
            dataset.test.len()
        )));
    }
    let rows = dataset
        .test
        .iter()
        .enumerate()
        .map(|(i, set)| {
            let mut raw = [0.0; 4];
            for kind in Kind::ALL {
                let series = set.get(kind);
                if series.len() < t {
                    return Err(Error::InvalidInput(format!(
                        "microcell {i} has {} {kind} values, need {t}",
                        series.len()
                    )));
                }
                raw[kind.index()] = predict_next(forecaster.model(kind), &series[t - w..t])?;
            }
            let traffic = raw[0].max(0.0);
            let (p1, p2, p3) = softmax3(raw[1], raw[2], raw[3]);
            Ok(ForecastRow {
                traffic,
                priorities: [p1, p2, p3],
                score: traffic_score(traffic, p1, p2, p3)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forecast { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_of_equal_inputs_is_uniform() {
        for x in [-3.0, 0.0, 7.5, 700.0] {
            let (a, b, c) = softmax3(x, x, x);
            for v in [a, b, c] {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn softmax_hand_values() {
        // exp(0.5), exp(0.3), exp(0.2) normalized
        let (a, b, c) = softmax3(0.5, 0.3, 0.2);
        assert!((a - 0.390_693_833_269_815_7).abs() < 1e-12);
        assert!((b - 0.319_873_056_335_919_7).abs() < 1e-12);
        assert!((c - 0.289_433_110_394_264_6).abs() < 1e-12);
        let (a, b, c) = softmax3(10.0, 0.0, 0.0);
        assert!(a > 0.9999);
        assert!((a + b + c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn score_boundaries() {
        assert_eq!(traffic_score(0.0, 0.2, 0.3, 0.5).unwrap(), 0.0);
        assert_eq!(traffic_score(100.0, 1.0, 0.0, 0.0).unwrap(), 400.0);
        assert_eq!(traffic_score(100.0, 0.0, 0.0, 1.0).unwrap(), 100.0);
        assert!((traffic_score(100.0, 0.5, 0.3, 0.2).unwrap() - 280.0).abs() < 1e-12);
        assert!(traffic_score(-1.0, 1.0, 0.0, 0.0).is_err());
        assert!(traffic_score(1.0, 0.5, 0.5, 0.5).is_err());
    }

    #[test]
    fn score_vector_validation() {
        assert!(ScoreVector::new(vec![1.0; 24]).is_ok());
        assert!(ScoreVector::new(vec![1.0; 25]).is_err());
        assert!(ScoreVector::new(vec![]).is_err());
        let mut v = vec![1.0; 24];
        v[3] = -1.0;
        assert!(ScoreVector::new(v).is_err());
    }

    proptest! {
        #[test]
        fn softmax_invariants(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -50.0f64..50.0, k in -100.0f64..100.0) {
            let (x, y, z) = softmax3(a, b, c);
            prop_assert!(x > 0.0 && y > 0.0 && z > 0.0);
            prop_assert!((x + y + z - 1.0).abs() < 1e-9);
            let (xs, ys, zs) = softmax3(a + k, b + k, c + k);
            prop_assert!((x - xs).abs() < 1e-9 && (y - ys).abs() < 1e-9 && (z - zs).abs() < 1e-9);
            if a > b { prop_assert!(x >= y); }
            if b > c { prop_assert!(y >= z); }
        }

        #[test]
        fn score_linear_and_monotone(t in 0.0f64..1e4, p1 in 0.0f64..0.5, p2 in 0.0f64..0.5, shift in 0.0f64..0.2) {
            let p3 = 1.0 - p1 - p2;
            let s = traffic_score(t, p1, p2, p3).unwrap();
            prop_assert!(s >= t * (1.0 - 1e-12) && s <= 4.0 * t * (1.0 + 1e-12));
            let doubled = traffic_score(2.0 * t, p1, p2, p3).unwrap();
            prop_assert!((doubled - 2.0 * s).abs() <= 1e-9 * (1.0 + s));
            let moved = shift.min(p3);
            let up = traffic_score(t, p1 + moved, p2, p3 - moved).unwrap();
            prop_assert!(up >= s - 1e-9);
        }
    }
}
