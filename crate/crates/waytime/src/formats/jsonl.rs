use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use waytime_core::dataprep::{LabeledSample, RangeAngleSequence, RawCurve};
use waytime_core::Point2;

use crate::error::{Error, IoContext, Result};

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).at(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.at(path)?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { path: path.to_path_buf(), line: i + 1, msg: e.to_string() })?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).at(path)?);
    for row in rows {
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n").at(path)?;
    }
    w.flush().at(path)
}

/// `{"id": string, "points": [[x, y], ...]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub id: String,
    pub points: Vec<[f64; 2]>,
}

impl From<&RawCurve> for CurveRow {
    fn from(c: &RawCurve) -> Self {
        Self { id: c.id.clone(), points: c.points.iter().map(|p| [p.x, p.y]).collect() }
    }
}

impl From<CurveRow> for RawCurve {
    fn from(r: CurveRow) -> Self {
        RawCurve { id: r.id, points: r.points.iter().map(|&[x, y]| Point2::new(x, y)).collect() }
    }
}

pub fn read_curves(path: &Path) -> Result<Vec<RawCurve>> {
    let rows: Vec<CurveRow> = read_jsonl(path)?;
    for (i, r) in rows.iter().enumerate() {
        if r.points.len() < 2 || r.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("curve {:?} needs at least two finite points", r.id),
            });
        }
    }
    Ok(rows.into_iter().map(RawCurve::from).collect())
}

pub fn write_curves(path: &Path, curves: &[RawCurve]) -> Result<()> {
    write_jsonl(path, curves.iter().map(CurveRow::from))
}

/// One labeled sample. `scale` is the segment-length normalizer; files
/// without it read as 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub id: String,
    pub n: usize,
    pub d: Vec<f64>,
    pub theta: Vec<f64>,
    pub fractions: Vec<f64>,
    pub converged: bool,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl From<&LabeledSample> for SampleRow {
    fn from(s: &LabeledSample) -> Self {
        Self {
            id: s.curve_id.clone(),
            n: s.n,
            d: s.range_angle.ranges.clone(),
            theta: s.range_angle.angles.clone(),
            fractions: s.fractions.clone(),
            converged: s.converged,
            scale: s.range_angle.scale,
        }
    }
}

impl SampleRow {
    fn into_sample(self) -> std::result::Result<LabeledSample, String> {
        let m = self.n.checked_sub(1).filter(|&m| m >= 1).ok_or("n must be at least 2")?;
        if self.d.len() != m || self.theta.len() != m || self.fractions.len() != m {
            return Err(format!("n = {} needs {m} entries in d, theta and fractions", self.n));
        }
        let all = self.d.iter().chain(&self.theta).chain(&self.fractions);
        if all.clone().any(|v| !v.is_finite()) || !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err("non-finite value".into());
        }
        Ok(LabeledSample {
            curve_id: self.id,
            n: self.n,
            range_angle: RangeAngleSequence { ranges: self.d, angles: self.theta, scale: self.scale },
            fractions: self.fractions,
            converged: self.converged,
        })
    }
}

pub fn read_dataset(path: &Path) -> Result<Vec<LabeledSample>> {
    let rows: Vec<SampleRow> = read_jsonl(path)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| r.into_sample().map_err(|msg| Error::Parse { path: path.to_path_buf(), line: i + 1, msg }))
        .collect()
}

pub fn write_dataset(path: &Path, samples: &[LabeledSample]) -> Result<()> {
    write_jsonl(path, samples.iter().map(SampleRow::from))
}
