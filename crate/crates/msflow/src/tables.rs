//! CSV outputs of the calibration and discrimination runs, and the model
//! file.

use std::fs;
use std::path::Path;

use msflow_core::calibrate::ConfidenceSample;
use msflow_core::discrim::{CurveSummary, DiscriminationCurve};
use msflow_core::ConfidenceModel;

use crate::error::IoError;

pub const NONE_MARK: &str = "none";

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, IoError> {
    csv::Writer::from_path(path).map_err(|e| IoError::Parse(format!("{}: {e}", path.display())))
}

fn put<I, S>(w: &mut csv::Writer<fs::File>, path: &Path, rec: I) -> Result<(), IoError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(rec)
        .map_err(|e| IoError::Parse(format!("{}: {e}", path.display())))
}

/// `level,v_r,k_mean,k_std,n`
pub fn save_samples(path: &Path, samples: &[ConfidenceSample]) -> Result<(), IoError> {
    let mut w = writer(path)?;
    put(&mut w, path, ["level", "v_r", "k_mean", "k_std", "n"])?;
    for s in samples {
        put(
            &mut w,
            path,
            [
                s.level.to_string(),
                s.speed.to_string(),
                s.k_mean.to_string(),
                s.k_std.to_string(),
                s.realizations.to_string(),
            ],
        )?;
    }
    w.flush().map_err(|e| IoError::at(path, e))
}

pub fn load_samples(path: &Path) -> Result<Vec<ConfidenceSample>, IoError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| IoError::Parse(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| IoError::Parse(format!("{}: {e}", path.display())))?;
        let bad = || IoError::Parse(format!("{}: row {} malformed", path.display(), n + 2));
        if rec.len() != 5 {
            return Err(bad());
        }
        out.push(ConfidenceSample {
            level: rec[0].parse().map_err(|_| bad())?,
            speed: rec[1].parse().map_err(|_| bad())?,
            k_mean: rec[2].parse().map_err(|_| bad())?,
            k_std: rec[3].parse().map_err(|_| bad())?,
            realizations: rec[4].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// `method,L,v_obj,min_delta_pct`; undetectable points are written as
/// `none`.
pub fn save_curves(path: &Path, curves: &[DiscriminationCurve]) -> Result<(), IoError> {
    let mut w = writer(path)?;
    put(&mut w, path, ["method", "L", "v_obj", "min_delta_pct"])?;
    for c in curves {
        for (v, d) in &c.points {
            put(
                &mut w,
                path,
                [
                    c.method.clone(),
                    c.levels.to_string(),
                    v.to_string(),
                    d.map_or(NONE_MARK.to_string(), |d| d.to_string()),
                ],
            )?;
        }
    }
    w.flush().map_err(|e| IoError::at(path, e))
}

/// `method,L,mean,variance,range_lo,range_hi`
pub fn save_summaries(
    path: &Path,
    rows: &[(&DiscriminationCurve, CurveSummary)],
) -> Result<(), IoError> {
    let mut w = writer(path)?;
    put(
        &mut w,
        path,
        ["method", "L", "mean", "variance", "range_lo", "range_hi"],
    )?;
    for (c, s) in rows {
        put(
            &mut w,
            path,
            [
                c.method.clone(),
                c.levels.to_string(),
                s.mean.to_string(),
                s.variance.to_string(),
                s.range_lo.to_string(),
                s.range_hi.to_string(),
            ],
        )?;
    }
    w.flush().map_err(|e| IoError::at(path, e))
}

pub fn save_model(path: &Path, model: &ConfidenceModel) -> Result<(), IoError> {
    fs::write(path, model.to_kv_string()).map_err(|e| IoError::at(path, e))
}

pub fn load_model(path: &Path) -> Result<ConfidenceModel, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::at(path, e))?;
    ConfidenceModel::from_kv_str(&text)
        .map_err(|e| IoError::Parse(format!("{}: {e}", path.display())))
}

/// Model calibrated on the default stimulus with default LK settings.
pub const DEFAULT_MODEL: &str = include_str!("../data/default_model.txt");

pub fn default_model() -> ConfidenceModel {
    ConfidenceModel::from_kv_str(DEFAULT_MODEL).expect("shipped model parses")
}
