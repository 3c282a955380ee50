//! Flow fields as CSV.
//!
//! `flow.csv` holds one row per pixel, `x,y,u,v,valid`, in row-major order.
//! The raster size lives in a sidecar `flow.csv.size` with the header line
//! `width,height` followed by the values.

use std::fs;
use std::path::{Path, PathBuf};

use msflow_core::FlowField;

use crate::error::IoError;

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".size");
    PathBuf::from(s)
}

pub fn save_flow(path: &Path, flow: &FlowField) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["x", "y", "u", "v", "valid"])
        .map_err(|e| csv_err(path, e))?;
    for y in 0..flow.height() {
        for x in 0..flow.width() {
            let (u, v, ok) = flow.raw(x, y);
            w.write_record([
                x.to_string(),
                y.to_string(),
                u.to_string(),
                v.to_string(),
                u8::from(ok).to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| IoError::at(path, e))?;
    let side = sidecar_path(path);
    fs::write(
        &side,
        format!("width,height\n{},{}\n", flow.width(), flow.height()),
    )
    .map_err(|e| IoError::at(&side, e))
}

pub fn load_flow(path: &Path) -> Result<FlowField, IoError> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| IoError::at(&side, e))?;
    let (width, height) = parse_size(&text).map_err(|e| e.in_file(&side))?;
    let mut flow = FlowField::invalid(width, height);
    let mut seen = vec![false; width * height];
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?;
    if headers != vec!["x", "y", "u", "v", "valid"] {
        return Err(IoError::Parse(format!(
            "{}: expected header x,y,u,v,valid",
            path.display()
        )));
    }
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad =
            |what: &str| IoError::Parse(format!("{}: row {}: bad {what}", path.display(), n + 2));
        let x: usize = rec[0].trim().parse().map_err(|_| bad("x"))?;
        let y: usize = rec[1].trim().parse().map_err(|_| bad("y"))?;
        let u: f64 = rec[2].trim().parse().map_err(|_| bad("u"))?;
        let v: f64 = rec[3].trim().parse().map_err(|_| bad("v"))?;
        let valid = match rec[4].trim() {
            "1" => true,
            "0" => false,
            _ => return Err(bad("valid flag")),
        };
        if x >= width || y >= height {
            return Err(bad("coordinate"));
        }
        seen[y * width + x] = true;
        flow.set(x, y, valid.then_some((u, v)));
    }
    if seen.iter().any(|s| !s) {
        return Err(IoError::Parse(format!(
            "{}: missing pixels",
            path.display()
        )));
    }
    Ok(flow)
}

fn parse_size(text: &str) -> Result<(usize, usize), IoError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some("width,height") {
        return Err(IoError::Parse("expected header width,height".into()));
    }
    let line = lines
        .next()
        .ok_or_else(|| IoError::Parse("missing size line".into()))?;
    let (w, h) = line
        .split_once(',')
        .ok_or_else(|| IoError::Parse(format!("bad size line `{line}`")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .ok()
            .filter(|v| *v > 0)
            .ok_or_else(|| IoError::Parse(format!("bad size line `{line}`")))
    };
    Ok((parse(w)?, parse(h)?))
}

fn csv_err(path: &Path, e: csv::Error) -> IoError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => IoError::at(path, io),
            _ => unreachable!(),
        }
    } else {
        IoError::Parse(format!("{}: {e}", path.display()))
    }
}
