//! Frame sequences on disk: `frame_00000.pgm`, `frame_00001.pgm`, ... plus
//! an optional `truth.txt` holding the generating velocity.

use std::fs;
use std::path::{Path, PathBuf};

use msflow_core::{Frame, FrameSequence};

use crate::error::IoError;
use crate::pgm;

pub const TRUTH_FILE: &str = "truth.txt";

pub fn frame_name(i: usize) -> String {
    format!("frame_{i:05}.pgm")
}

pub fn save_sequence(dir: &Path, seq: &FrameSequence) -> Result<Vec<PathBuf>, IoError> {
    fs::create_dir_all(dir).map_err(|e| IoError::at(dir, e))?;
    let mut paths = Vec::with_capacity(seq.len());
    for (i, f) in seq.frames().iter().enumerate() {
        let p = dir.join(frame_name(i));
        pgm::save(&p, f)?;
        paths.push(p);
    }
    Ok(paths)
}

/// Loads `frame_%05d.pgm` files in index order. Indices must be
/// contiguous from 0.
pub fn load_sequence(dir: &Path) -> Result<FrameSequence, IoError> {
    let mut indexed = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| IoError::at(dir, e))? {
        let entry = entry.map_err(|e| IoError::at(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(i) = parse_frame_name(name) {
            indexed.push((i, entry.path()));
        }
    }
    indexed.sort();
    if indexed.is_empty() {
        return Err(IoError::Parse(format!(
            "{}: no frame_*.pgm files",
            dir.display()
        )));
    }
    for (expect, (i, _)) in indexed.iter().enumerate() {
        if *i != expect {
            return Err(IoError::Parse(format!(
                "{}: frame {expect} missing",
                dir.display()
            )));
        }
    }
    let frames = indexed
        .iter()
        .map(|(_, p)| pgm::load(p))
        .collect::<Result<Vec<Frame>, _>>()?;
    FrameSequence::new(frames).map_err(|e| IoError::Parse(format!("{}: {e}", dir.display())))
}

fn parse_frame_name(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".pgm")?;
    if digits.len() != 5 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub fn save_truth(dir: &Path, velocity: (f64, f64)) -> Result<(), IoError> {
    let p = dir.join(TRUTH_FILE);
    fs::write(&p, format!("u={}\nv={}\n", velocity.0, velocity.1)).map_err(|e| IoError::at(&p, e))
}

/// Reads `truth.txt` if present.
pub fn load_truth(dir: &Path) -> Result<Option<(f64, f64)>, IoError> {
    let p = dir.join(TRUTH_FILE);
    if !p.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&p).map_err(|e| IoError::at(&p, e))?;
    let pairs = crate::config::parse_pairs(&text).map_err(|e| e.in_file(&p))?;
    let get = |k: &str| -> Result<f64, IoError> {
        pairs
            .iter()
            .find(|(key, _)| key == k)
            .ok_or_else(|| IoError::Parse(format!("{}: missing `{k}`", p.display())))?
            .1
            .parse()
            .map_err(|_| IoError::Parse(format!("{}: bad `{k}`", p.display())))
    };
    Ok(Some((get("u")?, get("v")?)))
}
