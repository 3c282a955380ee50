//! `key=value` configuration files.
//!
//! A config file supplies defaults for command-line flags: `window=9`
//! becomes `--window 9`. Its flags are inserted before the ones typed on the
//! command line, and the parser keeps the last occurrence, so explicit
//! flags win.

use std::fs;
use std::path::Path;

use crate::error::IoError;

/// Parses `key=value` lines. Blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, IoError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| IoError::Parse(format!("line {}: expected key=value", n + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(IoError::Parse(format!("line {}: empty key", n + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Turns pairs into flags. `true` yields a bare switch, `false` nothing.
pub fn pairs_to_flags(pairs: &[(String, String)]) -> Vec<String> {
    let mut out = Vec::new();
    for (k, v) in pairs {
        let flag = format!("--{}", k.replace('_', "-"));
        match v.as_str() {
            "true" => out.push(flag),
            "false" => {}
            _ => {
                out.push(flag);
                out.push(v.clone());
            }
        }
    }
    out
}

/// Replaces `--config PATH` (or `--config=PATH`) in `args` with the flags
/// read from `PATH`, placed right after the subcommand name.
pub fn expand(args: Vec<String>) -> Result<Vec<String>, IoError> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let p = it
                .next()
                .ok_or_else(|| IoError::Parse("--config needs a path".into()))?;
            path = Some(p);
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let path = Path::new(&path);
    let text = fs::read_to_string(path).map_err(|e| IoError::at(path, e))?;
    let flags = pairs_to_flags(&parse_pairs(&text).map_err(|e| e.in_file(path))?);
    // program name, then subcommand, then config flags, then the rest
    let split = rest
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map_or(rest.len(), |i| i + 2);
    let tail = rest.split_off(split);
    rest.extend(flags);
    rest.extend(tail);
    Ok(rest)
}
