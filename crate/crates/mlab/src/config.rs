//! Flat `key = value` files that mirror the command-line flags.

use std::ffi::OsString;

use crate::error::{CliError, CliResult};

pub const SUBCOMMANDS: [&str; 8] = ["pattern", "evaluate", "minimize", "sweep", "fit", "certify", "interp", "oracle"];

/// Global options that take a separate value token.
const VALUED_GLOBALS: [&str; 5] = ["--out-dir", "--format", "--threads", "--seed", "--config"];

/// Parses `key = value` lines into `--key=value` arguments. Blank lines and
/// `#` comments are ignored; `true`/`false` values toggle switches.
pub fn parse(text: &str) -> CliResult<Vec<String>> {
    let mut out = vec![];
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Precondition(format!("config line {}: expected key = value", no + 1)))?;
        let (k, v) = (k.trim().trim_start_matches('-').replace('_', "-"), v.trim());
        if k.is_empty() {
            return Err(CliError::Precondition(format!("config line {}: empty key", no + 1)));
        }
        match v {
            "true" => out.push(format!("--{k}")),
            "false" => {}
            _ => out.push(format!("--{k}={v}")),
        }
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

fn subcommand_index(args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if SUBCOMMANDS.contains(&s.as_ref()) {
            return Some(i);
        }
        i += if VALUED_GLOBALS.contains(&s.as_ref()) { 2 } else { 1 };
    }
    None
}

/// Splices config-file arguments in right after the subcommand so that any
/// flag given on the command line, coming later, takes precedence.
pub fn merge(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Precondition(format!("config {}: {e}", path.to_string_lossy())))?;
    let extra = parse(&text)?;
    let at = subcommand_index(&args).map_or(args.len(), |i| i + 1);
    let mut out = args[..at].to_vec();
    out.extend(extra.into_iter().map(OsString::from));
    out.extend_from_slice(&args[at..]);
    Ok(out)
}
