//! `key=value` option files merged into the argument list.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use crate::error::{usage, CliResult};

/// Keys a run manifest carries that are not options.
fn is_record_key(key: &str) -> bool {
    matches!(key, "command" | "started" | "version" | "config") || key.starts_with("resolved.")
}

pub fn parse_config(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(usage(format!("config line {}: empty key", i + 1)));
        }
        if is_record_key(key) || value.is_empty() {
            continue;
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn has_flag(args: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_value = format!("{flag}=");
    args.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&with_value)
    })
}

/// Appends `--key=value` for every config entry whose flag is not already given.
pub fn merge_config(mut args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let extra: Vec<OsString> = parse_config(&text)?
        .into_iter()
        .filter(|(k, _)| !has_flag(&args, k))
        .map(|(k, v)| format!("--{k}={v}").into())
        .collect();
    args.extend(extra);
    Ok(args)
}
