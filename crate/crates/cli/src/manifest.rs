//! `run_manifest.txt`: the command, its fully resolved options and a timestamp.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use clap::{ArgMatches, CommandFactory};
use serde::Serialize;

use crate::args::Cli;
use crate::error::{CliError, CliResult};

pub const RUN_MANIFEST: &str = "run_manifest.txt";

pub struct RunManifest {
    text: String,
}

impl RunManifest {
    /// Records every option of `command` with its effective value (empty when unset).
    pub fn new(command: &str, matches: &ArgMatches) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "command={command}");
        let _ = writeln!(text, "started={}", chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
        let _ = writeln!(text, "version={}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(text, "threads={}", rayon::current_num_threads());
        let cli = Cli::command();
        if let Some(sub) = cli.find_subcommand(command) {
            for arg in sub.get_arguments() {
                let Some(long) = arg.get_long() else { continue };
                if matches!(long, "help" | "version") {
                    continue;
                }
                let value = matches
                    .try_get_raw(arg.get_id().as_str())
                    .ok()
                    .flatten()
                    .map(|vals| vals.map(|v| v.to_string_lossy().into_owned()).collect::<Vec<_>>().join(","))
                    .unwrap_or_default();
                let _ = writeln!(text, "{long}={value}");
            }
        }
        Self { text }
    }

    /// Adds `resolved.<key>=<json>`.
    pub fn resolved<T: Serialize>(&mut self, key: &str, value: &T) {
        let json = serde_json::to_string(value).expect("serializable");
        let _ = writeln!(self.text, "resolved.{key}={json}");
    }

    pub fn write(&self, out_dir: &Path) -> CliResult<()> {
        let path = out_dir.join(RUN_MANIFEST);
        fs::write(&path, &self.text).map_err(|source| CliError::Data(rfdrone_core::Error::Io { path, source }))
    }
}
