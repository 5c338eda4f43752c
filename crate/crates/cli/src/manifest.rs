use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::{CliError, CommandResult};

#[derive(Debug, Serialize)]
pub struct Outcome {
    /// `success`, `diverged` or `error`.
    pub status: &'static str,
    pub exit_code: i32,
    pub summary: Value,
    pub error: Option<String>,
}

/// Record of one command invocation, written as `manifest.json` next to the
/// data files, also when the command fails.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    /// Config after overrides and with every default filled in.
    pub config: Value,
    pub seed: Option<u64>,
    pub version: String,
    pub started: String,
    pub finished: Option<String>,
    /// Data files in the output directory.
    pub outputs: Vec<String>,
    pub outcome: Outcome,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, config_path: &Path) -> Self {
        RunManifest {
            command: command.to_string(),
            config_path: config_path.display().to_string(),
            config: Value::Null,
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started: now(),
            finished: None,
            outputs: Vec::new(),
            outcome: Outcome { status: "error", exit_code: 1, summary: Value::Null, error: None },
        }
    }

    pub fn finish(&mut self, result: Result<CommandResult, CliError>, outputs: Vec<String>, exit_code: i32) {
        self.finished = Some(now());
        self.outputs = outputs;
        self.outcome.exit_code = exit_code;
        match result {
            Ok(r) => {
                self.config = r.resolved;
                self.outcome.status = if r.diverged { "diverged" } else { "success" };
                self.outcome.summary = r.summary;
            }
            Err(e) => {
                self.outcome.status = "error";
                self.outcome.error = Some(e.to_string());
            }
        }
        self.seed = self.config.get("seed").and_then(Value::as_u64);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        centripetal::io::write_json(path, self)?;
        Ok(())
    }
}
