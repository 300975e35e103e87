//! Run manifest: a flat `key = value` sidecar written next to the outputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{ArgMatches, Command};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Arguments that describe where to read or write, not what to compute.
const NOT_PARAMS: [&str; 4] = ["help", "version", "config", "out"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub version: String,
    pub subcommand: String,
    pub params: Vec<(String, String)>,
    pub seeds: String,
    pub rng: String,
    pub start_unix: f64,
    pub end_unix: f64,
    /// Scalar results worth keeping next to the files (e.g. the gelation time).
    pub results: Vec<(String, String)>,
    /// File name and `sha256:` digest of every output.
    pub outputs: Vec<(String, String)>,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: &str| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(v);
            s.push('\n');
        };
        line("version", &self.version);
        line("subcommand", &self.subcommand);
        for (k, v) in &self.params {
            line(&format!("param.{k}"), v);
        }
        line("seeds", &self.seeds);
        line("rng", &self.rng);
        line("start_unix", &format!("{:.3}", self.start_unix));
        line("end_unix", &format!("{:.3}", self.end_unix));
        for (k, v) in &self.results {
            line(&format!("result.{k}"), v);
        }
        for (k, v) in &self.outputs {
            line(&format!("output.{k}"), v);
        }
        s
    }
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

/// Every value of the subcommand's arguments after defaults and config
/// expansion, in declaration order. Unset optional arguments are left out.
pub fn resolved_params(cmd: &Command, matches: &ArgMatches) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for arg in cmd.get_arguments() {
        let id = arg.get_id().as_str();
        if NOT_PARAMS.contains(&id) {
            continue;
        }
        let key = arg.get_long().unwrap_or(id).to_string();
        if !arg.get_action().takes_values() {
            out.push((key, matches.get_flag(id).to_string()));
        } else if let Some(raw) = matches.get_raw(id) {
            let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            if !vals.is_empty() {
                out.push((key, vals.join(",")));
            }
        }
    }
    out
}

/// Output directory that remembers what was written to it. The directory is
/// created on the first write, so a run that fails validation leaves nothing.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", self.dir.display())))?;
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.files.push((name.to_string(), digest(bytes)));
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[(String, String)] {
        &self.files
    }
}
