//! Report directory: CSV files stamped with the run digest, JSON sidecars and
//! `manifest.json` listing every output with its size and SHA-256.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Keys dropped from JSON sidecars before hashing (wall-clock values).
const VOLATILE_KEYS: &[&str] = &["runtime_s"];

#[derive(Clone, Debug, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub bytes: u64,
    pub digest: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub git_describe: String,
    /// Digest of (command, config, seed); stamped into every CSV.
    pub run_digest: String,
    pub outputs: Vec<OutputEntry>,
    pub stages: Vec<StageRecord>,
    pub partial: bool,
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

pub struct RunDir {
    root: PathBuf,
    manifest: RunManifest,
}

impl RunDir {
    /// `inputs` is the canonical text of everything that determines the
    /// outputs besides the seed (config and command-line arguments).
    pub fn create(root: &Path, command: &str, inputs: &str, seed: u64) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        let config_hash = sha256_hex(inputs.as_bytes());
        let run_digest = sha256_hex(format!("{command}\n{config_hash}\n{seed}").as_bytes());
        Ok(RunDir {
            root: root.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                config_hash,
                seed,
                git_describe: git_describe(),
                run_digest,
                outputs: Vec::new(),
                stages: Vec::new(),
                partial: false,
            },
        })
    }

    #[cfg(test)]
    pub fn run_digest(&self) -> &str {
        &self.manifest.run_digest
    }

    fn record(&mut self, name: &str, bytes: &[u8], hashed: &[u8]) -> std::io::Result<()> {
        fs::write(self.root.join(name), bytes)?;
        self.manifest.outputs.retain(|o| o.path != name);
        self.manifest.outputs.push(OutputEntry {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            digest: sha256_hex(hashed),
        });
        Ok(())
    }

    /// Writes a CSV with the digest comment, a header row and the given rows.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
        let mut text = format!("# run-digest: {}\n{}\n", self.manifest.run_digest, header.join(","));
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.record(name, text.as_bytes(), text.as_bytes())
    }

    pub fn write_matrix(&mut self, name: &str, prefix: &str, m: &bdr_core::Mat) -> std::io::Result<()> {
        let header: Vec<String> = (0..m.cols()).map(|j| format!("{prefix}{j}")).collect();
        let refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = (0..m.rows()).map(|i| m.row(i).iter().map(|v| fmt(*v)).collect()).collect();
        self.write_csv(name, &refs, &rows)
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> std::io::Result<()> {
        let v = serde_json::to_value(value).map_err(std::io::Error::other)?;
        let text = serde_json::to_string_pretty(&v).map_err(std::io::Error::other)? + "\n";
        let mut stable = v.clone();
        if let Some(obj) = stable.as_object_mut() {
            for k in VOLATILE_KEYS {
                obj.remove(*k);
            }
        }
        let hashed = serde_json::to_vec(&stable).map_err(std::io::Error::other)?;
        self.record(name, text.as_bytes(), &hashed)
    }

    pub fn stage(&mut self, stage: &str, result: Result<(), String>) {
        if result.is_err() {
            self.manifest.partial = true;
        }
        self.manifest.stages.push(StageRecord { stage: stage.to_string(), ok: result.is_ok(), error: result.err() });
    }

    pub fn is_partial(&self) -> bool {
        self.manifest.partial
    }

    pub fn finish(mut self) -> std::io::Result<RunManifest> {
        self.manifest.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let text = serde_json::to_string_pretty(&self.manifest).map_err(std::io::Error::other)? + "\n";
        fs::write(self.root.join("manifest.json"), text)?;
        Ok(self.manifest)
    }
}

/// Shortest decimal that round-trips.
pub fn fmt(v: f64) -> String {
    format!("{v:?}")
}
