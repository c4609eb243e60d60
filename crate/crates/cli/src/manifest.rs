//! Atomic output files and the run manifest that records them.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Context, ErrorKind, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).context(format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Writes `path` through a temporary file in the same directory that is
/// renamed into place only after `fill` succeeds. Returns the content digest.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<String>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).context(format!("creating {}", dir.display()))?;
    let mut buf = Vec::new();
    fill(&mut buf)?;
    let mut builder = tempfile::Builder::new();
    builder.prefix(".ivnet-").suffix(".tmp");
    // Temp files default to owner-only access; outputs are ordinary files.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        builder.permissions(std::fs::Permissions::from_mode(0o644));
    }
    let tmp = builder.tempfile_in(dir).context(format!("temp file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        w.write_all(&buf).context(format!("writing {}", path.display()))?;
        w.flush().context(format!("writing {}", path.display()))?;
    }
    tmp.as_file().sync_all().context(format!("syncing {}", path.display()))?;
    tmp.persist(path).map_err(|e| CliError::input(format!("renaming into {}: {}", path.display(), e.error)))?;
    Ok(sha256_hex(&buf))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub name: String,
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub rows: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub stage: String,
    pub kind: ErrorKind,
    pub exit_code: i32,
    pub message: String,
}

/// What a run read, did and wrote. Written even when a stage fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub workers: usize,
    pub inputs: Vec<FileDigest>,
    pub stages: Vec<StageRecord>,
    pub outputs: Vec<OutputRecord>,
    pub failure: Option<FailureRecord>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, config_hash: String, workers: usize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash,
            started_at: now(),
            finished_at: None,
            workers,
            inputs: Vec::new(),
            stages: Vec::new(),
            outputs: Vec::new(),
            failure: None,
        }
    }

    pub fn record_input(&mut self, name: &str, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(FileDigest { name: name.to_string(), path: path.to_path_buf(), sha256 });
        Ok(())
    }

    /// Atomically writes `dir/name` and records its digest and row count.
    pub fn write_output<F>(&mut self, dir: &Path, name: &str, rows: usize, fill: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let sha256 = write_atomic(&dir.join(name), fill)?;
        self.outputs.push(OutputRecord { name: name.to_string(), sha256, rows });
        Ok(())
    }

    /// Runs one stage, recording its row count and the warnings logged while it ran.
    pub fn stage<T>(&mut self, name: &str, body: impl FnOnce(&mut Vec<String>) -> Result<(T, usize)>) -> Result<T> {
        take_warnings();
        let mut warnings = Vec::new();
        let out = body(&mut warnings);
        warnings.extend(take_warnings());
        warnings.sort();
        match out {
            Ok((value, rows)) => {
                self.stages.push(StageRecord { name: name.to_string(), rows, warnings });
                Ok(value)
            }
            Err(e) => {
                self.stages.push(StageRecord { name: name.to_string(), rows: 0, warnings });
                self.failure = Some(FailureRecord {
                    stage: name.to_string(),
                    kind: e.kind,
                    exit_code: e.exit_code(),
                    message: e.message.clone(),
                });
                Err(e.context(name))
            }
        }
    }

    pub fn finish(&mut self, dir: &Path) -> Result<()> {
        self.finished_at = Some(now());
        let json = serde_json::to_vec_pretty(self)?;
        write_atomic(&dir.join(MANIFEST_NAME), |w| w.write_all(&json).context("manifest"))?;
        Ok(())
    }
}

fn warning_buffer() -> &'static Mutex<Vec<String>> {
    static BUF: OnceLock<Mutex<Vec<String>>> = OnceLock::new();
    BUF.get_or_init(|| Mutex::new(Vec::new()))
}

fn take_warnings() -> Vec<String> {
    std::mem::take(&mut *warning_buffer().lock().unwrap_or_else(|e| e.into_inner()))
}

/// Forwards to `env_logger` and keeps every warning for the manifest.
struct CaptureLogger {
    inner: env_logger::Logger,
}

impl log::Log for CaptureLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::Level::Warn || self.inner.enabled(metadata)
    }

    fn log(&self, record: &log::Record) {
        if record.level() <= log::Level::Warn {
            warning_buffer().lock().unwrap_or_else(|e| e.into_inner()).push(format!("{}", record.args()));
        }
        if self.inner.matches(record) {
            self.inner.log(record);
        }
    }

    fn flush(&self) {
        self.inner.flush();
    }
}

/// Installs the capturing logger once; later calls are no-ops.
pub fn init_logging() {
    static INIT: OnceLock<()> = OnceLock::new();
    INIT.get_or_init(|| {
        let inner = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).build();
        let level = inner.filter().max(log::LevelFilter::Warn);
        if log::set_boxed_logger(Box::new(CaptureLogger { inner })).is_ok() {
            log::set_max_level(level);
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_partial_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let digest = write_atomic(&path, |w| w.write_all(b"a,b\n").context("x")).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"a,b\n");
        assert_eq!(digest, sha256_file(&path).unwrap());

        let failed = write_atomic(&path, |w| {
            w.write_all(b"garbage").context("x")?;
            Err(CliError::numerical("boom"))
        });
        assert!(failed.is_err());
        assert_eq!(std::fs::read(&path).unwrap(), b"a,b\n");
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("x.csv")]);
    }

    #[test]
    fn failed_stage_is_recorded() {
        let mut m = RunManifest::start("test", "h".into(), 1);
        let ok: Result<u8> = m.stage("one", |_| Ok((1, 3)));
        assert_eq!(ok.unwrap(), 1);
        let err: Result<u8> = m.stage("two", |w| {
            w.push("note".into());
            Err(CliError::numerical("bad"))
        });
        assert_eq!(err.unwrap_err().exit_code(), 3);
        assert_eq!(m.stages.len(), 2);
        assert_eq!(m.stages[1].warnings, vec!["note".to_string()]);
        assert_eq!(m.failure.as_ref().unwrap().stage, "two");
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
