//! Atomic output files, content digests and the run manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";

/// Writer that hashes everything passing through it.
struct Hashing<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for Hashing<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| CliError::io(format!("opening {}", path.display()), e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file
            .read(&mut buf)
            .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Write `path` through a temporary sibling and rename it into place; returns the sha256.
pub fn write_atomic<F>(path: &Path, f: F) -> Result<String>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let tmp = tempfile::Builder::new()
        .prefix(".partial-")
        .tempfile_in(dir)
        .map_err(|e| CliError::io(format!("creating a temporary file in {}", dir.display()), e))?;
    let mut w = Hashing {
        inner: BufWriter::new(tmp),
        hasher: Sha256::new(),
    };
    f(&mut w)?;
    w.flush().map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    let digest = hex::encode(w.hasher.finalize());
    let tmp = w
        .inner
        .into_inner()
        .map_err(|e| CliError::io(format!("writing {}", path.display()), e.into_error()))?;
    tmp.persist(path)
        .map_err(|e| CliError::io(format!("renaming into {}", path.display()), e.error))?;
    Ok(digest)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub command: String,
    pub seed: u64,
    pub threads: usize,
    /// Effective settings of the stage after merging the config file and flags.
    pub config: serde_json::Value,
    /// Input path → sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output path relative to the output directory → sha256.
    pub outputs: BTreeMap<String, String>,
    /// Wall-clock seconds per step.
    pub timings_s: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub library_version: String,
    pub stages: BTreeMap<String, StageRecord>,
}

/// Bookkeeping for one stage run: output files, input digests and step timings.
pub struct Stage {
    name: String,
    out_dir: PathBuf,
    record: StageRecord,
    clock: Instant,
    step_start: Instant,
}

impl Stage {
    pub fn new(name: &str, out_dir: &Path, seed: u64, threads: usize, config: serde_json::Value) -> Self {
        let now = Instant::now();
        Stage {
            name: name.to_string(),
            out_dir: out_dir.to_path_buf(),
            record: StageRecord {
                command: name.to_string(),
                seed,
                threads,
                config,
                ..Default::default()
            },
            clock: now,
            step_start: now,
        }
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out_dir.join(rel)
    }

    /// Record an input file's digest, keyed relative to the output directory when it lies inside it.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        let key = path.strip_prefix(&self.out_dir).unwrap_or(path);
        self.record.inputs.insert(key.display().to_string(), digest);
        Ok(())
    }

    pub fn input_digests(&self) -> &BTreeMap<String, String> {
        &self.record.inputs
    }

    /// Close the current timing step.
    pub fn step(&mut self, label: &str) {
        let now = Instant::now();
        self.record
            .timings_s
            .insert(label.to_string(), (now - self.step_start).as_secs_f64());
        self.step_start = now;
    }

    /// Atomically write an output file under the output directory.
    pub fn write<F>(&mut self, rel: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let digest = write_atomic(&self.path(rel), f)?;
        self.record.outputs.insert(rel.to_string(), digest);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        self.write(rel, |w| {
            serde_json::to_writer_pretty(&mut *w, value)
                .map_err(|e| CliError::io(format!("writing {rel}"), e.into()))?;
            w.write_all(b"\n").map_err(|e| CliError::io(format!("writing {rel}"), e))
        })
    }

    /// Merge this stage's record into the manifest.
    pub fn finish(mut self) -> Result<StageRecord> {
        self.record
            .timings_s
            .insert("total".into(), self.clock.elapsed().as_secs_f64());
        let path = self.out_dir.join(MANIFEST);
        let mut manifest = read_manifest(&self.out_dir)?.unwrap_or_default();
        manifest.tool_version = env!("CARGO_PKG_VERSION").to_string();
        manifest.library_version = crimeflow::VERSION.to_string();
        manifest.stages.insert(self.name.clone(), self.record.clone());
        write_atomic(&path, |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest)
                .map_err(|e| CliError::io("writing manifest", e.into()))?;
            w.write_all(b"\n").map_err(|e| CliError::io("writing manifest", e))
        })?;
        Ok(self.record)
    }
}

pub fn read_manifest(out_dir: &Path) -> Result<Option<Manifest>> {
    let path = out_dir.join(MANIFEST);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map(Some).map_err(|e| CliError::Document {
        path,
        message: e.to_string(),
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Document {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Adapter so core writers (which take `impl Write`) can target a `&mut dyn Write`.
pub fn core_io(r: crimeflow::Result<()>) -> Result<()> {
    r.map_err(CliError::from)
}
