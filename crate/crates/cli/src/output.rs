//! Output directory ownership, CSV tables and their JSON sidecars.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use spikeq::evaluation::{CurvePoint, Histogram};
use spikeq::training::{EpochRecord, StepRecord};

use crate::checkpoint::write_atomic;
use crate::error::{CliError, Result};

const LOCK_FILE: &str = ".spikeq.lock";

/// An output directory held exclusively for the lifetime of the value.
#[derive(Debug)]
pub struct OutputDir {
    path: PathBuf,
    lock: PathBuf,
}

impl OutputDir {
    pub fn acquire(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
        let lock = path.join(LOCK_FILE);
        let mut file = match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(CliError::Locked(path.to_owned()))
            }
            Err(e) => return Err(CliError::io(&lock, e)),
        };
        writeln!(file, "{}", std::process::id()).map_err(|e| CliError::io(&lock, e))?;
        Ok(Self {
            path: path.to_owned(),
            lock,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn join(&self, name: impl AsRef<Path>) -> PathBuf {
        self.path.join(name)
    }

    /// Subdirectory sharing this directory's lock.
    pub fn subdir(&self, name: &str) -> Result<PathBuf> {
        let p = self.path.join(name);
        fs::create_dir_all(&p).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

/// Provenance written next to every CSV as `<name>.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Sidecar<'a, T: Serialize> {
    pub file: String,
    pub command: &'a str,
    pub config_hash: &'a str,
    pub seeds: Seeds,
    pub details: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Seeds {
    pub root: u64,
    pub train: u64,
    pub link: u64,
}

impl Seeds {
    pub fn of(cfg: &crate::config::ExperimentConfig) -> Self {
        Self {
            root: cfg.seed,
            train: cfg.train.seed,
            link: cfg.link.seed,
        }
    }
}

pub fn write_sidecar<T: Serialize>(csv_path: &Path, sidecar: &Sidecar<'_, T>) -> Result<()> {
    let path = csv_path.with_extension("json");
    let mut text = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    text.push('\n');
    write_atomic(&path, text.as_bytes())
}

/// CSV writer that starts with a `# config_hash: …` comment line.
pub struct Table {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl Table {
    pub fn create(path: &Path, config_hash: &str, header: &[&str]) -> Result<Self> {
        let mut file = File::create(path).map_err(|e| CliError::io(path, e))?;
        writeln!(file, "# config_hash: {config_hash}").map_err(|e| CliError::io(path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header).map_err(|e| csv_err(path, e))?;
        Ok(Self {
            path: path.to_owned(),
            writer,
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| csv_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Usage(format!("{}: {other:?}", path.display())),
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub const CURVE_HEADER: [&str; 8] = [
    "encoding",
    "alpha",
    "bits",
    "sigma2_dB",
    "ber",
    "bit_errors",
    "bits_counted",
    "spike_rate",
];

/// Identifies one curve in a curve table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveLabel {
    pub encoding: String,
    /// Empty for fixed encoders.
    pub alpha: Option<f64>,
    /// `None` is float.
    pub bits: Option<u32>,
}

impl CurveLabel {
    pub fn fields(&self) -> [String; 3] {
        [
            self.encoding.clone(),
            self.alpha.map(num).unwrap_or_default(),
            self.bits
                .map_or_else(|| "float".to_owned(), |b| b.to_string()),
        ]
    }
}

pub fn curve_rows(table: &mut Table, label: &CurveLabel, curve: &[CurvePoint]) -> Result<()> {
    let [e, a, b] = label.fields();
    for p in curve {
        table.row([
            e.clone(),
            a.clone(),
            b.clone(),
            num(p.sigma2_db),
            num(p.ber),
            p.bit_errors.to_string(),
            p.bits_counted.to_string(),
            num(p.spike_rate),
        ])?;
    }
    Ok(())
}

pub fn write_history(path: &Path, config_hash: &str, steps: &[StepRecord]) -> Result<()> {
    let mut t = Table::create(
        path,
        config_hash,
        &["step", "ce", "penalty", "total", "grad_norm"],
    )?;
    for s in steps {
        t.row([
            s.step.to_string(),
            num(s.ce),
            num(s.penalty),
            num(s.total),
            num(s.grad_norm),
        ])?;
    }
    t.finish()
}

pub fn write_epochs(path: &Path, config_hash: &str, epochs: &[EpochRecord]) -> Result<()> {
    let mut t = Table::create(path, config_hash, &["epoch", "val_ber", "spike_rate"])?;
    for e in epochs {
        t.row([e.epoch.to_string(), num(e.val_ber), num(e.spike_rate)])?;
    }
    t.finish()
}

pub fn write_histogram(path: &Path, config_hash: &str, h: &Histogram) -> Result<()> {
    let mut t = Table::create(path, config_hash, &["bin_left", "bin_right", "rel_freq"])?;
    for b in &h.bins {
        t.row([num(b.left), num(b.right), num(b.rel_freq)])?;
    }
    t.finish()
}
