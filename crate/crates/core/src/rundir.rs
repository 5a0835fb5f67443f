//! On-disk layout of a zBO run.
//!
//! ```text
//! config.json     resolved configuration (written by the caller)
//! history.csv     k,z1,z2,y
//! timing.csv      k,wall_seconds   (the only non-reproducible file)
//! grid_mean.csv   \
//! grid_var.csv     > header line with bounds and resolution, then n2 rows of n1 values
//! grid_acq.csv    /
//! state.json      resumable snapshot
//! optimum.json    both optimum reports with their trajectories
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zbo::{BoResult, BoState, GridBounds, HistoryEntry, Optimum};

pub const CONFIG: &str = "config.json";
pub const HISTORY: &str = "history.csv";
pub const TIMING: &str = "timing.csv";
pub const GRID_MEAN: &str = "grid_mean.csv";
pub const GRID_VAR: &str = "grid_var.csv";
pub const GRID_ACQ: &str = "grid_acq.csv";
pub const STATE: &str = "state.json";
pub const OPTIMUM: &str = "optimum.json";
const LOCK: &str = ".lock";

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Held while a command writes into a run directory.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    /// Creates the directory if needed.
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(RunDir { root })
    }

    /// Opens an existing directory.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::Config(format!("run directory {} does not exist", root.display())));
        }
        Ok(RunDir { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Fails if another process holds the lock.
    pub fn lock(&self) -> Result<RunLock> {
        let path = self.path(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(RunLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "{} is locked by another process (remove {} if stale)",
                self.root.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }

    pub fn write_state(&self, state: &BoState) -> Result<()> {
        write_json(&self.path(STATE), state)
    }

    pub fn read_state(&self) -> Result<BoState> {
        read_json(&self.path(STATE))
    }

    pub fn write_history(&self, history: &[HistoryEntry]) -> Result<()> {
        write_atomic(&self.path(HISTORY), format_history(history).as_bytes())
    }

    pub fn read_history(&self) -> Result<Vec<HistoryRow>> {
        parse_history(&self.path(HISTORY))
    }

    /// Appends one timing row, writing the header on first use.
    pub fn append_timing(&self, k: usize, wall_seconds: f64) -> Result<()> {
        let path = self.path(TIMING);
        let fresh = !path.exists();
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            writeln!(f, "k,wall_seconds")?;
        }
        writeln!(f, "{k},{wall_seconds:.6}")?;
        Ok(())
    }

    pub fn write_maps(&self, result: &BoResult, bounds: GridBounds, resolution: (usize, usize)) -> Result<()> {
        if let Some(maps) = &result.maps {
            let header = MapHeader { bounds, resolution };
            for (name, values) in [(GRID_MEAN, &maps.mean), (GRID_VAR, &maps.variance), (GRID_ACQ, &maps.acquisition)] {
                write_atomic(&self.path(name), format_map(&header, values)?.as_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_map(&self, name: &str) -> Result<(MapHeader, Vec<f64>)> {
        parse_map(&self.path(name))
    }

    pub fn write_optimum(&self, report: &OptimumReport) -> Result<()> {
        write_json(&self.path(OPTIMUM), report)
    }

    pub fn read_optimum(&self) -> Result<OptimumReport> {
        read_json(&self.path(OPTIMUM))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub k: usize,
    pub z1: f64,
    pub z2: f64,
    pub y: f64,
}

pub fn format_history(history: &[HistoryEntry]) -> String {
    let mut out = String::from("k,z1,z2,y\n");
    for h in history {
        out.push_str(&format!("{},{:.16e},{:.16e},{:.16e}\n", h.k, h.z.z1, h.z.z2, h.y));
    }
    out
}

fn parse_history(path: &Path) -> Result<Vec<HistoryRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let field = |i: usize| -> Result<&str> {
            rec.get(i)
                .ok_or_else(|| Error::Shape(format!("history row has {} fields", rec.len())))
        };
        let num = |i: usize| -> Result<f64> {
            field(i)?
                .parse()
                .map_err(|e| Error::Shape(format!("bad history value: {e}")))
        };
        rows.push(HistoryRow {
            k: field(0)?
                .parse()
                .map_err(|e| Error::Shape(format!("bad history index: {e}")))?,
            z1: num(1)?,
            z2: num(2)?,
            y: num(3)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapHeader {
    pub bounds: GridBounds,
    /// `(n1, n2)`: columns along z1, rows along z2.
    pub resolution: (usize, usize),
}

pub fn format_map(header: &MapHeader, values: &[f64]) -> Result<String> {
    let (n1, n2) = header.resolution;
    if values.len() != n1 * n2 {
        return Err(Error::Shape(format!("map has {} values for a {n1}x{n2} grid", values.len())));
    }
    let b = header.bounds;
    let mut out = format!(
        "# z1_lo={:.16e} z1_hi={:.16e} z2_lo={:.16e} z2_hi={:.16e} n1={n1} n2={n2}\n",
        b.z1_lo, b.z1_hi, b.z2_lo, b.z2_hi
    );
    for row in values.chunks(n1) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn parse_map(path: &Path) -> Result<(MapHeader, Vec<f64>)> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Shape(format!("{} is empty", path.display())))??;
    let bad = |what: &str| Error::Shape(format!("{}: {what}", path.display()));
    let get = |key: &str| -> Result<String> {
        first
            .trim_start_matches('#')
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .map(str::to_string)
            .ok_or_else(|| bad(&format!("header lacks {key}")))
    };
    let f = |s: String| s.parse::<f64>().map_err(|_| bad("bad bound"));
    let u = |s: String| s.parse::<usize>().map_err(|_| bad("bad resolution"));
    let header = MapHeader {
        bounds: GridBounds {
            z1_lo: f(get("z1_lo")?)?,
            z1_hi: f(get("z1_hi")?)?,
            z2_lo: f(get("z2_lo")?)?,
            z2_hi: f(get("z2_hi")?)?,
        },
        resolution: (u(get("n1")?)?, u(get("n2")?)?),
    };
    let mut values = Vec::with_capacity(header.resolution.0 * header.resolution.1);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("bad value")))
            .collect::<Result<_>>()?;
        if row.len() != header.resolution.0 {
            return Err(bad("row length does not match n1"));
        }
        values.extend(row);
    }
    if values.len() != header.resolution.0 * header.resolution.1 {
        return Err(bad("row count does not match n2"));
    }
    Ok((header, values))
}

/// Contents of `optimum.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport {
    pub estimated: Optimum,
    pub best_evaluated: Optimum,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub budget: usize,
    pub feasible_cells: usize,
    pub failed_evaluations: usize,
}

impl OptimumReport {
    pub fn new(result: &BoResult, budget: usize, feasible_cells: usize) -> Self {
        OptimumReport {
            estimated: result.estimated.clone(),
            best_evaluated: result.best_evaluated.clone(),
            converged: result.converged,
            iterations: result.iterations,
            evaluations: result.evaluations,
            budget,
            feasible_cells,
            failed_evaluations: result.failed.len(),
        }
    }
}
