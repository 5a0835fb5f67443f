//! Graymap rendering of the surrogate maps.
//!
//! Each map becomes an 8-bit binary PGM with one pixel per grid cell; image
//! row `r` is grid row `r` (z2 increasing downwards), column `c` is grid
//! column `c`. Pixel `p` encodes `min + p / 255 * (max - min)` with the
//! extremes recorded in `maps.json`.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use zbo_core::rundir::{self, MapHeader, OptimumReport, RunDir};
use zbo_core::zbo::{GridBounds, Optimum};

use crate::commands;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapInfo {
    pub file: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub cell: usize,
    pub col: usize,
    pub row: usize,
    pub z1: f64,
    pub z2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub width: usize,
    pub height: usize,
    pub bounds: GridBounds,
    pub mean: MapInfo,
    pub variance: MapInfo,
    pub acquisition: MapInfo,
    pub estimated_optimum: Marker,
    pub best_evaluated: Marker,
}

/// Quantizes `values` onto 0..=255. A constant map is all zeros.
pub fn quantize(values: &[f64]) -> (Vec<u8>, f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let pixels = values
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - min) / span * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect();
    (pixels, min, max)
}

pub fn pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

fn marker(o: &Optimum, n1: usize) -> Marker {
    Marker {
        cell: o.cell,
        col: o.cell % n1,
        row: o.cell / n1,
        z1: o.z.z1,
        z2: o.z.z2,
    }
}

fn optimum_csv(report: &OptimumReport) -> String {
    let est = report.estimated.trajectory.values();
    let best = report.best_evaluated.trajectory.values();
    let mut out = String::from("epoch,estimated,best_evaluated\n");
    for (i, (a, b)) in est.iter().zip(best).enumerate() {
        out.push_str(&format!("{i},{a:.16e},{b:.16e}\n"));
    }
    out
}

pub fn report(run_dir: &Path, out: Option<&Path>) -> Result<()> {
    let run = RunDir::open(run_dir)?;
    let maps_present = [rundir::GRID_MEAN, rundir::GRID_VAR, rundir::GRID_ACQ, rundir::OPTIMUM]
        .iter()
        .all(|f| run.path(f).exists());

    // An unfinished run has no maps yet; rebuild them from the saved state.
    let (header, maps, optimum) = if maps_present {
        let (header, mean) = run.read_map(rundir::GRID_MEAN)?;
        let (_, var) = run.read_map(rundir::GRID_VAR)?;
        let (_, acq) = run.read_map(rundir::GRID_ACQ)?;
        (header, [mean, var, acq], run.read_optimum()?)
    } else {
        if !run.path(rundir::STATE).exists() {
            bail!("{} has neither maps nor a saved state", run_dir.display());
        }
        let (cfg, grid, result) = commands::rebuild_result(&run)?;
        let maps = result
            .maps
            .clone()
            .context("the run history is too degenerate to fit a surrogate; nothing to render")?;
        let header = MapHeader {
            bounds: grid.bounds(),
            resolution: grid.resolution(),
        };
        let optimum = OptimumReport::new(&result, cfg.bo.budget(), grid.n_feasible());
        (header, [maps.mean, maps.variance, maps.acquisition], optimum)
    };

    let dest = out.map(Path::to_path_buf).unwrap_or_else(|| run.path("report"));
    fs::create_dir_all(&dest).with_context(|| format!("creating {}", dest.display()))?;
    let (n1, n2) = header.resolution;
    let mut infos = Vec::new();
    for (name, values) in ["mean", "variance", "acquisition"].iter().zip(&maps) {
        let (pixels, min, max) = quantize(values);
        let file = format!("{name}.pgm");
        rundir::write_atomic(&dest.join(&file), &pgm(n1, n2, &pixels))?;
        infos.push(MapInfo { file, min, max });
    }
    let [mean, variance, acquisition]: [MapInfo; 3] = infos.try_into().expect("three maps");
    let sidecar = Sidecar {
        width: n1,
        height: n2,
        bounds: header.bounds,
        mean,
        variance,
        acquisition,
        estimated_optimum: marker(&optimum.estimated, n1),
        best_evaluated: marker(&optimum.best_evaluated, n1),
    };
    rundir::write_json(&dest.join("maps.json"), &sidecar)?;
    rundir::write_atomic(&dest.join("optimum_trajectory.csv"), optimum_csv(&optimum).as_bytes())?;

    let e = &sidecar.estimated_optimum;
    let b = &sidecar.best_evaluated;
    println!("maps: {n1}x{n2} graymaps in {}", dest.display());
    println!(
        "estimated optimum: col {}, row {}, z = ({:.6}, {:.6}), GP mean {:.6e}",
        e.col, e.row, e.z1, e.z2, optimum.estimated.value
    );
    println!(
        "best evaluated:    col {}, row {}, z = ({:.6}, {:.6}), objective {:.6e}",
        b.col, b.row, b.z1, b.z2, optimum.best_evaluated.value
    );
    println!("evaluations: {} of {}", optimum.evaluations, optimum.budget);
    Ok(())
}
