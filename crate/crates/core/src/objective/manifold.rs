//! Per-class manifold grids and the SSIM class-separation objective.
//!
//! On the wire a grid is `{"class_id", "rows", "cols", "h", "w", "pixels"}`
//! where `pixels` is a row-major array of shape `[rows, cols, h, w]`: cells
//! in grid order, each cell's image row-major.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ssim::{ssim, Image, SsimConfig};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ManifoldWire", try_from = "ManifoldWire")]
pub struct ManifoldGrid {
    pub class_id: usize,
    pub rows: usize,
    pub cols: usize,
    cells: Vec<Image>,
}

impl ManifoldGrid {
    pub fn new(class_id: usize, rows: usize, cols: usize, cells: Vec<Image>) -> Result<Self> {
        if rows == 0 || cols == 0 || cells.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} manifold cannot hold {} cells",
                cells.len()
            )));
        }
        let shape = cells[0].shape();
        if cells.iter().any(|c| c.shape() != shape) {
            return Err(Error::Shape("manifold cells differ in size".into()));
        }
        Ok(ManifoldGrid {
            class_id,
            rows,
            cols,
            cells,
        })
    }

    pub fn cells(&self) -> &[Image] {
        &self.cells
    }

    pub fn cell(&self, row: usize, col: usize) -> &Image {
        &self.cells[row * self.cols + col]
    }

    pub fn image_shape(&self) -> (usize, usize) {
        self.cells[0].shape()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifoldWire {
    class_id: usize,
    rows: usize,
    cols: usize,
    h: usize,
    w: usize,
    pixels: Vec<f64>,
}

impl From<ManifoldGrid> for ManifoldWire {
    fn from(m: ManifoldGrid) -> Self {
        let (h, w) = m.image_shape();
        ManifoldWire {
            class_id: m.class_id,
            rows: m.rows,
            cols: m.cols,
            h,
            w,
            pixels: m.cells.into_iter().flat_map(|c| c.pixels).collect(),
        }
    }
}

impl TryFrom<ManifoldWire> for ManifoldGrid {
    type Error = Error;

    fn try_from(w: ManifoldWire) -> Result<Self> {
        let per = w.h * w.w;
        if per == 0 || w.pixels.len() != w.rows * w.cols * per {
            return Err(Error::Shape(format!(
                "manifold {}: {} pixels for shape [{}, {}, {}, {}]",
                w.class_id,
                w.pixels.len(),
                w.rows,
                w.cols,
                w.h,
                w.w
            )));
        }
        let cells = w
            .pixels
            .chunks(per)
            .map(|c| Image::new(w.h, w.w, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        ManifoldGrid::new(w.class_id, w.rows, w.cols, cells)
    }
}

/// Manifolds for every discrete class plus their declared pixel range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSet {
    pub dynamic_range: f64,
    pub manifolds: Vec<ManifoldGrid>,
}

impl ManifoldSet {
    pub fn validate(&self) -> Result<()> {
        if !(self.dynamic_range > 0.0 && self.dynamic_range.is_finite()) {
            return Err(Error::Shape(format!("dynamic range {} must be > 0", self.dynamic_range)));
        }
        check_uniform(&self.manifolds)
    }
}

fn check_uniform(manifolds: &[ManifoldGrid]) -> Result<()> {
    let Some(first) = manifolds.first() else {
        return Err(Error::Shape("no manifolds".into()));
    };
    for m in manifolds {
        if (m.rows, m.cols) != (first.rows, first.cols) || m.image_shape() != first.image_shape() {
            return Err(Error::Shape(format!(
                "manifold {} is {}x{} of {:?}, expected {}x{} of {:?}",
                m.class_id,
                m.rows,
                m.cols,
                m.image_shape(),
                first.rows,
                first.cols,
                first.image_shape()
            )));
        }
    }
    Ok(())
}

/// Sum over class pairs of the cell-aligned mean `1 - ssim`.
pub fn between_class_loss(manifolds: &[ManifoldGrid], cfg: &SsimConfig) -> Result<f64> {
    if manifolds.len() < 2 {
        return Err(Error::Shape(format!("need at least two classes, got {}", manifolds.len())));
    }
    check_uniform(manifolds)?;
    let mut total = 0.0;
    for i in 0..manifolds.len() {
        for j in (i + 1)..manifolds.len() {
            total += pair_loss(&manifolds[i], &manifolds[j], cfg)?;
        }
    }
    Ok(total)
}

fn pair_loss(a: &ManifoldGrid, b: &ManifoldGrid, cfg: &SsimConfig) -> Result<f64> {
    let mut sum = 0.0;
    for (ca, cb) in a.cells.iter().zip(&b.cells) {
        sum += 1.0 - ssim(ca, cb, cfg)?;
    }
    Ok(sum / a.n_cells() as f64)
}

/// Maps a linear index over unordered pairs `(i, j), i < j` of `n` items.
fn unpair(mut k: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    while k >= n - 1 - i {
        k -= n - 1 - i;
        i += 1;
    }
    (i, i + 1 + k)
}

/// Mean `1 - ssim` over `pairs` distinct cell pairs sampled without
/// replacement (capped at every pair).
pub fn within_class_loss<R: Rng>(manifold: &ManifoldGrid, pairs: usize, rng: &mut R, cfg: &SsimConfig) -> Result<f64> {
    let n = manifold.n_cells();
    if n < 2 {
        return Err(Error::InsufficientCells(n));
    }
    if pairs == 0 {
        return Err(Error::Config("within-class pair count must be >= 1".into()));
    }
    let total_pairs = n * (n - 1) / 2;
    let k = pairs.min(total_pairs);
    let mut sum = 0.0;
    for p in index::sample(rng, total_pairs, k).iter() {
        let (i, j) = unpair(p, n);
        sum += 1.0 - ssim(&manifold.cells[i], &manifold.cells[j], cfg)?;
    }
    Ok(sum / k as f64)
}

/// `between - sum_j within_j`. Each class samples its pairs from a stream
/// seeded by `(seed, class_id)`, so the value does not depend on class order.
pub fn classification_objective(manifolds: &[ManifoldGrid], pairs: usize, seed: u64, cfg: &SsimConfig) -> Result<f64> {
    let between = between_class_loss(manifolds, cfg)?;
    let mut within = 0.0;
    for m in manifolds {
        let mut rng = seed::rng(seed::indexed_seed(seed, m.class_id as u64));
        within += within_class_loss(m, pairs, &mut rng, cfg)?;
    }
    Ok(between - within)
}

/// How manifold sets are turned into a scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldScoring {
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// Score with the between-class term only.
    #[serde(default)]
    pub between_only: bool,
    #[serde(default)]
    pub ssim: SsimConfig,
}

fn default_pairs() -> usize {
    10
}

impl Default for ManifoldScoring {
    fn default() -> Self {
        ManifoldScoring {
            pairs: default_pairs(),
            between_only: false,
            ssim: SsimConfig::default(),
        }
    }
}

impl ManifoldScoring {
    pub fn score(&self, set: &ManifoldSet, seed: u64) -> Result<f64> {
        set.validate()?;
        let cfg = self.ssim.with_dynamic_range(set.dynamic_range);
        if self.between_only {
            between_class_loss(&set.manifolds, &cfg)
        } else {
            classification_objective(&set.manifolds, self.pairs, seed, &cfg)
        }
    }
}
