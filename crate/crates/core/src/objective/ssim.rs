//! Structural similarity between equally sized grayscale images.
//!
//! Standard Gaussian-windowed SSIM: local weighted statistics over every
//! fully contained window, combined as
//!
//! ```text
//! ((2 mu_a mu_b + C1)(2 cov_ab + C2)) / ((mu_a^2 + mu_b^2 + C1)(var_a + var_b + C2))
//! ```
//!
//! with `C1 = (k1 L)^2`, `C2 = (k2 L)^2`, then averaged. The window shrinks
//! to the largest odd size that fits small images. Local statistics come
//! from a separable filter; the combination is written so that
//! `ssim(a, a) == 1` and `ssim(a, b) == ssim(b, a)` hold bit-for-bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    /// row-major
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || pixels.len() != height * width {
            return Err(Error::Shape(format!(
                "image {height}x{width} cannot hold {} pixels",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::Shape("image has non-finite pixels".into()));
        }
        Ok(Image { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Image {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimConfig {
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_k1")]
    pub k1: f64,
    #[serde(default = "default_k2")]
    pub k2: f64,
    #[serde(default = "default_range")]
    pub dynamic_range: f64,
}

fn default_window() -> usize {
    11
}
fn default_sigma() -> f64 {
    1.5
}
fn default_k1() -> f64 {
    0.01
}
fn default_k2() -> f64 {
    0.03
}
fn default_range() -> f64 {
    1.0
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig {
            window: default_window(),
            sigma: default_sigma(),
            k1: default_k1(),
            k2: default_k2(),
            dynamic_range: default_range(),
        }
    }
}

impl SsimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::Config(format!("SSIM window must be odd, got {}", self.window)));
        }
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.sigma) && pos(self.k1) && pos(self.k2) && pos(self.dynamic_range)) {
            return Err(Error::Config("SSIM sigma, k1, k2 and dynamic range must be > 0".into()));
        }
        Ok(())
    }

    /// Configured window, shrunk to the largest odd size fitting `min_dim`.
    pub fn effective_window(&self, min_dim: usize) -> usize {
        let fit = if min_dim % 2 == 1 { min_dim } else { min_dim.saturating_sub(1) };
        self.window.min(fit).max(1)
    }

    pub fn constants(&self) -> (f64, f64) {
        let c1 = (self.k1 * self.dynamic_range).powi(2);
        let c2 = (self.k2 * self.dynamic_range).powi(2);
        (c1, c2)
    }

    pub fn with_dynamic_range(self, dynamic_range: f64) -> Self {
        SsimConfig { dynamic_range, ..self }
    }
}

/// Normalized 1D Gaussian taps of odd length `size`.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Valid-region separable filter: rows first, then columns.
fn filter_valid(src: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let ow = w - k + 1;
    let oh = h - k + 1;
    let mut horiz = vec![0.0; h * ow];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = taps.iter().zip(&row[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * horiz[(y + i) * ow + x]).sum();
        }
    }
    out
}

pub fn ssim(a: &Image, b: &Image, cfg: &SsimConfig) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("SSIM inputs {:?} vs {:?}", a.shape(), b.shape())));
    }
    cfg.validate()?;
    let (h, w) = a.shape();
    let win = cfg.effective_window(h.min(w));
    let taps = gaussian_taps(win, cfg.sigma);
    let (c1, c2) = cfg.constants();

    let aa: Vec<f64> = a.pixels.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.pixels.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.pixels.iter().zip(&b.pixels).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(&a.pixels, h, w, &taps);
    let mu_b = filter_valid(&b.pixels, h, w, &taps);
    let e_aa = filter_valid(&aa, h, w, &taps);
    let e_bb = filter_valid(&bb, h, w, &taps);
    let e_ab = filter_valid(&ab, h, w, &taps);

    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (2.0 * (ma * mb) + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
        total += num / den;
    }
    Ok(total / mu_a.len() as f64)
}
