//! Gaussian process surrogate over the 2D latent space.
//!
//! Zero-mean GP on standardized targets (a constant-mean GP in original
//! units) with a squared-exponential kernel
//!
//! ```text
//! k(a, b) = sigma2 * exp(-0.5 * sum_m (a_m - b_m)^2 / theta_m^2)
//! ```
//!
//! plus a fixed diagonal nugget. Hyperparameters are fitted by Adam on the
//! negative log marginal likelihood in log coordinates, from several random
//! starts; the best start wins.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::latent::LatentPoint;
use crate::seed;

pub const DEFAULT_NUGGET: f64 = 1e-6;
pub const MAX_NUGGET: f64 = 1e-2;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub sigma2: f64,
    pub lengthscales: [f64; 2],
    pub nugget: f64,
}

impl GpHyperparams {
    pub fn new(sigma2: f64, lengthscales: [f64; 2], nugget: f64) -> Self {
        GpHyperparams {
            sigma2,
            lengthscales,
            nugget,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.sigma2) && ok(self.lengthscales[0]) && ok(self.lengthscales[1]) && ok(self.nugget) {
            Ok(())
        } else {
            Err(Error::Config(format!("GP hyperparameters must be positive: {self:?}")))
        }
    }

    /// `[ln sigma2, ln theta_1, ln theta_2]`
    pub fn to_log(&self) -> [f64; 3] {
        [self.sigma2.ln(), self.lengthscales[0].ln(), self.lengthscales[1].ln()]
    }

    pub fn from_log(log: [f64; 3], nugget: f64) -> Self {
        GpHyperparams::new(log[0].exp(), [log[1].exp(), log[2].exp()], nugget)
    }
}

/// Posterior predictive in original target units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpPosterior {
    pub mean: f64,
    pub variance: f64,
}

impl GpPosterior {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

pub fn rbf_kernel(a: LatentPoint, b: LatentPoint, hyper: &GpHyperparams) -> f64 {
    let d1 = (a.z1 - b.z1) / hyper.lengthscales[0];
    let d2 = (a.z2 - b.z2) / hyper.lengthscales[1];
    hyper.sigma2 * (-0.5 * (d1 * d1 + d2 * d2)).exp()
}

/// Kernel matrix without the nugget.
pub fn kernel_matrix(z: &[LatentPoint], hyper: &GpHyperparams) -> DMatrix<f64> {
    let n = z.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = hyper.sigma2;
        for j in 0..i {
            let v = rbf_kernel(z[i], z[j], hyper);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky of `K + nugget*I`, escalating the nugget tenfold up to
/// [`MAX_NUGGET`] on failure. Returns the factor and the nugget used.
fn factor(z: &[LatentPoint], hyper: &GpHyperparams) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let k = kernel_matrix(z, hyper);
    let mut nugget = hyper.nugget;
    loop {
        let mut kn = k.clone();
        for i in 0..z.len() {
            kn[(i, i)] += nugget;
        }
        if let Some(c) = Cholesky::new(kn) {
            return Ok((c, nugget));
        }
        if nugget >= MAX_NUGGET {
            return Err(Error::NotPositiveDefinite { nugget });
        }
        nugget = (nugget * 10.0).min(MAX_NUGGET);
    }
}

fn check_data(z: &[LatentPoint], y: &[f64]) -> Result<()> {
    if z.is_empty() || z.len() != y.len() {
        return Err(Error::Shape(format!("{} inputs and {} targets", z.len(), y.len())));
    }
    Ok(())
}

fn nll_from_factor(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> f64 {
    let alpha = chol.solve(y);
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    0.5 * y.dot(&alpha) + 0.5 * log_det + 0.5 * y.len() as f64 * LN_2PI
}

/// `0.5 y'(K+nI)^-1 y + 0.5 ln|K+nI| + n/2 ln(2 pi)` on standardized targets.
pub fn neg_log_marginal_likelihood(hyper: &GpHyperparams, z: &[LatentPoint], y: &[f64]) -> Result<f64> {
    check_data(z, y)?;
    let (chol, _) = factor(z, hyper)?;
    Ok(nll_from_factor(&chol, &DVector::from_column_slice(y)))
}

/// NLL and its gradient with respect to `[ln sigma2, ln theta_1, ln theta_2]`,
/// via `dNLL/dp = 0.5 tr((K^-1 - a a') dK/dp)` with `a = K^-1 y`.
pub fn nll_and_gradient(hyper: &GpHyperparams, z: &[LatentPoint], y: &[f64]) -> Result<(f64, [f64; 3])> {
    check_data(z, y)?;
    let (chol, _) = factor(z, hyper)?;
    let yv = DVector::from_column_slice(y);
    let nll = nll_from_factor(&chol, &yv);
    let alpha = chol.solve(&yv);
    let k_inv = chol.inverse();
    let n = z.len();
    let mut grad = [0.0; 3];
    for i in 0..n {
        for j in 0..n {
            let w = k_inv[(i, j)] - alpha[i] * alpha[j];
            let kf = if i == j { hyper.sigma2 } else { rbf_kernel(z[i], z[j], hyper) };
            let d1 = (z[i].z1 - z[j].z1) / hyper.lengthscales[0];
            let d2 = (z[i].z2 - z[j].z2) / hyper.lengthscales[1];
            grad[0] += w * kf;
            grad[1] += w * kf * d1 * d1;
            grad[2] += w * kf * d2 * d2;
        }
    }
    for g in grad.iter_mut() {
        *g *= 0.5;
    }
    Ok((nll, grad))
}

pub fn nll_gradient(hyper: &GpHyperparams, z: &[LatentPoint], y: &[f64]) -> Result<[f64; 3]> {
    nll_and_gradient(hyper, z, y).map(|(_, g)| g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpFitConfig {
    #[serde(default = "default_gp_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_nugget")]
    pub nugget: f64,
}

fn default_gp_lr() -> f64 {
    0.05
}
fn default_steps() -> usize {
    500
}
fn default_restarts() -> usize {
    3
}
fn default_nugget() -> f64 {
    DEFAULT_NUGGET
}

impl Default for GpFitConfig {
    fn default() -> Self {
        GpFitConfig {
            learning_rate: default_gp_lr(),
            steps: default_steps(),
            restarts: default_restarts(),
            nugget: default_nugget(),
        }
    }
}

/// Per-restart record kept by [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub initial: GpHyperparams,
    pub initial_nll: f64,
    pub best: GpHyperparams,
    pub best_nll: f64,
}

/// Fitted surrogate. Immutable once built; safe to share across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "GpSnapshot", try_from = "GpSnapshot")]
pub struct GpModel {
    hyper: GpHyperparams,
    train_z: Vec<LatentPoint>,
    train_y: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    restarts: Vec<RestartOutcome>,
}

/// Zero-variance targets are rejected; standard deviation is the population one.
pub fn standardization(y: &[f64]) -> Result<(f64, f64)> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::DegenerateData(format!("targets have zero variance (sd = {sd})")));
    }
    Ok((mean, sd))
}

/// Axis extents of the inputs, with zero extents replaced by one.
fn extents(z: &[LatentPoint]) -> [f64; 2] {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in z {
        for (m, c) in p.coords().into_iter().enumerate() {
            lo[m] = lo[m].min(c);
            hi[m] = hi[m].max(c);
        }
    }
    let e = |m: usize| {
        let d = hi[m] - lo[m];
        if d > 0.0 && d.is_finite() {
            d
        } else {
            1.0
        }
    };
    [e(0), e(1)]
}

fn clamp_log(p: &mut [f64; 3], ext: [f64; 2]) {
    p[0] = p[0].clamp(1e-4f64.ln(), 1e4f64.ln());
    for m in 0..2 {
        p[m + 1] = p[m + 1].clamp((1e-3 * ext[m]).ln(), (1e3 * ext[m]).ln());
    }
}

fn optimize_restart(
    init: [f64; 3],
    z: &[LatentPoint],
    ys: &[f64],
    cfg: &GpFitConfig,
    ext: [f64; 2],
) -> Option<RestartOutcome> {
    let hyper_of = |p: [f64; 3]| GpHyperparams::from_log(p, cfg.nugget);
    let mut p = init;
    clamp_log(&mut p, ext);
    let initial = hyper_of(p);
    let (initial_nll, _) = nll_and_gradient(&initial, z, ys).ok().filter(|(v, _)| v.is_finite())?;
    let mut best = (initial_nll, p);
    let mut opt = Adam::new(3, cfg.learning_rate);
    for _ in 0..cfg.steps {
        let Ok((nll, grad)) = nll_and_gradient(&hyper_of(p), z, ys) else {
            break;
        };
        if !nll.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            break;
        }
        if nll < best.0 {
            best = (nll, p);
        }
        opt.step(&mut p, &grad);
        clamp_log(&mut p, ext);
    }
    if let Ok(nll) = neg_log_marginal_likelihood(&hyper_of(p), z, ys) {
        if nll.is_finite() && nll < best.0 {
            best = (nll, p);
        }
    }
    Some(RestartOutcome {
        initial,
        initial_nll,
        best: hyper_of(best.1),
        best_nll: best.0,
    })
}

/// Fits hyperparameters on standardized targets and caches the factor.
///
/// Starting points: `warm_start` (if any) first, then `cfg.restarts` draws
/// log-uniform in `theta in [0.1, 10] * extent`, `sigma2 in [0.1, 10]`.
/// Restarts run under `exec`; the lowest NLL wins, ties to the earliest.
pub fn fit(
    z: &[LatentPoint],
    y: &[f64],
    cfg: &GpFitConfig,
    seed: u64,
    warm_start: Option<&GpHyperparams>,
    exec: Execution,
) -> Result<GpModel> {
    check_data(z, y)?;
    if z.len() < 2 {
        return Err(Error::DegenerateData("GP fit needs at least two points".into()));
    }
    if !(cfg.nugget > 0.0 && cfg.learning_rate > 0.0) {
        return Err(Error::Config("GP nugget and learning rate must be positive".into()));
    }
    let (y_mean, y_sd) = standardization(y)?;
    let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_sd).collect();
    let ext = extents(z);

    let mut rng = seed::rng(seed);
    let mut starts: Vec<[f64; 3]> = Vec::new();
    if let Some(w) = warm_start {
        starts.push(w.to_log());
    }
    let log_uniform = |rng: &mut rand_chacha::ChaCha8Rng, lo: f64, hi: f64| rng.random_range(lo.ln()..hi.ln());
    for _ in 0..cfg.restarts {
        let s2 = log_uniform(&mut rng, 0.1, 10.0);
        let t1 = log_uniform(&mut rng, 0.1 * ext[0], 10.0 * ext[0]);
        let t2 = log_uniform(&mut rng, 0.1 * ext[1], 10.0 * ext[1]);
        starts.push([s2, t1, t2]);
    }
    if starts.is_empty() {
        return Err(Error::Config("GP fit needs at least one restart".into()));
    }

    let outcomes = exec::map_slice(&starts, exec, |s| optimize_restart(*s, z, &ys, cfg, ext));
    let mut best: Option<&RestartOutcome> = None;
    for o in outcomes.iter().flatten() {
        if best.is_none_or(|b| o.best_nll < b.best_nll) {
            best = Some(o);
        }
    }
    let best = *best.ok_or(Error::FitFailed)?;
    let mut model = GpModel::from_parts(best.best, z.to_vec(), y.to_vec(), y_mean, y_sd)?;
    model.restarts = outcomes.into_iter().flatten().collect();
    Ok(model)
}

impl GpModel {
    /// Conditions a GP with given hyperparameters and standardization
    /// constants on `(z, y)` without fitting.
    pub fn from_parts(hyper: GpHyperparams, z: Vec<LatentPoint>, y: Vec<f64>, y_mean: f64, y_sd: f64) -> Result<Self> {
        hyper.validate()?;
        check_data(&z, &y)?;
        if !(y_sd > 0.0 && y_sd.is_finite() && y_mean.is_finite()) {
            return Err(Error::DegenerateData(format!("bad standardization ({y_mean}, {y_sd})")));
        }
        let (chol, nugget) = factor(&z, &hyper)?;
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_sd));
        let alpha = chol.solve(&ys);
        Ok(GpModel {
            hyper: GpHyperparams { nugget, ..hyper },
            train_z: z,
            train_y: y,
            y_mean,
            y_sd,
            chol,
            alpha,
            restarts: Vec::new(),
        })
    }

    /// Hyperparameters, with the nugget actually used after any escalation.
    pub fn hyper(&self) -> &GpHyperparams {
        &self.hyper
    }

    pub fn train_z(&self) -> &[LatentPoint] {
        &self.train_z
    }

    pub fn train_y(&self) -> &[f64] {
        &self.train_y
    }

    pub fn standardization(&self) -> (f64, f64) {
        (self.y_mean, self.y_sd)
    }

    pub fn restarts(&self) -> &[RestartOutcome] {
        &self.restarts
    }

    /// Lower-triangular factor of the standardized-space kernel matrix.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// NLL of the standardized training targets under the current hyperparameters.
    pub fn nll(&self) -> f64 {
        let ys = DVector::from_iterator(self.train_y.len(), self.train_y.iter().map(|v| (v - self.y_mean) / self.y_sd));
        nll_from_factor(&self.chol, &ys)
    }

    pub fn predict(&self, q: LatentPoint) -> GpPosterior {
        let n = self.train_z.len();
        let kq = DVector::from_iterator(n, self.train_z.iter().map(|&zi| rbf_kernel(q, zi, &self.hyper)));
        let mean_s = kq.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kq)
            .expect("cholesky factor has a positive diagonal");
        let var_s = (self.hyper.sigma2 - v.dot(&v)).max(0.0);
        GpPosterior {
            mean: self.y_mean + self.y_sd * mean_s,
            variance: var_s * self.y_sd * self.y_sd,
        }
    }

    pub fn predict_many(&self, queries: &[LatentPoint], exec: Execution) -> Vec<GpPosterior> {
        exec::map_slice(queries, exec, |&q| self.predict(q))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GpSnapshot {
    hyper: GpHyperparams,
    train_z: Vec<LatentPoint>,
    train_y: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
    #[serde(default)]
    restarts: Vec<RestartOutcome>,
}

impl From<GpModel> for GpSnapshot {
    fn from(m: GpModel) -> Self {
        GpSnapshot {
            hyper: m.hyper,
            train_z: m.train_z,
            train_y: m.train_y,
            y_mean: m.y_mean,
            y_sd: m.y_sd,
            restarts: m.restarts,
        }
    }
}

impl TryFrom<GpSnapshot> for GpModel {
    type Error = Error;

    fn try_from(s: GpSnapshot) -> Result<Self> {
        let mut m = GpModel::from_parts(s.hyper, s.train_z, s.train_y, s.y_mean, s.y_sd)?;
        m.restarts = s.restarts;
        Ok(m)
    }
}
