//! Small variational autoencoder that compresses trajectories to a 2D latent
//! space and decodes latent points back into trajectories.
//!
//! Encoder and decoder are tanh MLPs. The encoder emits a mean and a
//! log-variance per latent dimension; the decoder emits the mean of a
//! fixed-scale Gaussian likelihood. Inputs are standardized with one global
//! shift/scale pair fitted on the first training set, so `decoder_sigma` is
//! measured in standardized units.
//!
//! The training loss is the negative ELBO, averaged over the batch:
//!
//! ```text
//! recon = sum_i (x_i - xhat_i)^2 / (2 sigma^2) + D/2 * ln(2 pi sigma^2)
//! kl    = sum_d 0.5 * (mu_d^2 + var_d - 1 - ln var_d)
//! total = recon + kl
//! ```
//!
//! The additive constant `D/2 * ln(2 pi sigma^2)` is kept so losses are
//! comparable across decoder scales.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::latent::{LatentDecoder, LatentEncoder, LatentPoint};
use crate::seed;
use crate::trajectory::{Trajectory, TrajectorySet};

pub const LATENT_DIM: usize = 2;

/// Largest set trained full-batch when no batch size is configured.
pub const FULL_BATCH_LIMIT: usize = 512;
pub const DEFAULT_MINI_BATCH: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvaeConfig {
    /// Trajectory length; 0 in a config file means "take it from the data".
    #[serde(default)]
    pub input_dim: usize,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden_sizes: Vec<usize>,
    #[serde(default = "default_sigma")]
    pub decoder_sigma: f64,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// `None` trains full-batch up to [`FULL_BATCH_LIMIT`] members, else in
    /// mini-batches of [`DEFAULT_MINI_BATCH`].
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn default_latent_dim() -> usize {
    LATENT_DIM
}
fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}
fn default_sigma() -> f64 {
    0.3
}
fn default_lr() -> f64 {
    1e-4
}
fn default_epochs() -> usize {
    1000
}

impl TvaeConfig {
    pub fn new(input_dim: usize) -> Self {
        TvaeConfig {
            input_dim,
            latent_dim: LATENT_DIM,
            hidden_sizes: default_hidden(),
            decoder_sigma: default_sigma(),
            learning_rate: default_lr(),
            epochs: default_epochs(),
            batch_size: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("tvae input_dim must be positive".into()));
        }
        if self.latent_dim != LATENT_DIM {
            return Err(Error::Config(format!("latent_dim must be 2, got {}", self.latent_dim)));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        if !(self.decoder_sigma > 0.0 && self.decoder_sigma.is_finite()) {
            return Err(Error::Config("decoder_sigma must be > 0".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }

    pub fn effective_batch(&self, n: usize) -> usize {
        match self.batch_size {
            Some(b) => b.min(n),
            None if n <= FULL_BATCH_LIMIT => n,
            None => DEFAULT_MINI_BATCH,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    /// outputs x inputs
    w: DMatrix<f64>,
    b: DVector<f64>,
}

impl Dense {
    fn init<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        // Row-major draw order keeps initialization independent of storage layout.
        let mut w = DMatrix::zeros(outputs, inputs);
        for r in 0..outputs {
            for c in 0..inputs {
                w[(r, c)] = rng.random_range(-bound..bound);
            }
        }
        let b = DVector::from_fn(outputs, |_, _| rng.random_range(-bound..bound));
        Dense { w, b }
    }

    fn affine(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut a = x * self.w.transpose();
        for mut row in a.row_iter_mut() {
            row += self.b.transpose();
        }
        a
    }

    fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// tanh on every layer except the last, which is linear.
#[derive(Debug, Clone, PartialEq)]
struct Mlp {
    layers: Vec<Dense>,
}

/// Per-layer (weight, bias) gradients.
type LayerGrads = Vec<(DMatrix<f64>, DVector<f64>)>;

struct MlpTrace {
    /// `acts[l]` is the input to layer `l`; the final entry is the output.
    acts: Vec<DMatrix<f64>>,
}

impl Mlp {
    fn init<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        let layers = sizes.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect();
        Mlp { layers }
    }

    fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            h = layer.affine(&h);
            if l != last {
                h.apply(|v| *v = v.tanh());
            }
        }
        h
    }

    fn forward_trace(&self, x: &DMatrix<f64>) -> MlpTrace {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut h = layer.affine(&acts[l]);
            if l != last {
                h.apply(|v| *v = v.tanh());
            }
            acts.push(h);
        }
        MlpTrace { acts }
    }

    /// Returns per-layer `(dW, db)` and the gradient with respect to the input.
    fn backward(&self, trace: &MlpTrace, d_out: DMatrix<f64>) -> (LayerGrads, DMatrix<f64>) {
        let last = self.layers.len() - 1;
        let mut grads = vec![(DMatrix::zeros(0, 0), DVector::zeros(0)); self.layers.len()];
        let mut d = d_out;
        for l in (0..self.layers.len()).rev() {
            if l != last {
                let h = &trace.acts[l + 1];
                d.zip_apply(h, |g, hv| *g *= 1.0 - hv * hv);
            }
            let dw = d.transpose() * &trace.acts[l];
            let db = DVector::from_iterator(d.ncols(), d.column_iter().map(|c| c.sum()));
            let d_in = &d * &self.layers[l].w;
            grads[l] = (dw, db);
            d = d_in;
        }
        (grads, d)
    }

    fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            push_row_major(&layer.w, out);
            out.extend(layer.b.iter());
        }
    }

    fn read_params(&mut self, src: &[f64]) -> usize {
        let mut k = 0;
        for layer in &mut self.layers {
            let (rows, cols) = layer.w.shape();
            for r in 0..rows {
                for c in 0..cols {
                    layer.w[(r, c)] = src[k];
                    k += 1;
                }
            }
            for v in layer.b.iter_mut() {
                *v = src[k];
                k += 1;
            }
        }
        k
    }
}

fn push_row_major(m: &DMatrix<f64>, out: &mut Vec<f64>) {
    for r in 0..m.nrows() {
        out.extend(m.row(r).iter());
    }
}

fn flatten_grads(grads: &[(DMatrix<f64>, DVector<f64>)], out: &mut Vec<f64>) {
    for (dw, db) in grads {
        push_row_major(dw, out);
        out.extend(db.iter());
    }
}

/// Global input standardization: `x_std = (x - shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub shift: f64,
    pub scale: f64,
}

impl Normalization {
    pub fn fit(set: &TrajectorySet) -> Self {
        let vals = set.trajectories().iter().flat_map(|t| t.values());
        let n = (set.len() * set.n_epochs()) as f64;
        let mean = vals.clone().sum::<f64>() / n;
        let var = vals.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        Normalization {
            shift: mean,
            scale: if sd > 0.0 { sd } else { 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Checkpoint", try_from = "Checkpoint")]
pub struct TvaeModel {
    config: TvaeConfig,
    normalization: Option<Normalization>,
    encoder: Mlp,
    decoder: Mlp,
}

/// Per-epoch loss terms, averaged over the epoch's batches.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub total: Vec<f64>,
    pub recon: Vec<f64>,
    pub kl: Vec<f64>,
}

impl TrainReport {
    pub fn epochs(&self) -> usize {
        self.total.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboTerms {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// KL(N(mu, e^logvar) || N(0, 1)) for one latent dimension.
pub fn kl_standard_normal(mu: f64, logvar: f64) -> f64 {
    0.5 * (mu * mu + logvar.exp() - 1.0 - logvar)
}

/// Builds a fresh model with fan-in scaled uniform weights.
pub fn init_model(config: &TvaeConfig, seed: u64) -> Result<TvaeModel> {
    config.validate()?;
    let mut rng = seed::rng(seed);
    let mut enc_sizes = vec![config.input_dim];
    enc_sizes.extend(&config.hidden_sizes);
    enc_sizes.push(2 * LATENT_DIM);
    let mut dec_sizes = vec![LATENT_DIM];
    dec_sizes.extend(config.hidden_sizes.iter().rev());
    dec_sizes.push(config.input_dim);
    let encoder = Mlp::init(&enc_sizes, &mut rng);
    let decoder = Mlp::init(&dec_sizes, &mut rng);
    Ok(TvaeModel {
        config: config.clone(),
        normalization: None,
        encoder,
        decoder,
    })
}

impl TvaeModel {
    pub fn config(&self) -> &TvaeConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization.unwrap_or(Normalization { shift: 0.0, scale: 1.0 })
    }

    pub fn set_normalization(&mut self, norm: Normalization) {
        self.normalization = Some(norm);
    }

    /// `(inputs, outputs)` per encoder layer.
    pub fn encoder_shapes(&self) -> Vec<(usize, usize)> {
        self.encoder.layers.iter().map(|l| (l.w.ncols(), l.w.nrows())).collect()
    }

    pub fn decoder_shapes(&self) -> Vec<(usize, usize)> {
        self.decoder.layers.iter().map(|l| (l.w.ncols(), l.w.nrows())).collect()
    }

    pub fn n_params(&self) -> usize {
        self.encoder.n_params() + self.decoder.n_params()
    }

    /// Flat parameters: encoder layers then decoder layers, each as row-major
    /// weights followed by biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.encoder.write_params(&mut out);
        self.decoder.write_params(&mut out);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        let k = self.encoder.read_params(params);
        self.decoder.read_params(&params[k..]);
        Ok(())
    }

    fn batch_matrix(&self, batch: &[&Trajectory]) -> Result<DMatrix<f64>> {
        let d = self.config.input_dim;
        let norm = self.normalization();
        let mut x = DMatrix::zeros(batch.len(), d);
        for (r, t) in batch.iter().enumerate() {
            if t.n_epochs() != d {
                return Err(Error::Shape(format!(
                    "trajectory has {} values, model expects {d}",
                    t.n_epochs()
                )));
            }
            for (c, v) in t.values().iter().enumerate() {
                x[(r, c)] = (v - norm.shift) / norm.scale;
            }
        }
        Ok(x)
    }

    fn recon_constant(&self) -> f64 {
        let s2 = self.config.decoder_sigma * self.config.decoder_sigma;
        0.5 * self.config.input_dim as f64 * (2.0 * PI * s2).ln()
    }

    /// Negative ELBO and its gradient for a fixed reparameterization draw
    /// `eps` (batch x 2).
    fn elbo_inner(&self, x: &DMatrix<f64>, eps: &DMatrix<f64>, want_grad: bool) -> (ElboTerms, Option<Vec<f64>>) {
        let b = x.nrows() as f64;
        let s2 = self.config.decoder_sigma * self.config.decoder_sigma;
        let enc = self.encoder.forward_trace(x);
        let head = enc.acts.last().expect("encoder has layers");
        let mu = head.columns(0, LATENT_DIM).into_owned();
        let logvar = head.columns(LATENT_DIM, LATENT_DIM).into_owned();
        let std = logvar.map(|v| (0.5 * v).exp());
        let z = &mu + std.component_mul(eps);
        let dec = self.decoder.forward_trace(&z);
        let xhat = dec.acts.last().expect("decoder has layers");

        let resid = x - xhat;
        let sq = resid.iter().map(|r| r * r).sum::<f64>();
        let recon = sq / (2.0 * s2 * b) + self.recon_constant();
        let kl = mu
            .iter()
            .zip(logvar.iter())
            .map(|(&m, &lv)| kl_standard_normal(m, lv))
            .sum::<f64>()
            / b;
        let terms = ElboTerms {
            total: recon + kl,
            recon,
            kl,
        };
        if !want_grad {
            return (terms, None);
        }

        let d_xhat = resid.map(|r| -r / (s2 * b));
        let (dec_grads, dz) = self.decoder.backward(&dec, d_xhat);
        let mut d_head = DMatrix::zeros(x.nrows(), 2 * LATENT_DIM);
        for r in 0..x.nrows() {
            for c in 0..LATENT_DIM {
                let m = mu[(r, c)];
                let lv = logvar[(r, c)];
                d_head[(r, c)] = dz[(r, c)] + m / b;
                d_head[(r, LATENT_DIM + c)] =
                    dz[(r, c)] * eps[(r, c)] * 0.5 * std[(r, c)] + 0.5 * (lv.exp() - 1.0) / b;
            }
        }
        let (enc_grads, _) = self.encoder.backward(&enc, d_head);
        let mut grad = Vec::with_capacity(self.n_params());
        flatten_grads(&enc_grads, &mut grad);
        flatten_grads(&dec_grads, &mut grad);
        (terms, Some(grad))
    }

    /// Negative ELBO for a fixed noise draw `eps`, one row of two standard
    /// normals per batch member.
    pub fn elbo_with_noise(&self, batch: &[&Trajectory], eps: &[[f64; 2]]) -> Result<ElboTerms> {
        let (x, e) = self.prepare(batch, eps)?;
        Ok(self.elbo_inner(&x, &e, false).0)
    }

    /// Loss terms and flat parameter gradient (same order as [`Self::params`]).
    pub fn elbo_gradient(&self, batch: &[&Trajectory], eps: &[[f64; 2]]) -> Result<(ElboTerms, Vec<f64>)> {
        let (x, e) = self.prepare(batch, eps)?;
        let (terms, grad) = self.elbo_inner(&x, &e, true);
        Ok((terms, grad.expect("gradient requested")))
    }

    fn prepare(&self, batch: &[&Trajectory], eps: &[[f64; 2]]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if batch.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        if eps.len() != batch.len() {
            return Err(Error::Shape(format!("{} noise rows for {} inputs", eps.len(), batch.len())));
        }
        let x = self.batch_matrix(batch)?;
        let e = DMatrix::from_fn(batch.len(), LATENT_DIM, |r, c| eps[r][c]);
        Ok((x, e))
    }

    /// Posterior mean and per-dimension variance, no sampling.
    pub fn encode(&self, t: &Trajectory) -> Result<(LatentPoint, [f64; 2])> {
        let x = self.batch_matrix(&[t])?;
        let head = self.encoder.forward(&x);
        let mean = LatentPoint::new(head[(0, 0)], head[(0, 1)]);
        let var = [head[(0, 2)].exp(), head[(0, 3)].exp()];
        Ok((mean, var))
    }

    /// Decoder mean mapped back to trajectory units.
    pub fn decode(&self, z: LatentPoint) -> Trajectory {
        let x = DMatrix::from_row_slice(1, LATENT_DIM, &z.coords());
        let out = self.decoder.forward(&x);
        let norm = self.normalization();
        Trajectory::from_raw(out.iter().map(|v| v * norm.scale + norm.shift).collect())
    }

    pub fn encode_set(&self, set: &TrajectorySet, exec: Execution) -> Result<Vec<LatentPoint>> {
        exec::map_slice(set.trajectories(), exec, |t| self.encode(t).map(|(m, _)| m))
            .into_iter()
            .collect()
    }

    pub fn save_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl LatentDecoder for TvaeModel {
    fn decode(&self, z: LatentPoint) -> Trajectory {
        TvaeModel::decode(self, z)
    }
}

impl LatentEncoder for TvaeModel {
    fn encode_mean(&self, t: &Trajectory) -> Result<LatentPoint> {
        self.encode(t).map(|(m, _)| m)
    }
}

/// Negative ELBO on `batch` with a fresh reparameterization draw from `rng`.
pub fn elbo_loss<R: Rng>(model: &TvaeModel, batch: &[&Trajectory], rng: &mut R) -> Result<ElboTerms> {
    let eps: Vec<[f64; 2]> = batch
        .iter()
        .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    model.elbo_with_noise(batch, &eps)
}

/// Adam training for `config.epochs` passes over `set`.
///
/// The first call on a model without a fitted normalization fits it on
/// `set`. The reported loss for an epoch is the pre-update loss of each
/// batch, averaged with batch-size weights.
pub fn train(model: &TvaeModel, set: &TrajectorySet, config: &TvaeConfig) -> Result<(TvaeModel, TrainReport)> {
    config.validate()?;
    if config.input_dim != model.config.input_dim || set.n_epochs() != model.config.input_dim {
        return Err(Error::Shape(format!(
            "model input_dim {}, config {}, trajectories {}",
            model.config.input_dim,
            config.input_dim,
            set.n_epochs()
        )));
    }
    let mut model = model.clone();
    let mut report = TrainReport::default();
    if config.epochs == 0 {
        return Ok((model, report));
    }
    if model.normalization.is_none() {
        model.normalization = Some(Normalization::fit(set));
    }
    let mut rng = seed::rng(seed::sub_seed(config.seed, "tvae-train"));
    let x_all = model.batch_matrix(&set.trajectories().iter().collect::<Vec<_>>())?;
    let n = set.len();
    let batch = config.effective_batch(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut params = model.params();
    let mut opt = crate::adam::Adam::new(params.len(), config.learning_rate);

    for epoch in 0..config.epochs {
        if batch < n {
            order.shuffle(&mut rng);
        }
        let (mut tot, mut rec, mut kl) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(batch) {
            let x = if chunk.len() == n && batch == n {
                x_all.clone()
            } else {
                x_all.select_rows(chunk)
            };
            let eps = DMatrix::from_fn(chunk.len(), LATENT_DIM, |_, _| rng.sample(StandardNormal));
            let (terms, grad) = model.elbo_inner(&x, &eps, true);
            let grad = grad.expect("gradient requested");
            if !terms.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDiverged { epoch });
            }
            debug_assert!(terms.kl >= 0.0, "negative KL {}", terms.kl);
            let w = chunk.len() as f64 / n as f64;
            tot += w * terms.total;
            rec += w * terms.recon;
            kl += w * terms.kl;
            opt.step(&mut params, &grad);
            model.set_params(&params)?;
        }
        report.total.push(tot);
        report.recon.push(rec);
        report.kl.push(kl.max(0.0));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::TrainingDiverged { epoch: config.epochs - 1 });
    }
    Ok((model, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerParams {
    inputs: usize,
    outputs: usize,
    /// row-major, outputs x inputs
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// On-disk model layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    config: TvaeConfig,
    normalization: Option<Normalization>,
    encoder: Vec<LayerParams>,
    decoder: Vec<LayerParams>,
}

const CHECKPOINT_FORMAT: &str = "zbo-tvae/1";

fn layers_out(mlp: &Mlp) -> Vec<LayerParams> {
    mlp.layers
        .iter()
        .map(|l| {
            let mut weights = Vec::with_capacity(l.w.len());
            push_row_major(&l.w, &mut weights);
            LayerParams {
                inputs: l.w.ncols(),
                outputs: l.w.nrows(),
                weights,
                bias: l.b.iter().copied().collect(),
            }
        })
        .collect()
}

fn layers_in(layers: Vec<LayerParams>) -> std::result::Result<Mlp, String> {
    let mut out = Vec::with_capacity(layers.len());
    for (i, l) in layers.into_iter().enumerate() {
        if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
            return Err(format!("layer {i} has inconsistent parameter counts"));
        }
        if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
            return Err(format!("layer {i} has non-finite parameters"));
        }
        out.push(Dense {
            w: DMatrix::from_row_slice(l.outputs, l.inputs, &l.weights),
            b: DVector::from_vec(l.bias),
        });
    }
    if out.is_empty() {
        return Err("network has no layers".into());
    }
    if out.windows(2).any(|w| w[0].w.nrows() != w[1].w.ncols()) {
        return Err("adjacent layer shapes do not chain".into());
    }
    Ok(Mlp { layers: out })
}

impl From<TvaeModel> for Checkpoint {
    fn from(m: TvaeModel) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            encoder: layers_out(&m.encoder),
            decoder: layers_out(&m.decoder),
            config: m.config,
            normalization: m.normalization,
        }
    }
}

impl TryFrom<Checkpoint> for TvaeModel {
    type Error = String;

    fn try_from(c: Checkpoint) -> std::result::Result<Self, String> {
        if c.format != CHECKPOINT_FORMAT {
            return Err(format!("unknown checkpoint format {:?}", c.format));
        }
        c.config.validate().map_err(|e| e.to_string())?;
        let encoder = layers_in(c.encoder)?;
        let decoder = layers_in(c.decoder)?;
        let d = c.config.input_dim;
        if encoder.layers[0].w.ncols() != d || encoder.layers.last().unwrap().w.nrows() != 2 * LATENT_DIM {
            return Err("encoder shape does not match config".into());
        }
        if decoder.layers[0].w.ncols() != LATENT_DIM || decoder.layers.last().unwrap().w.nrows() != d {
            return Err("decoder shape does not match config".into());
        }
        Ok(TvaeModel {
            config: c.config,
            normalization: c.normalization,
            encoder,
            decoder,
        })
    }
}
