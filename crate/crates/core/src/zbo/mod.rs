//! The latent Bayesian optimization loop.
//!
//! 1. Embed the training trajectories and lay a grid over their padded
//!    bounding box; decode every cell and keep the feasible ones.
//! 2. Evaluate `init_samples` random feasible cells.
//! 3. Repeat: refit the GP on the history, score every feasible unevaluated
//!    cell, decode and evaluate the best one, append it.
//! 4. Stop after `max_iters` steps or once the best acquisition value is
//!    negligible; report both the GP-mean optimum and the best evaluation.
//!
//! Initial-design evaluations count toward the budget, so a run never
//! evaluates more than `init_samples + max_iters` trajectories.

pub mod grid;

use serde::{Deserialize, Serialize};

use crate::acquisition::{self, AcquisitionConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gp::{self, GpFitConfig, GpModel, GpPosterior};
use crate::latent::{LatentDecoder, LatentEncoder, LatentPoint};
use crate::objective::Objective;
use crate::seed;
use crate::trajectory::{Trajectory, TrajectorySet};

pub use grid::{init_design, FeasibleGrid, GridBounds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    #[serde(default = "default_init")]
    pub init_samples: usize,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    /// Stop once the best acquisition value drops below `eps * (|best y| + 1)`.
    #[serde(default = "default_eps")]
    pub convergence_eps: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_resolution")]
    pub grid_resolution: (usize, usize),
    #[serde(default = "default_padding")]
    pub bound_padding: f64,
    #[serde(default)]
    pub gp: GpFitConfig,
    /// Next-best cells tried after a failed evaluation before aborting.
    #[serde(default = "default_retries")]
    pub max_retries: usize,
}

fn default_init() -> usize {
    20
}
fn default_iters() -> usize {
    120
}
fn default_eps() -> f64 {
    1e-6
}
fn default_resolution() -> (usize, usize) {
    (60, 60)
}
fn default_padding() -> f64 {
    0.2
}
fn default_retries() -> usize {
    3
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            init_samples: default_init(),
            max_iters: default_iters(),
            acquisition: AcquisitionConfig::default(),
            convergence_eps: default_eps(),
            seed: 0,
            grid_resolution: default_resolution(),
            bound_padding: default_padding(),
            gp: GpFitConfig::default(),
            max_retries: default_retries(),
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.init_samples < 2 {
            return Err(Error::Config(format!("init_samples must be >= 2, got {}", self.init_samples)));
        }
        if !(self.convergence_eps >= 0.0 && self.convergence_eps.is_finite()) {
            return Err(Error::Config("convergence_eps must be >= 0".into()));
        }
        if self.grid_resolution.0 == 0 || self.grid_resolution.1 == 0 {
            return Err(Error::Config("grid resolution must be positive".into()));
        }
        if !(self.bound_padding >= 0.0 && self.bound_padding.is_finite()) {
            return Err(Error::Config("bound_padding must be >= 0".into()));
        }
        self.acquisition.validate()
    }

    pub fn budget(&self) -> usize {
        self.init_samples + self.max_iters
    }
}

/// Embeds the training set and builds the feasible grid around it.
pub fn build_feasible_grid<M>(model: &M, train_set: &TrajectorySet, cfg: &BoConfig, exec: Execution) -> Result<FeasibleGrid>
where
    M: LatentEncoder + LatentDecoder,
{
    let embeddings = train_set
        .trajectories()
        .iter()
        .map(|t| model.encode_mean(t))
        .collect::<Result<Vec<_>>>()?;
    let bounds = GridBounds::around(&embeddings, cfg.bound_padding)?;
    FeasibleGrid::build(model, bounds, cfg.grid_resolution, exec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// Zero-based evaluation index.
    pub k: usize,
    pub cell: usize,
    pub z: LatentPoint,
    pub y: f64,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedEvaluation {
    /// BO step during which the failure happened (0 for the initial design).
    pub iteration: usize,
    pub cell: usize,
    pub error: String,
}

/// Everything needed to continue a run exactly where it left off.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoState {
    pub history: Vec<HistoryEntry>,
    /// Completed BO steps (initial design excluded).
    pub iteration: usize,
    pub last_max_acquisition: Option<f64>,
    pub converged: bool,
    pub failed: Vec<FailedEvaluation>,
    pub gp: Option<GpModel>,
}

impl BoState {
    pub fn evaluations(&self) -> usize {
        self.history.len()
    }

    pub fn best(&self) -> Option<&HistoryEntry> {
        let mut best: Option<&HistoryEntry> = None;
        for h in &self.history {
            if best.is_none_or(|b| h.y > b.y) {
                best = Some(h);
            }
        }
        best
    }

    /// Cells that may not be proposed again: evaluated or failed.
    pub fn excluded(&self, n_cells: usize) -> Vec<bool> {
        let mut out = vec![false; n_cells];
        for h in &self.history {
            out[h.cell] = true;
        }
        for f in &self.failed {
            out[f.cell] = true;
        }
        out
    }

    fn training_data(&self) -> (Vec<LatentPoint>, Vec<f64>) {
        (self.history.iter().map(|h| h.z).collect(), self.history.iter().map(|h| h.y).collect())
    }
}

fn evaluate_cell(objective: &mut dyn Objective, grid: &FeasibleGrid, cell: usize) -> Result<f64> {
    let y = objective.evaluate(grid.trajectory(cell))?;
    if !y.is_finite() {
        return Err(Error::EvaluationFailed(format!("objective returned {y}")));
    }
    Ok(y)
}

fn record(state: &mut BoState, grid: &FeasibleGrid, cell: usize, y: f64) {
    state.history.push(HistoryEntry {
        k: state.history.len(),
        cell,
        z: grid.center(cell),
        y,
        trajectory: grid.trajectory(cell).clone(),
    });
}

/// Evaluates the random initial design. A failing cell is replaced by a
/// fresh random feasible cell, at most `max_retries` times in total.
pub fn initialize(grid: &FeasibleGrid, objective: &mut dyn Objective, cfg: &BoConfig) -> Result<BoState> {
    cfg.validate()?;
    let mut rng = seed::rng(seed::sub_seed(cfg.seed, "init-design"));
    let mut state = BoState {
        history: Vec::new(),
        iteration: 0,
        last_max_acquisition: None,
        converged: false,
        failed: Vec::new(),
        gp: None,
    };
    let mut queue = init_design(grid, cfg.init_samples, &mut rng)?;
    queue.reverse();
    while let Some(cell) = queue.pop() {
        match evaluate_cell(objective, grid, cell) {
            Ok(y) => record(&mut state, grid, cell, y),
            Err(e) => {
                state.failed.push(FailedEvaluation {
                    iteration: 0,
                    cell,
                    error: e.to_string(),
                });
                if state.failed.len() > cfg.max_retries {
                    return Err(Error::RunAborted {
                        iteration: 0,
                        attempts: state.failed.len(),
                        last: e.to_string(),
                    });
                }
                let excluded = state.excluded(grid.len());
                let free: Vec<usize> = grid
                    .feasible_cells()
                    .into_iter()
                    .filter(|&c| !excluded[c] && !queue.contains(&c))
                    .collect();
                if free.is_empty() {
                    return Err(Error::SearchExhausted);
                }
                use rand::Rng;
                queue.push(free[rng.random_range(0..free.len())]);
            }
        }
    }
    Ok(state)
}

fn fit_history(state: &BoState, cfg: &BoConfig, fit_index: usize, exec: Execution) -> Result<GpModel> {
    let (z, y) = state.training_data();
    let warm = state.gp.as_ref().map(|g| *g.hyper());
    let fit_seed = seed::indexed_seed(seed::sub_seed(cfg.seed, "gp-fit"), fit_index as u64);
    gp::fit(&z, &y, &cfg.gp, fit_seed, warm.as_ref(), exec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub iteration: usize,
    pub cell: usize,
    pub y: f64,
    pub max_acquisition: f64,
    pub converged: bool,
    pub failed_attempts: usize,
}

/// One fit, predict, acquire, evaluate, augment pass.
pub fn bo_step(state: &mut BoState, grid: &FeasibleGrid, objective: &mut dyn Objective, cfg: &BoConfig, exec: Execution) -> Result<StepReport> {
    let model = fit_history(state, cfg, state.iteration, exec)?;
    let best = state.best().map(|h| h.y).expect("history is non-empty after fitting");
    let posteriors = model.predict_many(&grid.centers(), exec);
    let scores = acquisition::score_all(&posteriors, best, &cfg.acquisition, exec);
    let mut excluded = state.excluded(grid.len());
    let iteration = state.iteration + 1;

    let first = acquisition::argmax_masked(&scores, grid.mask(), &excluded)?;
    let mut selection = first;
    let mut attempts = 0;
    let y = loop {
        match evaluate_cell(objective, grid, selection.index) {
            Ok(y) => break y,
            Err(e) => {
                attempts += 1;
                state.failed.push(FailedEvaluation {
                    iteration,
                    cell: selection.index,
                    error: e.to_string(),
                });
                excluded[selection.index] = true;
                if attempts > cfg.max_retries {
                    return Err(Error::RunAborted {
                        iteration,
                        attempts,
                        last: e.to_string(),
                    });
                }
                selection = acquisition::argmax_masked(&scores, grid.mask(), &excluded)?;
            }
        }
    };

    record(state, grid, selection.index, y);
    state.iteration = iteration;
    state.last_max_acquisition = Some(first.value);
    state.gp = Some(model);
    let converged = cfg.acquisition.supports_convergence() && first.value < cfg.convergence_eps * (best.abs() + 1.0);
    state.converged = converged;
    Ok(StepReport {
        iteration,
        cell: selection.index,
        y,
        max_acquisition: first.value,
        converged,
        failed_attempts: attempts,
    })
}

pub fn is_finished(state: &BoState, cfg: &BoConfig) -> bool {
    state.converged || state.iteration >= cfg.max_iters
}

/// Runs steps until the run finishes or `stop_after` more steps are done,
/// calling `on_step` after each one.
pub fn continue_run<F>(
    state: &mut BoState,
    grid: &FeasibleGrid,
    objective: &mut dyn Objective,
    cfg: &BoConfig,
    exec: Execution,
    stop_after: Option<usize>,
    mut on_step: F,
) -> Result<()>
where
    F: FnMut(&BoState, &StepReport) -> Result<()>,
{
    let mut done = 0;
    while !is_finished(state, cfg) && stop_after.is_none_or(|n| done < n) {
        let report = bo_step(state, grid, objective, cfg, exec)?;
        on_step(state, &report)?;
        done += 1;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub cell: usize,
    pub z: LatentPoint,
    pub value: f64,
    pub trajectory: Trajectory,
}

/// Row-major maps over every grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMaps {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub acquisition: Vec<f64>,
}

/// GP-mean argmax over feasible cells (ties to the lowest index) and the
/// best evaluated entry (ties to the earliest). Without a GP the estimate
/// falls back to the best evaluation.
pub fn report_optimum(state: &BoState, grid: &FeasibleGrid, posteriors: Option<&[GpPosterior]>) -> Result<(Optimum, Optimum)> {
    let best = state
        .best()
        .ok_or_else(|| Error::DegenerateData("no evaluations to report".into()))?;
    let evaluated = Optimum {
        cell: best.cell,
        z: best.z,
        value: best.y,
        trajectory: best.trajectory.clone(),
    };
    let Some(posteriors) = posteriors else {
        return Ok((evaluated.clone(), evaluated));
    };
    let means: Vec<f64> = posteriors.iter().map(|p| p.mean).collect();
    let pick = acquisition::argmax_masked(&means, grid.mask(), &vec![false; grid.len()])?;
    let estimated = Optimum {
        cell: pick.index,
        z: grid.center(pick.index),
        value: pick.value,
        trajectory: grid.trajectory(pick.index).clone(),
    };
    Ok((estimated, evaluated))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoResult {
    pub estimated: Optimum,
    pub best_evaluated: Optimum,
    pub history: Vec<HistoryEntry>,
    pub failed: Vec<FailedEvaluation>,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub maps: Option<GridMaps>,
    pub gp: Option<GpModel>,
}

/// Fits the final surrogate on the whole history and assembles the result.
/// With fewer than two points or constant targets no surrogate is fitted.
pub fn finalize(state: &BoState, grid: &FeasibleGrid, cfg: &BoConfig, exec: Execution) -> Result<BoResult> {
    let model = match fit_history(state, cfg, state.iteration + 1, exec) {
        Ok(m) => Some(m),
        Err(Error::DegenerateData(_)) => None,
        Err(e) => return Err(e),
    };
    let (maps, estimated, best_evaluated) = match &model {
        Some(m) => {
            let posteriors = m.predict_many(&grid.centers(), exec);
            let best = state.best().map(|h| h.y).unwrap_or(f64::NEG_INFINITY);
            let acquisition = acquisition::score_all(&posteriors, best, &cfg.acquisition, exec);
            let (e, b) = report_optimum(state, grid, Some(&posteriors))?;
            let maps = GridMaps {
                mean: posteriors.iter().map(|p| p.mean).collect(),
                variance: posteriors.iter().map(|p| p.variance).collect(),
                acquisition,
            };
            (Some(maps), e, b)
        }
        None => {
            let (e, b) = report_optimum(state, grid, None)?;
            (None, e, b)
        }
    };
    Ok(BoResult {
        estimated,
        best_evaluated,
        history: state.history.clone(),
        failed: state.failed.clone(),
        converged: state.converged,
        iterations: state.iteration,
        evaluations: state.history.len(),
        maps,
        gp: model,
    })
}

/// Whole run in memory: grid, initial design, steps, final report.
pub fn run<M>(objective: &mut dyn Objective, model: &M, train_set: &TrajectorySet, cfg: &BoConfig, exec: Execution) -> Result<BoResult>
where
    M: LatentEncoder + LatentDecoder,
{
    cfg.validate()?;
    let grid = build_feasible_grid(model, train_set, cfg, exec)?;
    run_on_grid(objective, &grid, cfg, exec)
}

pub fn run_on_grid(objective: &mut dyn Objective, grid: &FeasibleGrid, cfg: &BoConfig, exec: Execution) -> Result<BoResult> {
    let mut state = initialize(grid, objective, cfg)?;
    continue_run(&mut state, grid, objective, cfg, exec, None, |_, _| Ok(()))?;
    finalize(&state, grid, cfg, exec)
}
