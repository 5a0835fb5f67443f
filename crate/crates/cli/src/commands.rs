use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use zbo_core::rundir::{self, OptimumReport, RunDir};
use zbo_core::trajectory::{generate_set, rescale_set, TrajectorySet};
use zbo_core::tvae::{self, TrainReport, TvaeModel};
use zbo_core::zbo::{self, BoResult, BoState, FeasibleGrid, Optimum};
use zbo_core::{Error, Execution};

use crate::config::RunConfig;

pub const TRAJECTORIES_CSV: &str = "trajectories.csv";
pub const TRAJECTORIES_JSON: &str = "trajectories.json";
pub const PROVENANCE: &str = "provenance.json";
pub const CHECKPOINT: &str = "tvae.json";
pub const LOSS_HISTORY: &str = "loss_history.csv";
pub const RUN_DIR: &str = "run";

/// Files of one workspace (`--out`).
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: &Path) -> Self {
        Workspace {
            root: root.to_path_buf(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn load_trajectories(&self) -> Result<TrajectorySet> {
        let path = self.path(TRAJECTORIES_CSV);
        let file = File::open(&path).with_context(|| format!("opening {} (run `zbo gen` first)", path.display()))?;
        TrajectorySet::read_csv(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
    }

    pub fn load_model(&self) -> Result<TvaeModel> {
        let path = self.path(CHECKPOINT);
        let text =
            fs::read_to_string(&path).with_context(|| format!("opening {} (run `zbo train-tvae` first)", path.display()))?;
        TvaeModel::load_json(&text).with_context(|| format!("reading {}", path.display()))
    }
}

fn resolved(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(RunConfig, Workspace)> {
    let cfg = RunConfig::load(config)?.resolve(seed, out)?;
    let ws = Workspace::new(cfg.workspace()?);
    fs::create_dir_all(&ws.root).with_context(|| format!("creating {}", ws.root.display()))?;
    Ok((cfg, ws))
}

pub fn gen(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let (cfg, ws) = resolved(config, out, seed)?;
    let raw = generate_set(&cfg.family_batches(), cfg.gen_seed())?;
    let set = if cfg.trajectories.rescale {
        rescale_set(&raw, cfg.trajectories.value_range)?
    } else {
        raw
    };
    let mut csv = Vec::new();
    set.write_csv(&mut csv)?;
    rundir::write_atomic(&ws.path(TRAJECTORIES_CSV), &csv)?;
    rundir::write_atomic(&ws.path(TRAJECTORIES_JSON), set.to_json()?.as_bytes())?;
    rundir::write_json(&ws.path(PROVENANCE), &set.provenance())?;
    rundir::write_json(&ws.path(rundir::CONFIG), &cfg)?;
    println!(
        "wrote {} trajectories of length {} to {}",
        set.len(),
        set.n_epochs(),
        ws.path(TRAJECTORIES_CSV).display()
    );
    Ok(())
}

fn loss_csv(report: &TrainReport) -> String {
    let mut out = String::from("epoch,total,recon,kl\n");
    for e in 0..report.epochs() {
        out.push_str(&format!(
            "{e},{:.16e},{:.16e},{:.16e}\n",
            report.total[e], report.recon[e], report.kl[e]
        ));
    }
    out
}

/// Loss at a handful of evenly spaced epochs plus the overall trend.
fn trend_summary(report: &TrainReport) -> String {
    let n = report.epochs();
    if n == 0 {
        return "no epochs run".into();
    }
    let marks: Vec<usize> = (0..=4).map(|i| i * (n - 1) / 4).collect();
    let points: Vec<String> = marks.iter().map(|&e| format!("{e}:{:.4}", report.total[e])).collect();
    let drops = report.total.windows(2).filter(|w| w[1] <= w[0]).count();
    let trend = if report.total[n - 1] < report.total[0] {
        "decreasing"
    } else {
        "not decreasing"
    };
    format!(
        "loss {} ({trend}; {drops}/{} epochs non-increasing)",
        points.join(" "),
        n.saturating_sub(1)
    )
}

pub fn train_tvae(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let (cfg, ws) = resolved(config, out, seed)?;
    let set = ws.load_trajectories()?;
    if set.n_epochs() != cfg.tvae.input_dim {
        bail!(
            "trajectories have length {} but the config expects {}",
            set.n_epochs(),
            cfg.tvae.input_dim
        );
    }
    let model = tvae::init_model(&cfg.tvae, cfg.tvae.seed)?;
    let (model, report) = tvae::train(&model, &set, &cfg.tvae)?;
    rundir::write_atomic(&ws.path(CHECKPOINT), model.save_json()?.as_bytes())?;
    rundir::write_atomic(&ws.path(LOSS_HISTORY), loss_csv(&report).as_bytes())?;
    println!("trained {} epochs: {}", report.epochs(), trend_summary(&report));
    println!("checkpoint {}", ws.path(CHECKPOINT).display());
    Ok(())
}

/// Everything a run needs besides its state.
struct Session {
    cfg: RunConfig,
    grid: FeasibleGrid,
    objective: Box<dyn zbo_core::Objective>,
    run: RunDir,
    started: Instant,
}

impl Session {
    fn open(cfg: RunConfig, run: RunDir) -> Result<Self> {
        let started = Instant::now();
        let ws = Workspace::new(cfg.workspace()?);
        let set = ws.load_trajectories()?;
        let model = ws.load_model()?;
        if model.input_dim() != set.n_epochs() {
            bail!(
                "checkpoint expects length {}, trajectories have {}",
                model.input_dim(),
                set.n_epochs()
            );
        }
        let grid = zbo::build_feasible_grid(&model, &set, &cfg.bo, Execution::default())?;
        let objective = cfg.objective.build(Some(&set))?;
        Ok(Session {
            cfg,
            grid,
            objective,
            run,
            started,
        })
    }

    /// Writes history and state, logging timing for entries from `from_k` on.
    fn persist(&self, state: &BoState, from_k: usize) -> Result<()> {
        self.run.write_history(&state.history)?;
        self.run.write_state(state)?;
        let t = self.started.elapsed().as_secs_f64();
        for h in &state.history[from_k..] {
            self.run.append_timing(h.k, t)?;
        }
        Ok(())
    }
}

fn clear_outputs(run: &RunDir) -> Result<()> {
    for name in [
        rundir::STATE,
        rundir::HISTORY,
        rundir::TIMING,
        rundir::GRID_MEAN,
        rundir::GRID_VAR,
        rundir::GRID_ACQ,
        rundir::OPTIMUM,
    ] {
        let p = run.path(name);
        if p.exists() {
            fs::remove_file(&p).with_context(|| format!("removing {}", p.display()))?;
        }
    }
    Ok(())
}

pub fn run_zbo(config: &Path, out: Option<&Path>, seed: Option<u64>, stop_after: Option<usize>) -> Result<()> {
    let (cfg, ws) = resolved(config, out, seed)?;
    let run = RunDir::create(ws.path(RUN_DIR))?;
    let _lock = run.lock()?;
    clear_outputs(&run)?;
    rundir::write_json(&run.path(rundir::CONFIG), &cfg)?;
    let mut session = Session::open(cfg, run)?;
    let state = zbo::initialize(&session.grid, session.objective.as_mut(), &session.cfg.bo)?;
    session.persist(&state, 0)?;
    execute(&mut session, state, stop_after)
}

pub fn resume_zbo(dir: &Path, stop_after: Option<usize>) -> Result<()> {
    let run = RunDir::open(dir)?;
    let _lock = run.lock()?;
    let cfg = load_run_config(&run)?;
    let mut session = Session::open(cfg, run)?;
    let state = if session.run.path(rundir::STATE).exists() {
        session.run.read_state()?
    } else {
        let s = zbo::initialize(&session.grid, session.objective.as_mut(), &session.cfg.bo)?;
        session.persist(&s, 0)?;
        s
    };
    execute(&mut session, state, stop_after)
}

/// The saved config of a run directory. The workspace is the directory
/// containing the run, so a workspace can be moved as a whole.
fn load_run_config(run: &RunDir) -> Result<RunConfig> {
    let root = run.root().canonicalize()?;
    let ws = root
        .parent()
        .with_context(|| format!("{} has no parent workspace", root.display()))?;
    RunConfig::load(&run.path(rundir::CONFIG))?.resolve(None, Some(ws))
}

fn execute(session: &mut Session, state: BoState, stop_after: Option<usize>) -> Result<()> {
    let exec = Execution::default();
    let mut state = state;
    let mut persisted = state.history.len();
    let outcome = {
        let Session {
            cfg,
            grid,
            objective,
            run,
            started,
        } = &mut *session;
        zbo::continue_run(&mut state, grid, objective.as_mut(), &cfg.bo, exec, stop_after, |s, _| {
            run.write_history(&s.history)?;
            run.write_state(s)?;
            let t = started.elapsed().as_secs_f64();
            for h in &s.history[persisted..] {
                run.append_timing(h.k, t)?;
            }
            persisted = s.history.len();
            Ok(())
        })
    };
    outcome?;
    if !zbo::is_finished(&state, &session.cfg.bo) {
        println!(
            "paused after iteration {} ({} evaluations); continue with --resume {}",
            state.iteration,
            state.history.len(),
            session.run.root().display()
        );
        return Ok(());
    }
    let result = zbo::finalize(&state, &session.grid, &session.cfg.bo, exec)?;
    let report = write_result(&session.run, &result, &session.grid, &session.cfg)?;
    print_summary(&report, &session.grid, &session.cfg);
    Ok(())
}

pub fn write_result(run: &RunDir, result: &BoResult, grid: &FeasibleGrid, cfg: &RunConfig) -> Result<OptimumReport> {
    run.write_maps(result, grid.bounds(), grid.resolution())?;
    let report = OptimumReport::new(result, cfg.bo.budget(), grid.n_feasible());
    run.write_optimum(&report)?;
    Ok(report)
}

fn describe(o: &Optimum, grid: &FeasibleGrid) -> String {
    let (col, row) = grid.coords(o.cell);
    format!(
        "cell {} (col {col}, row {row}) at z = ({:.6}, {:.6})",
        o.cell, o.z.z1, o.z.z2
    )
}

fn print_summary(report: &OptimumReport, grid: &FeasibleGrid, cfg: &RunConfig) {
    println!(
        "estimated optimum: {}, GP mean {:.6e}",
        describe(&report.estimated, grid),
        report.estimated.value
    );
    println!(
        "best evaluated:    {}, objective {:.6e}",
        describe(&report.best_evaluated, grid),
        report.best_evaluated.value
    );
    println!(
        "budget: {} evaluations = {} initial + {} iterations (limit {})",
        report.evaluations,
        cfg.bo.init_samples,
        report.iterations,
        report.budget
    );
    if report.failed_evaluations > 0 {
        println!("failed evaluations: {}", report.failed_evaluations);
    }
    println!(
        "converged: {} (stopped at iteration {})",
        if report.converged { "yes" } else { "no" },
        report.iterations
    );
}

/// Loads a run directory's config and rebuilds the grid and final result
/// from its saved state.
pub fn rebuild_result(run: &RunDir) -> Result<(RunConfig, FeasibleGrid, BoResult)> {
    let cfg = load_run_config(run)?;
    let ws = Workspace::new(cfg.workspace()?);
    let set = ws.load_trajectories()?;
    let model = ws.load_model()?;
    let grid = zbo::build_feasible_grid(&model, &set, &cfg.bo, Execution::default())?;
    let state = run
        .read_state()
        .map_err(|e| match e {
            Error::Io(io) => anyhow::anyhow!("{}: {io}", run.path(rundir::STATE).display()),
            other => other.into(),
        })?;
    let result = zbo::finalize(&state, &grid, &cfg.bo, Execution::default())?;
    Ok((cfg, grid, result))
}
