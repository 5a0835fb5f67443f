//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs as a plain binary so the lines always reach the
//! terminal.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use zbo_core::acquisition::{
    expected_improvement, probability_of_improvement, select_next, AcquisitionConfig, AcquisitionKind,
};
use zbo_core::gp::{self, GpFitConfig, GpHyperparams, GpModel, GpPosterior};
use zbo_core::objective::{ssim, synthetic_target_objective, Image, SsimConfig};
use zbo_core::rundir::{format_history, RunDir};
use zbo_core::seed;
use zbo_core::trajectory::{generate_set, rescale_set, Family, FamilyBatch, FamilySpec, Trajectory, TrajectorySet};
use zbo_core::tvae::{self, TvaeConfig, TvaeModel};
use zbo_core::zbo::{self, BoConfig, BoResult, FeasibleGrid};
use zbo_core::{Execution, LatentPoint};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

// ---------------------------------------------------------------- GP

/// Posterior from an explicit dense inverse of the regularized kernel.
fn dense_oracle(model: &GpModel, q: LatentPoint) -> (f64, f64) {
    let h = *model.hyper();
    let z = model.train_z();
    let (mu, sd) = model.standardization();
    let n = z.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        gp::rbf_kernel(z[i], z[j], &h) + if i == j { h.nugget } else { 0.0 }
    });
    let kinv = k.try_inverse().expect("invertible kernel");
    let ks = DVector::from_fn(n, |i, _| gp::rbf_kernel(z[i], q, &h));
    let yt = DVector::from_iterator(n, model.train_y().iter().map(|y| (y - mu) / sd));
    let mean = mu + sd * (ks.transpose() * &kinv * yt)[(0, 0)];
    let var = sd * sd * (h.sigma2 - (ks.transpose() * &kinv * &ks)[(0, 0)]);
    (mean, var)
}

fn random_points<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<LatentPoint> {
    (0..n)
        .map(|_| LatentPoint::new(rng.random_range(lo..hi), rng.random_range(lo..hi)))
        .collect()
}

fn gp_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut rng = seed::rng(101);
    for d in 0..10 {
        let n = rng.random_range(2..=8);
        let z = random_points(&mut rng, n, -2.0, 2.0);
        let y: Vec<f64> = z.iter().map(|p| (1.3 * p.z1).sin() + 0.5 * p.z2 + rng.random_range(-0.3..0.3)).collect();
        let model = gp::fit(&z, &y, &GpFitConfig::default(), d, None, Execution::default()).unwrap();
        for q in random_points(&mut rng, 20, -2.5, 2.5) {
            let p = model.predict(q);
            let (m, v) = dense_oracle(&model, q);
            worst = worst.max(rel_err(p.mean, m)).max(rel_err(p.variance, v));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-8 && elapsed < Duration::from_secs(1),
        format!("max relative error {worst:.2e}, {elapsed:.2?}"),
    )
}

fn nll_gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = seed::rng(202);
    let z = random_points(&mut rng, 12, -2.0, 2.0);
    let y: Vec<f64> = z.iter().map(|p| p.z1 * p.z2 + (2.0 * p.z1).cos()).collect();
    let (mu, sd) = gp::standardization(&y).unwrap();
    let ys: Vec<f64> = y.iter().map(|v| (v - mu) / sd).collect();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let log = [
            rng.random_range(-1.5f64..1.5),
            rng.random_range(-1.5f64..1.0),
            rng.random_range(-1.5f64..1.0),
        ];
        let hyper = GpHyperparams::from_log(log, 1e-6);
        let grad = gp::nll_gradient(&hyper, &z, &ys).unwrap();
        let mut fd = [0.0; 3];
        for i in 0..3 {
            let (mut up, mut dn) = (log, log);
            up[i] += h;
            dn[i] -= h;
            let f = |l: [f64; 3]| gp::neg_log_marginal_likelihood(&GpHyperparams::from_log(l, 1e-6), &z, &ys).unwrap();
            fd[i] = (f(up) - f(dn)) / (2.0 * h);
        }
        let diff = (0..3).map(|i| (grad[i] - fd[i]).powi(2)).sum::<f64>().sqrt();
        let norm = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(diff / norm.max(1e-12));
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-4 && elapsed < Duration::from_secs(5),
        format!("max relative error {worst:.2e}, {elapsed:.2?}"),
    )
}

/// Draws `y ~ N(0, K)` at `z` for the given kernel.
fn sample_gp<R: Rng>(rng: &mut R, z: &[LatentPoint], h: &GpHyperparams) -> Vec<f64> {
    let n = z.len();
    let k = DMatrix::from_fn(n, n, |i, j| gp::rbf_kernel(z[i], z[j], h) + if i == j { 1e-8 } else { 0.0 });
    let l = k.cholesky().expect("sampling kernel is positive definite").unpack();
    let e = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    (l * e).iter().copied().collect()
}

fn gp_recovery() -> Outcome {
    let truth = GpHyperparams::new(1.0, [0.6, 1.2], 1e-6);
    let mut recovered = 0;
    let mut ratios = Vec::new();
    for s in 0..10u64 {
        let mut rng = seed::rng(seed::indexed_seed(303, s));
        let z = random_points(&mut rng, 40, 0.0, 3.0);
        let y = sample_gp(&mut rng, &z, &truth);
        let model = gp::fit(&z, &y, &GpFitConfig::default(), s, None, Execution::default()).unwrap();
        let fitted = model.hyper().lengthscales;
        let r = [fitted[0] / truth.lengthscales[0], fitted[1] / truth.lengthscales[1]];
        if r.iter().all(|&x| (0.5..=2.0).contains(&x)) {
            recovered += 1;
        }
        ratios.push(format!("{:.2}/{:.2}", r[0], r[1]));
    }
    outcome(
        recovered >= 8,
        format!("{recovered}/10 seeds within factor 2 (ratios {})", ratios.join(" ")),
    )
}

// ---------------------------------------------------------------- acquisition

fn acquisition_properties() -> Outcome {
    let mut rng = seed::rng(404);
    let mut failures = Vec::new();

    let mut negative = 0;
    let mut pi_out = 0;
    for _ in 0..10_000 {
        let mean = rng.random_range(-10.0..10.0);
        let sd = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..5.0) };
        let best = rng.random_range(-10.0..10.0);
        let xi = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.5) };
        if expected_improvement(mean, sd, best, xi) < 0.0 {
            negative += 1;
        }
        let pi = probability_of_improvement(mean, sd, best, xi);
        if !(0.0..=1.0).contains(&pi) {
            pi_out += 1;
        }
    }
    if negative > 0 {
        failures.push(format!("{negative} negative EI"));
    }
    if pi_out > 0 {
        failures.push(format!("{pi_out} PI outside [0,1]"));
    }

    let mut zero_sd = 0;
    for _ in 0..1000 {
        let best = rng.random_range(-10.0..10.0);
        let mean = best - rng.random_range(0.0..10.0);
        if expected_improvement(mean, 0.0, best, 0.0) != 0.0 {
            zero_sd += 1;
        }
    }
    if zero_sd > 0 {
        failures.push(format!("{zero_sd} non-zero EI at sd 0"));
    }

    let mut decreasing = 0;
    for _ in 0..1000 {
        let mean = rng.random_range(-5.0..5.0);
        let best = rng.random_range(-5.0..5.0);
        let mut sds: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..5.0)).collect();
        sds.push(0.0);
        sds.sort_by(f64::total_cmp);
        let ei: Vec<f64> = sds.iter().map(|&s| expected_improvement(mean, s, best, 0.0)).collect();
        if ei.windows(2).any(|w| w[1] < w[0]) {
            decreasing += 1;
        }
    }
    if decreasing > 0 {
        failures.push(format!("{decreasing} slices with EI decreasing in sd"));
    }

    let mut mismatched = 0;
    for g in 0..100 {
        let posts: Vec<GpPosterior> = (0..100)
            .map(|_| GpPosterior {
                mean: rng.random_range(-2.0..2.0),
                variance: if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..1.5) },
            })
            .collect();
        let mut feasible: Vec<bool> = (0..100).map(|_| rng.random_bool(0.7)).collect();
        feasible[rng.random_range(0..100)] = true;
        let evaluated: Vec<bool> = feasible.iter().map(|&f| f && rng.random_bool(0.2)).collect();
        if feasible.iter().zip(&evaluated).all(|(f, e)| !f || *e) {
            continue;
        }
        let best = rng.random_range(-1.0..1.5);
        let kind = [AcquisitionKind::Ei, AcquisitionKind::Pi, AcquisitionKind::Cb][g % 3];
        let cfg = AcquisitionConfig {
            kind,
            ..AcquisitionConfig::default()
        };
        let chosen = select_next(&posts, &feasible, &evaluated, best, &cfg).unwrap();
        let mut scan: Option<(usize, f64)> = None;
        for i in 0..100 {
            if !feasible[i] || evaluated[i] {
                continue;
            }
            let sd = posts[i].variance.sqrt();
            let v = match kind {
                AcquisitionKind::Ei => expected_improvement(posts[i].mean, sd, best, cfg.xi),
                AcquisitionKind::Pi => probability_of_improvement(posts[i].mean, sd, best, cfg.xi),
                AcquisitionKind::Cb => posts[i].mean + cfg.kappa * sd,
            };
            if scan.is_none_or(|(_, b)| v > b) {
                scan = Some((i, v));
            }
        }
        if scan.map(|(i, _)| i) != Some(chosen.index) {
            mismatched += 1;
        }
    }
    if mismatched > 0 {
        failures.push(format!("{mismatched} grids where selection differs from the scan"));
    }

    let pass = failures.is_empty();
    outcome(
        pass,
        if pass {
            "10^4 EI/PI inputs, 1000 sd-slices, 100 grid scans".to_string()
        } else {
            failures.join("; ")
        },
    )
}

// ---------------------------------------------------------------- TVAE

fn two_family_set(n: usize, count_each: usize, seed: u64) -> TrajectorySet {
    let spec = |family: Family| FamilySpec {
        family,
        n_epochs: n,
        value_range: (0.05, 5.0),
        seed: 0,
    };
    let batches = [
        FamilyBatch {
            count: count_each,
            spec: spec(Family::LinearCooldown { start: None, end: None }),
        },
        FamilyBatch {
            count: count_each,
            spec: spec(Family::SegmentedRandom {
                segments: 3,
                noise_sd: 0.1,
            }),
        },
    ];
    let raw = generate_set(&batches, seed).unwrap();
    rescale_set(&raw, (0.05, 5.0)).unwrap()
}

fn tvae_gradient_check() -> Outcome {
    let mut cfg = TvaeConfig::new(4);
    cfg.hidden_sizes = vec![8, 6];
    let model = tvae::init_model(&cfg, 7).unwrap();
    let data = TrajectorySet::new(vec![
        Trajectory::new(vec![0.5, 1.0, 1.5, 2.0]).unwrap(),
        Trajectory::new(vec![2.0, 0.2, 1.1, 0.7]).unwrap(),
        Trajectory::new(vec![1.0, 1.0, 0.3, 0.4]).unwrap(),
    ])
    .unwrap();
    let mut model = model;
    model.set_normalization(tvae::Normalization::fit(&data));
    let batch: Vec<&Trajectory> = data.trajectories().iter().collect();
    let eps = [[0.3, -1.1], [-0.4, 0.8], [1.2, 0.1]];
    let (_, grad) = model.elbo_gradient(&batch, &eps).unwrap();
    let p0 = model.params();
    let h = 1e-6;
    let mut fd = vec![0.0; p0.len()];
    let mut probe = model.clone();
    for i in 0..p0.len() {
        let mut p = p0.clone();
        p[i] += h;
        probe.set_params(&p).unwrap();
        let up = probe.elbo_with_noise(&batch, &eps).unwrap().total;
        p[i] -= 2.0 * h;
        probe.set_params(&p).unwrap();
        let dn = probe.elbo_with_noise(&batch, &eps).unwrap().total;
        fd[i] = (up - dn) / (2.0 * h);
    }
    let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rel = diff / norm;
    outcome(rel < 1e-4, format!("{} parameters, relative error {rel:.2e}", p0.len()))
}

/// Mean silhouette coefficient of `points` under `labels` (Euclidean).
fn silhouette(points: &[LatentPoint], labels: &[&str]) -> f64 {
    let dist = |a: LatentPoint, b: LatentPoint| ((a.z1 - b.z1).powi(2) + (a.z2 - b.z2).powi(2)).sqrt();
    let mut classes: Vec<&str> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let mut total = 0.0;
    for (i, &p) in points.iter().enumerate() {
        let mean_to = |c: &str| {
            let (sum, cnt) = points
                .iter()
                .zip(labels)
                .enumerate()
                .filter(|(j, (_, l))| **l == c && *j != i)
                .fold((0.0, 0usize), |(s, n), (_, (q, _))| (s + dist(p, *q), n + 1));
            if cnt == 0 {
                0.0
            } else {
                sum / cnt as f64
            }
        };
        let a = mean_to(labels[i]);
        let b = classes
            .iter()
            .filter(|c| **c != labels[i])
            .map(|c| mean_to(c))
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        total += if m > 0.0 { (b - a) / m } else { 0.0 };
    }
    total / points.len() as f64
}

struct TrainedTvae {
    set: TrajectorySet,
    model: TvaeModel,
}

fn train_reference_tvae(seed: u64) -> (TrainedTvae, tvae::TrainReport, Duration) {
    let start = Instant::now();
    let set = two_family_set(120, 100, seed);
    let mut cfg = TvaeConfig::new(120);
    cfg.seed = seed;
    let model = tvae::init_model(&cfg, seed).unwrap();
    let (model, report) = tvae::train(&model, &set, &cfg).unwrap();
    (TrainedTvae { set, model }, report, start.elapsed())
}

fn tvae_training(trained: &TrainedTvae, report: &tvae::TrainReport, elapsed: Duration) -> Outcome {
    let first = report.total[0];
    let last = *report.total.last().unwrap();
    let halved = last <= 0.5 * first;

    let (lo, hi) = trained.set.global_range();
    let mut sq = 0.0;
    for t in trained.set.trajectories() {
        let (z, _) = trained.model.encode(t).unwrap();
        let r = trained.model.decode(z);
        let mse = r.values().iter().zip(t.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / t.n_epochs() as f64;
        sq += mse.sqrt();
    }
    let rmse = sq / trained.set.len() as f64;
    let rmse_frac = rmse / (hi - lo);

    let z = trained.model.encode_set(&trained.set, Execution::default()).unwrap();
    let sil = silhouette(&z, &trained.set.family_labels());
    outcome(
        halved && rmse_frac < 0.15 && sil > 0.0 && elapsed < Duration::from_secs(300),
        format!(
            "loss {first:.2} -> {last:.2}, reconstruction RMSE {:.1}% of range, silhouette {sil:.3}, {elapsed:.1?}",
            100.0 * rmse_frac
        ),
    )
}

// ---------------------------------------------------------------- SSIM

/// Gaussian-window SSIM evaluated directly: for every window position sum
/// over all window pixels with the 2-D weight.
fn naive_ssim(a: &Image, b: &Image, cfg: &SsimConfig) -> f64 {
    let (h, w) = a.shape();
    let win = cfg.effective_window(h.min(w));
    let half = (win / 2) as f64;
    let mut g: Vec<f64> = (0..win).map(|i| (-(i as f64 - half).powi(2) / (2.0 * cfg.sigma * cfg.sigma)).exp()).collect();
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    let (c1, c2) = cfg.constants();
    let mut total = 0.0;
    let mut count = 0;
    for y0 in 0..=h - win {
        for x0 in 0..=w - win {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..win {
                for dx in 0..win {
                    let wt = g[dy] * g[dx];
                    let (pa, pb) = (a.at(y0 + dy, x0 + dx), b.at(y0 + dy, x0 + dx));
                    ma += wt * pa;
                    mb += wt * pb;
                    saa += wt * pa * pa;
                    sbb += wt * pb * pb;
                    sab += wt * pa * pb;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    total / count as f64
}

fn ssim_oracle() -> Outcome {
    let cfg = SsimConfig::default();
    let mut rng = seed::rng(505);
    let mut worst: f64 = 0.0;
    let mut self_exact = true;
    for _ in 0..50 {
        let h = rng.random_range(4..=32);
        let w = rng.random_range(4..=32);
        let a = Image::new(h, w, (0..h * w).map(|_| rng.random::<f64>()).collect()).unwrap();
        let mix = rng.random::<f64>();
        let b = Image::new(
            h,
            w,
            (0..h * w).map(|i| (mix * a.pixels[i] + (1.0 - mix) * rng.random::<f64>()).clamp(0.0, 1.0)).collect(),
        )
        .unwrap();
        let fast = ssim(&a, &b, &cfg).unwrap();
        worst = worst.max((fast - naive_ssim(&a, &b, &cfg)).abs());
        self_exact &= ssim(&a, &a, &cfg).unwrap() == 1.0;
    }
    outcome(
        worst < 1e-6 && self_exact,
        format!("max deviation {worst:.2e} on 50 pairs, ssim(a,a) == 1 exactly: {self_exact}"),
    )
}

// ---------------------------------------------------------------- end to end

struct E2eRun {
    result: BoResult,
    oracle_best: f64,
    oracle_worst: f64,
    achieved: f64,
    bo: BoConfig,
    grid: FeasibleGrid,
}

fn e2e_config(seed: u64) -> BoConfig {
    BoConfig {
        init_samples: 10,
        max_iters: 40,
        seed,
        ..BoConfig::default()
    }
}

fn end_to_end_run(trained: &TrainedTvae, grid: &FeasibleGrid, s: u64) -> E2eRun {
    let mut rng = seed::rng(seed::indexed_seed(606, s));
    let target = trained.set.trajectories()[rng.random_range(0..trained.set.len())].clone();
    let bo = e2e_config(s);
    let objective = |t: &Trajectory| synthetic_target_objective(t, &target);
    let mut obj = objective;
    let result = zbo::run_on_grid(&mut obj, grid, &bo, Execution::default()).unwrap();

    let values: Vec<f64> = grid
        .feasible_cells()
        .into_iter()
        .map(|c| objective(grid.trajectory(c)).unwrap())
        .collect();
    let oracle_best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let oracle_worst = values.iter().copied().fold(f64::INFINITY, f64::min);
    let achieved = objective(&result.estimated.trajectory).unwrap();
    E2eRun {
        result,
        oracle_best,
        oracle_worst,
        achieved,
        bo,
        grid: grid.clone(),
    }
}

fn end_to_end_recovery(runs: &[E2eRun], elapsed: Duration) -> Outcome {
    let mut hits = 0;
    let mut gaps = Vec::new();
    for r in runs {
        let gap = (r.oracle_best - r.achieved) / (r.oracle_best - r.oracle_worst);
        if gap <= 0.05 {
            hits += 1;
        }
        gaps.push(format!("{:.1}%", 100.0 * gap));
    }
    outcome(
        hits >= 9 && elapsed < Duration::from_secs(600),
        format!("{hits}/10 seeds within 5% of range (gaps {}), {elapsed:.1?}", gaps.join(" ")),
    )
}

fn budget_and_feasibility(runs: &[E2eRun]) -> Outcome {
    let mut problems = Vec::new();
    for (s, r) in runs.iter().enumerate() {
        let h = &r.result.history;
        if h.len() > r.bo.budget() || r.result.evaluations != h.len() {
            problems.push(format!("seed {s}: {} evaluations for budget {}", h.len(), r.bo.budget()));
        }
        if h.iter().any(|e| !e.trajectory.values().iter().all(|&v| v > 0.0) || !r.grid.is_feasible(e.cell)) {
            problems.push(format!("seed {s}: infeasible evaluation"));
        }
        let mut best = f64::NEG_INFINITY;
        let mut prev = f64::NEG_INFINITY;
        for e in h {
            best = best.max(e.y);
            if best < prev {
                problems.push(format!("seed {s}: best-so-far decreased"));
            }
            prev = best;
        }
        if r.result.best_evaluated.value != best || !r.grid.is_feasible(r.result.estimated.cell) {
            problems.push(format!("seed {s}: inconsistent optimum report"));
        }
    }
    let pass = problems.is_empty();
    outcome(
        pass,
        if pass {
            format!("{} runs checked", runs.len())
        } else {
            problems.join("; ")
        },
    )
}

fn determinism_and_resume(trained: &TrainedTvae, grid: &FeasibleGrid) -> Outcome {
    let target = trained.set.trajectories()[3].clone();
    let bo = BoConfig {
        init_samples: 6,
        max_iters: 12,
        seed: 77,
        ..BoConfig::default()
    };
    let run_once = |exec: Execution| {
        let mut obj = |t: &Trajectory| synthetic_target_objective(t, &target);
        let r = zbo::run_on_grid(&mut obj, grid, &bo, exec).unwrap();
        format_history(&r.history)
    };
    let a = run_once(Execution::default());
    let b = run_once(Execution::default());
    let c = run_once(Execution::Sequential);

    let dir = tempfile::tempdir().unwrap();
    let rd = RunDir::create(dir.path()).unwrap();
    let mut obj = |t: &Trajectory| synthetic_target_objective(t, &target);
    let mut state = zbo::initialize(grid, &mut obj, &bo).unwrap();
    zbo::continue_run(&mut state, grid, &mut obj, &bo, Execution::default(), Some(5), |s, _| rd.write_state(s)).unwrap();
    drop(state);
    let mut resumed = rd.read_state().unwrap();
    let mut obj = |t: &Trajectory| synthetic_target_objective(t, &target);
    zbo::continue_run(&mut resumed, grid, &mut obj, &bo, Execution::default(), None, |_, _| Ok(())).unwrap();
    let d = format_history(&resumed.history);

    let same = a == b && a == c;
    let resumed_ok = a == d;
    outcome(
        same && resumed_ok,
        format!("repeat runs byte-identical: {same}, resumed history identical: {resumed_ok}"),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    };

    report("GP oracle equivalence", gp_oracle_equivalence());
    report("NLL gradient check", nll_gradient_check());
    report("GP hyperparameter recovery", gp_recovery());
    report("acquisition properties", acquisition_properties());
    report("TVAE gradient check", tvae_gradient_check());

    let (trained, train_report, train_time) = train_reference_tvae(11);
    report("TVAE training", tvae_training(&trained, &train_report, train_time));
    report("SSIM oracle", ssim_oracle());

    let start = Instant::now();
    let bo = e2e_config(0);
    let grid = zbo::build_feasible_grid(&trained.model, &trained.set, &bo, Execution::default()).unwrap();
    let runs: Vec<E2eRun> = (0..10).map(|s| end_to_end_run(&trained, &grid, s)).collect();
    report("end-to-end synthetic recovery", end_to_end_recovery(&runs, start.elapsed()));
    report("budget and feasibility invariants", budget_and_feasibility(&runs));
    report("determinism and resumability", determinism_and_resume(&trained, &grid));

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
