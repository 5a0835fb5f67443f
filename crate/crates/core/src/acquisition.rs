//! Acquisition functions (maximization convention) and the masked selector.
//!
//! The standard normal CDF is `0.5 * erfc(-x / sqrt(2))` with the musl
//! erfc from `libm`, which is accurate to a few ulps and pure Rust, so
//! results are bit-stable across platforms.

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::gp::GpPosterior;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Gaussian expected improvement over `best + xi`.
pub fn expected_improvement(mean: f64, sd: f64, best: f64, xi: f64) -> f64 {
    let gain = mean - best - xi;
    if sd <= 0.0 {
        return gain.max(0.0);
    }
    let u = gain / sd;
    // Above the threshold write it as gain plus a non-negative tail term so
    // that growing sd can never round the value down.
    let ei = if u > 0.0 { gain + sd * ei_unit(-u) } else { sd * ei_unit(u) };
    ei.max(0.0)
}

/// `u * Phi(u) + phi(u)`. Far in the lower tail the two terms cancel, so
/// there it is evaluated from the continued fraction of the Mills ratio.
fn ei_unit(u: f64) -> f64 {
    if u >= -3.0 {
        return u * normal_cdf(u) + normal_pdf(u);
    }
    let x = -u;
    // e = x + 2/(x + 3/(x + 4/(...))), d = x + 1/e; result = phi(x) / (d e)
    let mut e = x;
    for k in (2..=80).rev() {
        e = x + k as f64 / e;
    }
    let d = x + 1.0 / e;
    normal_pdf(x) / (d * e)
}

pub fn probability_of_improvement(mean: f64, sd: f64, best: f64, xi: f64) -> f64 {
    let gain = mean - best - xi;
    if sd <= 0.0 {
        return if gain > 0.0 { 1.0 } else { 0.0 };
    }
    normal_cdf(gain / sd).clamp(0.0, 1.0)
}

/// Upper confidence bound `mean + kappa * sd`.
pub fn confidence_bound(mean: f64, sd: f64, kappa: f64) -> f64 {
    mean + kappa * sd
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcquisitionKind {
    Ei,
    Pi,
    Cb,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    #[serde(default = "default_kind")]
    pub kind: AcquisitionKind,
    #[serde(default)]
    pub xi: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_kind() -> AcquisitionKind {
    AcquisitionKind::Ei
}
fn default_kappa() -> f64 {
    2.0
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            kind: default_kind(),
            xi: 0.0,
            kappa: default_kappa(),
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(Error::Config(format!("xi must be >= 0, got {}", self.xi)));
        }
        if !self.kappa.is_finite() {
            return Err(Error::Config("kappa must be finite".into()));
        }
        Ok(())
    }

    pub fn score(&self, post: &GpPosterior, best: f64) -> f64 {
        let sd = post.sd();
        match self.kind {
            AcquisitionKind::Ei => expected_improvement(post.mean, sd, best, self.xi),
            AcquisitionKind::Pi => probability_of_improvement(post.mean, sd, best, self.xi),
            AcquisitionKind::Cb => confidence_bound(post.mean, sd, self.kappa),
        }
    }

    /// Whether the maximum score measures expected gain, so that a
    /// vanishing value signals convergence. Confidence bounds do not.
    pub fn supports_convergence(&self) -> bool {
        matches!(self.kind, AcquisitionKind::Ei | AcquisitionKind::Pi)
    }
}

pub fn score_all(posteriors: &[GpPosterior], best: f64, cfg: &AcquisitionConfig, exec: Execution) -> Vec<f64> {
    exec::map_slice(posteriors, exec, |p| cfg.score(p, best))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub value: f64,
}

/// Index of the largest score among feasible, unevaluated cells; ties go to
/// the lowest index. NaN scores are never selected.
pub fn argmax_masked(scores: &[f64], feasible: &[bool], evaluated: &[bool]) -> Result<Selection> {
    if scores.len() != feasible.len() || scores.len() != evaluated.len() {
        return Err(Error::Shape(format!(
            "{} scores, {} feasibility flags, {} evaluated flags",
            scores.len(),
            feasible.len(),
            evaluated.len()
        )));
    }
    let mut best: Option<Selection> = None;
    for (i, &s) in scores.iter().enumerate() {
        if !feasible[i] || evaluated[i] || s.is_nan() {
            continue;
        }
        if best.is_none_or(|b| s > b.value) {
            best = Some(Selection { index: i, value: s });
        }
    }
    best.ok_or(Error::SearchExhausted)
}

/// Scores every cell and picks the best feasible, unevaluated one.
pub fn select_next(
    posteriors: &[GpPosterior],
    feasible: &[bool],
    evaluated: &[bool],
    best: f64,
    cfg: &AcquisitionConfig,
) -> Result<Selection> {
    let scores = score_all(posteriors, best, cfg, Execution::Sequential);
    argmax_masked(&scores, feasible, evaluated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn post(mean: f64, sd: f64) -> GpPosterior {
        GpPosterior {
            mean,
            variance: sd * sd,
        }
    }

    #[test]
    fn cdf_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1.5e-7);
        assert!((normal_cdf(-1.96) - 0.024_997_895_148_220_4).abs() < 1.5e-7);
    }

    #[test]
    fn ei_edge_cases() {
        assert_eq!(expected_improvement(1.0, 0.0, 1.0, 0.0), 0.0);
        assert!((expected_improvement(1.0, 1.0, 1.0, 0.0) - 0.398_942_3).abs() < 1e-7);
        assert_eq!(expected_improvement(3.0, 0.0, 1.0, 0.5), 1.5);
        assert_eq!(expected_improvement(0.0, 0.0, 1.0, 0.0), 0.0);
    }

    #[test]
    fn ei_lower_tail_is_accurate() {
        let cases = [
            (-2.5, 0.002_004_137_179_128_199_4),
            (-3.5, 5.848_091_842_142_244e-5),
            (-6.0, 1.563_569_795_970_966_4e-10),
            (-15.0, 2.426_025_087_528_983e-52),
            (-30.0, 1.631_956_734_091_401_2e-199),
        ];
        for (u, want) in cases {
            let got = expected_improvement(u, 1.0, 0.0, 0.0);
            assert!(((got - want) / want).abs() < 1e-13, "u={u}: {got} vs {want}");
        }
    }

    #[test]
    fn pi_edge_cases() {
        assert_eq!(probability_of_improvement(1.25, 0.3, 1.0, 0.25), 0.5);
        assert_eq!(probability_of_improvement(0.5, 0.0, 1.0, 0.0), 0.0);
        assert_eq!(probability_of_improvement(1.5, 0.0, 1.0, 0.0), 1.0);
    }

    #[test]
    fn cb_values() {
        assert_eq!(confidence_bound(0.7, 3.0, 0.0), 0.7);
        assert_eq!(confidence_bound(1.0, 0.5, 2.0), 2.0);
    }

    #[test]
    fn selects_single_feasible_point() {
        let posts = vec![post(5.0, 1.0), post(0.0, 0.1), post(9.0, 2.0)];
        let s = select_next(&posts, &[false, true, false], &[false; 3], 0.0, &AcquisitionConfig::default()).unwrap();
        assert_eq!(s.index, 1);
    }

    #[test]
    fn ei_prefers_larger_sd() {
        let mut posts = vec![post(0.0, 0.5); 9];
        posts[6] = post(0.0, 0.8);
        let s = select_next(&posts, &[true; 9], &[false; 9], 0.0, &AcquisitionConfig::default()).unwrap();
        assert_eq!(s.index, 6);
    }

    #[test]
    fn ties_go_to_lowest_index_and_evaluated_are_skipped() {
        let posts = vec![post(1.0, 1.0); 4];
        let mut evaluated = [false; 4];
        let cfg = AcquisitionConfig::default();
        assert_eq!(select_next(&posts, &[true; 4], &evaluated, 0.0, &cfg).unwrap().index, 0);
        evaluated[0] = true;
        assert_eq!(select_next(&posts, &[true; 4], &evaluated, 0.0, &cfg).unwrap().index, 1);
    }

    #[test]
    fn exhausted_search() {
        let posts = vec![post(1.0, 1.0); 2];
        let r = select_next(&posts, &[true, false], &[true, false], 0.0, &AcquisitionConfig::default());
        assert!(matches!(r, Err(Error::SearchExhausted)));
    }

    proptest! {
        #[test]
        fn ei_nonnegative_and_monotone_in_sd(
            mean in -10.0f64..10.0,
            sd in 0.0f64..5.0,
            dsd in 0.0f64..5.0,
            best in -10.0f64..10.0,
            xi in 0.0f64..1.0,
        ) {
            let a = expected_improvement(mean, sd, best, xi);
            let b = expected_improvement(mean, sd + dsd, best, xi);
            prop_assert!(a >= 0.0);
            prop_assert!(b >= a - 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn pi_in_unit_interval_and_monotone_in_mean(
            mean in -10.0f64..10.0,
            dm in 0.0f64..5.0,
            sd in 0.0f64..5.0,
            best in -10.0f64..10.0,
        ) {
            let a = probability_of_improvement(mean, sd, best, 0.0);
            let b = probability_of_improvement(mean + dm, sd, best, 0.0);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b >= a);
        }

        #[test]
        fn cb_monotone_in_sd(mean in -5.0f64..5.0, sd in 0.0f64..3.0, dsd in 0.0f64..3.0, kappa in 0.01f64..4.0) {
            prop_assert!(confidence_bound(mean, sd + dsd, kappa) >= confidence_bound(mean, sd, kappa));
        }
    }
}
