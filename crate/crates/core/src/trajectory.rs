//! Schedules of per-cycle scale factors and the generators that produce them.
//!
//! A [`Trajectory`] is one positive value per training cycle. Three families
//! of training schedules are supported: linear cooldowns, randomly segmented
//! plateaus with additive noise, and sinusoids. Sets of trajectories are
//! rescaled jointly so that every member lives on the same scale before they
//! are used to train the latent model.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Default value range used when a config does not set one.
pub const DEFAULT_VALUE_RANGE: (f64, f64) = (0.05, 5.0);

/// One scale factor per training cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    values: Vec<f64>,
}

impl Trajectory {
    /// Wraps `values`, rejecting empty or non-finite input. Feasibility is
    /// not checked here; decoders may emit infeasible schedules.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("trajectory must have at least one value".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("non-finite value at index {i}")));
        }
        Ok(Trajectory { values })
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Trajectory { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn n_epochs(&self) -> usize {
        self.values.len()
    }

    pub fn is_feasible(&self) -> bool {
        is_feasible(&self.values)
    }
}

/// True iff every value is strictly positive (and finite).
pub fn is_feasible(values: &[f64]) -> bool {
    values.iter().all(|&v| v > 0.0 && v.is_finite())
}

/// Family-specific generator parameters. `None` fields are drawn from the
/// member seed within the `FamilySpec` value range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    LinearCooldown {
        #[serde(default)]
        start: Option<f64>,
        #[serde(default)]
        end: Option<f64>,
    },
    SegmentedRandom {
        segments: usize,
        #[serde(default)]
        noise_sd: f64,
    },
    Periodic {
        period: f64,
        #[serde(default)]
        amplitude: Option<f64>,
        #[serde(default)]
        offset: Option<f64>,
        #[serde(default)]
        phase: Option<f64>,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::LinearCooldown { .. } => "linear_cooldown",
            Family::SegmentedRandom { .. } => "segmented_random",
            Family::Periodic { .. } => "periodic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    #[serde(flatten)]
    pub family: Family,
    pub n_epochs: usize,
    #[serde(default = "default_range")]
    pub value_range: (f64, f64),
    #[serde(default)]
    pub seed: u64,
}

fn default_range() -> (f64, f64) {
    DEFAULT_VALUE_RANGE
}

impl FamilySpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.value_range;
        if self.n_epochs == 0 {
            return Err(Error::InvalidSpec("n_epochs must be positive".into()));
        }
        if !(lo > 0.0 && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidSpec(format!("value range lower bound {lo} must be > 0")));
        }
        if hi < lo {
            return Err(Error::InvalidSpec(format!("value range ({lo}, {hi}) is inverted")));
        }
        match self.family {
            Family::LinearCooldown { start, end } => {
                if self.n_epochs < 2 {
                    return Err(Error::InvalidSpec("linear cooldown needs n_epochs >= 2".into()));
                }
                for v in [start, end].into_iter().flatten() {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(Error::InvalidSpec(format!("cooldown endpoint {v} must be > 0")));
                    }
                }
            }
            Family::SegmentedRandom { segments, noise_sd } => {
                if segments == 0 {
                    return Err(Error::InvalidSpec("segments must be >= 1".into()));
                }
                if segments > self.n_epochs {
                    return Err(Error::InvalidSpec(format!(
                        "{segments} segments exceed {} epochs",
                        self.n_epochs
                    )));
                }
                if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
                    return Err(Error::InvalidSpec(format!("noise_sd {noise_sd} must be >= 0")));
                }
            }
            Family::Periodic {
                period,
                amplitude,
                offset,
                phase,
            } => {
                if !(period >= 2.0 && period.is_finite()) {
                    return Err(Error::InvalidSpec(format!("period {period} must be >= 2")));
                }
                if let Some(a) = amplitude {
                    if !(a >= 0.0 && a.is_finite()) {
                        return Err(Error::InvalidSpec(format!("amplitude {a} must be >= 0")));
                    }
                }
                if let (Some(a), Some(o)) = (amplitude, offset) {
                    if a >= o {
                        return Err(Error::InvalidSpec(format!(
                            "amplitude {a} must be below offset {o}"
                        )));
                    }
                }
                if let Some(o) = offset {
                    if !(o > 0.0 && o.is_finite()) {
                        return Err(Error::InvalidSpec(format!("offset {o} must be > 0")));
                    }
                }
                if let Some(p) = phase {
                    if !p.is_finite() {
                        return Err(Error::InvalidSpec("phase must be finite".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Straight line from `start` to `end` over `n_epochs` cycles.
pub fn gen_linear_cooldown(n_epochs: usize, start: f64, end: f64) -> Result<Trajectory> {
    if n_epochs < 2 {
        return Err(Error::InvalidSpec("linear cooldown needs n_epochs >= 2".into()));
    }
    if !(start > 0.0 && end > 0.0 && start.is_finite() && end.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "cooldown endpoints ({start}, {end}) must be > 0"
        )));
    }
    let step = (end - start) / (n_epochs - 1) as f64;
    let mut values: Vec<f64> = (0..n_epochs).map(|i| start + step * i as f64).collect();
    values[n_epochs - 1] = end;
    Ok(Trajectory::from_raw(values))
}

/// Near-equal contiguous blocks; the remainder goes to the earliest blocks.
pub fn segment_lengths(n_epochs: usize, segments: usize) -> Vec<usize> {
    let base = n_epochs / segments;
    let rem = n_epochs % segments;
    (0..segments).map(|s| base + usize::from(s < rem)).collect()
}

/// Piecewise-constant levels drawn from the value range plus Gaussian noise,
/// floored at half the lower bound.
pub fn gen_segmented_random(spec: &FamilySpec) -> Result<Trajectory> {
    spec.validate()?;
    let Family::SegmentedRandom { segments, noise_sd } = spec.family else {
        return Err(Error::InvalidSpec(format!(
            "expected segmented_random, got {}",
            spec.family.name()
        )));
    };
    let (lo, hi) = spec.value_range;
    let mut rng = seed::rng(spec.seed);
    let mut values = Vec::with_capacity(spec.n_epochs);
    for len in segment_lengths(spec.n_epochs, segments) {
        let level = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        values.extend(std::iter::repeat_n(level, len));
    }
    if noise_sd > 0.0 {
        let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        let floor = lo / 2.0;
        for v in values.iter_mut() {
            *v = (*v + noise.sample(&mut rng)).max(floor);
        }
    }
    Ok(Trajectory::from_raw(values))
}

/// `offset + amplitude * sin(2*pi*i/period + phase)`.
pub fn gen_periodic(spec: &FamilySpec) -> Result<Trajectory> {
    spec.validate()?;
    let Family::Periodic {
        period,
        amplitude,
        offset,
        phase,
    } = spec.family
    else {
        return Err(Error::InvalidSpec(format!(
            "expected periodic, got {}",
            spec.family.name()
        )));
    };
    let (lo, hi) = spec.value_range;
    let mut rng = seed::rng(spec.seed);
    let offset = offset.unwrap_or(0.5 * (lo + hi));
    let amplitude = match amplitude {
        Some(a) => a,
        None => rng.random_range(0.25..=0.9) * 0.5 * (hi - lo).min(2.0 * offset),
    };
    let phase = match phase {
        Some(p) => p,
        None => rng.random_range(0.0..2.0 * PI),
    };
    if amplitude >= offset {
        return Err(Error::InvalidSpec(format!(
            "amplitude {amplitude} must be below offset {offset}"
        )));
    }
    let values = (0..spec.n_epochs)
        .map(|i| offset + amplitude * (2.0 * PI * i as f64 / period + phase).sin())
        .collect();
    Ok(Trajectory::from_raw(values))
}

/// Generates one member of a family, drawing unspecified parameters from the seed.
pub fn generate(spec: &FamilySpec) -> Result<Trajectory> {
    spec.validate()?;
    match spec.family {
        Family::LinearCooldown { start, end } => {
            let (lo, hi) = spec.value_range;
            let mid = 0.5 * (lo + hi);
            let mut rng = seed::rng(spec.seed);
            let start = start.unwrap_or_else(|| rng.random_range(mid..=hi));
            let end = end.unwrap_or_else(|| rng.random_range(lo..=mid));
            gen_linear_cooldown(spec.n_epochs, start, end)
        }
        Family::SegmentedRandom { .. } => gen_segmented_random(spec),
        Family::Periodic { .. } => gen_periodic(spec),
    }
}

/// A batch of `count` members drawn from one family template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyBatch {
    pub count: usize,
    pub spec: FamilySpec,
}

/// Non-empty collection of equal-length trajectories, optionally with the
/// resolved spec that produced each member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    trajectories: Vec<Trajectory>,
    #[serde(default)]
    provenance: Vec<FamilySpec>,
}

impl TrajectorySet {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        Self::with_provenance(trajectories, Vec::new())
    }

    pub fn with_provenance(trajectories: Vec<Trajectory>, provenance: Vec<FamilySpec>) -> Result<Self> {
        let Some(first) = trajectories.first() else {
            return Err(Error::Shape("trajectory set is empty".into()));
        };
        let n = first.n_epochs();
        if let Some(bad) = trajectories.iter().find(|t| t.n_epochs() != n) {
            return Err(Error::Shape(format!(
                "mixed trajectory lengths {n} and {}",
                bad.n_epochs()
            )));
        }
        if !provenance.is_empty() && provenance.len() != trajectories.len() {
            return Err(Error::Shape(format!(
                "{} provenance entries for {} trajectories",
                provenance.len(),
                trajectories.len()
            )));
        }
        Ok(TrajectorySet {
            trajectories,
            provenance,
        })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn provenance(&self) -> &[FamilySpec] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn n_epochs(&self) -> usize {
        self.trajectories[0].n_epochs()
    }

    /// Family name per member, when provenance is known.
    pub fn family_labels(&self) -> Vec<&'static str> {
        self.provenance.iter().map(|p| p.family.name()).collect()
    }

    pub fn global_range(&self) -> (f64, f64) {
        self.trajectories
            .iter()
            .flat_map(|t| t.values())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Writes one row per trajectory under an `e0..e{N-1}` header, 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record((0..self.n_epochs()).map(|i| format!("e{i}")))?;
        for t in &self.trajectories {
            out.write_record(t.values().iter().map(|v| format!("{v:.16e}")))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let width = rdr.headers()?.len();
        let mut trajectories = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != width {
                return Err(Error::Shape(format!("row {row} has {} columns, header {width}", rec.len())));
            }
            let values = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Shape(format!("row {row}: bad value {s:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            trajectories.push(Trajectory::new(values)?);
        }
        TrajectorySet::new(trajectories)
    }

    /// JSON array of arrays, one per trajectory.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.trajectories)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Vec<Vec<f64>> = serde_json::from_str(s)?;
        TrajectorySet::new(raw.into_iter().map(Trajectory::new).collect::<Result<_>>()?)
    }
}

/// Generates every batch, seeding member `i` of batch `b` from `(seed, spec.seed, b, i)`.
pub fn generate_set(batches: &[FamilyBatch], seed: u64) -> Result<TrajectorySet> {
    let mut trajectories = Vec::new();
    let mut provenance = Vec::new();
    for (b, batch) in batches.iter().enumerate() {
        batch.spec.validate()?;
        let batch_seed = seed::indexed_seed(seed ^ batch.spec.seed, b as u64);
        for i in 0..batch.count {
            let mut spec = batch.spec.clone();
            spec.seed = seed::indexed_seed(batch_seed, i as u64);
            trajectories.push(generate(&spec)?);
            provenance.push(spec);
        }
    }
    TrajectorySet::with_provenance(trajectories, provenance)
}

/// Affine min-max rescale of the whole set onto `target`, using the global
/// extremes so relative scale between members is preserved.
pub fn rescale_set(set: &TrajectorySet, target: (f64, f64)) -> Result<TrajectorySet> {
    let (lo, hi) = target;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidSpec(format!("target range ({lo}, {hi}) needs hi > lo > 0")));
    }
    let (gmin, gmax) = set.global_range();
    if gmax <= gmin {
        return Err(Error::DegenerateRange(gmin));
    }
    let span = gmax - gmin;
    let trajectories = set
        .trajectories
        .iter()
        .map(|t| {
            Trajectory::from_raw(
                t.values()
                    .iter()
                    .map(|&v| {
                        if v == gmax {
                            hi
                        } else {
                            lo + (v - gmin) / span * (hi - lo)
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    Ok(TrajectorySet {
        trajectories,
        provenance: set.provenance.clone(),
    })
}
