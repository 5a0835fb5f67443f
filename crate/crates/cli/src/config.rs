//! Run configuration file.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "trajectories": {
//!     "n_epochs": 120,
//!     "value_range": [0.05, 5.0],
//!     "families": [
//!       {"count": 100, "family": "linear_cooldown"},
//!       {"count": 100, "family": "segmented_random", "segments": 3, "noise_sd": 0.1}
//!     ]
//!   },
//!   "tvae": {"epochs": 1000},
//!   "bo": {"init_samples": 20, "max_iters": 120},
//!   "objective": {"kind": "synthetic_target", "target": {"training_index": 0}}
//! }
//! ```
//!
//! Every stage seed is derived from the global `seed`; seeds written inside
//! sections are replaced when the config is resolved.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use zbo_core::seed::sub_seed;
use zbo_core::trajectory::{Family, FamilyBatch, FamilySpec, DEFAULT_VALUE_RANGE};
use zbo_core::{BoConfig, ObjectiveSpec, TvaeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyEntry {
    pub count: usize,
    #[serde(flatten)]
    pub family: Family,
    /// Overrides the section-wide range for this family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySection {
    pub n_epochs: usize,
    #[serde(default = "default_range")]
    pub value_range: (f64, f64),
    /// Rescale the whole set onto `value_range` after generation.
    #[serde(default = "yes")]
    pub rescale: bool,
    pub families: Vec<FamilyEntry>,
}

fn default_range() -> (f64, f64) {
    DEFAULT_VALUE_RANGE
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Workspace directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub trajectories: TrajectorySection,
    #[serde(default = "default_tvae")]
    pub tvae: TvaeConfig,
    #[serde(default)]
    pub bo: BoConfig,
    pub objective: ObjectiveSpec,
}

fn default_tvae() -> TvaeConfig {
    TvaeConfig::new(0)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Applies overrides, derives stage seeds and fills derived fields, then
    /// checks cross-field consistency.
    pub fn resolve(mut self, seed: Option<u64>, out: Option<&Path>) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.out = Some(o.to_path_buf());
        }
        let n = self.trajectories.n_epochs;
        if self.tvae.input_dim == 0 {
            self.tvae.input_dim = n;
        }
        self.tvae.seed = sub_seed(self.seed, "tvae");
        self.bo.seed = sub_seed(self.seed, "bo");
        self.objective.seed = sub_seed(self.seed, "objective");
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let t = &self.trajectories;
        if t.n_epochs == 0 {
            bail!("trajectories.n_epochs must be positive");
        }
        if t.families.is_empty() || t.families.iter().all(|f| f.count == 0) {
            bail!("trajectories.families must produce at least one trajectory");
        }
        if self.tvae.input_dim != t.n_epochs {
            bail!(
                "tvae.input_dim {} does not match trajectories.n_epochs {}",
                self.tvae.input_dim,
                t.n_epochs
            );
        }
        self.tvae.validate()?;
        self.bo.validate()?;
        for b in self.family_batches() {
            b.spec.validate()?;
        }
        Ok(())
    }

    pub fn family_batches(&self) -> Vec<FamilyBatch> {
        let t = &self.trajectories;
        t.families
            .iter()
            .map(|f| FamilyBatch {
                count: f.count,
                spec: FamilySpec {
                    family: f.family.clone(),
                    n_epochs: t.n_epochs,
                    value_range: f.value_range.unwrap_or(t.value_range),
                    seed: 0,
                },
            })
            .collect()
    }

    pub fn gen_seed(&self) -> u64 {
        sub_seed(self.seed, "gen")
    }

    pub fn workspace(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .context("no output directory: pass --out or set \"out\" in the config")
    }
}
