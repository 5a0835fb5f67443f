//! Objective functions over decoded trajectories (larger is better).

pub mod external;
pub mod manifold;
pub mod ssim;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::trajectory::{Trajectory, TrajectorySet};

pub use external::{ExternalClient, ExternalObjective};
pub use manifold::{
    between_class_loss, classification_objective, within_class_loss, ManifoldGrid, ManifoldScoring, ManifoldSet,
};
pub use ssim::{ssim, Image, SsimConfig};

/// An expensive black-box function of a trajectory.
pub trait Objective {
    fn evaluate(&mut self, t: &Trajectory) -> Result<f64>;
}

impl<F> Objective for F
where
    F: FnMut(&Trajectory) -> Result<f64>,
{
    fn evaluate(&mut self, t: &Trajectory) -> Result<f64> {
        self(t)
    }
}

/// `-RMSE(t, target)`; zero exactly at the target.
pub fn synthetic_target_objective(t: &Trajectory, target: &Trajectory) -> Result<f64> {
    if t.n_epochs() != target.n_epochs() {
        return Err(Error::Shape(format!(
            "trajectory length {} vs target length {}",
            t.n_epochs(),
            target.n_epochs()
        )));
    }
    let mse = t
        .values()
        .iter()
        .zip(target.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / t.n_epochs() as f64;
    Ok(-mse.sqrt())
}

/// Negative root-mean-square step between consecutive cycles.
pub fn synthetic_smoothness_objective(t: &Trajectory) -> Result<f64> {
    let v = t.values();
    if v.len() < 2 {
        return Err(Error::Shape("smoothness needs at least two values".into()));
    }
    let ms = v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    Ok(-ms.sqrt())
}

/// Where a synthetic target comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Values(Vec<f64>),
    TrainingMember { training_index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveKind {
    SyntheticTarget {
        target: TargetSpec,
    },
    SyntheticSmoothness,
    /// Scores a fixed manifold set loaded from disk.
    ManifoldSeparation {
        manifolds_path: PathBuf,
        #[serde(default)]
        scoring: ManifoldScoring,
    },
    External {
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
        #[serde(default)]
        scoring: ManifoldScoring,
        #[serde(default = "empty_object")]
        config_override: Value,
    },
}

fn default_timeout() -> f64 {
    600.0
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    #[serde(flatten)]
    pub kind: ObjectiveKind,
    #[serde(default)]
    pub seed: u64,
}

impl ObjectiveSpec {
    pub fn synthetic_target(target: Trajectory) -> Self {
        ObjectiveSpec {
            kind: ObjectiveKind::SyntheticTarget {
                target: TargetSpec::Values(target.into_values()),
            },
            seed: 0,
        }
    }

    /// Instantiates the objective. `training` resolves training-member
    /// targets and checks target lengths.
    pub fn build(&self, training: Option<&TrajectorySet>) -> Result<Box<dyn Objective>> {
        match &self.kind {
            ObjectiveKind::SyntheticTarget { target } => {
                let target = match target {
                    TargetSpec::Values(v) => Trajectory::new(v.clone())?,
                    TargetSpec::TrainingMember { training_index } => {
                        let set = training.ok_or_else(|| {
                            Error::Config("training-member target needs the training set".into())
                        })?;
                        set.trajectories()
                            .get(*training_index)
                            .cloned()
                            .ok_or_else(|| {
                                Error::Config(format!("training index {training_index} out of range ({})", set.len()))
                            })?
                    }
                };
                if let Some(set) = training {
                    if set.n_epochs() != target.n_epochs() {
                        return Err(Error::Config(format!(
                            "target has {} values, trajectories have {}",
                            target.n_epochs(),
                            set.n_epochs()
                        )));
                    }
                }
                Ok(Box::new(move |t: &Trajectory| synthetic_target_objective(t, &target)))
            }
            ObjectiveKind::SyntheticSmoothness => Ok(Box::new(|t: &Trajectory| synthetic_smoothness_objective(t))),
            ObjectiveKind::ManifoldSeparation {
                manifolds_path,
                scoring,
            } => {
                let text = std::fs::read_to_string(manifolds_path)?;
                let set: ManifoldSet = serde_json::from_str(&text)?;
                set.validate()?;
                let value = scoring.score(&set, self.seed)?;
                Ok(Box::new(move |_: &Trajectory| Ok(value)))
            }
            ObjectiveKind::External {
                command,
                timeout_secs,
                scoring,
                config_override,
            } => {
                if !(*timeout_secs > 0.0 && timeout_secs.is_finite()) {
                    return Err(Error::Config("external timeout must be positive".into()));
                }
                let client = ExternalClient::spawn(command, Duration::from_secs_f64(*timeout_secs))?;
                Ok(Box::new(ExternalObjective::new(
                    client,
                    *scoring,
                    self.seed,
                    config_override.clone(),
                )))
            }
        }
    }
}

/// One-shot evaluation of `t` under `spec`.
pub fn evaluate(spec: &ObjectiveSpec, t: &Trajectory) -> Result<f64> {
    spec.build(None)?.evaluate(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_objective_values() {
        let target = Trajectory::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(synthetic_target_objective(&target, &target).unwrap(), 0.0);
        let shifted = Trajectory::new(vec![2.0, 3.0, 4.0]).unwrap();
        assert_eq!(synthetic_target_objective(&shifted, &target).unwrap(), -1.0);
        let short = Trajectory::new(vec![1.0]).unwrap();
        assert!(matches!(synthetic_target_objective(&short, &target), Err(Error::Shape(_))));
    }

    #[test]
    fn dispatch_matches_direct_call() {
        let target = Trajectory::new(vec![0.5, 0.7, 0.2]).unwrap();
        let t = Trajectory::new(vec![0.4, 0.9, 0.3]).unwrap();
        let spec = ObjectiveSpec::synthetic_target(target.clone());
        assert_eq!(evaluate(&spec, &t).unwrap(), synthetic_target_objective(&t, &target).unwrap());
        let smooth = ObjectiveSpec {
            kind: ObjectiveKind::SyntheticSmoothness,
            seed: 0,
        };
        assert_eq!(evaluate(&smooth, &t).unwrap(), synthetic_smoothness_objective(&t).unwrap());
    }

    #[test]
    fn training_member_target() {
        let set = TrajectorySet::new(vec![
            Trajectory::new(vec![1.0, 1.0]).unwrap(),
            Trajectory::new(vec![2.0, 0.5]).unwrap(),
        ])
        .unwrap();
        let spec: ObjectiveSpec =
            serde_json::from_str(r#"{"kind":"synthetic_target","target":{"training_index":1}}"#).unwrap();
        let mut obj = spec.build(Some(&set)).unwrap();
        assert_eq!(obj.evaluate(&set.trajectories()[1]).unwrap(), 0.0);
        assert!(spec.build(None).is_err());
    }

    #[test]
    fn manifold_separation_equals_direct_objective() {
        let dir = tempfile::tempdir().unwrap();
        let grid = |id: usize, v: f64| {
            ManifoldGrid::new(id, 2, 1, vec![Image::filled(6, 6, v), Image::filled(6, 6, 1.0 - v)]).unwrap()
        };
        let set = ManifoldSet {
            dynamic_range: 1.0,
            manifolds: vec![grid(0, 0.1), grid(1, 0.6), grid(2, 0.3)],
        };
        let path = dir.path().join("m.json");
        std::fs::write(&path, serde_json::to_string(&set).unwrap()).unwrap();
        let spec = ObjectiveSpec {
            kind: ObjectiveKind::ManifoldSeparation {
                manifolds_path: path,
                scoring: ManifoldScoring::default(),
            },
            seed: 5,
        };
        let t = Trajectory::new(vec![1.0]).unwrap();
        let direct = classification_objective(&set.manifolds, 10, 5, &SsimConfig::default()).unwrap();
        assert_eq!(evaluate(&spec, &t).unwrap(), direct);
    }
}
