use serde::{Deserialize, Serialize};

use crate::trajectory::Trajectory;

/// A point in the two-dimensional latent space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentPoint {
    pub z1: f64,
    pub z2: f64,
}

impl LatentPoint {
    pub fn new(z1: f64, z2: f64) -> Self {
        LatentPoint { z1, z2 }
    }

    pub fn coords(&self) -> [f64; 2] {
        [self.z1, self.z2]
    }

    pub fn is_finite(&self) -> bool {
        self.z1.is_finite() && self.z2.is_finite()
    }
}

impl From<[f64; 2]> for LatentPoint {
    fn from(c: [f64; 2]) -> Self {
        LatentPoint::new(c[0], c[1])
    }
}

/// Anything that maps latent points back to trajectories.
///
/// Implementations must be pure: the same point always decodes to the same
/// trajectory.
pub trait LatentDecoder: Sync {
    fn decode(&self, z: LatentPoint) -> Trajectory;
}

/// Anything that embeds trajectories as deterministic latent points.
pub trait LatentEncoder: Sync {
    fn encode_mean(&self, t: &Trajectory) -> crate::Result<LatentPoint>;
}
