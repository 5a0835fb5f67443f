use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::latent::{LatentDecoder, LatentPoint};
use crate::trajectory::Trajectory;

/// Axis-aligned latent box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub z1_lo: f64,
    pub z1_hi: f64,
    pub z2_lo: f64,
    pub z2_hi: f64,
}

impl GridBounds {
    /// Bounding box of `points`, padded by `padding` times the extent on
    /// each side. A zero extent is treated as one.
    pub fn around(points: &[LatentPoint], padding: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Shape("cannot bound an empty point set".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Shape("non-finite latent embedding".into()));
        }
        let (mut a_lo, mut a_hi, mut b_lo, mut b_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            a_lo = a_lo.min(p.z1);
            a_hi = a_hi.max(p.z1);
            b_lo = b_lo.min(p.z2);
            b_hi = b_hi.max(p.z2);
        }
        let pad = |lo: f64, hi: f64| {
            let ext = if hi > lo { hi - lo } else { 1.0 };
            (lo - padding * ext, hi + padding * ext)
        };
        let (z1_lo, z1_hi) = pad(a_lo, a_hi);
        let (z2_lo, z2_hi) = pad(b_lo, b_hi);
        Ok(GridBounds {
            z1_lo,
            z1_hi,
            z2_lo,
            z2_hi,
        })
    }
}

/// Regular grid of cell centers over the latent box, with each cell's
/// decoded trajectory and feasibility flag. Cells are stored row-major:
/// `index = row * n1 + col`, columns along `z1`, rows along `z2`.
#[derive(Debug, Clone)]
pub struct FeasibleGrid {
    bounds: GridBounds,
    n1: usize,
    n2: usize,
    mask: Vec<bool>,
    decoded: Vec<Trajectory>,
}

impl FeasibleGrid {
    pub fn build<D: LatentDecoder + ?Sized>(decoder: &D, bounds: GridBounds, resolution: (usize, usize), exec: Execution) -> Result<Self> {
        let (n1, n2) = resolution;
        if n1 == 0 || n2 == 0 {
            return Err(Error::Config(format!("grid resolution {n1}x{n2} must be positive")));
        }
        let centers: Vec<LatentPoint> = (0..n1 * n2).map(|i| cell_center(&bounds, n1, n2, i)).collect();
        let decoded = exec::map_slice(&centers, exec, |&z| decoder.decode(z));
        let mask: Vec<bool> = decoded.iter().map(Trajectory::is_feasible).collect();
        if !mask.iter().any(|&m| m) {
            return Err(Error::InfeasibleSpace);
        }
        Ok(FeasibleGrid {
            bounds,
            n1,
            n2,
            mask,
            decoded,
        })
    }

    pub fn bounds(&self) -> GridBounds {
        self.bounds
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_feasible(&self, cell: usize) -> bool {
        self.mask[cell]
    }

    pub fn feasible_cells(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.mask[i]).collect()
    }

    pub fn n_feasible(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn center(&self, cell: usize) -> LatentPoint {
        cell_center(&self.bounds, self.n1, self.n2, cell)
    }

    pub fn centers(&self) -> Vec<LatentPoint> {
        (0..self.len()).map(|i| self.center(i)).collect()
    }

    pub fn trajectory(&self, cell: usize) -> &Trajectory {
        &self.decoded[cell]
    }

    /// `(col, row)` of a cell.
    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.n1, cell / self.n1)
    }
}

fn cell_center(b: &GridBounds, n1: usize, n2: usize, cell: usize) -> LatentPoint {
    let (col, row) = (cell % n1, cell / n1);
    let z1 = b.z1_lo + (col as f64 + 0.5) * (b.z1_hi - b.z1_lo) / n1 as f64;
    let z2 = b.z2_lo + (row as f64 + 0.5) * (b.z2_hi - b.z2_lo) / n2 as f64;
    LatentPoint::new(z1, z2)
}

/// `j` distinct feasible cells drawn uniformly without replacement.
pub fn init_design<R: Rng>(grid: &FeasibleGrid, j: usize, rng: &mut R) -> Result<Vec<usize>> {
    let feasible = grid.feasible_cells();
    if feasible.len() < j {
        return Err(Error::InsufficientSpace {
            available: feasible.len(),
            requested: j,
        });
    }
    Ok(index::sample(rng, feasible.len(), j).iter().map(|i| feasible[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    struct Const(f64);
    impl LatentDecoder for Const {
        fn decode(&self, _: LatentPoint) -> Trajectory {
            Trajectory::new(vec![self.0; 3]).unwrap()
        }
    }

    /// Positive only where z1 > 0.
    struct HalfPlane;
    impl LatentDecoder for HalfPlane {
        fn decode(&self, z: LatentPoint) -> Trajectory {
            Trajectory::new(vec![z.z1, 1.0]).unwrap()
        }
    }

    fn unit_box() -> GridBounds {
        GridBounds {
            z1_lo: -1.0,
            z1_hi: 1.0,
            z2_lo: -1.0,
            z2_hi: 1.0,
        }
    }

    #[test]
    fn padding_and_centers() {
        let b = GridBounds::around(&[LatentPoint::new(0.0, 1.0), LatentPoint::new(2.0, 1.0)], 0.2).unwrap();
        assert_eq!((b.z1_lo, b.z1_hi), (-0.4, 2.4));
        assert_eq!((b.z2_lo, b.z2_hi), (0.8, 1.2));
        let g = FeasibleGrid::build(&Const(1.0), unit_box(), (4, 2), Execution::Sequential).unwrap();
        assert_eq!(g.center(0), LatentPoint::new(-0.75, -0.5));
        assert_eq!(g.center(5), LatentPoint::new(-0.25, 0.5));
        assert_eq!(g.coords(5), (1, 1));
    }

    #[test]
    fn all_positive_decoder_is_fully_feasible() {
        let g = FeasibleGrid::build(&Const(0.5), unit_box(), (5, 5), Execution::Parallel).unwrap();
        assert_eq!(g.n_feasible(), 25);
    }

    #[test]
    fn negative_decoder_is_infeasible() {
        assert!(matches!(
            FeasibleGrid::build(&Const(-1.0), unit_box(), (5, 5), Execution::Sequential),
            Err(Error::InfeasibleSpace)
        ));
    }

    #[test]
    fn mask_is_deterministic_and_parallel_agrees() {
        let a = FeasibleGrid::build(&HalfPlane, unit_box(), (7, 3), Execution::Sequential).unwrap();
        let b = FeasibleGrid::build(&HalfPlane, unit_box(), (7, 3), Execution::Parallel).unwrap();
        assert_eq!(a.mask(), b.mask());
        assert_eq!(a.n_feasible(), 9);
    }

    #[test]
    fn init_design_cases() {
        let g = FeasibleGrid::build(&HalfPlane, unit_box(), (4, 4), Execution::Sequential).unwrap();
        let mut all = init_design(&g, 8, &mut seed::rng(1)).unwrap();
        all.sort();
        assert_eq!(all, g.feasible_cells());
        let a = init_design(&g, 5, &mut seed::rng(2)).unwrap();
        assert_eq!(a, init_design(&g, 5, &mut seed::rng(2)).unwrap());
        assert!(a.iter().all(|&c| g.is_feasible(c)));
        assert!(matches!(
            init_design(&g, 9, &mut seed::rng(1)),
            Err(Error::InsufficientSpace { available: 8, requested: 9 })
        ));
    }
}
