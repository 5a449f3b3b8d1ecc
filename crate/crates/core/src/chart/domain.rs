//! Box charts with optional periodic axes.

use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result};

/// A coordinate box `Π [lo_i, hi_i]`, each axis optionally a circle of period
/// `hi_i - lo_i`, sampled on a midpoint grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartDomain {
    pub bounds: [[f64; 2]; 3],
    pub periodic: [bool; 3],
    pub grid: [usize; 3],
    /// Band excluded from every assertion on non-periodic axes.
    #[serde(default)]
    pub margin: f64,
}

impl ChartDomain {
    pub fn new(bounds: [[f64; 2]; 3], periodic: [bool; 3], grid: [usize; 3], margin: f64) -> Result<Self> {
        let d = ChartDomain {
            bounds,
            periodic,
            grid,
            margin,
        };
        d.validate()?;
        Ok(d)
    }

    /// The unit cube with all three axes periodic.
    pub fn unit_periodic(n: usize) -> Result<Self> {
        ChartDomain::new([[0.0, 1.0]; 3], [true; 3], [n; 3], 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..3 {
            let [lo, hi] = self.bounds[i];
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::InvalidDomain(format!(
                    "axis {i} has empty or non-finite interval [{lo}, {hi}]"
                )));
            }
            if self.grid[i] < 4 {
                return Err(Error::InvalidDomain(format!(
                    "axis {i} grid count {} < 4",
                    self.grid[i]
                )));
            }
            if !self.periodic[i] && !(self.margin < 0.5 * (hi - lo)) {
                return Err(Error::InvalidDomain(format!(
                    "margin {} not below half of axis {i}",
                    self.margin
                )));
            }
        }
        if !(self.margin >= 0.0) {
            return Err(Error::InvalidDomain(format!("negative margin {}", self.margin)));
        }
        Ok(())
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.bounds[axis][1] - self.bounds[axis][0]
    }

    pub fn with_grid(&self, grid: [usize; 3]) -> Self {
        ChartDomain {
            grid,
            ..self.clone()
        }
    }

    /// Bounds with the margin removed on non-periodic axes.
    pub fn interior_bounds(&self) -> [[f64; 2]; 3] {
        let mut b = self.bounds;
        for (i, bi) in b.iter_mut().enumerate() {
            if !self.periodic[i] {
                bi[0] += self.margin;
                bi[1] -= self.margin;
            }
        }
        b
    }

    /// Coordinate volume of the interior region.
    pub fn interior_volume(&self) -> f64 {
        self.interior_bounds().iter().map(|b| b[1] - b[0]).product()
    }

    pub fn cell_volume(&self) -> f64 {
        let b = self.interior_bounds();
        (0..3).map(|i| (b[i][1] - b[i][0]) / self.grid[i] as f64).product()
    }

    /// Reduce periodic coordinates into their fundamental interval and reject points
    /// outside non-periodic bounds.
    pub fn wrap(&self, p: &Point) -> Result<Point> {
        let mut q = *p;
        for i in 0..3 {
            let [lo, hi] = self.bounds[i];
            if self.periodic[i] {
                q[i] = lo + (q[i] - lo).rem_euclid(hi - lo);
            } else {
                let slack = 1e-12 * (hi - lo);
                if !(q[i] >= lo - slack && q[i] <= hi + slack) {
                    return Err(Error::OutsideDomain { point: *p, axis: i });
                }
            }
        }
        Ok(q)
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.wrap(p).is_ok()
    }

    /// Whether `p` lies outside the margin bands.
    pub fn is_interior(&self, p: &Point) -> bool {
        let b = self.interior_bounds();
        (0..3).all(|i| self.periodic[i] || (p[i] >= b[i][0] && p[i] <= b[i][1]))
    }

    /// Midpoint of cell `(i, j, k)` of the interior grid.
    pub fn cell_center(&self, idx: [usize; 3]) -> Point {
        let b = self.interior_bounds();
        let mut p = [0.0; 3];
        for a in 0..3 {
            let h = (b[a][1] - b[a][0]) / self.grid[a] as f64;
            p[a] = b[a][0] + (idx[a] as f64 + 0.5) * h;
        }
        p
    }

    /// All cell midpoints, `x` varying slowest.
    pub fn sample_points(&self) -> Vec<Point> {
        let [nx, ny, nz] = self.grid;
        let mut out = Vec::with_capacity(nx * ny * nz);
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    out.push(self.cell_center([i, j, k]));
                }
            }
        }
        out
    }

    /// A coarser sub-lattice of the sample grid with at most `per_axis` points per axis.
    pub fn coarse_points(&self, per_axis: usize) -> Vec<Point> {
        let g = [
            self.grid[0].min(per_axis).max(4),
            self.grid[1].min(per_axis).max(4),
            self.grid[2].min(per_axis).max(4),
        ];
        self.with_grid(g).sample_points()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rejects_bad_boxes() {
        assert!(ChartDomain::new([[0.0, 1.0]; 3], [false; 3], [3, 8, 8], 0.0).is_err());
        assert!(ChartDomain::new([[0.0, 1.0]; 3], [false; 3], [8; 3], 0.5).is_err());
        assert!(ChartDomain::new([[1.0, 1.0], [0.0, 1.0], [0.0, 1.0]], [false; 3], [8; 3], 0.0).is_err());
        // the margin is irrelevant on periodic axes
        assert!(ChartDomain::new([[0.0, 1.0]; 3], [true; 3], [8; 3], 0.7).is_ok());
    }

    #[test]
    fn wrap_reduces_periodic_axes_only() {
        let d = ChartDomain::new([[0.0, 1.0]; 3], [false, false, true], [8; 3], 0.1).unwrap();
        let q = d.wrap(&[0.5, 0.5, 2.25]).unwrap();
        assert_eq!(q, [0.5, 0.5, 0.25]);
        assert!(matches!(d.wrap(&[1.5, 0.5, 0.0]), Err(Error::OutsideDomain { axis: 0, .. })));
        assert!(!d.is_interior(&[0.05, 0.5, 0.5]));
    }

    #[test]
    fn cells_tile_the_interior() {
        let d = ChartDomain::new([[0.0, 2.0], [0.0, 1.0], [0.0, 1.0]], [false; 3], [4, 5, 6], 0.25).unwrap();
        let n = d.sample_points().len() as f64;
        assert!((n * d.cell_volume() - d.interior_volume()).abs() < 1e-14);
        assert!((d.interior_volume() - 1.5 * 0.5 * 0.5).abs() < 1e-14);
    }
}
