//! Uniform cell-centered grids on the unit interval.

use serde::Serialize;

use crate::error::{Error, Result};

/// Minimum number of cells accepted anywhere in the crate.
pub const MIN_CELLS: usize = 16;

/// A uniform cell-centered grid on [0, 1]: node i sits at (i + 1/2) * dx.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    n: usize,
    dx: f64,
    nodes: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(Error::GridTooSmall(n));
        }
        let dx = 1.0 / n as f64;
        let nodes = (0..n).map(|i| (i as f64 + 0.5) * dx).collect();
        Ok(Self { n, dx, nodes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// A grid with `factor` times as many cells, used for hypothesis checks
    /// and positivity audits.
    pub fn refined(&self, factor: usize) -> Grid {
        Grid::new(self.n * factor.max(1)).expect("refinement keeps n >= 16")
    }

    /// Midpoint quadrature of samples living on this grid's nodes. Exact for
    /// piecewise-linear integrands over each cell.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        debug_assert_eq!(samples.len(), self.n);
        samples.iter().sum::<f64>() * self.dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_cells() {
        let g = Grid::new(16).unwrap();
        assert_eq!(g.dx(), 0.0625);
        assert_eq!(g.nodes()[0], 0.03125);
        assert_eq!(g.n(), 16);
    }

    #[test]
    fn hundred_cells() {
        let g = Grid::new(100).unwrap();
        assert_eq!(g.nodes().len(), 100);
        assert!((g.nodes()[99] - 0.995).abs() < 1e-15);
    }

    #[test]
    fn too_small_rejected() {
        assert!(matches!(Grid::new(15), Err(Error::GridTooSmall(15))));
    }

    #[test]
    fn nodes_strictly_increasing() {
        let g = Grid::new(64).unwrap();
        for w in g.nodes().windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn midpoint_rule_exact_for_linear() {
        let g = Grid::new(32).unwrap();
        let samples: Vec<f64> = g.nodes().iter().map(|x| 2.0 + 3.0 * x).collect();
        assert!((g.integrate(&samples) - 3.5).abs() < 1e-14);
    }
}
