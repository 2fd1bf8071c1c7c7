//! Rectangular sample grids with inclusive endpoints.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// `nu × nv` points over `[u0,u1] × [v0,v1]`; index `i·nv + j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nu: usize,
    pub nv: usize,
    pub rect: [f64; 4],
}

impl Grid {
    pub fn new(nu: usize, nv: usize, rect: [f64; 4]) -> Result<Self> {
        if nu < 2 || nv < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2×2 points, got {nu}×{nv}")));
        }
        if !(rect[0] < rect[1] && rect[2] < rect[3]) {
            return Err(Error::InvalidGrid(format!("empty rectangle {rect:?}")));
        }
        Ok(Self { nu, nv, rect })
    }

    /// Grid over `domain` shrunk by `margin` (a fraction of each side).
    pub fn interior(domain: [f64; 4], nu: usize, nv: usize, margin: f64) -> Result<Self> {
        let du = (domain[1] - domain[0]) * margin;
        let dv = (domain[3] - domain[2]) * margin;
        Self::new(nu, nv, [domain[0] + du, domain[1] - du, domain[2] + dv, domain[3] - dv])
    }

    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hu(&self) -> f64 {
        (self.rect[1] - self.rect[0]) / (self.nu - 1) as f64
    }

    pub fn hv(&self) -> f64 {
        (self.rect[3] - self.rect[2]) / (self.nv - 1) as f64
    }

    pub fn u(&self, i: usize) -> f64 {
        if i + 1 == self.nu {
            self.rect[1]
        } else {
            self.rect[0] + self.hu() * i as f64
        }
    }

    pub fn v(&self, j: usize) -> f64 {
        if j + 1 == self.nv {
            self.rect[3]
        } else {
            self.rect[2] + self.hv() * j as f64
        }
    }

    pub fn point(&self, index: usize) -> (f64, f64) {
        (self.u(index / self.nv), self.v(index % self.nv))
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Evaluate `f` at every point in parallel, results in index order.
    pub fn map<T: Send>(&self, f: impl Fn(f64, f64) -> T + Sync) -> Vec<T> {
        (0..self.len())
            .into_par_iter()
            .map(|k| {
                let (u, v) = self.point(k);
                f(u, v)
            })
            .collect()
    }

    /// Like [`Grid::map`], stopping at the first error in index order.
    pub fn try_map<T: Send>(&self, f: impl Fn(f64, f64) -> Result<T> + Sync) -> Result<Vec<T>> {
        self.map(f).into_iter().collect()
    }

    /// Composite Simpson rule for samples in index order.
    pub fn simpson(&self, values: &[f64]) -> Result<f64> {
        if self.nu % 2 == 0 || self.nv % 2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "Simpson quadrature needs odd point counts, got {}×{}",
                self.nu, self.nv
            )));
        }
        let w = |k: usize, n: usize| {
            if k == 0 || k + 1 == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            }
        };
        let mut acc = 0.0;
        for i in 0..self.nu {
            for j in 0..self.nv {
                acc += w(i, self.nu) * w(j, self.nv) * values[i * self.nv + j];
            }
        }
        Ok(acc * self.hu() * self.hv() / 9.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn endpoints_inclusive() {
        let g = Grid::new(3, 5, [0.0, 1.0, -1.0, 1.0]).unwrap();
        assert_eq!(g.point(0), (0.0, -1.0));
        assert_eq!(g.point(14), (1.0, 1.0));
        assert_eq!(g.points().len(), 15);
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let g = Grid::new(5, 7, [0.0, 2.0, 0.0, 1.0]).unwrap();
        let vals = g.map(|u, v| u * u * u + u * v * v);
        // ∫₀²∫₀¹ u³ + uv² = 4 + 2/3
        assert_abs_diff_eq!(g.simpson(&vals).unwrap(), 4.0 + 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn simpson_rejects_even() {
        let g = Grid::new(4, 5, [0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(g.simpson(&[0.0; 20]).is_err());
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Grid::new(1, 5, [0.0, 1.0, 0.0, 1.0]).is_err());
        assert!(Grid::new(3, 3, [1.0, 0.0, 0.0, 1.0]).is_err());
    }
}
