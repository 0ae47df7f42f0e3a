use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stream::{fill_normal, run_chunks};
use crate::error::{Error, Result};
use crate::kernels::{Interval, Kernel};
use crate::linalg::PivotedCholesky;

/// Relative truncation level of the pivoted factorizations used for path
/// sampling.
pub const FACTOR_TOL: f64 = 1e-12;

/// Discretization of `[a, b]` for path simulation, with a low-rank factor
/// `L` of the Gram matrix (`L Lᵀ ≈ G` up to `factor_residual`).
#[derive(Clone, Debug)]
pub struct PathGrid {
    pub interval: Interval,
    pub points: Vec<f64>,
    pub factor: DMatrix<f64>,
    pub rank: usize,
    /// `max |L Lᵀ − G|`.
    pub factor_residual: f64,
    /// Largest entry of G, the scale of `factor_residual`.
    pub gram_scale: f64,
    pub spacing: f64,
}

/// Summary of a grid suitable for serialization into reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub m: usize,
    pub rank: usize,
    pub factor_residual: f64,
    pub spacing: f64,
}

impl PathGrid {
    /// `m` uniform points on the interval together with `include` (e.g.
    /// the essential set); points closer than 1e-12 are merged.
    pub fn uniform(kernel: &Kernel, interval: &Interval, m: usize, include: &[f64]) -> Result<Self> {
        if m < 2 && interval.a != interval.b {
            return Err(Error::InvalidInput(format!("path grid needs at least 2 points, got {m}")));
        }
        let mut points = interval.uniform_grid(m.max(1));
        for &t in include {
            if !interval.contains(t) {
                return Err(Error::InvalidInput(format!("grid point {t} lies outside the interval")));
            }
            points.push(t);
        }
        let mut grid = Self::from_points(kernel, interval, points)?;
        grid.spacing = if m > 1 { interval.length() / (m - 1) as f64 } else { 0.0 };
        Ok(grid)
    }

    /// Grid on exactly the given points.
    pub fn from_points(kernel: &Kernel, interval: &Interval, mut points: Vec<f64>) -> Result<Self> {
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("grid point"));
        }
        points.sort_by(f64::total_cmp);
        let tol = 1e-12 * (1.0 + interval.a.abs().max(interval.b.abs()));
        points.dedup_by(|x, y| (*x - *y).abs() <= tol);
        if points.is_empty() {
            return Err(Error::InvalidInput("empty path grid".into()));
        }
        let g = kernel.value_matrix(&points, &points);
        let g = (&g + g.transpose()) * 0.5;
        let chol = PivotedCholesky::new(&g, FACTOR_TOL);
        let recon = &chol.factor * chol.factor.transpose();
        let factor_residual = (&recon - &g).amax();
        let gram_scale = g.amax();
        let spacing = if points.len() > 1 {
            interval.length() / (points.len() - 1) as f64
        } else {
            0.0
        };
        Ok(Self {
            interval: *interval,
            points,
            factor: chol.factor,
            rank: chol.rank,
            factor_residual,
            gram_scale,
            spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * (1.0 + t.abs());
        self.points.iter().position(|&p| (p - t).abs() <= tol)
    }

    pub fn info(&self) -> GridInfo {
        GridInfo {
            m: self.points.len(),
            rank: self.rank,
            factor_residual: self.factor_residual,
            spacing: self.spacing,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, xi: &mut [f64], out: &mut [f64]) {
        fill_normal(rng, xi);
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (l, x) in xi.iter().enumerate() {
                s += self.factor[(i, l)] * x;
            }
            *o = s;
        }
    }
}

/// `n` i.i.d. centered Gaussian paths on the grid (one `Vec` per path).
pub fn sample_paths(grid: &PathGrid, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let m = grid.len();
    let r = grid.rank;
    run_chunks(n, seed, |rng, _, count| {
        let mut xi = vec![0.0; r];
        (0..count)
            .map(|_| {
                let mut path = vec![0.0; m];
                grid.draw(rng, &mut xi, &mut path);
                path
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}
