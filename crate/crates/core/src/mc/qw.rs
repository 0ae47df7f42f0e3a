//! Reference ensemble for the limiting fluctuation law Q_W: residual paths
//! Z on the grid, reweighted by W computed from the same realization.

use serde::{Deserialize, Serialize};

use super::grid::{PathGrid, FACTOR_TOL};
use super::stream::{fill_normal, run_chunks, Moments};
use crate::asymptotics::{Asymptotics, ResidualKernel};
use crate::error::{Error, Result};
use crate::linalg::PivotedCholesky;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QwEnsemble {
    pub grid: Vec<f64>,
    pub n: usize,
    pub seed: u64,
    /// E(W) from the same draws, with its 95% half-width.
    pub mean_w: f64,
    pub mean_w_ci: f64,
    /// Q_W mean and variance of Z at each grid point.
    pub weighted_mean: Vec<f64>,
    pub weighted_var: Vec<f64>,
    /// Unweighted mean and variance of Z at each grid point.
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// Q_W means of the components entering W.
    pub component_means: Vec<f64>,
}

#[derive(Default)]
struct Acc {
    w: Moments,
    sum_w_z: Vec<f64>,
    sum_w_z2: Vec<f64>,
    sum_z: Vec<f64>,
    sum_z2: Vec<f64>,
}

impl Acc {
    fn new(len: usize) -> Self {
        Self {
            w: Moments::default(),
            sum_w_z: vec![0.0; len],
            sum_w_z2: vec![0.0; len],
            sum_z: vec![0.0; len],
            sum_z2: vec![0.0; len],
        }
    }

    fn merge(&mut self, o: &Acc) {
        self.w.merge(&o.w);
        for i in 0..self.sum_z.len() {
            self.sum_w_z[i] += o.sum_w_z[i];
            self.sum_w_z2[i] += o.sum_w_z2[i];
            self.sum_z[i] += o.sum_z[i];
            self.sum_z2[i] += o.sum_z2[i];
        }
    }
}

/// Draws `n` residual paths jointly with the W components and accumulates
/// weighted and unweighted moment curves.
pub fn qw_reference_sample(asym: &Asymptotics, grid: &PathGrid, n: usize, seed: u64) -> Result<QwEnsemble> {
    if !asym.report.nondegenerate {
        return Err(Error::UpperBoundOnly { k: asym.report.k });
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    let m = grid.len();
    let d = asym.field.len();
    let mut points: Vec<(f64, usize)> = grid.points.iter().map(|&t| (t, 0)).collect();
    points.extend(asym.field.points());
    let rk = ResidualKernel::new(&asym.kernel, asym.solution.support())?;
    let cov = rk.gram(&points);
    let chol = PivotedCholesky::new(&cov, FACTOR_TOL);
    let r = chol.rank;
    let len = m + d;
    // row-major copy for the inner loop
    let factor: Vec<f64> = (0..len).flat_map(|i| (0..r).map(move |l| (i, l))).map(|(i, l)| chol.factor[(i, l)]).collect();

    let parts = run_chunks(n, seed, |rng, _, count| {
        let mut acc = Acc::new(len);
        let mut xi = vec![0.0; r];
        let mut z = vec![0.0; len];
        for _ in 0..count {
            fill_normal(rng, &mut xi);
            for (i, zi) in z.iter_mut().enumerate() {
                *zi = factor[i * r..(i + 1) * r].iter().zip(&xi).map(|(a, b)| a * b).sum();
            }
            let w = asym.field.weight(&z[m..]);
            acc.w.push(w);
            for (i, &zi) in z.iter().enumerate() {
                acc.sum_z[i] += zi;
                acc.sum_z2[i] += zi * zi;
                acc.sum_w_z[i] += w * zi;
                acc.sum_w_z2[i] += w * zi * zi;
            }
        }
        acc
    });
    let mut total = Acc::new(len);
    for p in &parts {
        total.merge(p);
    }
    let nf = n as f64;
    let sw = total.w.sum;
    let moments = |s: &[f64], s2: &[f64], norm: f64| -> (Vec<f64>, Vec<f64>) {
        let mean: Vec<f64> = s.iter().map(|v| v / norm).collect();
        let var = s2.iter().zip(&mean).map(|(q, mu)| (q / norm - mu * mu).max(0.0)).collect();
        (mean, var)
    };
    let (mean, var) = moments(&total.sum_z[..m], &total.sum_z2[..m], nf);
    let (wmean_all, wvar) = moments(&total.sum_w_z, &total.sum_w_z2, sw);
    Ok(QwEnsemble {
        grid: grid.points.clone(),
        n,
        seed,
        mean_w: total.w.mean(),
        mean_w_ci: total.w.ci_half_width(),
        weighted_mean: wmean_all[..m].to_vec(),
        weighted_var: wvar[..m].to_vec(),
        mean,
        var,
        component_means: wmean_all[m..].to_vec(),
    })
}
