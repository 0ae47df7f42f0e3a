//! Simplex-constrained convex QP `min wᵀGw, w ≥ 0, Σw = 1`.
//!
//! Solved with Wolfe's minimum-norm-point method written in Gram form: a
//! conditional-gradient scheme whose active set ("corral") is re-optimized
//! exactly by an affine solve after every vertex insertion, which gives
//! finite termination and monotone descent.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Interval, Kernel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpOptions {
    /// Target Frank–Wolfe duality gap `2(wᵀGw − min_i (Gw)_i)`.
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    /// Dense weights, one per column of G.
    pub weights: Vec<f64>,
    pub objective: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Grid relaxation of the measure problem.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSolution {
    pub grid: Vec<f64>,
    pub weights: Vec<f64>,
    pub objective: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// Minimizes `∫∫R dν dν` over probability vectors on `grid_n` uniform nodes.
pub fn solve_grid(kernel: &Kernel, interval: &Interval, grid_n: usize, opts: &QpOptions) -> Result<GridSolution> {
    if grid_n < 2 {
        return Err(Error::InvalidInput(format!("grid_n must be at least 2, got {grid_n}")));
    }
    let grid = interval.uniform_grid(grid_n);
    let g = kernel.value_matrix(&grid, &grid);
    let sol = solve_simplex_qp(&g, opts);
    if !sol.converged {
        return Err(Error::NonConvergence {
            what: "simplex QP",
            iterations: sol.iterations,
            residual: sol.gap,
        });
    }
    Ok(GridSolution {
        grid,
        weights: sol.weights,
        objective: sol.objective,
        gap: sol.gap,
        iterations: sol.iterations,
    })
}

/// Solves `min wᵀGw` over the probability simplex for symmetric PSD `G`.
pub fn solve_simplex_qp(g: &DMatrix<f64>, opts: &QpOptions) -> QpSolution {
    let n = g.nrows();
    assert_eq!(n, g.ncols(), "Gram matrix must be square");
    assert!(n > 0, "empty QP");

    let start = (0..n)
        .min_by(|&i, &j| g[(i, i)].total_cmp(&g[(j, j)]))
        .unwrap_or(0);
    let mut corral: Vec<usize> = vec![start];
    let mut x: Vec<f64> = vec![1.0];
    let mut gap = f64::INFINITY;
    let mut objective = g[(start, start)];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        iterations += 1;
        let gx = gradient_half(g, &corral, &x);
        objective = corral.iter().zip(&x).map(|(&i, &xi)| xi * gx[i]).sum();
        let (j, &gmin) = gx
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        gap = 2.0 * (objective - gmin);
        if gap <= opts.gap_tol {
            converged = true;
            break;
        }
        if corral.contains(&j) {
            // the affine minimizer is already optimal to rounding
            converged = gap <= opts.gap_tol * 1e3;
            break;
        }
        corral.push(j);
        x.push(0.0);

        // minor cycles
        loop {
            let y = match affine_minimizer(g, &corral) {
                Some(y) => y,
                None => {
                    // numerically dependent corral: drop the newest point
                    corral.pop();
                    x.pop();
                    break;
                }
            };
            if y.iter().all(|&v| v > 0.0) {
                x = y;
                break;
            }
            let mut theta = 1.0f64;
            for (xi, yi) in x.iter().zip(&y) {
                if *yi <= 0.0 {
                    let denom = xi - yi;
                    if denom > 0.0 {
                        theta = theta.min(xi / denom);
                    }
                }
            }
            for (xi, yi) in x.iter_mut().zip(&y) {
                *xi += theta * (yi - *xi);
            }
            // remove the points that hit zero, and at least the smallest
            let min_pos = x
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            let mut keep_c = Vec::with_capacity(corral.len());
            let mut keep_x = Vec::with_capacity(x.len());
            for (idx, (&c, &xi)) in corral.iter().zip(&x).enumerate() {
                if xi > 1e-15 && idx != min_pos {
                    keep_c.push(c);
                    keep_x.push(xi);
                }
            }
            let total: f64 = keep_x.iter().sum();
            for v in &mut keep_x {
                *v /= total;
            }
            corral = keep_c;
            x = keep_x;
            if corral.len() <= 1 {
                break;
            }
        }
    }

    let mut weights = vec![0.0; n];
    for (&c, &xi) in corral.iter().zip(&x) {
        weights[c] = xi;
    }
    QpSolution {
        weights,
        objective,
        gap,
        iterations,
        converged,
    }
}

/// `G x` restricted to the corral columns.
fn gradient_half(g: &DMatrix<f64>, corral: &[usize], x: &[f64]) -> Vec<f64> {
    let n = g.nrows();
    let mut out = vec![0.0; n];
    for (&c, &xc) in corral.iter().zip(x) {
        let col = g.column(c);
        for (o, v) in out.iter_mut().zip(col.iter()) {
            *o += xc * v;
        }
    }
    out
}

/// Minimizer of `yᵀG_CC y` subject to `Σy = 1` (no sign constraint), from
/// the bordered KKT system.
fn affine_minimizer(g: &DMatrix<f64>, corral: &[usize]) -> Option<Vec<f64>> {
    let k = corral.len();
    let mut m = DMatrix::zeros(k + 1, k + 1);
    for (a, &i) in corral.iter().enumerate() {
        for (b, &j) in corral.iter().enumerate() {
            m[(a, b)] = g[(i, j)];
        }
        m[(a, k)] = 1.0;
        m[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let lu = m.full_piv_lu();
    let sol = lu.solve(&rhs)?;
    let y: Vec<f64> = sol.iter().take(k).cloned().collect();
    if y.iter().any(|v| !v.is_finite()) || (y.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return None;
    }
    Some(y)
}
