use serde::{Deserialize, Serialize};

use super::OptimalSolution;
use crate::kernels::Kernel;

/// Band around 1 within which μ̂ counts as flat.
pub const FLAT_BAND: f64 = 1e-6;

/// Optimality certificate: `μ̂(t) = Σⱼ βⱼ R(t,tⱼ) / V*` must be ≥ 1 on the
/// interval, with equality on the support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    pub kkt_min: f64,
    pub kkt_argmin: f64,
    /// Grid points where μ̂ < 1 − tol.
    pub violations: Vec<f64>,
    /// Fraction of grid points with |μ̂ − 1| ≤ [`FLAT_BAND`].
    pub flat_fraction: f64,
}

/// μ̂ at `t` for the measure and value stored in `sol`.
pub fn certificate_function(kernel: &Kernel, sol: &OptimalSolution, t: f64) -> f64 {
    sol.measure
        .atoms()
        .iter()
        .zip(sol.measure.weights())
        .map(|(&tj, &w)| w * kernel.deriv_unchecked(t, tj, 0, 0))
        .sum::<f64>()
        / sol.v_star
}

/// Evaluates μ̂ on `grid_n` uniform points. Violations are reported, never
/// raised.
pub fn verify_kkt(kernel: &Kernel, sol: &OptimalSolution, grid_n: usize, tol: f64) -> KktCertificate {
    let grid = sol.interval.uniform_grid(grid_n.max(2));
    let mut kkt_min = f64::INFINITY;
    let mut kkt_argmin = sol.interval.a;
    let mut violations = Vec::new();
    let mut flat = 0usize;
    for &t in &grid {
        let v = certificate_function(kernel, sol, t);
        if v < kkt_min {
            kkt_min = v;
            kkt_argmin = t;
        }
        if v < 1.0 - tol {
            violations.push(t);
        }
        if (v - 1.0).abs() <= FLAT_BAND {
            flat += 1;
        }
    }
    // the support itself
    for &t in sol.measure.atoms() {
        let v = certificate_function(kernel, sol, t);
        if v < kkt_min {
            kkt_min = v;
            kkt_argmin = t;
        }
    }
    KktCertificate {
        kkt_min,
        kkt_argmin,
        violations,
        flat_fraction: flat as f64 / grid.len() as f64,
    }
}
