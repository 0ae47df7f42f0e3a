//! Newton refinement of a candidate support on the optimality system
//! `Σθ = 1` (so that μ = 1 on the support) and `μ'(τ) = 0` at interior
//! atoms, with θ = Σ⁻¹1 and weights θ / Σθ.

use nalgebra::{DMatrix, DVector};

use super::atoms::AtomicMeasure;
use super::kkt::verify_kkt;
use super::{OptimalSolution, SolverOptions};
use crate::error::{Error, Result};
use crate::kernels::{Interval, Kernel};
use crate::linalg;

const ENDPOINT_SNAP: f64 = 1e-9;
const MAX_NEWTON: usize = 60;

/// Refines `initial` into an exact atomic minimizer and certifies it.
pub fn refine_support(kernel: &Kernel, interval: &Interval, initial: &AtomicMeasure, opts: &SolverOptions) -> Result<OptimalSolution> {
    let mut atoms: Vec<f64> = initial.atoms().to_vec();
    let merge_dist = 1e-6 * interval.length().max(1e-300);
    let max_restarts = 2 * atoms.len() + 10;

    for _restart in 0..=max_restarts {
        snap_to_endpoints(&mut atoms, interval);
        atoms.dedup_by(|x, y| (*x - *y).abs() < merge_dist);
        if atoms.is_empty() {
            return Err(Error::Singular("refinement removed every atom".into()));
        }
        let sigma = kernel.value_gram(&atoms)?.matrix;
        let (mut theta, _) = linalg::spd_solve_ones(&sigma)?;

        match newton(kernel, interval, &mut atoms, &mut theta, opts.newton_tol)? {
            NewtonOutcome::Converged => {}
            NewtonOutcome::Restart => continue,
        }

        // θ from a clean factorization at the converged atoms
        let sigma = kernel.value_gram(&atoms)?.matrix;
        let (theta, _) = linalg::spd_solve_ones(&sigma)?;
        let total: f64 = theta.sum();
        let (worst, &wmin) = theta
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        if atoms.len() > 1 && wmin / total <= opts.mass_floor {
            atoms.remove(worst);
            continue;
        }
        if wmin <= 0.0 {
            return Err(Error::NonPositiveTheta { index: worst, value: wmin });
        }

        let weights: Vec<f64> = theta.iter().map(|t| t / total).collect();
        let w = DVector::from_vec(weights.clone());
        let v_star = (w.transpose() * &sigma * &w)[(0, 0)];
        let measure = AtomicMeasure::new(atoms.clone(), renormalize(weights), interval)?;
        let mut sol = OptimalSolution {
            interval: *interval,
            measure,
            v_star,
            sigma,
            kkt_min: f64::NAN,
            kkt_grid_n: opts.verify_grid_n,
            converged: true,
            degenerate_flat: false,
        };
        let cert = verify_kkt(kernel, &sol, opts.verify_grid_n, opts.kkt_tolerance);
        sol.kkt_min = cert.kkt_min;
        sol.converged = cert.violations.is_empty();
        sol.degenerate_flat = cert.flat_fraction > opts.flat_fraction;
        return Ok(sol);
    }
    Err(Error::NonConvergence {
        what: "support refinement",
        iterations: max_restarts,
        residual: f64::NAN,
    })
}

enum NewtonOutcome {
    Converged,
    Restart,
}

fn newton(kernel: &Kernel, interval: &Interval, atoms: &mut [f64], theta: &mut DVector<f64>, tol: f64) -> Result<NewtonOutcome> {
    let free: Vec<usize> = (0..atoms.len())
        .filter(|&i| atoms[i] > interval.a && atoms[i] < interval.b)
        .collect();
    let mut res = residual(kernel, atoms, theta, &free);
    for _ in 0..MAX_NEWTON {
        let norm = res.amax();
        if norm <= tol {
            return Ok(NewtonOutcome::Converged);
        }
        let jac = jacobian(kernel, atoms, theta, &free);
        let step = linalg::svd_solve(&jac, &(-&res), 1e-13)?;
        let k = atoms.len();

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial_atoms = atoms.to_vec();
            let trial_theta = &*theta + step.rows(0, k) * lambda;
            let mut left_interval = false;
            for (f, &i) in free.iter().enumerate() {
                let t = atoms[i] + lambda * step[k + f];
                if t <= interval.a + ENDPOINT_SNAP || t >= interval.b - ENDPOINT_SNAP {
                    left_interval = true;
                }
                trial_atoms[i] = t.clamp(interval.a, interval.b);
            }
            if !strictly_increasing(&trial_atoms) {
                lambda *= 0.5;
                continue;
            }
            let trial_res = residual(kernel, &trial_atoms, &trial_theta, &free);
            if left_interval {
                // the atom is pinned at the endpoint from now on
                atoms.copy_from_slice(&trial_atoms);
                *theta = trial_theta;
                return Ok(NewtonOutcome::Restart);
            }
            if trial_res.amax() < norm || lambda < 1e-6 {
                atoms.copy_from_slice(&trial_atoms);
                *theta = trial_theta;
                res = trial_res;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                what: "KKT Newton iteration",
                iterations: MAX_NEWTON,
                residual: norm,
            });
        }
    }
    let norm = res.amax();
    if norm <= tol * 10.0 {
        return Ok(NewtonOutcome::Converged);
    }
    Err(Error::NonConvergence {
        what: "KKT Newton iteration",
        iterations: MAX_NEWTON,
        residual: norm,
    })
}

/// `[Σθ − 1; μ'(τ_i) for free i]` with μ(x) = Σ_l R(x, t_l) θ_l.
fn residual(kernel: &Kernel, atoms: &[f64], theta: &DVector<f64>, free: &[usize]) -> DVector<f64> {
    let k = atoms.len();
    let mut r = DVector::zeros(k + free.len());
    for j in 0..k {
        r[j] = (0..k)
            .map(|l| kernel.deriv_unchecked(atoms[j], atoms[l], 0, 0) * theta[l])
            .sum::<f64>()
            - 1.0;
    }
    for (f, &i) in free.iter().enumerate() {
        r[k + f] = (0..k)
            .map(|l| kernel.deriv_unchecked(atoms[i], atoms[l], 1, 0) * theta[l])
            .sum();
    }
    r
}

fn jacobian(kernel: &Kernel, atoms: &[f64], theta: &DVector<f64>, free: &[usize]) -> DMatrix<f64> {
    let k = atoms.len();
    let n = k + free.len();
    let d = |s: f64, t: f64, m: usize, o: usize| kernel.deriv_unchecked(s, t, m, o);
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..k {
        for l in 0..k {
            jac[(j, l)] = d(atoms[j], atoms[l], 0, 0);
        }
    }
    for (f, &tk) in free.iter().enumerate() {
        let col = k + f;
        let slope: f64 = (0..k).map(|l| d(atoms[tk], atoms[l], 1, 0) * theta[l]).sum();
        for j in 0..k {
            let mut v = d(atoms[j], atoms[tk], 0, 1) * theta[tk];
            if j == tk {
                v += slope;
            }
            jac[(j, col)] = v;
        }
    }
    for (fi, &ti) in free.iter().enumerate() {
        let row = k + fi;
        for l in 0..k {
            jac[(row, l)] = d(atoms[ti], atoms[l], 1, 0);
        }
        let curvature: f64 = (0..k).map(|l| d(atoms[ti], atoms[l], 2, 0) * theta[l]).sum();
        for (fk, &tk) in free.iter().enumerate() {
            let mut v = d(atoms[ti], atoms[tk], 1, 1) * theta[tk];
            if ti == tk {
                v += curvature;
            }
            jac[(row, k + fk)] = v;
        }
    }
    jac
}

fn snap_to_endpoints(atoms: &mut [f64], interval: &Interval) {
    for t in atoms.iter_mut() {
        if (*t - interval.a).abs() <= ENDPOINT_SNAP {
            *t = interval.a;
        } else if (*t - interval.b).abs() <= ENDPOINT_SNAP {
            *t = interval.b;
        }
        *t = t.clamp(interval.a, interval.b);
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

fn renormalize(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}
