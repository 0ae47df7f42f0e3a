//! Leading-order asymptotics of `P(min_{[a,b]} X > u)`.
//!
//! With S the support of the optimal measure, Σ its Gram matrix and
//! θ = Σ⁻¹1,
//!
//! ```text
//! P(min X > u) ~ E(W) · c / (θ₁⋯θ_k) · u^{-k} · exp(-u² / 2V*),
//! c = (2π)^{-k/2} (det Σ)^{-1/2}.
//! ```
//!
//! W is a functional of the residual process `Z = X − E(X | X_S)`: one
//! curvature factor per interior atom, a mixed indicator/curvature factor
//! at an endpoint atom where μ' vanishes, and an indicator `1(Z_t > 0)` at
//! each essential point outside S. E(W) = 0 exactly when μ'' vanishes at an
//! interior atom; the tail is then only bounded, not computed.

mod essential;
mod mu;
mod residual;
mod weight;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use essential::{
    essential_set, nondegeneracy_check, EssentialOptions, EssentialPoint, EssentialSet, PointKind, MAX_CONTACT_ORDER,
};
pub use mu::{compute_theta, MuFunction};
pub use residual::{residual_field, Component, ResidualField, ResidualKernel, PSD_TOL};
pub use weight::{expected_w, expected_w_mc, WEstimate, WMethod, MIN_MC_N};

use crate::error::{Error, Result};
use crate::kernels::{Interval, Kernel};
use crate::linalg;
use crate::solver::OptimalSolution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AsymptoticOptions {
    pub mc_n: usize,
    pub seed: u64,
    pub essential: EssentialOptions,
}

impl Default for AsymptoticOptions {
    fn default() -> Self {
        Self {
            mc_n: 1_000_000,
            seed: 20_240_601,
            essential: EssentialOptions::default(),
        }
    }
}

/// Every ingredient of the leading-order tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub interval: Interval,
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
    pub theta: Vec<f64>,
    pub v_star: f64,
    pub k: usize,
    pub det_sigma: f64,
    pub c_const: f64,
    pub expected_w: WEstimate,
    pub nondegenerate: bool,
    pub essential: EssentialSet,
    pub components: Vec<Component>,
    pub field_covariance: Vec<Vec<f64>>,
    /// `E(W) c / (θ₁⋯θ_k)`; absent when degenerate.
    pub prefactor: Option<f64>,
}

impl AsymptoticReport {
    pub fn theta_sum(&self) -> f64 {
        self.theta.iter().sum()
    }

    /// `c / (θ₁⋯θ_k)`, the constant of the finite-dimensional tail.
    pub fn finite_constant(&self) -> f64 {
        self.c_const / self.theta.iter().product::<f64>()
    }
}

/// Results of the full asymptotic analysis, kept together so that the
/// simulation harness can reuse μ and the residual field.
#[derive(Clone, Debug)]
pub struct Asymptotics {
    pub kernel: Kernel,
    pub solution: OptimalSolution,
    pub mu: MuFunction,
    pub essential: EssentialSet,
    pub field: ResidualField,
    pub report: AsymptoticReport,
}

/// `(2π)^{-k/2} (det Σ)^{-1/2}` together with `det Σ`.
pub fn c_constant(sigma: &DMatrix<f64>) -> Result<(f64, f64)> {
    let (_, log_det) = linalg::spd_solve_ones(sigma)?;
    let k = sigma.nrows() as f64;
    Ok(((-0.5 * k * (2.0 * PI).ln() - 0.5 * log_det).exp(), log_det.exp()))
}

pub fn analyze(kernel: &Kernel, sol: &OptimalSolution, opts: &AsymptoticOptions) -> Result<Asymptotics> {
    if sol.degenerate_flat {
        return Err(Error::Degenerate(
            "the optimal measure has no finite support; asymptotics are undefined".into(),
        ));
    }
    let mu = MuFunction::new(kernel, sol)?;
    let essential = essential_set(&mu, &sol.interval, &opts.essential);
    let nondegenerate = nondegeneracy_check(&essential);
    let field = residual_field(kernel, &sol.interval, &mu, &essential, opts.essential.deriv_tol)?;
    let w = expected_w(&field, nondegenerate, opts.mc_n, opts.seed)?;
    let (c_const, det_sigma) = c_constant(&sol.sigma)?;
    let theta: Vec<f64> = mu.theta().iter().copied().collect();
    let prod: f64 = theta.iter().product();
    let prefactor = nondegenerate.then(|| w.mean * c_const / prod);
    let field_covariance = (0..field.len())
        .map(|i| field.covariance.row(i).iter().copied().collect())
        .collect();
    let report = AsymptoticReport {
        interval: sol.interval,
        support: sol.support().to_vec(),
        weights: sol.weights().to_vec(),
        theta,
        v_star: sol.v_star,
        k: sol.k(),
        det_sigma,
        c_const,
        expected_w: w,
        nondegenerate,
        essential: essential.clone(),
        components: field.components.clone(),
        field_covariance,
        prefactor,
    };
    Ok(Asymptotics {
        kernel: kernel.clone(),
        solution: sol.clone(),
        mu,
        essential,
        field,
        report,
    })
}

fn check_level(u: f64) -> Result<()> {
    if !(u.is_finite() && u > 0.0) {
        return Err(Error::InvalidInput(format!("level u must be positive and finite, got {u}")));
    }
    Ok(())
}

/// `E(W) c / (θ₁⋯θ_k) u^{-k} exp(-u²/2V*)`. Degenerate configurations
/// only admit the bound `o(u^{-k-1} exp(-u²/2V*))` and are refused.
pub fn tail_probability(report: &AsymptoticReport, u: f64) -> Result<f64> {
    check_level(u)?;
    let pref = match report.prefactor {
        Some(p) if report.nondegenerate => p,
        _ => return Err(Error::UpperBoundOnly { k: report.k }),
    };
    if pref == 0.0 {
        return Ok(0.0);
    }
    Ok((pref.ln() - report.k as f64 * u.ln() - u * u / (2.0 * report.v_star)).exp())
}

/// Tail of `min_j (X_{tⱼ} − hⱼ/u)` for the Gaussian vector with covariance
/// Σ: `c/(θ₁⋯θ_k) exp(−Σθᵢhᵢ) u^{-k} exp(−u²Σθᵢ/2)`.
pub fn finite_dim_tail(theta: &[f64], sigma: &DMatrix<f64>, u: f64, h: &[f64]) -> Result<f64> {
    check_level(u)?;
    let k = theta.len();
    if sigma.nrows() != k || sigma.ncols() != k || h.len() != k {
        return Err(Error::InvalidInput("theta, sigma and shifts must have matching dimensions".into()));
    }
    if h.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidInput("shifts must be nonnegative".into()));
    }
    let (c, _) = c_constant(sigma)?;
    let th = DVector::from_column_slice(theta);
    let sum = th.sum();
    let shift: f64 = theta.iter().zip(h).map(|(a, b)| a * b).sum();
    let log_prod: f64 = theta.iter().map(|t| t.ln()).sum();
    Ok((c.ln() - log_prod - shift - k as f64 * u.ln() - 0.5 * u * u * sum).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitLaws {
    /// Mean of the limiting exponential law of `u(min X − u)`.
    pub overshoot_mean: f64,
    /// Limiting law of the leftmost argmin, one mass per support point.
    pub argmin_weights: Vec<f64>,
    /// Rates of the independent exponential limits of `u(X_{tⱼ} − u)`.
    pub finite_min_rates: Vec<f64>,
}

pub fn limit_laws(report: &AsymptoticReport) -> Result<LimitLaws> {
    if !report.nondegenerate {
        return Err(Error::UpperBoundOnly { k: report.k });
    }
    let sum = report.theta_sum();
    Ok(LimitLaws {
        overshoot_mean: report.v_star,
        argmin_weights: report.theta.iter().map(|t| t / sum).collect(),
        finite_min_rates: report.theta.clone(),
    })
}
