use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, MAX_DERIV_ORDER};
use crate::linalg;
use crate::solver::OptimalSolution;

/// `θ = Σ⁻¹1`, which must be componentwise positive on the optimal support.
pub fn compute_theta(sigma: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (theta, _) = linalg::spd_solve_ones(sigma)?;
    if let Some((index, &value)) = theta.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveTheta { index, value });
    }
    Ok(theta)
}

/// `μ(t) = E(X_t | X_s = 1, s ∈ S) = Σⱼ θⱼ R(t, tⱼ)` and its derivatives.
#[derive(Clone, Debug)]
pub struct MuFunction {
    kernel: Kernel,
    support: Vec<f64>,
    theta: DVector<f64>,
}

impl MuFunction {
    pub fn new(kernel: &Kernel, sol: &OptimalSolution) -> Result<Self> {
        let theta = compute_theta(&sol.sigma)?;
        Ok(Self {
            kernel: kernel.clone(),
            support: sol.support().to_vec(),
            theta,
        })
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// μ^{(order)}(t).
    pub fn eval(&self, t: f64, order: usize) -> f64 {
        assert!(order <= MAX_DERIV_ORDER, "derivative order {order} too high");
        self.support
            .iter()
            .zip(self.theta.iter())
            .map(|(&tj, &th)| th * self.kernel.deriv_unchecked(t, tj, order, 0))
            .sum()
    }

    /// Σⱼ |θⱼ ∂ᵗR(t, tⱼ)|, the scale against which a derivative of μ is
    /// judged to vanish.
    pub fn derivative_scale(&self, t: f64, order: usize) -> f64 {
        self.support
            .iter()
            .zip(self.theta.iter())
            .map(|(&tj, &th)| (th * self.kernel.deriv_unchecked(t, tj, order, 0)).abs())
            .sum()
    }

    /// True when |μ^{(order)}(t)| is below `rel_tol` times its local scale.
    pub fn vanishes(&self, t: f64, order: usize, rel_tol: f64) -> bool {
        let scale = self.derivative_scale(t, order);
        self.eval(t, order).abs() <= rel_tol * scale.max(f64::MIN_POSITIVE)
    }
}
