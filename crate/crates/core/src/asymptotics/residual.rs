use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::essential::{EssentialSet, PointKind};
use super::mu::MuFunction;
use crate::error::{Error, Result};
use crate::kernels::{Interval, Kernel};

/// Largest negative eigenvalue (relative to the largest diagonal entry)
/// tolerated in a residual covariance before it is declared broken.
pub const PSD_TOL: f64 = 1e-10;

/// One coordinate of the Gaussian vector that enters W.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component {
    /// `Z'` at an interior support point; contributes
    /// `exp(−θ/(2μ'') Z'²)`.
    InteriorSlope { t: f64, theta: f64, mu2: f64 },
    /// `Z'_a` when `a ∈ S` and `μ'(a) = 0`.
    LeftSlope { t: f64, theta: f64, mu2: f64 },
    /// `Z'_b` when `b ∈ S` and `μ'(b) = 0`.
    RightSlope { t: f64, theta: f64, mu2: f64 },
    /// `Z_t` at an essential point outside the support; contributes
    /// `1(Z_t > 0)`.
    Level { t: f64 },
}

impl Component {
    pub fn location(&self) -> f64 {
        match *self {
            Component::InteriorSlope { t, .. }
            | Component::LeftSlope { t, .. }
            | Component::RightSlope { t, .. }
            | Component::Level { t } => t,
        }
    }

    /// Derivative order of the residual process sampled by this component.
    pub fn order(&self) -> usize {
        match self {
            Component::Level { .. } => 0,
            _ => 1,
        }
    }

    /// `θ/(2μ'')`, or infinity when μ'' is not positive (the factor's
    /// exponential branch is then identically zero).
    fn lambda(theta: f64, mu2: f64) -> f64 {
        if mu2 > 0.0 {
            theta / (2.0 * mu2)
        } else {
            f64::INFINITY
        }
    }

    /// Factor of W contributed by the value `z` of this component.
    pub fn factor(&self, z: f64) -> f64 {
        let damp = |theta: f64, mu2: f64| {
            let l = Self::lambda(theta, mu2);
            if l.is_infinite() {
                0.0
            } else {
                (-l * z * z).exp()
            }
        };
        match *self {
            Component::InteriorSlope { theta, mu2, .. } => damp(theta, mu2),
            Component::LeftSlope { theta, mu2, .. } => {
                if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    damp(theta, mu2)
                } else {
                    0.0
                }
            }
            Component::RightSlope { theta, mu2, .. } => {
                if z < 0.0 {
                    1.0
                } else if z > 0.0 {
                    damp(theta, mu2)
                } else {
                    0.0
                }
            }
            Component::Level { .. } => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// E[factor(G)] for G ~ N(0, var).
    pub fn single_expectation(&self, var: f64) -> f64 {
        let shrink = |theta: f64, mu2: f64| {
            let l = Self::lambda(theta, mu2);
            if l.is_infinite() {
                0.0
            } else {
                (1.0 + 2.0 * l * var).sqrt().recip()
            }
        };
        match *self {
            Component::InteriorSlope { theta, mu2, .. } => shrink(theta, mu2),
            Component::LeftSlope { theta, mu2, .. } | Component::RightSlope { theta, mu2, .. } => {
                0.5 + 0.5 * shrink(theta, mu2)
            }
            Component::Level { .. } => 0.5,
        }
    }
}

/// Centered Gaussian law of the residual components `(Z'_{tⱼ}, Z_{tⱼ})`
/// entering W, with `Z = X − E(X | X_S)`.
#[derive(Clone, Debug)]
pub struct ResidualField {
    pub components: Vec<Component>,
    pub covariance: DMatrix<f64>,
    pub min_eigenvalue: f64,
}

impl ResidualField {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn points(&self) -> Vec<(f64, usize)> {
        self.components.iter().map(|c| (c.location(), c.order())).collect()
    }

    /// W evaluated at a realization of the components.
    pub fn weight(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.components.len());
        let mut w = 1.0;
        for (c, &v) in self.components.iter().zip(z) {
            w *= c.factor(v);
            if w == 0.0 {
                break;
            }
        }
        w
    }
}

/// Covariances of the residual process conditioned on the values at the
/// support: `Cov(Z^{(p)}_s, Z^{(q)}_t) = ∂ᵖ∂^qR(s,t) − r_p(s)ᵀ Σ⁻¹ r_q(t)`.
#[derive(Clone, Debug)]
pub struct ResidualKernel {
    kernel: Kernel,
    support: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl ResidualKernel {
    pub fn new(kernel: &Kernel, support: &[f64]) -> Result<Self> {
        let sigma = kernel.value_matrix(support, support);
        let chol = sigma
            .cholesky()
            .ok_or_else(|| Error::Singular("support Gram matrix is not positive definite".into()))?;
        Ok(Self {
            kernel: kernel.clone(),
            support: support.to_vec(),
            chol,
        })
    }

    /// `r_p(s)`, the covariances of `X^{(p)}_s` with the support values.
    pub fn cross(&self, points: &[(f64, usize)]) -> DMatrix<f64> {
        DMatrix::from_fn(self.support.len(), points.len(), |l, j| {
            let (s, p) = points[j];
            self.kernel.deriv_unchecked(s, self.support[l], p, 0)
        })
    }

    /// `Σ⁻¹ r` for the columns produced by [`Self::cross`].
    pub fn regression(&self, cross: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(cross)
    }

    pub fn covariance(&self, rows: &[(f64, usize)], cols: &[(f64, usize)]) -> DMatrix<f64> {
        let rr = self.cross(rows);
        let rc = self.cross(cols);
        let correction = rr.transpose() * self.chol.solve(&rc);
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            let (s, p) = rows[i];
            let (t, q) = cols[j];
            self.kernel.deriv_unchecked(s, t, p, q) - correction[(i, j)]
        })
    }

    /// Symmetric covariance over one point list.
    pub fn gram(&self, points: &[(f64, usize)]) -> DMatrix<f64> {
        let c = self.covariance(points, points);
        (&c + c.transpose()) * 0.5
    }
}

/// Selects the components that contribute a non-unit factor to W and
/// assembles their joint covariance.
pub fn residual_field(kernel: &Kernel, interval: &Interval, mu: &MuFunction, set: &EssentialSet, deriv_tol: f64) -> Result<ResidualField> {
    let theta = mu.theta();
    let mut components = Vec::new();
    for (j, p) in set.support_points().iter().enumerate() {
        let th = theta[j];
        match p.kind {
            PointKind::InteriorSupport => components.push(Component::InteriorSlope {
                t: p.t,
                theta: th,
                mu2: clean_mu2(mu, p.t, deriv_tol),
            }),
            PointKind::EndpointSupport => {
                // a one-point interval has no room for the path to dip
                if interval.a == interval.b || !mu.vanishes(p.t, 1, deriv_tol) {
                    continue;
                }
                let mu2 = clean_mu2(mu, p.t, deriv_tol);
                if p.t == interval.a {
                    components.push(Component::LeftSlope { t: p.t, theta: th, mu2 });
                } else {
                    components.push(Component::RightSlope { t: p.t, theta: th, mu2 });
                }
            }
            PointKind::EssentialNonSupport => unreachable!("support points come first"),
        }
    }
    for p in set.extra_points() {
        components.push(Component::Level { t: p.t });
    }

    let points: Vec<(f64, usize)> = components.iter().map(|c| (c.location(), c.order())).collect();
    if points.is_empty() {
        return Ok(ResidualField {
            components,
            covariance: DMatrix::zeros(0, 0),
            min_eigenvalue: f64::INFINITY,
        });
    }
    let rk = ResidualKernel::new(kernel, mu.support())?;
    let covariance = rk.gram(&points);
    let scale = covariance.diagonal().iter().cloned().fold(0.0, f64::max);
    let min_eigenvalue = SymmetricEigen::new(covariance.clone()).eigenvalues.min();
    if !(scale > 0.0) || min_eigenvalue < -PSD_TOL * scale {
        return Err(Error::Singular(format!(
            "residual covariance is not positive semidefinite (min eigenvalue {min_eigenvalue:e}, scale {scale:e})"
        )));
    }
    Ok(ResidualField {
        components,
        covariance,
        min_eigenvalue,
    })
}

/// μ''(t), or exactly 0 when it is numerically indistinguishable from 0.
fn clean_mu2(mu: &MuFunction, t: f64, deriv_tol: f64) -> f64 {
    if mu.vanishes(t, 2, deriv_tol) {
        0.0
    } else {
        mu.eval(t, 2)
    }
}
