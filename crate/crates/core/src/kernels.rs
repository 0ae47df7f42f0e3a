//! Covariance kernels of smooth Gaussian processes.
//!
//! Every kernel exposes exact mixed partial derivatives
//! `∂^{m+n} R(s,t) / ∂s^m ∂t^n = Cov(X_s^{(m)}, X_t^{(n)})`.
//! Three shapes are supported:
//!
//! * closed-form stationary families (`gaussian`: `exp(-τ²/2ℓ²)`,
//!   `sinc`: `sin(τ/ℓ)/(τ/ℓ)`) with hand-derived derivative rules,
//! * stationary kernels given by a finite symmetric spectral measure,
//!   `R(τ) = Σ wᵢ cos(τ xᵢ)`,
//! * composites `X_t = Y·g(t) + Z_t − L(Z)` where `Y ~ N(0,1)`, `g` is a
//!   polynomial, `Z` is stationary and `L` is either evaluation at 0 or the
//!   integral over [0, 1].

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Highest total derivative order `m + n` any kernel evaluates.
pub const MAX_DERIV_ORDER: usize = 8;

/// Smallest admissible ratio λ_min / λ_max of a Gram matrix.
pub const CONDITIONING_TOL: f64 = 1e-10;

/// Compact index interval `[a, b]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval")]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

#[derive(Deserialize)]
struct RawInterval {
    a: f64,
    b: f64,
}

impl TryFrom<RawInterval> for Interval {
    type Error = Error;

    fn try_from(raw: RawInterval) -> Result<Self> {
        Interval::new(raw.a, raw.b)
    }
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFinite("interval endpoint"));
        }
        if a > b {
            return Err(Error::InvalidInput(format!("interval [{a}, {b}] has a > b")));
        }
        Ok(Self { a, b })
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.a && t <= self.b
    }

    /// `n` equally spaced points including both endpoints (a single point if
    /// the interval is degenerate).
    pub fn uniform_grid(&self, n: usize) -> Vec<f64> {
        if n <= 1 || self.a == self.b {
            return vec![self.a];
        }
        let h = self.length() / (n - 1) as f64;
        (0..n)
            .map(|i| if i == n - 1 { self.b } else { self.a + i as f64 * h })
            .collect()
    }
}

/// Linear functional subtracted from the stationary part of a composite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// `L(Z) = Z_0`
    AtZero,
    /// `L(Z) = ∫₀¹ Z_v dv`
    UnitIntegral,
}

/// Serialized form of a kernel, the `"kernel"` object of a run config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelSpec {
    Gaussian {
        #[serde(default = "unit_scale")]
        length_scale: f64,
    },
    Sinc {
        #[serde(default = "unit_scale")]
        length_scale: f64,
    },
    Spectral {
        nodes: Vec<f64>,
        weights: Vec<f64>,
    },
    Composite {
        base: Box<KernelSpec>,
        /// Coefficients of g, constant term first.
        poly: Vec<f64>,
        functional: Functional,
    },
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Gaussian { scale: f64 },
    Sinc { scale: f64 },
    Spectral { nodes: Vec<f64>, weights: Vec<f64> },
    Composite(Box<Composite>),
}

#[derive(Clone, Debug, PartialEq)]
struct Composite {
    base: Kernel,
    poly: Vec<f64>,
    functional: Functional,
    /// Var(L(Z)), computed once at construction.
    functional_variance: f64,
}

/// Covariance kernel `R(s, t)`; immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub struct Kernel {
    repr: Repr,
}

impl TryFrom<KernelSpec> for Kernel {
    type Error = Error;

    fn try_from(spec: KernelSpec) -> Result<Self> {
        match spec {
            KernelSpec::Gaussian { length_scale } => Kernel::gaussian_scaled(length_scale),
            KernelSpec::Sinc { length_scale } => Kernel::sinc_scaled(length_scale),
            KernelSpec::Spectral { nodes, weights } => Kernel::spectral(nodes, weights),
            KernelSpec::Composite {
                base,
                poly,
                functional,
            } => Kernel::composite(Kernel::try_from(*base)?, poly, functional),
        }
    }
}

impl From<Kernel> for KernelSpec {
    fn from(k: Kernel) -> Self {
        match k.repr {
            Repr::Gaussian { scale } => KernelSpec::Gaussian {
                length_scale: scale,
            },
            Repr::Sinc { scale } => KernelSpec::Sinc {
                length_scale: scale,
            },
            Repr::Spectral { nodes, weights } => KernelSpec::Spectral { nodes, weights },
            Repr::Composite(c) => KernelSpec::Composite {
                base: Box::new(c.base.into()),
                poly: c.poly,
                functional: c.functional,
            },
        }
    }
}

/// Closed-form stationary family, used where a computation is only defined
/// for named families (breakpoints).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Sinc,
}

impl Kernel {
    /// `R(τ) = exp(-τ²/2)`
    pub fn gaussian() -> Self {
        Self {
            repr: Repr::Gaussian { scale: 1.0 },
        }
    }

    pub fn gaussian_scaled(length_scale: f64) -> Result<Self> {
        check_scale(length_scale)?;
        Ok(Self {
            repr: Repr::Gaussian {
                scale: length_scale,
            },
        })
    }

    /// `R(τ) = sin(τ)/τ`
    pub fn sinc() -> Self {
        Self {
            repr: Repr::Sinc { scale: 1.0 },
        }
    }

    pub fn sinc_scaled(length_scale: f64) -> Result<Self> {
        check_scale(length_scale)?;
        Ok(Self {
            repr: Repr::Sinc {
                scale: length_scale,
            },
        })
    }

    pub fn from_family(family: Family) -> Self {
        match family {
            Family::Gaussian => Self::gaussian(),
            Family::Sinc => Self::sinc(),
        }
    }

    /// Stationary kernel with spectral measure `Σ wᵢ δ_{xᵢ}`. Only the even
    /// part matters: the covariance is `Σ wᵢ cos(τ xᵢ)`.
    pub fn spectral(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::InvalidInput(
                "spectral kernel needs equally many nodes and weights (at least one)".into(),
            ));
        }
        if nodes.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectral node or weight"));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidInput("spectral weights must be nonnegative".into()));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidInput("spectral measure has zero mass".into()));
        }
        Ok(Self {
            repr: Repr::Spectral { nodes, weights },
        })
    }

    /// `X_t = Y·g(t) + Z_t − L(Z)` with `Z` drawn from the stationary `base`.
    pub fn composite(base: Kernel, poly: Vec<f64>, functional: Functional) -> Result<Self> {
        if !base.is_stationary() {
            return Err(Error::InvalidInput("composite base kernel must be stationary".into()));
        }
        if poly.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("polynomial coefficient"));
        }
        let functional_variance = match functional {
            Functional::AtZero => base.stationary_deriv(0.0, 0),
            Functional::UnitIntegral => base.unit_integral_variance(),
        };
        Ok(Self {
            repr: Repr::Composite(Box::new(Composite {
                base,
                poly,
                functional,
                functional_variance,
            })),
        })
    }

    pub fn family(&self) -> Option<Family> {
        match self.repr {
            Repr::Gaussian { scale } if scale == 1.0 => Some(Family::Gaussian),
            Repr::Sinc { scale } if scale == 1.0 => Some(Family::Sinc),
            _ => None,
        }
    }

    pub fn is_stationary(&self) -> bool {
        !matches!(self.repr, Repr::Composite(_))
    }

    /// `R(s, t)`.
    pub fn eval(&self, s: f64, t: f64) -> Result<f64> {
        self.deriv(s, t, 0, 0)
    }

    /// `∂^{m+n} R(s,t) / ∂s^m ∂t^n`.
    pub fn deriv(&self, s: f64, t: f64, m: usize, n: usize) -> Result<f64> {
        if !s.is_finite() || !t.is_finite() {
            return Err(Error::NonFinite("kernel argument"));
        }
        if m + n > MAX_DERIV_ORDER {
            return Err(Error::UnsupportedOrder {
                m,
                n,
                max: MAX_DERIV_ORDER,
            });
        }
        Ok(self.deriv_unchecked(s, t, m, n))
    }

    pub(crate) fn deriv_unchecked(&self, s: f64, t: f64, m: usize, n: usize) -> f64 {
        match &self.repr {
            Repr::Composite(c) => c.deriv(s, t, m, n),
            _ => {
                let v = self.stationary_deriv(t - s, m + n);
                if m % 2 == 1 {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// `λ₂ = −R''(0)`; for a composite, the second spectral moment of its
    /// stationary base.
    pub fn second_spectral_moment(&self) -> f64 {
        match &self.repr {
            Repr::Composite(c) => c.base.second_spectral_moment(),
            _ => -self.stationary_deriv(0.0, 2),
        }
    }

    /// n-th derivative of the covariance profile `ρ(τ)`, `R(s,t) = ρ(t−s)`.
    /// Composite kernels have no profile; callers check `is_stationary`.
    pub(crate) fn stationary_deriv(&self, tau: f64, n: usize) -> f64 {
        match &self.repr {
            Repr::Gaussian { scale } => {
                let x = tau / scale;
                let v = hermite_he(n, x) * (-0.5 * x * x).exp() / scale.powi(n as i32);
                if n % 2 == 1 {
                    -v
                } else {
                    v
                }
            }
            Repr::Sinc { scale } => sinc_deriv(tau / scale, n) / scale.powi(n as i32),
            Repr::Spectral { nodes, weights } => nodes
                .iter()
                .zip(weights)
                .map(|(&x, &w)| w * x.powi(n as i32) * cos_deriv(tau * x, n))
                .sum(),
            Repr::Composite(_) => unreachable!("composite kernels are not stationary"),
        }
    }

    /// `∫₀^w ρ(v) dv`
    fn profile_antiderivative(&self, w: f64) -> f64 {
        match &self.repr {
            Repr::Gaussian { scale } => scale * (PI / 2.0).sqrt() * libm::erf(w / (scale * SQRT_2)),
            Repr::Sinc { scale } => scale * sine_integral(w / scale),
            Repr::Spectral { nodes, weights } => nodes
                .iter()
                .zip(weights)
                .map(|(&x, &wt)| if x == 0.0 { wt * w } else { wt * (w * x).sin() / x })
                .sum(),
            Repr::Composite(_) => unreachable!("composite kernels are not stationary"),
        }
    }

    /// `∫₀¹∫₀¹ ρ(v − w) dv dw = 2∫₀¹ (1−τ) ρ(τ) dτ`
    fn unit_integral_variance(&self) -> f64 {
        match &self.repr {
            Repr::Gaussian { scale } => {
                let l = *scale;
                2.0 * (l * (PI / 2.0).sqrt() * libm::erf(1.0 / (l * SQRT_2))
                    - l * l * (1.0 - (-0.5 / (l * l)).exp()))
            }
            Repr::Sinc { scale } => {
                let l = *scale;
                2.0 * (l * sine_integral(1.0 / l) - l * l * (1.0 - (1.0 / l).cos()))
            }
            Repr::Spectral { nodes, weights } => nodes
                .iter()
                .zip(weights)
                .map(|(&x, &w)| {
                    if x.abs() < 1e-4 {
                        // series of 2(1 − cos x)/x²
                        let x2 = x * x;
                        w * (1.0 - x2 / 12.0 + x2 * x2 / 360.0)
                    } else {
                        w * 2.0 * (1.0 - x.cos()) / (x * x)
                    }
                })
                .sum(),
            Repr::Composite(_) => unreachable!("composite kernels are not stationary"),
        }
    }

    /// Gram matrix of `Cov(X_{s}^{(i)}, X_{t}^{(j)})` over the `(location,
    /// order)` pairs, with an eigenvalue-based conditioning report.
    pub fn gram_matrix(&self, points: &[(f64, usize)]) -> Result<Gram> {
        for (i, p) in points.iter().enumerate() {
            if points[..i].contains(p) {
                return Err(Error::InvalidInput(format!(
                    "duplicate Gram point (location {}, order {})",
                    p.0, p.1
                )));
            }
        }
        let n = points.len();
        let mut matrix = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let (s, m) = points[i];
                let (t, o) = points[j];
                let v = self.deriv(s, t, m, o)?;
                matrix[(i, j)] = v;
                matrix[(j, i)] = v;
            }
        }
        Ok(Gram::from_matrix(matrix))
    }

    /// Gram matrix of plain values at `locations`.
    pub fn value_gram(&self, locations: &[f64]) -> Result<Gram> {
        let pts: Vec<(f64, usize)> = locations.iter().map(|&t| (t, 0)).collect();
        self.gram_matrix(&pts)
    }

    pub(crate) fn value_matrix(&self, rows: &[f64], cols: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            self.deriv_unchecked(rows[i], cols[j], 0, 0)
        })
    }
}

impl Composite {
    fn deriv(&self, s: f64, t: f64, m: usize, n: usize) -> f64 {
        let mut v = poly_deriv(&self.poly, s, m) * poly_deriv(&self.poly, t, n)
            + self.base.deriv_unchecked(s, t, m, n);
        let cs = if n == 0 { self.functional_cov_deriv(s, m) } else { 0.0 };
        let ct = if m == 0 { self.functional_cov_deriv(t, n) } else { 0.0 };
        // summed first so that R(s,t) and R(t,s) round identically
        v -= cs + ct;
        if m == 0 && n == 0 {
            v += self.functional_variance;
        }
        v
    }

    /// n-th derivative of `c(s) = Cov(Z_s, L(Z))`.
    fn functional_cov_deriv(&self, s: f64, n: usize) -> f64 {
        match self.functional {
            Functional::AtZero => self.base.deriv_unchecked(s, 0.0, n, 0),
            Functional::UnitIntegral => {
                // c(s) = P(1−s) − P(−s) with P' = ρ
                let v = if n == 0 {
                    self.base.profile_antiderivative(1.0 - s) - self.base.profile_antiderivative(-s)
                } else {
                    self.base.stationary_deriv(1.0 - s, n - 1)
                        - self.base.stationary_deriv(-s, n - 1)
                };
                if n % 2 == 1 {
                    -v
                } else {
                    v
                }
            }
        }
    }
}

/// Symmetric Gram matrix plus its spectral conditioning data.
#[derive(Clone, Debug)]
pub struct Gram {
    pub matrix: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// λ_min / λ_max ≤ [`CONDITIONING_TOL`]
    pub ill_conditioned: bool,
}

impl Gram {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        if matrix.nrows() == 0 {
            return Self {
                matrix,
                min_eigenvalue: f64::INFINITY,
                max_eigenvalue: 0.0,
                ill_conditioned: false,
            };
        }
        let eig = SymmetricEigen::new(matrix.clone());
        let min_eigenvalue = eig.eigenvalues.min();
        let max_eigenvalue = eig.eigenvalues.max();
        let ill_conditioned = !(max_eigenvalue > 0.0 && min_eigenvalue / max_eigenvalue > CONDITIONING_TOL);
        Self {
            matrix,
            min_eigenvalue,
            max_eigenvalue,
            ill_conditioned,
        }
    }

    /// λ_max / λ_min, or infinity for a singular matrix.
    pub fn condition_number(&self) -> f64 {
        if self.min_eigenvalue <= 0.0 {
            f64::INFINITY
        } else {
            self.max_eigenvalue / self.min_eigenvalue
        }
    }
}

fn check_scale(l: f64) -> Result<()> {
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::InvalidInput(format!("length scale must be positive, got {l}")));
    }
    Ok(())
}

/// Probabilists' Hermite polynomial He_n(x).
fn hermite_he(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = x * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// n-th derivative of `cos` at `x`, i.e. `cos(x + nπ/2)` without the
/// rounding of the phase shift.
fn cos_deriv(x: f64, n: usize) -> f64 {
    match n % 4 {
        0 => x.cos(),
        1 => -x.sin(),
        2 => -x.cos(),
        _ => x.sin(),
    }
}

/// n-th derivative of `sin(x)/x`.
fn sinc_deriv(x: f64, n: usize) -> f64 {
    if x.abs() < 4.0 {
        // Σ_j (−1)^j x^{2j}/(2j+1)! differentiated termwise; each term is
        // (−1)^j x^p / ((2j+1) p!) with p = 2j − n.
        let mut j = n.div_ceil(2);
        let mut p = 2 * j - n;
        let mut q = if p == 0 { 1.0 } else { x };
        let mut sum = 0.0;
        loop {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let term = sign * q / (2 * j + 1) as f64;
            sum += term;
            if p > 8 && term.abs() <= 1e-18 * sum.abs().max(1e-300) {
                break;
            }
            if j > 200 {
                break;
            }
            q *= x * x / (((p + 1) * (p + 2)) as f64);
            p += 2;
            j += 1;
        }
        sum
    } else {
        // Leibniz on sin(x) · x⁻¹, (x⁻¹)^{(r)} = (−1)^r r! x^{−r−1}
        let mut sum = 0.0;
        let mut binom = 1.0;
        for k in 0..=n {
            let r = n - k;
            let sin_k = match k % 4 {
                0 => x.sin(),
                1 => x.cos(),
                2 => -x.sin(),
                _ => -x.cos(),
            };
            let fact_r: f64 = (1..=r).map(|i| i as f64).product();
            let inv_r = if r % 2 == 0 { 1.0 } else { -1.0 } * fact_r / x.powi(r as i32 + 1);
            sum += binom * sin_k * inv_r;
            binom = binom * (n - k) as f64 / (k + 1) as f64;
        }
        sum
    }
}

/// `Si(x) = ∫₀ˣ sin(v)/v dv`
fn sine_integral(x: f64) -> f64 {
    if x.abs() <= 4.0 {
        let mut sum = 0.0;
        let mut q = x; // x^{2k+1}/(2k+1)!
        let mut k = 0usize;
        loop {
            let term = q / (2 * k + 1) as f64;
            let term = if k % 2 == 0 { term } else { -term };
            sum += term;
            if term.abs() <= 1e-18 * sum.abs().max(1e-300) || k > 100 {
                break;
            }
            q *= x * x / (((2 * k + 2) * (2 * k + 3)) as f64);
            k += 1;
        }
        sum
    } else {
        let edge = 4.0f64.copysign(x);
        let pieces = (x - edge).abs().ceil() as usize;
        sine_integral(edge) + quad::composite_gl(|v| v.sin() / v, edge, x, pieces.max(1), 20)
    }
}

fn poly_deriv(coeffs: &[f64], x: f64, order: usize) -> f64 {
    // Horner on the order-th derivative coefficients
    let mut acc = 0.0;
    for (i, &c) in coeffs.iter().enumerate().skip(order).rev() {
        let falling: f64 = (i + 1 - order..=i).map(|v| v as f64).product();
        acc = acc * x + c * falling;
    }
    acc
}
