//! Interval lengths at which the optimal support of a stationary kernel on
//! `[0, y]` changes shape.
//!
//! * `c1`: first `y > 0` where the midpoint joins the essential set of the
//!   two-endpoint solution, `2ρ(y/2) − ρ(0) − ρ(y) = 0`.
//! * `c2`: first `y > c1` where the curvature of μ at the midpoint of the
//!   three-atom solution `{0, y/2, y}` vanishes,
//!   `(1 − ε(y)) ρ''(y/2) + ε(y) ρ''(0) = 0`, with ε the midpoint weight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Family, Kernel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Breakpoint {
    C1,
    C2,
}

/// Breakpoint of a named family.
pub fn breakpoint_solve(family: Family, which: Breakpoint) -> Result<f64> {
    breakpoint_for(&Kernel::from_family(family), which)
}

/// Breakpoint of any stationary kernel, searched on (0, 60·λ₂^{-1/2}].
pub fn breakpoint_for(kernel: &Kernel, which: Breakpoint) -> Result<f64> {
    if !kernel.is_stationary() {
        return Err(Error::InvalidInput("breakpoints are defined for stationary kernels".into()));
    }
    let lambda2 = kernel.second_spectral_moment();
    if !(lambda2 > 0.0) {
        return Err(Error::InvalidInput("kernel has no curvature at the origin".into()));
    }
    let scale = lambda2.sqrt().recip();
    let step = 1e-3 * scale;
    let limit = 60.0 * scale;
    let f1 = |y: f64| two_point_gap(kernel, y);
    let c1 = first_root(&f1, step, step, limit)?;
    match which {
        Breakpoint::C1 => Ok(c1),
        Breakpoint::C2 => {
            let f2 = |y: f64| midpoint_curvature(kernel, y);
            first_root(&f2, c1 + step, step, limit)
        }
    }
}

/// `2ρ(y/2) − ρ(0) − ρ(y)`: positive while μ(y/2) > 1 for support {0, y}.
pub fn two_point_gap(kernel: &Kernel, y: f64) -> f64 {
    let rho = |t: f64| kernel.stationary_deriv(t, 0);
    2.0 * rho(0.5 * y) - rho(0.0) - rho(y)
}

/// Midpoint weight of the symmetric three-atom measure on {0, y/2, y}.
pub fn midpoint_weight(kernel: &Kernel, y: f64) -> f64 {
    let rho = |t: f64| kernel.stationary_deriv(t, 0);
    let (r0, r1, r2) = (rho(0.0), rho(0.5 * y), rho(y));
    (r0 + r2 - 2.0 * r1) / (3.0 * r0 + r2 - 4.0 * r1)
}

/// Proportional to μ''(y/2) for the three-atom solution on [0, y].
pub fn midpoint_curvature(kernel: &Kernel, y: f64) -> f64 {
    let eps = midpoint_weight(kernel, y);
    (1.0 - eps) * kernel.stationary_deriv(0.5 * y, 2) + eps * kernel.stationary_deriv(0.0, 2)
}

fn first_root(f: &dyn Fn(f64) -> f64, start: f64, step: f64, limit: f64) -> Result<f64> {
    let mut lo = start;
    let mut flo = f(lo);
    while lo < limit {
        let hi = lo + step;
        let fhi = f(hi);
        if flo == 0.0 {
            return Ok(lo);
        }
        if flo.signum() != fhi.signum() {
            return Ok(bisect(f, lo, hi, flo));
        }
        lo = hi;
        flo = fhi;
    }
    Err(Error::NoBracket { lo: start, hi: limit })
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_breakpoints() {
        let c1 = breakpoint_solve(Family::Gaussian, Breakpoint::C1).unwrap();
        let c2 = breakpoint_solve(Family::Gaussian, Breakpoint::C2).unwrap();
        assert!((c1 - 2.2079).abs() < 5e-4, "{c1}");
        assert!((c2 - 3.9283).abs() < 5e-4, "{c2}");
        // the defining equations hold at the roots
        let k = Kernel::gaussian();
        let closed_form = |y: f64| 2.0 * (-y * y / 8.0).exp() - 1.0 - (-y * y / 2.0).exp();
        assert!(closed_form(c1).abs() < 1e-14);
        let eps = midpoint_weight(&k, c2);
        let lhs = (1.0 - eps) * (c2 * c2 / 4.0 - 1.0) * (-c2 * c2 / 8.0).exp();
        assert!((lhs - eps).abs() < 1e-14);
    }

    #[test]
    fn sinc_breakpoints() {
        let c1 = breakpoint_solve(Family::Sinc, Breakpoint::C1).unwrap();
        let c2 = breakpoint_solve(Family::Sinc, Breakpoint::C2).unwrap();
        assert!((c1 - 4.275).abs() < 1e-2, "{c1}");
        assert!((c2 - 9.365).abs() < 1e-2, "{c2}");
    }

    #[test]
    fn midpoint_weight_at_three() {
        let y: f64 = 3.0;
        let e2 = (-y * y / 2.0).exp();
        let e8 = (-y * y / 8.0).exp();
        let expected = (1.0 + e2 - 2.0 * e8) / (3.0 + e2 - 4.0 * e8);
        assert!((midpoint_weight(&Kernel::gaussian(), y) - expected).abs() < 1e-15);
        assert!((expected - 0.2113).abs() < 1e-4);
    }

    #[test]
    fn length_scale_rescales_breakpoints() {
        let k = Kernel::gaussian_scaled(2.0).unwrap();
        let c1 = breakpoint_for(&k, Breakpoint::C1).unwrap();
        let base = breakpoint_solve(Family::Gaussian, Breakpoint::C1).unwrap();
        assert!((c1 - 2.0 * base).abs() < 1e-9);
    }

    #[test]
    fn composite_rejected() {
        let k = Kernel::composite(Kernel::gaussian(), vec![1.0], crate::kernels::Functional::AtZero).unwrap();
        assert!(breakpoint_for(&k, Breakpoint::C1).is_err());
    }
}
