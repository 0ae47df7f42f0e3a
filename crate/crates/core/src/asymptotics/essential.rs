use serde::{Deserialize, Serialize};

use super::mu::MuFunction;
use crate::kernels::Interval;

/// Highest derivative order inspected when looking for the first
/// nonvanishing derivative of μ.
pub const MAX_CONTACT_ORDER: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    InteriorSupport,
    EndpointSupport,
    EssentialNonSupport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssentialPoint {
    pub t: f64,
    pub kind: PointKind,
    pub mu: f64,
    /// μ', μ'', μ''', μ'''' at `t`.
    pub derivs: [f64; MAX_CONTACT_ORDER],
    /// Order of the first derivative judged nonzero; `None` when all of
    /// the first [`MAX_CONTACT_ORDER`] vanish.
    pub contact_order: Option<usize>,
}

impl EssentialPoint {
    pub fn mu1(&self) -> f64 {
        self.derivs[0]
    }

    pub fn mu2(&self) -> f64 {
        self.derivs[1]
    }
}

/// `E = {t ∈ [a,b] : μ(t) = 1}`, support points first (sorted), then the
/// remaining tangential roots (sorted).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssentialSet {
    pub points: Vec<EssentialPoint>,
    pub k: usize,
    /// Locations where no derivative up to order 4 is nonzero.
    pub suspicious: Vec<f64>,
    /// Support points violating the sign pattern of a minimum of μ
    /// (e.g. an interior point whose first nonzero derivative is odd).
    pub inconsistent: Vec<f64>,
}

impl EssentialSet {
    pub fn support_points(&self) -> &[EssentialPoint] {
        &self.points[..self.k]
    }

    pub fn extra_points(&self) -> &[EssentialPoint] {
        &self.points[self.k..]
    }

    pub fn locations(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssentialOptions {
    pub grid_n: usize,
    /// Accept a local minimum of μ as a root when μ ≤ 1 + this.
    pub root_tol: f64,
    /// Relative threshold below which a derivative of μ counts as zero.
    pub deriv_tol: f64,
}

impl Default for EssentialOptions {
    fn default() -> Self {
        Self {
            grid_n: 4001,
            root_tol: 1e-8,
            deriv_tol: 1e-7,
        }
    }
}

/// Locates all tangential roots of μ − 1 on the interval and classifies
/// every point of E.
pub fn essential_set(mu: &MuFunction, interval: &Interval, opts: &EssentialOptions) -> EssentialSet {
    let support = mu.support().to_vec();
    let grid = interval.uniform_grid(opts.grid_n.max(3));
    let values: Vec<f64> = grid.iter().map(|&t| mu.eval(t, 0)).collect();
    let spacing = if grid.len() > 1 { grid[1] - grid[0] } else { 0.0 };
    let merge = 2.0 * spacing + 1e-12;

    let mut extra: Vec<f64> = Vec::new();
    let n = grid.len();
    for i in 0..n {
        let left_ok = i == 0 || values[i] <= values[i - 1];
        let right_ok = i == n - 1 || values[i] <= values[i + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        let t = if i == 0 || i == n - 1 {
            grid[i]
        } else {
            polish_minimum(mu, grid[i - 1], grid[i + 1])
        };
        if mu.eval(t, 0) > 1.0 + opts.root_tol {
            continue;
        }
        if support.iter().any(|&s| (s - t).abs() <= merge) || extra.iter().any(|&e| (e - t).abs() <= merge) {
            continue;
        }
        extra.push(t);
    }
    extra.sort_by(f64::total_cmp);

    let mut suspicious = Vec::new();
    let mut inconsistent = Vec::new();
    let mut points = Vec::with_capacity(support.len() + extra.len());
    for (&t, is_support) in support.iter().map(|t| (t, true)).chain(extra.iter().map(|t| (t, false))) {
        let kind = if !is_support {
            PointKind::EssentialNonSupport
        } else if t == interval.a || t == interval.b {
            PointKind::EndpointSupport
        } else {
            PointKind::InteriorSupport
        };
        let mut derivs = [0.0; MAX_CONTACT_ORDER];
        let mut contact_order = None;
        for (j, d) in derivs.iter_mut().enumerate() {
            *d = mu.eval(t, j + 1);
            if contact_order.is_none() && !mu.vanishes(t, j + 1, opts.deriv_tol) {
                contact_order = Some(j + 1);
            }
        }
        match contact_order {
            None => suspicious.push(t),
            Some(order) => {
                let lead = derivs[order - 1];
                let ok = match kind {
                    PointKind::EndpointSupport if t == interval.a => order > 1 || lead > 0.0,
                    PointKind::EndpointSupport => order > 1 || lead < 0.0,
                    _ => order % 2 == 0 && lead > 0.0,
                };
                if !ok {
                    inconsistent.push(t);
                }
            }
        }
        points.push(EssentialPoint {
            t,
            kind,
            mu: mu.eval(t, 0),
            derivs,
            contact_order,
        });
    }
    EssentialSet {
        points,
        k: support.len(),
        suspicious,
        inconsistent,
    }
}

/// `μ''(t) > 0` at every interior support point, i.e. the leading
/// constant E(W) is positive.
pub fn nondegeneracy_check(set: &EssentialSet) -> bool {
    set.support_points()
        .iter()
        .filter(|p| p.kind == PointKind::InteriorSupport)
        .all(|p| p.contact_order == Some(2) && p.mu2() > 0.0)
}

/// Minimizes μ on [lo, hi] by Newton on μ' with a bisection safeguard.
fn polish_minimum(mu: &MuFunction, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    let d_lo = mu.eval(lo, 1);
    let d_hi = mu.eval(hi, 1);
    if !(d_lo <= 0.0 && d_hi >= 0.0) {
        // no bracketed critical point: best grid value
        let mid = 0.5 * (lo + hi);
        return [lo, mid, hi]
            .into_iter()
            .min_by(|x, y| mu.eval(*x, 0).total_cmp(&mu.eval(*y, 0)))
            .unwrap();
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..100 {
        let d1 = mu.eval(t, 1);
        if d1 == 0.0 {
            return t;
        }
        if d1 < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let d2 = mu.eval(t, 2);
        let newton = if d2 > 0.0 { t - d1 / d2 } else { f64::NAN };
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - t).abs() <= 1e-15 * (1.0 + t.abs()) || hi - lo <= 1e-15 * (1.0 + t.abs()) {
            return next;
        }
        t = next;
    }
    t
}
