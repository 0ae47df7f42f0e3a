//! Importance sampling of `P(min X > u)` by tilting the support values.
//!
//! X on the grid is written as `X = A X_S + Z` with `A = R(grid, S) Σ⁻¹` and
//! Z the residual process, independent of `X_S`. Shifting the law of `X_S`
//! to mean `u·1` moves the whole path mean to `u μ(·)`, and the likelihood
//! ratio is a function of `X_S` alone:
//! `LR = exp(−u θᵀX_S + u² Σθ / 2)`.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{GridInfo, PathGrid, FACTOR_TOL};
use super::stats::{effective_sample_size, exp_cdf, weighted_correlation, weighted_ks, weighted_mean};
use super::stream::{fill_normal, run_chunks, Moments, Z95};
use crate::asymptotics::{tail_probability, Asymptotics};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::linalg::PivotedCholesky;

/// ESS below which an estimate is flagged.
pub const LOW_ESS: f64 = 100.0;
/// Effective accepted sample size below which a conditional ensemble is
/// flagged.
pub const LOW_CONDITIONAL_ESS: f64 = 500.0;
/// Argmin window radius in grid spacings.
pub const ARGMIN_WINDOW: f64 = 5.0;

/// Sampler of grid paths under the tilted law.
#[derive(Clone, Debug)]
pub struct TiltedSampler {
    points: Vec<f64>,
    support: Vec<f64>,
    theta: Vec<f64>,
    theta_sum: f64,
    /// Lower Cholesky factor of Σ.
    l_s: DMatrix<f64>,
    /// Row-major `m × (k + r)` map `[A | L_Z]`.
    map: Vec<f64>,
    cols: usize,
    mu_grid: Vec<f64>,
    residual_rank: usize,
    spacing: f64,
}

impl TiltedSampler {
    pub fn new(kernel: &Kernel, support: &[f64], grid: &PathGrid) -> Result<Self> {
        let k = support.len();
        let m = grid.len();
        let sigma = kernel.value_matrix(support, support);
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("support Gram matrix is not positive definite".into()))?;
        let theta = chol.solve(&DVector::from_element(k, 1.0));
        let cross = kernel.value_matrix(support, &grid.points); // k × m
        let a_t = chol.solve(&cross); // Σ⁻¹ R(S, grid)
        let g = kernel.value_matrix(&grid.points, &grid.points);
        let resid = &g - a_t.transpose() * &cross;
        let resid = (&resid + resid.transpose()) * 0.5;
        let lz = PivotedCholesky::new(&resid, FACTOR_TOL);
        let r = lz.rank;
        let cols = k + r;
        let mut map = vec![0.0; m * cols];
        let mut mu_grid = vec![0.0; m];
        for i in 0..m {
            for j in 0..k {
                map[i * cols + j] = a_t[(j, i)];
            }
            for l in 0..r {
                map[i * cols + k + l] = lz.factor[(i, l)];
            }
            mu_grid[i] = (0..k).map(|j| a_t[(j, i)]).sum();
        }
        Ok(Self {
            points: grid.points.clone(),
            support: support.to_vec(),
            theta_sum: theta.sum(),
            theta: theta.iter().copied().collect(),
            l_s: chol.l(),
            map,
            cols,
            mu_grid,
            residual_rank: r,
            spacing: grid.spacing,
        })
    }

    pub fn k(&self) -> usize {
        self.support.len()
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn residual_rank(&self) -> usize {
        self.residual_rank
    }

    /// μ on the grid.
    pub fn mu_grid(&self) -> &[f64] {
        &self.mu_grid
    }

    /// One path with `X_S ~ N(shift·1, Σ)`. Writes `X_S` into `xs` and the
    /// path into `path`; `buf` holds the `k + r` standard normals.
    pub fn draw(&self, rng: &mut ChaCha8Rng, shift: f64, buf: &mut [f64], xs: &mut [f64], path: &mut [f64]) {
        let k = self.k();
        fill_normal(rng, buf);
        for i in 0..k {
            let mut s = shift;
            for j in 0..=i {
                s += self.l_s[(i, j)] * buf[j];
            }
            xs[i] = s;
        }
        buf[..k].copy_from_slice(xs);
        for (i, p) in path.iter_mut().enumerate() {
            let row = &self.map[i * self.cols..(i + 1) * self.cols];
            *p = row.iter().zip(buf.iter()).map(|(a, b)| a * b).sum();
        }
    }

    /// `log LR = −u θᵀx + u² Σθ / 2`.
    pub fn log_likelihood_ratio(&self, xs: &[f64], u: f64) -> f64 {
        let dot: f64 = self.theta.iter().zip(xs).map(|(t, x)| t * x).sum();
        -u * dot + 0.5 * u * u * self.theta_sum
    }

    /// Log density of `N(mean·1, Σ)` at `xs`.
    pub fn log_support_density(&self, xs: &[f64], mean: f64) -> f64 {
        let k = self.k();
        // forward substitution with L
        let mut y = vec![0.0; k];
        for i in 0..k {
            let mut s = xs[i] - mean;
            for j in 0..i {
                s -= self.l_s[(i, j)] * y[j];
            }
            y[i] = s / self.l_s[(i, i)];
        }
        let log_det: f64 = (0..k).map(|i| self.l_s[(i, i)].ln()).sum::<f64>() * 2.0;
        -0.5 * y.iter().map(|v| v * v).sum::<f64>() - 0.5 * log_det - 0.5 * k as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OvershootStats {
    /// Weighted mean of `u (min X − u)`.
    pub mean: f64,
    /// Predicted limit mean V*.
    pub expected_mean: f64,
    pub ks_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArgminStats {
    pub atoms: Vec<f64>,
    /// Weighted frequency of the leftmost grid argmin falling within the
    /// window around each atom.
    pub frequencies: Vec<f64>,
    pub off_atom: f64,
    pub window: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub u: f64,
    pub n: usize,
    pub p_hat: f64,
    pub ci: [f64; 2],
    pub ci_half_width: f64,
    pub formula_value: Option<f64>,
    pub ratio: Option<f64>,
    pub ess: f64,
    pub hits: usize,
    pub overshoot: Option<OvershootStats>,
    pub argmin: Option<ArgminStats>,
    pub seed: u64,
    pub grid: GridInfo,
    pub residual_rank: usize,
    pub shift_applied: bool,
    pub low_ess_warning: bool,
}

/// One accepted path of the conditional ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSample {
    /// `u (min X − u)` over the grid.
    pub overshoot: f64,
    /// Leftmost grid argmin.
    pub argmin: f64,
    /// Index of the atom whose window contains the argmin.
    pub atom: Option<usize>,
    /// Likelihood ratio divided by `exp(−u² Σθ / 2)`.
    pub lr_scaled: f64,
    /// Self-normalized weight.
    pub weight: f64,
    /// `u (X_{tⱼ} − u)` at the support points.
    pub support_scaled: Vec<f64>,
}

/// Accepted paths `{min X > u}` with self-normalized likelihood-ratio
/// weights, plus weighted fluctuation curves of `X − u μ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEnsemble {
    pub u: f64,
    pub grid: Vec<f64>,
    pub samples: Vec<ConditionalSample>,
    pub n_eff: f64,
    pub low_neff_warning: bool,
    pub fluctuation_mean: Vec<f64>,
    pub fluctuation_stderr: Vec<f64>,
    pub report: MCReport,
}

impl ConditionalEnsemble {
    fn weights(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.weight).collect()
    }

    pub fn overshoot_mean(&self) -> Option<f64> {
        let v: Vec<f64> = self.samples.iter().map(|s| s.overshoot).collect();
        weighted_mean(&v, &self.weights())
    }

    pub fn overshoot_ks(&self, mean: f64) -> Option<f64> {
        let v: Vec<f64> = self.samples.iter().map(|s| s.overshoot).collect();
        weighted_ks(&v, &self.weights(), exp_cdf(mean))
    }

    /// Weighted correlation of `u(X_{tᵢ} − u)` and `u(X_{tⱼ} − u)`.
    pub fn support_correlation(&self, i: usize, j: usize) -> Option<f64> {
        let x: Vec<f64> = self.samples.iter().map(|s| s.support_scaled[i]).collect();
        let y: Vec<f64> = self.samples.iter().map(|s| s.support_scaled[j]).collect();
        weighted_correlation(&x, &y, &self.weights())
    }

    /// KS distance of `u(X_{tⱼ} − u)` from the exponential law with rate
    /// `rate`.
    pub fn support_ks(&self, j: usize, rate: f64) -> Option<f64> {
        let x: Vec<f64> = self.samples.iter().map(|s| s.support_scaled[j]).collect();
        weighted_ks(&x, &self.weights(), exp_cdf(1.0 / rate))
    }
}

struct Hit {
    overshoot: f64,
    argmin: usize,
    lr_scaled: f64,
    support_scaled: Vec<f64>,
}

#[derive(Default)]
struct ChunkOut {
    moments: Moments,
    hits: Vec<Hit>,
    fl_w: f64,
    fl_sum: Vec<f64>,
    fl_sq: Vec<f64>,
}

struct RunOut {
    n: usize,
    moments: Moments,
    log_scale: f64,
    shift: bool,
    hits: Vec<Hit>,
    fl_w: f64,
    fl_sum: Vec<f64>,
    fl_sq: Vec<f64>,
}

fn run(sampler: &TiltedSampler, u: f64, n: usize, seed: u64, collect: bool) -> RunOut {
    let shift = u > 0.0;
    let k = sampler.k();
    let m = sampler.m();
    let log_scale = if shift { -0.5 * u * u * sampler.theta_sum } else { 0.0 };
    let parts = run_chunks(n, seed, |rng, _, count| {
        let mut out = ChunkOut::default();
        if collect {
            out.fl_sum = vec![0.0; m];
            out.fl_sq = vec![0.0; m];
        }
        let mut buf = vec![0.0; sampler.cols];
        let mut xs = vec![0.0; k];
        let mut path = vec![0.0; m];
        for _ in 0..count {
            sampler.draw(rng, if shift { u } else { 0.0 }, &mut buf, &mut xs, &mut path);
            let mut argmin = 0;
            for i in 1..m {
                if path[i] < path[argmin] {
                    argmin = i;
                }
            }
            let min = path[argmin];
            if !(min > u) {
                out.moments.push(0.0);
                continue;
            }
            let w = if shift {
                let dot: f64 = sampler.theta.iter().zip(&xs).map(|(t, x)| t * (x - u)).sum();
                (-u * dot).exp()
            } else {
                1.0
            };
            out.moments.push(w);
            if collect {
                out.fl_w += w;
                for i in 0..m {
                    let f = path[i] - u * sampler.mu_grid[i];
                    out.fl_sum[i] += w * f;
                    out.fl_sq[i] += w * f * f;
                }
            }
            out.hits.push(Hit {
                overshoot: u * (min - u),
                argmin,
                lr_scaled: w,
                support_scaled: if collect { xs.iter().map(|x| u * (x - u)).collect() } else { Vec::new() },
            });
        }
        out
    });
    let mut total = RunOut {
        n,
        moments: Moments::default(),
        log_scale,
        shift,
        hits: Vec::new(),
        fl_w: 0.0,
        fl_sum: vec![0.0; if collect { m } else { 0 }],
        fl_sq: vec![0.0; if collect { m } else { 0 }],
    };
    for p in parts {
        total.moments.merge(&p.moments);
        total.hits.extend(p.hits);
        total.fl_w += p.fl_w;
        for i in 0..total.fl_sum.len() {
            total.fl_sum[i] += p.fl_sum[i];
            total.fl_sq[i] += p.fl_sq[i];
        }
    }
    total
}

fn check(asym: &Asymptotics, n: usize, u: f64) -> Result<()> {
    if !asym.report.nondegenerate {
        return Err(Error::UpperBoundOnly { k: asym.report.k });
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be positive".into()));
    }
    if !u.is_finite() {
        return Err(Error::NonFinite("level u"));
    }
    Ok(())
}

fn build_report(asym: &Asymptotics, grid: &PathGrid, sampler: &TiltedSampler, out: &RunOut, u: f64, seed: u64) -> MCReport {
    let scale = out.log_scale.exp();
    let p_hat = out.moments.mean() * scale;
    let half = Z95 * (out.moments.variance() / out.n as f64).sqrt() * scale;
    let formula_value = if u > 0.0 { tail_probability(&asym.report, u).ok() } else { None };
    let ratio = formula_value.filter(|f| *f > 0.0).map(|f| p_hat / f);
    let lr: Vec<f64> = out.hits.iter().map(|h| h.lr_scaled).collect();
    let ess = effective_sample_size(&lr);
    let (overshoot, argmin) = if out.hits.is_empty() {
        (None, None)
    } else {
        let v: Vec<f64> = out.hits.iter().map(|h| h.overshoot).collect();
        let v_star = asym.report.v_star;
        let over = OvershootStats {
            mean: weighted_mean(&v, &lr).unwrap_or(f64::NAN),
            expected_mean: v_star,
            ks_distance: weighted_ks(&v, &lr, exp_cdf(v_star)).unwrap_or(f64::NAN),
        };
        let window = ARGMIN_WINDOW * sampler.spacing;
        let total: f64 = lr.iter().sum();
        let mut freq = vec![0.0; sampler.k()];
        let mut off = 0.0;
        for h in &out.hits {
            match nearest_atom(&sampler.support, grid.points[h.argmin], window) {
                Some(j) => freq[j] += h.lr_scaled,
                None => off += h.lr_scaled,
            }
        }
        freq.iter_mut().for_each(|f| *f /= total);
        (
            Some(over),
            Some(ArgminStats {
                atoms: sampler.support.clone(),
                frequencies: freq,
                off_atom: off / total,
                window,
            }),
        )
    };
    MCReport {
        u,
        n: out.n,
        p_hat,
        ci: [(p_hat - half).max(0.0), p_hat + half],
        ci_half_width: half,
        formula_value,
        ratio,
        ess,
        hits: out.hits.len(),
        overshoot,
        argmin,
        seed,
        grid: grid.info(),
        residual_rank: sampler.residual_rank,
        shift_applied: out.shift,
        low_ess_warning: ess < LOW_ESS,
    }
}

fn nearest_atom(atoms: &[f64], t: f64, window: f64) -> Option<usize> {
    atoms
        .iter()
        .enumerate()
        .map(|(j, a)| (j, (a - t).abs()))
        .filter(|(_, d)| *d <= window + 1e-12)
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(j, _)| j)
}

/// Importance-sampling estimate of `P(min over the grid > u)`. For `u ≤ 0`
/// the tilt is disabled and plain Monte Carlo is used.
pub fn is_estimate(asym: &Asymptotics, grid: &PathGrid, u: f64, n: usize, seed: u64) -> Result<MCReport> {
    check(asym, n, u)?;
    let sampler = TiltedSampler::new(&asym.kernel, asym.solution.support(), grid)?;
    let out = run(&sampler, u, n, seed, false);
    Ok(build_report(asym, grid, &sampler, &out, u, seed))
}

/// Weighted ensemble of paths conditioned on `min X > u`.
pub fn conditional_samples(asym: &Asymptotics, grid: &PathGrid, u: f64, n: usize, seed: u64) -> Result<ConditionalEnsemble> {
    check(asym, n, u)?;
    let sampler = TiltedSampler::new(&asym.kernel, asym.solution.support(), grid)?;
    let out = run(&sampler, u, n, seed, true);
    let report = build_report(asym, grid, &sampler, &out, u, seed);
    let total: f64 = out.hits.iter().map(|h| h.lr_scaled).sum();
    let window = ARGMIN_WINDOW * sampler.spacing;
    let samples: Vec<ConditionalSample> = out
        .hits
        .iter()
        .map(|h| ConditionalSample {
            overshoot: h.overshoot,
            argmin: grid.points[h.argmin],
            atom: nearest_atom(&sampler.support, grid.points[h.argmin], window),
            lr_scaled: h.lr_scaled,
            weight: h.lr_scaled / total,
            support_scaled: h.support_scaled.clone(),
        })
        .collect();
    let n_eff = report.ess;
    let w2: f64 = samples.iter().map(|s| s.weight * s.weight).sum();
    let (fluctuation_mean, fluctuation_stderr) = if out.fl_w > 0.0 {
        let mean: Vec<f64> = out.fl_sum.iter().map(|s| s / out.fl_w).collect();
        let se = out
            .fl_sq
            .iter()
            .zip(&mean)
            .map(|(q, mu)| ((q / out.fl_w - mu * mu).max(0.0) * w2).sqrt())
            .collect();
        (mean, se)
    } else {
        (vec![f64::NAN; grid.len()], vec![f64::NAN; grid.len()])
    };
    Ok(ConditionalEnsemble {
        u,
        grid: grid.points.clone(),
        samples,
        n_eff,
        low_neff_warning: n_eff < LOW_CONDITIONAL_ESS,
        fluctuation_mean,
        fluctuation_stderr,
        report,
    })
}
