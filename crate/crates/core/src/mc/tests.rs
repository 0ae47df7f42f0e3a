use super::*;
use crate::asymptotics::{analyze, AsymptoticOptions, Asymptotics};
use crate::kernels::{Interval, Kernel};
use crate::quad::composite_gl;
use crate::solver::{breakpoint_solve, solve, Breakpoint, SolverOptions};
use crate::Family;

fn gauss(b: f64) -> Asymptotics {
    let k = Kernel::gaussian();
    let sol = solve(&k, &Interval::new(0.0, b).unwrap(), &SolverOptions::default()).unwrap();
    analyze(&k, &sol, &AsymptoticOptions::default()).unwrap()
}

fn upper_normal(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// P(X₁ > u, X₂ > u) for a standard bivariate normal with correlation ρ.
fn orthant2(rho: f64, u: f64) -> f64 {
    let s = (1.0 - rho * rho).sqrt();
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    composite_gl(|x| phi(x) * upper_normal((u - rho * x) / s), u, u + 12.0, 64, 20)
}

#[test]
fn path_grid_factor_is_accurate() {
    let k = Kernel::gaussian();
    let iv = Interval::new(0.0, 1.0).unwrap();
    let g = PathGrid::uniform(&k, &iv, 201, &[0.5, 0.123]).unwrap();
    assert_eq!(g.len(), 202);
    assert!(g.points.windows(2).all(|w| w[0] < w[1]));
    assert!(g.factor_residual <= 1e-8 * g.gram_scale);
    assert!(g.rank < 40, "rank {}", g.rank);
    assert!(g.index_of(0.123).is_some());
}

#[test]
fn sampled_paths_have_kernel_covariance() {
    let k = Kernel::gaussian();
    let iv = Interval::new(0.0, 1.0).unwrap();
    let g = PathGrid::uniform(&k, &iv, 11, &[]).unwrap();
    let paths = sample_paths(&g, 100_000, 3);
    let n = paths.len() as f64;
    for i in 0..g.len() {
        let var = paths.iter().map(|p| p[i] * p[i]).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }
    let cov = paths.iter().map(|p| p[0] * p[10]).sum::<f64>() / n;
    assert!((cov - (-0.5f64).exp()).abs() < 0.03 * (-0.5f64).exp(), "cov {cov}");
    assert_eq!(paths, sample_paths(&g, 100_000, 3));
}

#[test]
fn no_constraint_gives_probability_one() {
    let a = gauss(1.0);
    let g = PathGrid::uniform(&a.kernel, &a.solution.interval, 51, &[]).unwrap();
    let r = is_estimate(&a, &g, -10.0, 10_000, 1).unwrap();
    assert!(!r.shift_applied);
    assert!((r.p_hat - 1.0).abs() < 1e-3);
}

#[test]
fn support_grid_matches_orthant_probability() {
    let a = gauss(1.0);
    let g = PathGrid::from_points(&a.kernel, &a.solution.interval, vec![0.0, 1.0]).unwrap();
    let rho = (-0.5f64).exp();
    for u in [2.0, 3.0, 4.0] {
        let r = is_estimate(&a, &g, u, 200_000, 17).unwrap();
        let exact = orthant2(rho, u);
        assert!((r.p_hat - exact).abs() <= 3.0 * r.ci_half_width, "u={u}: {} vs {exact} ± {}", r.p_hat, r.ci_half_width);
        assert!(r.ci[0] <= r.p_hat && r.p_hat <= r.ci[1]);
        assert!(r.ess <= r.n as f64);
    }
}

#[test]
fn likelihood_ratio_identity_holds_pointwise() {
    let a = gauss(3.0);
    let g = PathGrid::uniform(&a.kernel, &a.solution.interval, 31, &[]).unwrap();
    let s = TiltedSampler::new(&a.kernel, a.solution.support(), &g).unwrap();
    let mut rng = stream::chunk_rng(9, 0);
    let mut buf = vec![0.0; s.k() + s.residual_rank()];
    let mut xs = vec![0.0; s.k()];
    let mut path = vec![0.0; s.m()];
    for u in [0.5, 3.0, 5.0] {
        for _ in 0..200 {
            s.draw(&mut rng, u, &mut buf, &mut xs, &mut path);
            let lhs = s.log_likelihood_ratio(&xs, u) + s.log_support_density(&xs, u);
            let rhs = s.log_support_density(&xs, 0.0);
            assert!(((lhs - rhs).exp() - 1.0).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }
}

#[test]
fn estimates_are_reproducible() {
    let a = gauss(1.0);
    let g = PathGrid::uniform(&a.kernel, &a.solution.interval, 41, &[]).unwrap();
    let r1 = is_estimate(&a, &g, 3.0, 30_000, 5).unwrap();
    let r2 = is_estimate(&a, &g, 3.0, 30_000, 5).unwrap();
    assert_eq!(r1, r2);
    let r3 = is_estimate(&a, &g, 3.0, 30_000, 6).unwrap();
    assert_ne!(r1.p_hat, r3.p_hat);
    let c1 = conditional_samples(&a, &g, 3.0, 30_000, 5).unwrap();
    assert_eq!(c1, conditional_samples(&a, &g, 3.0, 30_000, 5).unwrap());
    assert_eq!(c1.report, r1);
}

#[test]
fn degenerate_configuration_refused() {
    let c2 = breakpoint_solve(Family::Gaussian, Breakpoint::C2).unwrap();
    let a = gauss(c2);
    let g = PathGrid::uniform(&a.kernel, &a.solution.interval, 51, &[]).unwrap();
    assert!(is_estimate(&a, &g, 3.0, 10_000, 1).is_err());
    assert!(qw_reference_sample(&a, &g, 10_000, 1).is_err());
}

#[test]
fn qw_reference_for_empty_field() {
    let a = gauss(1.0);
    let g = PathGrid::uniform(&a.kernel, &a.solution.interval, 21, &[]).unwrap();
    let q = qw_reference_sample(&a, &g, 50_000, 2).unwrap();
    assert_eq!(q.mean_w, 1.0);
    assert_eq!(q.weighted_mean, q.mean);
    for (m, v) in q.mean.iter().zip(&q.var) {
        assert!(m.abs() <= 4.0 * (v / 50_000.0).sqrt() + 1e-12);
    }
}

#[test]
fn qw_reference_half_normal_at_breakpoint() {
    let c1 = breakpoint_solve(Family::Gaussian, Breakpoint::C1).unwrap();
    let a = gauss(c1);
    let ess = a.essential.locations();
    let g = PathGrid::uniform(&a.kernel, &a.solution.interval, 41, &ess).unwrap();
    let n = 400_000;
    let q = qw_reference_sample(&a, &g, n, 4).unwrap();
    let sigma = a.field.covariance[(0, 0)].sqrt();
    let expected = sigma * (2.0 / std::f64::consts::PI).sqrt();
    // Var(Z | Z > 0) = σ²(1 − 2/π) over about n/2 accepted draws
    let se = sigma * (1.0 - 2.0 / std::f64::consts::PI).sqrt() / (n as f64 / 2.0).sqrt();
    assert!((q.component_means[0] - expected).abs() < 4.0 * se, "{} vs {expected}", q.component_means[0]);
    let i = g.index_of(ess[2]).unwrap();
    assert!((q.weighted_mean[i] - q.component_means[0]).abs() < 1e-12);
    assert!((q.mean_w - 0.5).abs() <= q.mean_w_ci.max(1e-12) * 2.0);
}
