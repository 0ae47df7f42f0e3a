use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::residual::ResidualField;
use crate::error::{Error, Result};
use crate::linalg::PivotedCholesky;
use crate::mc::stream::{fill_normal, run_chunks, Moments};

/// Smallest Monte Carlo sample size accepted for E(W).
pub const MIN_MC_N: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WMethod {
    /// No component: W ≡ 1.
    Empty,
    /// One component, exact one-dimensional Gaussian integral.
    SingleComponent,
    /// Some interior support point has μ'' = 0: E(W) = 0.
    Degenerate,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WEstimate {
    pub mean: f64,
    /// 95% half-width; 0 for exact values.
    pub ci_half_width: f64,
    pub samples: usize,
    pub method: WMethod,
}

impl WEstimate {
    fn exact(mean: f64, method: WMethod) -> Self {
        Self {
            mean,
            ci_half_width: 0.0,
            samples: 0,
            method,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.method != WMethod::MonteCarlo
    }
}

/// E(W): exact when the configuration is degenerate or the field has at
/// most one component, Monte Carlo otherwise.
pub fn expected_w(field: &ResidualField, nondegenerate: bool, mc_n: usize, seed: u64) -> Result<WEstimate> {
    if mc_n < MIN_MC_N {
        return Err(Error::InvalidInput(format!(
            "mc_n = {mc_n} is below the minimum of {MIN_MC_N}"
        )));
    }
    if !nondegenerate {
        return Ok(WEstimate::exact(0.0, WMethod::Degenerate));
    }
    match field.len() {
        0 => Ok(WEstimate::exact(1.0, WMethod::Empty)),
        1 => Ok(WEstimate::exact(
            field.components[0].single_expectation(field.covariance[(0, 0)]),
            WMethod::SingleComponent,
        )),
        _ => expected_w_mc(field, mc_n, seed),
    }
}

/// Plain Monte Carlo estimate of E(W), regardless of closed forms.
pub fn expected_w_mc(field: &ResidualField, n: usize, seed: u64) -> Result<WEstimate> {
    if n == 0 {
        return Err(Error::InvalidInput("Monte Carlo sample size must be positive".into()));
    }
    if field.is_empty() {
        return Ok(WEstimate {
            mean: 1.0,
            ci_half_width: 0.0,
            samples: n,
            method: WMethod::MonteCarlo,
        });
    }
    let chol = PivotedCholesky::new(&field.covariance, 1e-14);
    let d = field.len();
    let r = chol.rank;
    let parts = run_chunks(n, seed, |rng, _, count| {
        let mut m = Moments::default();
        let mut xi = vec![0.0; r];
        for _ in 0..count {
            fill_normal(rng, &mut xi);
            let z = &chol.factor * DVector::from_column_slice(&xi);
            debug_assert_eq!(z.len(), d);
            m.push(field.weight(z.as_slice()));
        }
        m
    });
    let mut total = Moments::default();
    for p in &parts {
        total.merge(p);
    }
    Ok(WEstimate {
        mean: total.mean(),
        ci_half_width: total.ci_half_width(),
        samples: n,
        method: WMethod::MonteCarlo,
    })
}
