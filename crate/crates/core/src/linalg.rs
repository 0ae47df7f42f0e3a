//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{}x{} matrix has no Cholesky factor", a.nrows(), a.ncols())))?;
    Ok(chol.solve(b))
}

/// `Σ⁻¹ 1` together with `log det Σ`.
pub fn spd_solve_ones(a: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{}x{} matrix has no Cholesky factor", a.nrows(), a.ncols())))?;
    let x = chol.solve(&DVector::from_element(a.nrows(), 1.0));
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok((x, log_det))
}

/// Least-squares / minimum-norm solve through the SVD with a relative
/// singular-value cutoff.
pub fn svd_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_cutoff: f64) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Err(Error::Singular("zero matrix".into()));
    }
    svd.solve(b, smax * rel_cutoff)
        .map_err(|e| Error::Singular(e.to_string()))
}

/// Low-rank factor `L` (m×r) with `L Lᵀ ≈ A` from Cholesky with complete
/// diagonal pivoting, stopped once the largest remaining diagonal entry of
/// the Schur complement falls below `rel_tol · max diag(A)`.
///
/// For positive semidefinite `A` the entries of `A − L Lᵀ` are bounded by
/// that remaining diagonal, so the returned bound is a max-norm bound.
#[derive(Clone, Debug)]
pub struct PivotedCholesky {
    pub factor: DMatrix<f64>,
    pub rank: usize,
    pub residual_bound: f64,
}

impl PivotedCholesky {
    pub fn new(a: &DMatrix<f64>, rel_tol: f64) -> Self {
        let n = a.nrows();
        let mut diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let scale = diag.iter().cloned().fold(0.0, f64::max);
        let tol = rel_tol * scale;
        let mut cols: Vec<DVector<f64>> = Vec::new();
        let mut used = vec![false; n];
        loop {
            let (piv, &dmax) = match diag
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .max_by(|x, y| x.1.total_cmp(y.1))
            {
                Some(p) => p,
                None => break,
            };
            if dmax <= tol || cols.len() == n {
                break;
            }
            used[piv] = true;
            let pivot = dmax.sqrt();
            let mut col = DVector::zeros(n);
            for i in 0..n {
                if used[i] && i != piv {
                    continue;
                }
                let mut v = a[(i, piv)];
                for c in &cols {
                    v -= c[i] * c[piv];
                }
                col[i] = v / pivot;
            }
            col[piv] = pivot;
            for i in 0..n {
                if !used[i] {
                    diag[i] -= col[i] * col[i];
                }
            }
            diag[piv] = 0.0;
            cols.push(col);
        }
        let residual_bound = diag
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(_, d)| d.max(0.0))
            .fold(0.0, f64::max);
        let rank = cols.len();
        let factor = if rank == 0 {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        Self {
            factor,
            rank,
            residual_bound,
        }
    }
}
