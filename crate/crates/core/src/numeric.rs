//! Small numerical kernels shared across modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues below this magnitude are treated as exact zeros.
pub const EIGEN_CLAMP: f64 = 1e-12;

/// Stable `log(sum(exp(v)))`. Returns `-inf` for an empty slice or when every
/// entry is `-inf`.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Checks symmetry and positive semi-definiteness, returning the clamped
/// eigendecomposition.
pub fn psd_eigen(sigma: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !sigma.is_square() {
        return Err(Error::NotPsd(format!(
            "matrix is {}x{}, expected square",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPsd("non-finite entry".into()));
    }
    let scale = sigma.amax().max(1.0);
    let asym = (sigma - sigma.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::NotPsd(format!("asymmetry {asym:e}")));
    }
    let sym = (sigma + sigma.transpose()) * 0.5;
    let mut eig = SymmetricEigen::new(sym);
    for ev in eig.eigenvalues.iter_mut() {
        if *ev < -EIGEN_CLAMP * scale {
            return Err(Error::NotPsd(format!("negative eigenvalue {ev:e}")));
        }
        if *ev < EIGEN_CLAMP {
            *ev = 0.0;
        }
    }
    Ok(eig)
}

/// Solves `a x = b` for symmetric positive-definite `a` by Cholesky and
/// asserts the relative residual.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{context}: Cholesky factorization failed")))?;
    let x = chol.solve(b);
    let resid = (a * &x - b).norm();
    let scale = 1.0 + b.norm() + a.norm() * x.norm();
    if !resid.is_finite() || resid > 1e-10 * scale {
        return Err(Error::Singular(format!(
            "{context}: residual {resid:e} exceeds tolerance"
        )));
    }
    Ok(x)
}
