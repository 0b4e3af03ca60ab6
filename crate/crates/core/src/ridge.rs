//! Ridge regression, ridge leverage scores and the improper ridge-type
//! predictors (shrunk, truncated and adaptively truncated).

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dim, invalid, Error, Result};
use crate::numeric::spd_solve;

/// Covariates `X` (`n x d`, one row per observation) and responses `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSample {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl DesignSample {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(invalid("a design sample needs n >= 1 and d >= 1"));
        }
        ensure_dim("DesignSample responses", x.nrows(), y.len())?;
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("design entries must be finite"));
        }
        Ok(Self { x, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(invalid("covariate rows must share one dimension"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(
            DMatrix::from_row_slice(rows.len(), d, &flat),
            DVector::from_column_slice(y),
        )
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// `(1/n) sum_i X_i X_i^T`.
    pub fn sample_covariance(&self) -> DMatrix<f64> {
        self.x.tr_mul(&self.x) / self.n() as f64
    }

    /// `(1/n) sum_i y_i X_i`.
    pub fn cross_moment(&self) -> DVector<f64> {
        self.x.tr_mul(&self.y) / self.n() as f64
    }

    /// `R_n(theta) = (1/n) sum_i (<theta, X_i> - y_i)^2`.
    pub fn empirical_risk(&self, theta: &DVector<f64>) -> Result<f64> {
        ensure_dim("empirical_risk", self.d(), theta.len())?;
        Ok((&self.x * theta - &self.y).norm_squared() / self.n() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub theta: DVector<f64>,
    pub lambda: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: &DVector<f64>) -> Result<f64> {
        ensure_dim("RidgeModel::predict", self.theta.len(), x.len())?;
        Ok(self.theta.dot(x))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("regularization must be positive, got {lambda}")))
    }
}

/// `theta = (Sigma_n + lambda I)^{-1} (1/n) sum_i y_i X_i`.
pub fn ridge_fit(ds: &DesignSample, lambda: f64) -> Result<RidgeModel> {
    check_lambda(lambda)?;
    let mut a = ds.sample_covariance();
    for k in 0..ds.d() {
        a[(k, k)] += lambda;
    }
    let b = ds.cross_moment();
    let theta = spd_solve(&a, &b, "ridge_fit")?;
    let resid = (&a * &theta - &b).norm();
    if resid > 1e-10 * (1.0 + ds.y().norm()) {
        return Err(Error::Singular(format!("ridge_fit: residual {resid:e}")));
    }
    Ok(RidgeModel { theta, lambda })
}

fn gram_plus(ds: &DesignSample, lambda: f64) -> DMatrix<f64> {
    let mut a = ds.x().tr_mul(ds.x());
    let shift = lambda * ds.n() as f64;
    for k in 0..ds.d() {
        a[(k, k)] += shift;
    }
    a
}

/// `h_lambda(x) = <(sum_i X_i X_i^T + lambda n I + x x^T)^{-1} x, x>`, by a
/// direct solve with the augmented matrix.
pub fn ridge_leverage(x: &DVector<f64>, ds: &DesignSample, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    ensure_dim("ridge_leverage", ds.d(), x.len())?;
    let a = gram_plus(ds, lambda) + x * x.transpose();
    let z = spd_solve(&a, x, "ridge_leverage")?;
    Ok(z.dot(x).max(0.0))
}

/// The same leverage through the rank-one update `s / (1 + s)` with
/// `s = <(sum_i X_i X_i^T + lambda n I)^{-1} x, x>`.
pub fn ridge_leverage_rank_one(x: &DVector<f64>, ds: &DesignSample, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    ensure_dim("ridge_leverage", ds.d(), x.len())?;
    let z = spd_solve(&gram_plus(ds, lambda), x, "ridge_leverage")?;
    let s = z.dot(x).max(0.0);
    Ok(s / (1.0 + s))
}

fn inflated(ds: &DesignSample, lambda: f64) -> f64 {
    (1.0 + 1.0 / ds.n() as f64) * lambda
}

/// `(1 - h_{lambda'}(x))^2 <theta_{lambda'}, x>` with `lambda' = (1 + 1/n) lambda`.
pub fn fw_predict(ds: &DesignSample, lambda: f64, x: &DVector<f64>) -> Result<f64> {
    check_lambda(lambda)?;
    let lp = inflated(ds, lambda);
    let raw = ridge_fit(ds, lp)?.predict(x)?;
    let h = ridge_leverage(x, ds, lp)?;
    Ok((1.0 - h) * (1.0 - h) * raw)
}

/// `psi_b(t) = max(-b, min(b, t))`.
pub fn clip(t: f64, b: f64) -> f64 {
    t.clamp(-b, b)
}

/// `psi_b(<theta_{lambda'}, x>)` with `lambda' = (1 + 1/n) lambda`.
pub fn truncated_ridge_predict(ds: &DesignSample, lambda: f64, b: f64, x: &DVector<f64>) -> Result<f64> {
    check_lambda(lambda)?;
    if !(b > 0.0) || b.is_nan() {
        return Err(invalid(format!("truncation level must be positive, got {b}")));
    }
    let raw = ridge_fit(ds, inflated(ds, lambda))?.predict(x)?;
    Ok(clip(raw, b))
}

/// Truncation at `max_i |y_i|`; the zero predictor when every response is 0.
pub fn adaptive_truncated_predict(ds: &DesignSample, lambda: f64, x: &DVector<f64>) -> Result<f64> {
    check_lambda(lambda)?;
    ensure_dim("adaptive_truncated_predict", ds.d(), x.len())?;
    let b = ds.y().amax();
    if b == 0.0 {
        return Ok(0.0);
    }
    truncated_ridge_predict(ds, lambda, b, x)
}

/// Both sides of the leave-one-out update
/// `<theta', x> - y = (1 - h)(<theta, x> - y)` where `theta = A^{-1} b`,
/// `theta' = (A + x x^T)^{-1}(b + y x)` and `h = <(A + x x^T)^{-1} x, x>`.
pub fn loo_residual_identity(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
    y: f64,
) -> Result<(f64, f64)> {
    if !a.is_square() {
        return Err(invalid("loo_residual_identity needs a square matrix"));
    }
    ensure_dim("loo_residual_identity", a.nrows(), b.len())?;
    ensure_dim("loo_residual_identity", a.nrows(), x.len())?;
    let theta = spd_solve(a, b, "loo_residual_identity")?;
    let a_new = a + x * x.transpose();
    let theta_new = spd_solve(&a_new, &(b + x * y), "loo_residual_identity")?;
    let h = spd_solve(&a_new, x, "loo_residual_identity")?.dot(x);
    Ok((theta_new.dot(x) - y, (1.0 - h) * (theta.dot(x) - y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scalar_pair() -> DesignSample {
        DesignSample::from_rows(&[vec![1.0], vec![1.0]], &[1.0, 1.0]).unwrap()
    }

    fn scalar_single() -> DesignSample {
        DesignSample::from_rows(&[vec![1.0]], &[1.0]).unwrap()
    }

    #[test]
    fn ridge_fit_examples() {
        assert_relative_eq!(ridge_fit(&scalar_pair(), 1.0).unwrap().theta[0], 0.5, epsilon = 1e-15);
        let zero = DesignSample::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0]], &[0.0, 0.0]).unwrap();
        assert_eq!(ridge_fit(&zero, 0.3).unwrap().theta.norm(), 0.0);
        let ds = DesignSample::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.0]], &[1.0, -2.0, 0.5])
            .unwrap();
        let theta = ridge_fit(&ds, 1e8).unwrap().theta;
        assert!(theta.norm() <= ds.cross_moment().norm() / 1e8);
        assert!(ridge_fit(&ds, 0.0).is_err());
        assert!(ridge_fit(&ds, -1.0).is_err());
    }

    #[test]
    fn leverage_examples() {
        let ds = scalar_single();
        let one = DVector::from_element(1, 1.0);
        assert_relative_eq!(ridge_leverage(&one, &ds, 1.0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(ridge_leverage_rank_one(&one, &ds, 1.0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(ridge_leverage(&DVector::zeros(1), &ds, 1.0).unwrap(), 0.0);
        assert!(ridge_leverage(&one, &ds, 0.0).is_err());
    }

    #[test]
    fn fw_examples() {
        let ds = scalar_single();
        let one = DVector::from_element(1, 1.0);
        assert_relative_eq!(fw_predict(&ds, 1.0, &one).unwrap(), 0.1875, epsilon = 1e-15);
        assert_eq!(fw_predict(&ds, 1.0, &DVector::zeros(1)).unwrap(), 0.0);
        assert!(fw_predict(&ds, 0.0, &one).is_err());
    }

    #[test]
    fn truncation_examples() {
        let ds = scalar_single();
        let one = DVector::from_element(1, 1.0);
        assert_relative_eq!(truncated_ridge_predict(&ds, 1.0, 0.1, &one).unwrap(), 0.1);
        assert_relative_eq!(truncated_ridge_predict(&ds, 1.0, 5.0, &one).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(clip(5.0, 1.0), 1.0);
        assert_eq!(clip(-5.0, 1.0), -1.0);
        assert!(truncated_ridge_predict(&ds, 1.0, 0.0, &one).is_err());
        assert!(truncated_ridge_predict(&ds, 0.0, 1.0, &one).is_err());
    }

    #[test]
    fn adaptive_truncation_examples() {
        let zero = DesignSample::from_rows(&[vec![1.0], vec![2.0]], &[0.0, 0.0]).unwrap();
        assert_eq!(adaptive_truncated_predict(&zero, 1.0, &DVector::from_element(1, 7.0)).unwrap(), 0.0);

        // n = 2, X = (1, 0)^T, y = (1, -3): lambda' = 1.5 lambda and the raw
        // prediction at x is x * (1/2) / (1/2 + 1.5 lambda).
        let ds = DesignSample::from_rows(&[vec![1.0], vec![0.0]], &[1.0, -3.0]).unwrap();
        let lambda = 0.01;
        let slope = 0.5 / (0.5 + 1.5 * lambda);
        let x = DVector::from_element(1, 5.0 / slope);
        assert_relative_eq!(
            ridge_fit(&ds, 1.5 * lambda).unwrap().predict(&x).unwrap(),
            5.0,
            epsilon = 1e-12
        );
        assert_eq!(adaptive_truncated_predict(&ds, lambda, &x).unwrap(), 3.0);
        let x = DVector::from_element(1, 1.0);
        assert_relative_eq!(adaptive_truncated_predict(&ds, lambda, &x).unwrap(), slope, epsilon = 1e-15);
    }

    #[test]
    fn loo_identity_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = DVector::from_vec(vec![1.0, -1.0]);
        let theta = spd_solve(&a, &b, "t").unwrap();
        let x = DVector::from_vec(vec![0.3, 0.7]);
        let (l, r) = loo_residual_identity(&a, &b, &x, theta.dot(&x)).unwrap();
        assert!(l.abs() < 1e-14 && r.abs() < 1e-14);
        let (l, r) = loo_residual_identity(&a, &b, &DVector::zeros(2), 2.5).unwrap();
        assert_eq!((l, r), (-2.5, -2.5));
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(loo_residual_identity(&singular, &b, &x, 1.0), Err(Error::Singular(_))));
    }

    fn arb_design() -> impl Strategy<Value = (DesignSample, DVector<f64>, f64)> {
        (1usize..6, 1usize..4).prop_flat_map(|(n, d)| {
            (
                proptest::collection::vec(-3.0f64..3.0, n * d),
                proptest::collection::vec(-2.0f64..2.0, n),
                proptest::collection::vec(-3.0f64..3.0, d),
                1e-3f64..10.0,
            )
                .prop_map(move |(xs, ys, q, lambda)| {
                    let ds = DesignSample::new(DMatrix::from_row_slice(n, d, &xs), DVector::from_vec(ys))
                        .unwrap();
                    (ds, DVector::from_vec(q), lambda)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn leverage_formulas_agree((ds, x, lambda) in arb_design()) {
            let direct = ridge_leverage(&x, &ds, lambda).unwrap();
            let rank_one = ridge_leverage_rank_one(&x, &ds, lambda).unwrap();
            prop_assert!((0.0..1.0).contains(&direct));
            prop_assert!((direct - rank_one).abs() <= 1e-12);
        }

        #[test]
        fn predictors_shrink_toward_ridge((ds, x, lambda) in arb_design()) {
            let raw = ridge_fit(&ds, (1.0 + 1.0 / ds.n() as f64) * lambda).unwrap().predict(&x).unwrap();
            let fw = fw_predict(&ds, lambda, &x).unwrap();
            prop_assert!(fw.abs() <= raw.abs() + 1e-15);
            let wide = truncated_ridge_predict(&ds, lambda, 1e12, &x).unwrap();
            prop_assert_eq!(wide, raw);
            let origin = DVector::zeros(ds.d());
            prop_assert_eq!(fw_predict(&ds, lambda, &origin).unwrap(), 0.0);
            prop_assert_eq!(truncated_ridge_predict(&ds, lambda, 1.0, &origin).unwrap(), 0.0);
        }

        #[test]
        fn loo_identity_holds(
            entries in proptest::collection::vec(-2.0f64..2.0, 9),
            b in proptest::collection::vec(-2.0f64..2.0, 3),
            x in proptest::collection::vec(-2.0f64..2.0, 3),
            y in -3.0f64..3.0,
        ) {
            let m = DMatrix::from_row_slice(3, 3, &entries);
            let a = m.tr_mul(&m) + DMatrix::identity(3, 3);
            let (l, r) = loo_residual_identity(&a, &DVector::from_vec(b), &DVector::from_vec(x), y).unwrap();
            prop_assert!((l - r).abs() <= 1e-10 * (1.0 + l.abs().max(r.abs())));
        }
    }
}
