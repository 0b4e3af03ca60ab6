//! Gaussian priors and posteriors on the parameters of a linear class.
//!
//! Under the prior `N(0, gamma^{-1} I)` and inverse temperature `beta / 2`,
//! both exponential weights and Q-aggregation have Gaussian posteriors
//! centred at the ridge estimator with `lambda = gamma / beta`. All
//! functions here take `beta` and apply the halving internally, matching
//! the convention of [`crate::complexity::gaussian_complexities`].

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dim, invalid, Error, Result};
use crate::ridge::{ridge_fit, DesignSample};

/// `N(mean, covariance)` with a positive-definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianMeasure {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        ensure_dim("GaussianMeasure covariance", mean.len(), covariance.nrows())?;
        if !covariance.is_square() || mean.iter().any(|v| !v.is_finite()) {
            return Err(invalid("Gaussian measure needs a finite mean and a square covariance"));
        }
        check_pd(&covariance)?;
        Ok(Self { mean, covariance })
    }

    /// Isotropic prior `N(0, gamma^{-1} I_d)`.
    pub fn isotropic_prior(d: usize, gamma: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        Self::new(DVector::zeros(d), DMatrix::identity(d, d) / gamma)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

fn check_pd(c: &DMatrix<f64>) -> Result<()> {
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPsd("non-finite covariance entry".into()));
    }
    let scale = c.amax().max(1.0);
    if (c - c.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NotPsd("covariance is not symmetric".into()));
    }
    if c.clone().cholesky().is_none() {
        return Err(Error::NotPsd("covariance is not positive definite".into()));
    }
    Ok(())
}

/// `(a Sigma_n + lambda I)^{-1} / beta`, symmetrized.
fn posterior_covariance(ds: &DesignSample, a: f64, lambda: f64, beta: f64) -> Result<DMatrix<f64>> {
    let mut prec = ds.sample_covariance() * a;
    for k in 0..ds.d() {
        prec[(k, k)] += lambda;
    }
    let inv = prec
        .cholesky()
        .ok_or_else(|| Error::Singular("posterior precision".into()))?
        .inverse()
        / beta;
    Ok((&inv + inv.transpose()) * 0.5)
}

fn check_params(gamma: f64, beta: f64) -> Result<f64> {
    check_positive("gamma", gamma)?;
    check_positive("beta", beta)?;
    Ok(gamma / beta)
}

/// Q-aggregation posterior `N(theta_lambda, beta^{-1} (Sigma_n / 2 + lambda I)^{-1})`.
pub fn qagg_gaussian_posterior(ds: &DesignSample, gamma: f64, beta: f64) -> Result<GaussianMeasure> {
    let lambda = check_params(gamma, beta)?;
    let mean = ridge_fit(ds, lambda)?.theta;
    GaussianMeasure::new(mean, posterior_covariance(ds, 0.5, lambda, beta)?)
}

/// Exponential weights posterior `N(theta_lambda, beta^{-1} (Sigma_n + lambda I)^{-1})`.
pub fn ew_gaussian_posterior(ds: &DesignSample, gamma: f64, beta: f64) -> Result<GaussianMeasure> {
    let lambda = check_params(gamma, beta)?;
    let mean = ridge_fit(ds, lambda)?.theta;
    GaussianMeasure::new(mean, posterior_covariance(ds, 1.0, lambda, beta)?)
}

/// `<rho, R_n> = R_n(mu) + tr(Sigma_n Gamma)` for `rho = N(mu, Gamma)`.
pub fn gaussian_expected_risk(g: &GaussianMeasure, ds: &DesignSample) -> Result<f64> {
    ensure_dim("gaussian_expected_risk", ds.d(), g.dim())?;
    let trace = (ds.sample_covariance() * g.covariance()).trace();
    Ok(ds.empirical_risk(g.mean())? + trace)
}

/// `KL(N(mu, Gamma), N(0, gamma^{-1} I))`.
pub fn kl_to_isotropic(g: &GaussianMeasure, gamma: f64) -> Result<f64> {
    check_positive("gamma", gamma)?;
    let scaled = g.covariance() * gamma;
    let chol = scaled
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPsd("covariance is not positive definite".into()))?;
    let logdet: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let d = g.dim() as f64;
    Ok(0.5 * (-logdet + scaled.trace() - d + gamma * g.mean().norm_squared()))
}

/// Q-aggregation objective at inverse temperature `beta / 2` restricted to
/// Gaussian measures:
/// `1/2 [R_n(mu) + tr(Sigma_n Gamma)] + 1/2 R_n(mu) + 2 KL / beta`.
pub fn gaussian_q_objective(g: &GaussianMeasure, ds: &DesignSample, gamma: f64, beta: f64) -> Result<f64> {
    check_params(gamma, beta)?;
    let linear = gaussian_expected_risk(g, ds)?;
    let quad = ds.empirical_risk(g.mean())?;
    Ok(0.5 * linear + 0.5 * quad + 2.0 * kl_to_isotropic(g, gamma)? / beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexity::{gaussian_complexities, LinearInstance};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_pair() -> DesignSample {
        DesignSample::from_rows(&[vec![1.0], vec![1.0]], &[1.0, 1.0]).unwrap()
    }

    fn random_design(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DesignSample {
        let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        DesignSample::new(DMatrix::from_row_slice(n, d, &x), DVector::from_vec(y)).unwrap()
    }

    #[test]
    fn scalar_posteriors() {
        let q = qagg_gaussian_posterior(&scalar_pair(), 2.0, 2.0).unwrap();
        assert_relative_eq!(q.mean()[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(q.covariance()[(0, 0)], 1.0 / 3.0, epsilon = 1e-15);
        let e = ew_gaussian_posterior(&scalar_pair(), 2.0, 2.0).unwrap();
        assert_relative_eq!(e.mean()[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(e.covariance()[(0, 0)], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn prior_dominated_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds = random_design(&mut rng, 6, 3);
        let beta = 2.0;
        let gamma = 1e8 * beta;
        let q = qagg_gaussian_posterior(&ds, gamma, beta).unwrap();
        assert!(q.mean().norm() < 1e-6);
        let target = DMatrix::<f64>::identity(3, 3) / (beta * 1e8);
        assert!((q.covariance() - &target).amax() < 1e-12 * target.amax().max(1e-300) + 1e-15);
    }

    #[test]
    fn temperature_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ds = random_design(&mut rng, 8, 2);
        let a = qagg_gaussian_posterior(&ds, 1.5, 3.0).unwrap();
        let b = qagg_gaussian_posterior(&ds, 3.0, 6.0).unwrap();
        assert!((a.mean() - b.mean()).amax() < 1e-14);
        assert!((a.covariance() * 0.5 - b.covariance()).amax() < 1e-14);
    }

    #[test]
    fn zero_design_recovers_prior() {
        let ds = DesignSample::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]], &[1.0, -1.0]).unwrap();
        let e = ew_gaussian_posterior(&ds, 4.0, 2.0).unwrap();
        assert_eq!(e.mean().norm(), 0.0);
        assert!((e.covariance() - DMatrix::identity(2, 2) / 4.0).amax() < 1e-15);
    }

    #[test]
    fn ew_covariance_below_qagg() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds = random_design(&mut rng, 10, 4);
        let e = ew_gaussian_posterior(&ds, 1.0, 2.0).unwrap();
        let q = qagg_gaussian_posterior(&ds, 1.0, 2.0).unwrap();
        let diff = q.covariance() - e.covariance();
        let eig = diff.symmetric_eigenvalues();
        assert!(eig.iter().all(|&v| v >= -1e-14));
    }

    #[test]
    fn objective_at_prior_and_posterior() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ds = random_design(&mut rng, 10, 3);
        let (gamma, beta) = (0.7, 3.0);
        let prior = GaussianMeasure::isotropic_prior(3, gamma).unwrap();
        let r0 = ds.empirical_risk(&DVector::zeros(3)).unwrap();
        let expected = 0.5 * (r0 + ds.sample_covariance().trace() / gamma) + 0.5 * r0;
        let at_prior = gaussian_q_objective(&prior, &ds, gamma, beta).unwrap();
        assert_relative_eq!(at_prior, expected, epsilon = 1e-13);
        let post = qagg_gaussian_posterior(&ds, gamma, beta).unwrap();
        assert!(gaussian_q_objective(&post, &ds, gamma, beta).unwrap() <= at_prior);
    }

    /// Independent scalar objective: X = (1, 1), y = (1, 1).
    fn scalar_objective(mu: f64, var: f64, gamma: f64, beta: f64) -> f64 {
        let rn = (mu - 1.0) * (mu - 1.0);
        let kl = 0.5 * (-(gamma * var).ln() + gamma * var - 1.0 + gamma * mu * mu);
        0.5 * (rn + var) + 0.5 * rn + 2.0 * kl / beta
    }

    #[test]
    fn scalar_grid_oracle() {
        let (gamma, beta) = (2.0, 2.0);
        let post = qagg_gaussian_posterior(&scalar_pair(), gamma, beta).unwrap();
        let claimed = gaussian_q_objective(&post, &scalar_pair(), gamma, beta).unwrap();
        assert_relative_eq!(claimed, scalar_objective(0.5, 1.0 / 3.0, gamma, beta), epsilon = 1e-14);
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=400 {
            for k in 1..=400 {
                let mu = i as f64 * 0.0025;
                let var = k as f64 * 0.0025;
                let v = scalar_objective(mu, var, gamma, beta);
                if v < best.0 {
                    best = (v, mu, var);
                }
            }
        }
        assert!(claimed <= best.0 + 1e-15);
        assert!((best.1 - 0.5).abs() <= 0.0025 && (best.2 - 1.0 / 3.0).abs() <= 0.0025);
    }

    #[test]
    fn local_complexity_from_posterior() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let ds = random_design(&mut rng, 12, 3);
            let sigma = ds.sample_covariance();
            let theta_star = sigma.clone().cholesky().unwrap().solve(&ds.cross_moment());
            let base = ds.empirical_risk(&theta_star).unwrap();
            let inst = LinearInstance::new(sigma.clone(), theta_star, base).unwrap();
            let gamma = rng.random_range(0.1..3.0);
            let beta = rng.random_range(0.5..10.0);
            let g = gaussian_complexities(&inst, gamma, beta).unwrap();
            let post = ew_gaussian_posterior(&ds, gamma, beta).unwrap();
            let recomputed = gaussian_expected_risk(&post, &ds).unwrap();
            assert!((g.local - recomputed).abs() <= 1e-10 * (1.0 + g.local.abs()));
            assert!((&g.theta_lambda - post.mean()).amax() <= 1e-10);
        }
    }

    #[test]
    fn validation() {
        assert!(qagg_gaussian_posterior(&scalar_pair(), 0.0, 1.0).is_err());
        assert!(ew_gaussian_posterior(&scalar_pair(), 1.0, -1.0).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(GaussianMeasure::new(DVector::zeros(2), bad), Err(Error::NotPsd(_))));
    }
}
