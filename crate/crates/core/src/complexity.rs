//! Global and local entropic complexities.
//!
//! For a prior `pi` and risk vector `R` on a finite class:
//!
//! ```text
//! global(beta) = -(1/beta) log <pi, exp(-beta R)>      (free energy)
//! local(beta)  = <pi_{-beta R}, R>                     (average energy)
//! ```
//!
//! Both extend continuously to `beta = 0` with value `<pi, R>`. For linear
//! classes under the Gaussian prior `N(0, gamma^{-1} I)` both are available in
//! closed form through the eigendecomposition of the second-moment matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dim, invalid, Result};
use crate::numeric::{logsumexp, psd_eigen};
use crate::simplex::{tilt_by_risks, ScoreVector, SimplexWeights};

fn check_risk_input(pi: &SimplexWeights, risks: &ScoreVector, beta: f64) -> Result<()> {
    ensure_dim("complexity", pi.len(), risks.len())?;
    if !risks.is_risk() {
        return Err(invalid("complexities require a risk-tagged score vector"));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(invalid(format!("inverse temperature must be >= 0, got {beta}")));
    }
    Ok(())
}

/// Global entropic complexity `-(1/beta) log <pi, e^{-beta R}>`.
pub fn global_complexity(pi: &SimplexWeights, risks: &ScoreVector, beta: f64) -> Result<f64> {
    check_risk_input(pi, risks, beta)?;
    if beta == 0.0 {
        return pi.expectation(risks.values());
    }
    let terms: Vec<f64> = pi
        .log_weights()
        .iter()
        .zip(risks.values())
        .map(|(lp, r)| lp - beta * r)
        .collect();
    Ok(-logsumexp(&terms) / beta)
}

/// Local entropic complexity `<pi_{-beta R}, R>`.
pub fn local_complexity(pi: &SimplexWeights, risks: &ScoreVector, beta: f64) -> Result<f64> {
    check_risk_input(pi, risks, beta)?;
    let tilted = tilt_by_risks(pi, risks.values(), beta)?;
    tilted.expectation(risks.values())
}

/// Both complexities along an increasing grid of inverse temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityProfile {
    pub betas: Vec<f64>,
    pub global_values: Vec<f64>,
    pub local_values: Vec<f64>,
}

pub fn complexity_profile(
    pi: &SimplexWeights,
    risks: &ScoreVector,
    beta_grid: &[f64],
) -> Result<ComplexityProfile> {
    if beta_grid.is_empty() {
        return Err(invalid("empty inverse-temperature grid"));
    }
    if beta_grid.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
        return Err(invalid("grid entries must be finite and nonnegative"));
    }
    if beta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("grid must be strictly increasing"));
    }
    let mut global_values = Vec::with_capacity(beta_grid.len());
    let mut local_values = Vec::with_capacity(beta_grid.len());
    for &beta in beta_grid {
        global_values.push(global_complexity(pi, risks, beta)?);
        local_values.push(local_complexity(pi, risks, beta)?);
    }
    Ok(ComplexityProfile {
        betas: beta_grid.to_vec(),
        global_values,
        local_values,
    })
}

/// A quadratic risk `R(theta) = base_risk + ||theta - theta_star||^2_Sigma`
/// over linear predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearInstance {
    sigma: DMatrix<f64>,
    theta_star: DVector<f64>,
    base_risk: f64,
}

impl LinearInstance {
    pub fn new(sigma: DMatrix<f64>, theta_star: DVector<f64>, base_risk: f64) -> Result<Self> {
        psd_eigen(&sigma)?;
        ensure_dim("LinearInstance", sigma.nrows(), theta_star.len())?;
        if !(base_risk >= 0.0) || !base_risk.is_finite() {
            return Err(invalid("base risk must be finite and nonnegative"));
        }
        Ok(Self {
            sigma,
            theta_star,
            base_risk,
        })
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn base_risk(&self) -> f64 {
        self.base_risk
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    /// `R(theta) = base_risk + (theta - theta*)^T Sigma (theta - theta*)`.
    pub fn risk(&self, theta: &DVector<f64>) -> f64 {
        let diff = theta - &self.theta_star;
        self.base_risk + diff.dot(&(&self.sigma * &diff))
    }
}

/// Closed-form complexities of a linear class under a Gaussian prior.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComplexities {
    pub global: f64,
    pub local: f64,
    pub theta_lambda: DVector<f64>,
}

/// Complexities at inverse temperature `beta / 2` under the prior
/// `N(0, gamma^{-1} I)`, with `lambda = gamma / beta`.
pub fn gaussian_complexities(
    inst: &LinearInstance,
    gamma: f64,
    beta: f64,
) -> Result<GaussianComplexities> {
    if !(gamma > 0.0) || !gamma.is_finite() || !(beta > 0.0) || !beta.is_finite() {
        return Err(invalid("gamma and beta must be positive and finite"));
    }
    let lambda = gamma / beta;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda = gamma / beta must be positive and finite"));
    }
    let eig = psd_eigen(&inst.sigma)?;
    let q = &eig.eigenvectors;
    // theta_lambda = Q diag(l / (l + lambda)) Q^T theta*
    let coords = q.transpose() * &inst.theta_star;
    let shrunk = DVector::from_iterator(
        coords.len(),
        coords
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, l)| c * l / (l + lambda)),
    );
    let theta_lambda = q * shrunk;
    let risk = inst.risk(&theta_lambda);
    let logdet: f64 = eig.eigenvalues.iter().map(|l| (l / lambda).ln_1p()).sum();
    let trace: f64 = eig.eigenvalues.iter().map(|l| l / (l + lambda)).sum();
    Ok(GaussianComplexities {
        global: risk + lambda * theta_lambda.norm_squared() + logdet / beta,
        local: risk + trace / beta,
        theta_lambda,
    })
}

/// The two terms compared by the trace/log-determinant inequality, and the
/// upper bound `2 log(1 + ||Sigma||_op / lambda) * trace` on the log-determinant
/// (valid when `lambda <= ||Sigma||_op`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceLogdetGap {
    pub trace_term: f64,
    pub logdet_term: f64,
    pub upper_bound: f64,
    pub op_norm: f64,
}

impl TraceLogdetGap {
    /// Whether the upper bound is asserted for this `lambda`.
    pub fn upper_bound_applies(&self, lambda: f64) -> bool {
        lambda <= self.op_norm
    }
}

pub fn trace_logdet_gap(sigma: &DMatrix<f64>, lambda: f64) -> Result<TraceLogdetGap> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda must be positive and finite"));
    }
    let eig = psd_eigen(sigma)?;
    let trace_term: f64 = eig.eigenvalues.iter().map(|l| l / (l + lambda)).sum();
    let logdet_term: f64 = eig.eigenvalues.iter().map(|l| (l / lambda).ln_1p()).sum();
    let op_norm = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    Ok(TraceLogdetGap {
        trace_term,
        logdet_term,
        upper_bound: 2.0 * (op_norm / lambda).ln_1p() * trace_term,
        op_norm,
    })
}
