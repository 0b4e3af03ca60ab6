//! Aggregation estimators over a finite class of base predictors.
//!
//! A [`FiniteClass`] stores the values `F[j][i] = f_j(X_i)` of `M` base
//! predictors on `n` design points together with the targets `y`. The
//! estimators return weights on the `M` atoms; predictions are the
//! corresponding mixtures.

mod qagg;

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dim, invalid, Result};
use crate::simplex::{
    empirical_variance, kl_divergence, mixture_values, tilt_by_risks, ScoreVector, SimplexWeights,
};

pub use qagg::{q_aggregation, SolverConfig, SolverResult, StepRule};

/// Values of `M` base predictors on `n` sample points, plus the targets.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteClass {
    f: DMatrix<f64>,
    y: DVector<f64>,
}

impl FiniteClass {
    /// `f` is `M x n`, `y` has length `n`.
    pub fn new(f: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if f.nrows() == 0 || f.ncols() == 0 {
            return Err(invalid("a finite class needs M >= 1 rows and n >= 1 columns"));
        }
        ensure_dim("FiniteClass targets", f.ncols(), y.len())?;
        if f.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("finite class entries must be finite"));
        }
        Ok(Self { f, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let m = rows.len();
        let n = y.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid("every row must have one value per target"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(
            DMatrix::from_row_slice(m, n, &flat),
            DVector::from_column_slice(y),
        )
    }

    pub fn m(&self) -> usize {
        self.f.nrows()
    }

    pub fn n(&self) -> usize {
        self.f.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.y
    }

    /// Same predictors, different targets.
    pub fn with_targets(&self, y: DVector<f64>) -> Result<Self> {
        Self::new(self.f.clone(), y)
    }

    /// Empirical risk of an arbitrary prediction vector.
    pub fn empirical_risk_of(&self, predictions: &DVector<f64>) -> Result<f64> {
        ensure_dim("empirical_risk_of", self.n(), predictions.len())?;
        Ok((predictions - &self.y).norm_squared() / self.n() as f64)
    }
}

/// `R_n(f_j) = (1/n) sum_i (F[j][i] - y_i)^2` for every atom.
pub fn empirical_risks(fc: &FiniteClass) -> ScoreVector {
    let n = fc.n() as f64;
    let risks = (0..fc.m())
        .map(|j| {
            fc.f.row(j)
                .iter()
                .zip(fc.y.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / n
        })
        .collect();
    // Squares of finite reals are finite and nonnegative.
    ScoreVector::risks(risks).expect("empirical risks are finite")
}

fn check_beta(beta: f64, allow_zero: bool) -> Result<()> {
    let ok = beta.is_finite() && if allow_zero { beta >= 0.0 } else { beta > 0.0 };
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("invalid inverse temperature {beta}")))
    }
}

/// Exponential weights posterior `pi_{-beta R_n}`: the exact minimizer of
/// `<rho, R_n> + KL(rho, pi) / beta`.
pub fn exp_weights(pi: &SimplexWeights, fc: &FiniteClass, beta: f64) -> Result<SimplexWeights> {
    ensure_dim("exp_weights", fc.m(), pi.len())?;
    check_beta(beta, true)?;
    tilt_by_risks(pi, empirical_risks(fc).values(), beta)
}

/// The Q-aggregation objective
/// `G(rho) = 1/2 <rho, R_n> + 1/2 R_n(rho) + KL(rho, pi) / beta`.
pub fn q_objective(
    rho: &SimplexWeights,
    pi: &SimplexWeights,
    fc: &FiniteClass,
    beta: f64,
) -> Result<f64> {
    ensure_dim("q_objective", fc.m(), rho.len())?;
    ensure_dim("q_objective", fc.m(), pi.len())?;
    check_beta(beta, false)?;
    let risks = empirical_risks(fc);
    let linear = rho.expectation(risks.values())?;
    let mix = mixture_values(rho, &fc.f)?;
    let quad = fc.empirical_risk_of(&mix)?;
    let kl = kl_divergence(rho, pi)?;
    Ok(0.5 * linear + 0.5 * quad + kl / beta)
}

/// Exponential-weights posteriors on every prefix of the sample, with
/// inverse temperature `i / c` after `i` observations (`i = 0..=n`).
pub fn progressive_posteriors(
    fc: &FiniteClass,
    pi: &SimplexWeights,
    c: f64,
) -> Result<Vec<SimplexWeights>> {
    ensure_dim("progressive_mixture", fc.m(), pi.len())?;
    if !(c >= 8.0) || !c.is_finite() {
        return Err(invalid(format!("progressive mixture requires c >= 8, got {c}")));
    }
    // beta_i * R_i = (cumulative squared loss over the first i points) / c
    let mut cumulative = vec![0.0; fc.m()];
    let mut out = Vec::with_capacity(fc.n() + 1);
    out.push(pi.clone());
    for i in 0..fc.n() {
        let yi = fc.y[i];
        for (j, acc) in cumulative.iter_mut().enumerate() {
            let r = fc.f[(j, i)] - yi;
            *acc += r * r;
        }
        out.push(tilt_by_risks(pi, &cumulative, 1.0 / c)?);
    }
    Ok(out)
}

/// Progressive mixture prediction at `q` query points: the average over
/// `i = 0..=n` of the exponential-weights mixtures built on the first `i`
/// observations. `query` is `M x q`.
pub fn progressive_mixture(
    fc: &FiniteClass,
    pi: &SimplexWeights,
    c: f64,
    query: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    ensure_dim("progressive_mixture query", fc.m(), query.nrows())?;
    let posteriors = progressive_posteriors(fc, pi, c)?;
    let mut avg = DVector::zeros(query.ncols());
    for rho in &posteriors {
        avg += mixture_values(rho, query)?;
    }
    Ok(avg / posteriors.len() as f64)
}

/// Stein's unbiased estimate of `||f_ew - f*||_n^2` for exponential weights
/// under `N(0, sigma^2)` noise:
/// `<rho, R_n> + (4 beta sigma^2 / n - 1) V_n(rho) - sigma^2`.
pub fn sure_exp_weights(
    pi: &SimplexWeights,
    fc: &FiniteClass,
    sigma: f64,
    beta: f64,
) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("noise level must be positive, got {sigma}")));
    }
    let rho = exp_weights(pi, fc, beta)?;
    let risks = empirical_risks(fc);
    let linear = rho.expectation(risks.values())?;
    let var = empirical_variance(&rho, &fc.f, fc.y.as_slice())?;
    let n = fc.n() as f64;
    let s2 = sigma * sigma;
    Ok(linear + (4.0 * beta * s2 / n - 1.0) * var - s2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empirical_risk_examples() {
        let fc = FiniteClass::from_rows(&[vec![0.0, 0.0], vec![1.0, 3.0], vec![0.0, 1.0]], &[0.0, 1.0])
            .unwrap();
        let r = empirical_risks(&fc);
        assert_relative_eq!(r.values()[0], 0.5);
        assert_relative_eq!(r.values()[1], 2.5);
        assert_eq!(r.values()[2], 0.0);
        let fc = FiniteClass::from_rows(&[vec![0.0, 0.0]], &[1.0, 1.0]).unwrap();
        assert_eq!(empirical_risks(&fc).values(), &[1.0]);
    }

    #[test]
    fn finite_class_validation() {
        assert!(FiniteClass::from_rows(&[], &[1.0]).is_err());
        assert!(FiniteClass::from_rows(&[vec![1.0]], &[1.0, 2.0]).is_err());
        assert!(FiniteClass::from_rows(&[vec![f64::NAN]], &[1.0]).is_err());
    }

    #[test]
    fn exp_weights_examples() {
        let fc = FiniteClass::from_rows(&[vec![0.0], vec![1.0]], &[0.0]).unwrap();
        let pi = SimplexWeights::uniform(2).unwrap();
        assert_eq!(exp_weights(&pi, &fc, 0.0).unwrap(), pi);
        let w = exp_weights(&pi, &fc, 2f64.ln()).unwrap().probs();
        assert_relative_eq!(w[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(w[1], 1.0 / 3.0, epsilon = 1e-15);

        let one = FiniteClass::from_rows(&[vec![3.0, -1.0]], &[0.0, 0.0]).unwrap();
        let w = exp_weights(&SimplexWeights::uniform(1).unwrap(), &one, 5.0).unwrap();
        assert_eq!(w.probs(), vec![1.0]);
        assert!(exp_weights(&pi, &fc, -1.0).is_err());
        assert!(exp_weights(&SimplexWeights::uniform(3).unwrap(), &fc, 1.0).is_err());
    }

    #[test]
    fn q_objective_examples() {
        let fc = FiniteClass::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0]], &[1.0, 1.0]).unwrap();
        let pi = SimplexWeights::uniform(2).unwrap();
        // rho = pi: KL vanishes; <pi, R_n> = 1, R_n(f_pi) = 0
        assert_relative_eq!(q_objective(&pi, &pi, &fc, 2.0).unwrap(), 0.5, epsilon = 1e-15);
        let rho = SimplexWeights::from_probs(&[0.25, 0.75]).unwrap();
        // f_rho = 1.5 everywhere: R_n(rho) = 0.25
        let kl = 0.25 * (0.5f64).ln() + 0.75 * (1.5f64).ln();
        assert_relative_eq!(
            q_objective(&rho, &pi, &fc, 2.0).unwrap(),
            0.5 * 1.0 + 0.5 * 0.25 + kl / 2.0,
            epsilon = 1e-15
        );
        let one = FiniteClass::from_rows(&[vec![3.0, -1.0]], &[0.0, 0.0]).unwrap();
        let u1 = SimplexWeights::uniform(1).unwrap();
        assert_relative_eq!(q_objective(&u1, &u1, &one, 0.7).unwrap(), 5.0);
        assert!(q_objective(&u1, &u1, &one, 0.0).is_err());
    }

    #[test]
    fn progressive_mixture_examples() {
        let pi = SimplexWeights::from_probs(&[0.3, 0.7]).unwrap();
        let empty_rows = FiniteClass::from_rows(&[vec![0.0], vec![1.0]], &[0.0]).unwrap();
        let query = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        // Hand computation with n = 1, c = 8: posterior after one point has
        // log-weights log pi_j - (f_j - y)^2 / 8.
        let w1 = {
            let a = 0.3f64;
            let b = 0.7 * (-1.0f64 / 8.0).exp();
            [a / (a + b), b / (a + b)]
        };
        let expected = [
            0.5 * ((0.3 * 1.0 + 0.7 * 3.0) + (w1[0] * 1.0 + w1[1] * 3.0)),
            0.5 * ((0.3 * 2.0 + 0.7 * 4.0) + (w1[0] * 2.0 + w1[1] * 4.0)),
        ];
        let got = progressive_mixture(&empty_rows, &pi, 8.0, &query).unwrap();
        assert_relative_eq!(got[0], expected[0], epsilon = 1e-14);
        assert_relative_eq!(got[1], expected[1], epsilon = 1e-14);

        let single = FiniteClass::from_rows(&[vec![0.5, 0.5]], &[1.0, -1.0]).unwrap();
        let q1 = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let got = progressive_mixture(&single, &SimplexWeights::uniform(1).unwrap(), 8.0, &q1).unwrap();
        assert_eq!(got.as_slice(), &[1.0, 2.0, 3.0]);
        assert!(progressive_mixture(&empty_rows, &pi, 7.9, &query).is_err());
    }

    #[test]
    fn progressive_posteriors_start_at_prior() {
        let fc = FiniteClass::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[0.0, 0.0]).unwrap();
        let pi = SimplexWeights::from_probs(&[0.4, 0.6]).unwrap();
        let post = progressive_posteriors(&fc, &pi, 10.0).unwrap();
        assert_eq!(post.len(), 3);
        assert_eq!(post[0], pi);
        // After both points each atom has cumulative loss 1: back to the prior.
        for (a, b) in post[2].probs().iter().zip(pi.probs()) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn sure_examples() {
        let one = FiniteClass::from_rows(&[vec![1.0, 2.0]], &[0.0, 0.0]).unwrap();
        let u1 = SimplexWeights::uniform(1).unwrap();
        assert_relative_eq!(sure_exp_weights(&u1, &one, 0.5, 3.0).unwrap(), 2.5 - 0.25);

        let fc = FiniteClass::from_rows(&[vec![0.0, 1.0], vec![2.0, -1.0]], &[0.5, 0.5]).unwrap();
        let pi = SimplexWeights::from_probs(&[0.4, 0.6]).unwrap();
        // beta = 0: R_n(f_pi) - sigma^2
        let f_pi = [0.4 * 0.0 + 0.6 * 2.0, 0.4 * 1.0 - 0.6 * 1.0];
        let rn_pi = ((f_pi[0] - 0.5f64).powi(2) + (f_pi[1] - 0.5f64).powi(2)) / 2.0;
        assert_relative_eq!(sure_exp_weights(&pi, &fc, 1.0, 0.0).unwrap(), rn_pi - 1.0, epsilon = 1e-14);

        // term-by-term evaluation at beta = 1, sigma = 1, n = 2
        let r: [f64; 2] = [(0.25 + 0.25) / 2.0, (2.25 + 2.25) / 2.0];
        let a = 0.4 * (-r[0]).exp();
        let b = 0.6 * (-r[1]).exp();
        let w = [a / (a + b), b / (a + b)];
        let mean: [f64; 2] = [w[1] * 2.0, w[0] - w[1]];
        let var = w[0] * ((0.0 - mean[0]).powi(2) + (1.0 - mean[1]).powi(2)) / 2.0
            + w[1] * ((2.0 - mean[0]).powi(2) + (-1.0 - mean[1]).powi(2)) / 2.0;
        let expected = w[0] * r[0] + w[1] * r[1] + (4.0 / 2.0 - 1.0) * var - 1.0;
        assert_relative_eq!(sure_exp_weights(&pi, &fc, 1.0, 1.0).unwrap(), expected, epsilon = 1e-14);
        assert!(sure_exp_weights(&pi, &fc, 0.0, 1.0).is_err());
    }
}
