//! Probability distributions on a finite parameter set.
//!
//! Weights are held as natural logarithms so that Gibbs tilts with very
//! large inverse temperatures never underflow; probabilities are only
//! materialized when a caller asks for them. An atom with zero mass has log
//! weight `-inf`.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dim, invalid, Result};
use crate::numeric::logsumexp;

/// Maximum allowed `|logsumexp(log_weights)|` for a valid distribution.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A probability distribution over `M >= 1` atoms, stored in log space.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights {
    log_weights: Vec<f64>,
}

impl SimplexWeights {
    /// Wraps already-normalized log weights.
    pub fn from_log_weights(log_weights: Vec<f64>) -> Result<Self> {
        validate_logs(&log_weights)?;
        let total = logsumexp(&log_weights);
        if total.abs() > NORMALIZATION_TOL {
            return Err(invalid(format!(
                "log weights are not normalized (logsumexp = {total:e})"
            )));
        }
        Ok(Self { log_weights })
    }

    /// Normalizes arbitrary log masses (at least one must be finite).
    pub fn from_unnormalized_log(mut log_masses: Vec<f64>) -> Result<Self> {
        validate_logs(&log_masses)?;
        let total = logsumexp(&log_masses);
        if !total.is_finite() {
            return Err(invalid("log masses have no finite entry"));
        }
        for v in &mut log_masses {
            *v -= total;
        }
        Ok(Self {
            log_weights: log_masses,
        })
    }

    /// Builds a distribution from nonnegative masses, normalizing them.
    pub fn from_probs(masses: &[f64]) -> Result<Self> {
        if masses.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("masses must be finite and nonnegative"));
        }
        Self::from_unnormalized_log(masses.iter().map(|p| p.ln()).collect())
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("a distribution needs at least one atom"));
        }
        Ok(Self {
            log_weights: vec![-(m as f64).ln(); m],
        })
    }

    pub fn point_mass(m: usize, atom: usize) -> Result<Self> {
        if atom >= m {
            return Err(invalid(format!("atom {atom} out of range for {m} atoms")));
        }
        let mut log_weights = vec![f64::NEG_INFINITY; m];
        log_weights[atom] = 0.0;
        Ok(Self { log_weights })
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn prob(&self, atom: usize) -> f64 {
        self.log_weights[atom].exp()
    }

    /// Indices of atoms with positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| self.log_weights[j] > f64::NEG_INFINITY)
            .collect()
    }

    /// `<rho, h>`, skipping zero-mass atoms so that `0 * inf` never appears.
    pub fn expectation(&self, h: &[f64]) -> Result<f64> {
        ensure_dim("expectation", self.len(), h.len())?;
        Ok(self
            .log_weights
            .iter()
            .zip(h)
            .filter(|(l, _)| **l > f64::NEG_INFINITY)
            .map(|(l, v)| l.exp() * v)
            .sum())
    }

    /// Total variation distance to another distribution on the same atoms.
    pub fn total_variation(&self, other: &Self) -> Result<f64> {
        ensure_dim("total_variation", self.len(), other.len())?;
        Ok(0.5
            * self
                .log_weights
                .iter()
                .zip(&other.log_weights)
                .map(|(a, b)| (a.exp() - b.exp()).abs())
                .sum::<f64>())
    }
}

fn validate_logs(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(invalid("a distribution needs at least one atom"));
    }
    if v.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(invalid("log weights must not be NaN or +inf"));
    }
    Ok(())
}

/// A real-valued function on the atoms: risks, or arbitrary tilt exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    values: Vec<f64>,
    risk: bool,
}

impl ScoreVector {
    /// A general score vector; entries must be finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("score entries must be finite"));
        }
        Ok(Self {
            values,
            risk: false,
        })
    }

    /// A risk vector; entries must be finite and nonnegative.
    pub fn risks(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("risk entries must be finite and nonnegative"));
        }
        Ok(Self { values, risk: true })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_risk(&self) -> bool {
        self.risk
    }

    /// `c * self`, as an untagged score vector.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| c * v).collect())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Kullback-Leibler divergence `KL(rho, pi)`, computed in log space.
///
/// Returns `+inf` when `rho` charges an atom that `pi` does not.
pub fn kl_divergence(rho: &SimplexWeights, pi: &SimplexWeights) -> Result<f64> {
    ensure_dim("kl_divergence", pi.len(), rho.len())?;
    let mut kl = 0.0;
    for (&lr, &lp) in rho.log_weights.iter().zip(&pi.log_weights) {
        if lr == f64::NEG_INFINITY {
            continue;
        }
        if lp == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        kl += lr.exp() * (lr - lp);
    }
    Ok(kl.max(0.0))
}

/// The tilted distribution `pi_h ∝ e^h pi`.
pub fn gibbs_tilt(pi: &SimplexWeights, h: &ScoreVector) -> Result<SimplexWeights> {
    ensure_dim("gibbs_tilt", pi.len(), h.len())?;
    Ok(tilt_unchecked(pi, h.values(), 1.0))
}

/// `gibbs_tilt(pi, -beta * risks)` without materializing the score vector.
pub fn tilt_by_risks(pi: &SimplexWeights, risks: &[f64], beta: f64) -> Result<SimplexWeights> {
    ensure_dim("tilt_by_risks", pi.len(), risks.len())?;
    Ok(tilt_unchecked(pi, risks, -beta))
}

fn tilt_unchecked(pi: &SimplexWeights, h: &[f64], scale: f64) -> SimplexWeights {
    let mut logs: Vec<f64> = pi
        .log_weights
        .iter()
        .zip(h)
        .map(|(&lp, &v)| {
            if lp == f64::NEG_INFINITY {
                lp
            } else {
                lp + scale * v
            }
        })
        .collect();
    let total = logsumexp(&logs);
    for l in &mut logs {
        *l -= total;
    }
    SimplexWeights { log_weights: logs }
}

/// Mixture predictor values `f_rho = sum_j rho_j * F[j, :]` for an `M x n` matrix.
pub fn mixture_values(rho: &SimplexWeights, f: &DMatrix<f64>) -> Result<DVector<f64>> {
    ensure_dim("mixture_values", rho.len(), f.nrows())?;
    let mut out = DVector::zeros(f.ncols());
    for j in rho.support() {
        let w = rho.prob(j);
        for (o, v) in out.iter_mut().zip(f.row(j).iter()) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Empirical variance `V_n(rho) = <rho, R_n> - R_n(rho)`, evaluated in the
/// centered form `<rho, ||f - f_rho||_n^2>` which is nonnegative by construction.
pub fn empirical_variance(rho: &SimplexWeights, f: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
    ensure_dim("empirical_variance", f.ncols(), y.len())?;
    let mean = mixture_values(rho, f)?;
    let n = f.ncols() as f64;
    let mut v = 0.0;
    for j in rho.support() {
        let d: f64 = f
            .row(j)
            .iter()
            .zip(mean.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        v += rho.prob(j) * d / n;
    }
    Ok(v)
}
