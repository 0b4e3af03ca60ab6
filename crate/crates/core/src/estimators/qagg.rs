//! Entropic mirror descent for the Q-aggregation objective.
//!
//! The solver works on the support of the prior. Each step is the
//! multiplicative update `log rho' = log rho - eta g + const` with
//! `eta = t * beta`, which rewrites as
//! `log rho' = (1 - t) log rho + t log pi - t beta s + const`
//! where `s_j = 1/2 R_n(f_j) + <f_j, f_rho - y>_n`. The objective is smooth
//! relative to the entropy with constant `L_s + 1/beta`, so
//! `t_safe = 1 / (1 + beta L_s)` always decreases it.

use nalgebra::DVector;

use crate::error::{ensure_dim, invalid, Error, Result};
use crate::estimators::{empirical_risks, FiniteClass};
use crate::numeric::logsumexp;
use crate::simplex::SimplexWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    Fixed,
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub step_rule: StepRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200_000,
            step_rule: StepRule::Backtracking,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(invalid(format!("solver tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub weights: SimplexWeights,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SolverResult {
    /// Turns a non-converged result into an error.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
                residual: self.kkt_residual,
            })
        }
    }
}

/// Solver state restricted to the prior's support.
struct Reduced {
    rows: Vec<f64>,
    n: usize,
    idx: Vec<usize>,
    log_pi: Vec<f64>,
    half_risk: Vec<f64>,
    beta: f64,
    inv_n: f64,
}

impl Reduced {
    fn k(&self) -> usize {
        self.idx.len()
    }

    fn row(&self, a: usize) -> &[f64] {
        &self.rows[a * self.n..(a + 1) * self.n]
    }

    fn value(&self, a: usize, i: usize) -> f64 {
        self.rows[a * self.n + i]
    }

    fn mixture(&self, rho: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (a, &p) in rho.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.row(a)) {
                *o += p * v;
            }
        }
        out
    }

    /// `s_a = 1/2 R_n(f_a) + <f_a, r>_n` with `r = f_rho - y`.
    fn linear_scores(&self, resid: &DVector<f64>) -> Vec<f64> {
        (0..self.k())
            .map(|a| {
                let dot: f64 = self.row(a).iter().zip(resid.iter()).map(|(v, r)| v * r).sum();
                self.half_risk[a] + dot * self.inv_n
            })
            .collect()
    }

    /// Certificate residual: the smallest `max` violation over the choice of
    /// the multiplier, for the gradient scaled by `min(1, beta)`.
    fn kkt_residual(&self, logw: &[f64], s: &[f64], tol: f64) -> f64 {
        let scale = self.beta.min(1.0);
        let g: Vec<f64> = (0..self.k())
            .map(|a| scale * (s[a] + (logw[a] - self.log_pi[a] + 1.0) / self.beta))
            .collect();
        let active_threshold = 10.0 * tol;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        for a in 0..self.k() {
            gmin = gmin.min(g[a]);
            if logw[a].exp() > active_threshold {
                lo = lo.min(g[a]);
                hi = hi.max(g[a]);
            }
        }
        if hi == f64::NEG_INFINITY {
            // Nothing is active (cannot occur on a normalized vector with
            // tolerance below 1/(10 M)); fall back to the full range.
            return 0.0f64.max(-gmin);
        }
        // nu = midpoint of the active range; inactive atoms need g >= nu - r.
        let nu = 0.5 * (lo + hi);
        let spread = 0.5 * (hi - lo);
        spread.max(nu - gmin)
    }

    fn objective(&self, rho: &[f64], logw: &[f64], resid: &DVector<f64>) -> f64 {
        let mut lin = 0.0;
        let mut kl = 0.0;
        for a in 0..self.k() {
            if rho[a] > 0.0 {
                lin += rho[a] * self.half_risk[a];
                kl += rho[a] * (logw[a] - self.log_pi[a]);
            }
        }
        lin + 0.5 * resid.norm_squared() * self.inv_n + kl.max(0.0) / self.beta
    }
}

/// Objective change when moving from `rho` to `rho' = rho + delta`,
/// evaluated from the differences to avoid cancellation.
fn objective_change(
    red: &Reduced,
    logw: &[f64],
    new_logw: &[f64],
    delta: &[f64],
    dmix: &DVector<f64>,
    resid: &DVector<f64>,
) -> f64 {
    let mut lin = 0.0;
    let mut kl = 0.0;
    for a in 0..red.k() {
        lin += delta[a] * red.half_risk[a];
        // rho' (l' - lpi) - rho (l - lpi) = delta (l' - lpi) + rho (l' - l)
        let rho = logw[a].exp();
        let new_rel = new_logw[a] - red.log_pi[a];
        if delta[a] != 0.0 && new_logw[a] > f64::NEG_INFINITY {
            kl += delta[a] * new_rel;
        }
        if rho > 0.0 {
            kl += rho * (new_logw[a] - logw[a]);
        }
    }
    let mut quad = 0.0;
    for i in 0..dmix.len() {
        quad += dmix[i] * (2.0 * resid[i] + dmix[i]);
    }
    lin + 0.5 * quad * red.inv_n + kl / red.beta
}

/// Minimizes `1/2 <rho, R_n> + 1/2 R_n(rho) + KL(rho, pi) / beta` over the
/// simplex. The returned weights are zero outside the prior's support.
pub fn q_aggregation(
    pi: &SimplexWeights,
    fc: &FiniteClass,
    beta: f64,
    cfg: &SolverConfig,
) -> Result<SolverResult> {
    ensure_dim("q_aggregation", fc.m(), pi.len())?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(invalid(format!("q_aggregation needs beta > 0, got {beta}")));
    }
    cfg.validate()?;

    let idx = pi.support();
    let risks = empirical_risks(fc);
    let n = fc.n();
    let values = fc.values();
    let rows: Vec<f64> = idx
        .iter()
        .flat_map(|&j| (0..n).map(move |i| values[(j, i)]))
        .collect();
    let red = Reduced {
        rows,
        n,
        log_pi: idx.iter().map(|&j| pi.log_weights()[j]).collect(),
        half_risk: idx.iter().map(|&j| 0.5 * risks.values()[j]).collect(),
        idx,
        beta,
        inv_n: 1.0 / n as f64,
    };
    let y = fc.targets();

    let range_sq: f64 = (0..n)
        .map(|i| {
            let (lo, hi) = (0..red.k()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
                let v = red.value(a, i);
                (lo.min(v), hi.max(v))
            });
            (hi - lo) * (hi - lo)
        })
        .sum();
    let smooth = 0.25 * range_sq * red.inv_n;
    let t_safe = 1.0 / (1.0 + beta * smooth);

    let mut logw = red.log_pi.clone();
    let mut rho: Vec<f64> = logw.iter().map(|l| l.exp()).collect();
    let mut mix = red.mixture(&rho);
    let mut resid = &mix - y;
    let mut t_prev = 1.0f64;
    let mut iterations = 0usize;
    let mut kkt;
    let mut since_refresh = 0usize;

    loop {
        let s = red.linear_scores(&resid);
        kkt = red.kkt_residual(&logw, &s, cfg.tol);
        if kkt <= cfg.tol || iterations >= cfg.max_iter {
            break;
        }
        iterations += 1;

        let mut t = match cfg.step_rule {
            StepRule::Fixed => t_safe,
            StepRule::Backtracking => (2.0 * t_prev).min(1.0).max(t_safe),
        };
        let (new_logw, delta, dmix) = loop {
            let raw: Vec<f64> = (0..red.k())
                .map(|a| (1.0 - t) * logw[a] + t * red.log_pi[a] - t * beta * s[a])
                .collect();
            let lse = logsumexp(&raw);
            let cand: Vec<f64> = raw.iter().map(|v| v - lse).collect();
            let delta: Vec<f64> = (0..red.k())
                .map(|a| {
                    if logw[a] == f64::NEG_INFINITY {
                        return cand[a].exp();
                    }
                    logw[a].exp() * (cand[a] - logw[a]).exp_m1()
                })
                .collect();
            let mut dmix = DVector::zeros(n);
            for (a, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    for (o, v) in dmix.iter_mut().zip(red.row(a)) {
                        *o += d * v;
                    }
                }
            }
            if cfg.step_rule == StepRule::Fixed || t <= t_safe {
                break (cand, delta, dmix);
            }
            let change = objective_change(&red, &logw, &cand, &delta, &dmix, &resid);
            if change <= 0.0 {
                break (cand, delta, dmix);
            }
            t = (0.5 * t).max(t_safe);
        };
        t_prev = t;

        if delta.iter().all(|&d| d == 0.0) {
            // Floating point fixed point; no further progress is possible.
            logw = new_logw;
            let s = red.linear_scores(&resid);
            kkt = red.kkt_residual(&logw, &s, cfg.tol);
            break;
        }
        logw = new_logw;
        since_refresh += 1;
        if since_refresh >= 64 {
            rho = logw.iter().map(|l| l.exp()).collect();
            mix = red.mixture(&rho);
            since_refresh = 0;
        } else {
            mix += dmix;
        }
        resid = &mix - y;
    }

    rho = logw.iter().map(|l| l.exp()).collect();
    let mix = red.mixture(&rho);
    let resid = &mix - y;
    let objective = red.objective(&rho, &logw, &resid);

    let mut full = vec![f64::NEG_INFINITY; fc.m()];
    for (a, &j) in red.idx.iter().enumerate() {
        full[j] = logw[a];
    }
    let weights = SimplexWeights::from_unnormalized_log(full)?;
    Ok(SolverResult {
        weights,
        objective,
        kkt_residual: kkt,
        iterations,
        converged: kkt <= cfg.tol,
    })
}
