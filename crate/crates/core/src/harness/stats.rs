//! Monte Carlo summaries and the report record.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "AGGLAB_THREADS";

/// Nearest-rank quantile of sorted data: the element of rank `ceil(p N)`,
/// so exact ties between two order statistics resolve to the lower rank
/// and every other level rounds up.
pub fn nearest_rank(sorted: &[f64], level: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(invalid("quantile of an empty sample"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("quantile level must lie in (0, 1), got {level}")));
    }
    let n = sorted.len() as f64;
    let rank = (level * n - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileValue {
    pub level: f64,
    pub value: f64,
}

/// Mean, standard error and quantiles of a loss sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub replications: usize,
    pub mean: f64,
    pub stderr: f64,
    pub quantiles: Vec<QuantileValue>,
}

impl Summary {
    /// Statistics are computed from the sorted losses, so the result does
    /// not depend on the order in which replications finished.
    pub fn from_losses(losses: &[f64], levels: &[f64]) -> Result<Self> {
        if losses.len() < 2 {
            return Err(invalid("Monte Carlo summaries need at least 2 replications"));
        }
        if losses.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite loss in Monte Carlo sample"));
        }
        let mut sorted = losses.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let (mean, var) = if sorted[0] == sorted[sorted.len() - 1] {
            (sorted[0], 0.0)
        } else {
            let mean = sorted.iter().sum::<f64>() / n;
            (mean, sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
        };
        let quantiles = levels
            .iter()
            .map(|&level| Ok(QuantileValue { level, value: nearest_rank(&sorted, level)? }))
            .collect::<Result<_>>()?;
        Ok(Self {
            replications: sorted.len(),
            mean,
            stderr: (var / n).sqrt(),
            quantiles,
        })
    }

    pub fn quantile(&self, level: f64) -> Option<f64> {
        self.quantiles.iter().find(|q| q.level == level).map(|q| q.value)
    }
}

/// Monte Carlo result, optionally paired with a bound and its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub experiment: String,
    pub estimator_id: String,
    pub seed: u64,
    pub replications: usize,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub mean: f64,
    pub stderr: f64,
    pub quantiles: Vec<QuantileValue>,
    /// The statistic compared against the bound (a mean or a quantile).
    pub empirical: f64,
    pub bound: Option<f64>,
    pub margin: Option<f64>,
    pub pass: Option<bool>,
    /// Implied universal constant, for bounds whose constant is unspecified.
    pub implied_constant: Option<f64>,
    /// Further named quantities (comparison values, chosen constants).
    pub extras: BTreeMap<String, f64>,
}

impl MCReport {
    pub fn from_summary(experiment: &str, estimator_id: &str, seed: u64, summary: &Summary) -> Self {
        Self {
            experiment: experiment.to_string(),
            estimator_id: estimator_id.to_string(),
            seed,
            replications: summary.replications,
            n: 0,
            m: 0,
            d: 0,
            beta: None,
            delta: None,
            mean: summary.mean,
            stderr: summary.stderr,
            quantiles: summary.quantiles.clone(),
            empirical: summary.mean,
            bound: None,
            margin: None,
            pass: None,
            implied_constant: None,
            extras: BTreeMap::new(),
        }
    }

    pub fn with_shape(mut self, n: usize, m: usize, d: usize) -> Self {
        self.n = n;
        self.m = m;
        self.d = d;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn with_extra(mut self, key: &str, value: f64) -> Self {
        self.extras.insert(key.to_string(), value);
        self
    }

    /// Mean check: passes when `mean <= bound + 3 stderr`.
    pub fn judge_mean(mut self, bound: f64) -> Self {
        self.empirical = self.mean;
        self.bound = Some(bound);
        let margin = bound - self.mean;
        self.margin = Some(margin);
        self.pass = Some(margin >= -3.0 * self.stderr);
        self
    }

    /// Statistic check (quantiles, deviations): passes when `statistic <= bound`.
    pub fn judge_statistic(mut self, statistic: f64, bound: f64) -> Self {
        self.empirical = statistic;
        self.bound = Some(bound);
        let margin = bound - statistic;
        self.margin = Some(margin);
        self.pass = Some(margin >= 0.0);
        self
    }

    pub fn passed(&self) -> bool {
        self.pass.unwrap_or(true)
    }
}

/// Worker count from `AGGLAB_THREADS`, or `None` for the rayon default.
pub fn configured_threads() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(Some(k)),
            _ => Err(invalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

/// Evaluates `f(0..reps)` in parallel, returning results in replication order.
pub fn par_replications<T, F>(reps: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = configured_threads()? {
        builder = builder.num_threads(k);
    }
    let pool = builder
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    pool.install(|| (0..reps as u64).into_par_iter().map(&f).collect())
}
