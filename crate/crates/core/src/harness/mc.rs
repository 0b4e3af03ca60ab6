//! Estimator dispatch and the generic Monte Carlo loop.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimators::{exp_weights, progressive_mixture, q_aggregation, FiniteClass, SolverConfig};
use crate::harness::spec::{DiscreteInstance, ExperimentSpec, FixedInstance, Instance, RandomSample};
use crate::harness::stats::{par_replications, MCReport, Summary};
use crate::ridge::{adaptive_truncated_predict, fw_predict, ridge_fit, truncated_ridge_predict};
use crate::simplex::{mixture_values, SimplexWeights};

/// Estimators the harness can simulate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Estimator {
    ExpWeights { beta: f64 },
    QAggregation { beta: f64 },
    ProgressiveMixture { c: f64 },
    /// The data-independent mixture `f_pi`.
    PriorMean,
    Ridge { lambda: f64 },
    ForsterWarmuth { lambda: f64 },
    Truncated { lambda: f64, b: f64 },
    AdaptiveTruncated { lambda: f64 },
}

impl Estimator {
    pub fn id(&self) -> &'static str {
        match self {
            Self::ExpWeights { .. } => "ew",
            Self::QAggregation { .. } => "qagg",
            Self::ProgressiveMixture { .. } => "progressive",
            Self::PriorMean => "prior-mean",
            Self::Ridge { .. } => "ridge",
            Self::ForsterWarmuth { .. } => "fw",
            Self::Truncated { .. } => "truncated",
            Self::AdaptiveTruncated { .. } => "adaptive",
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match self {
            Self::ExpWeights { beta } | Self::QAggregation { beta } => Some(*beta),
            _ => None,
        }
    }

    fn is_linear(&self) -> bool {
        matches!(
            self,
            Self::Ridge { .. } | Self::ForsterWarmuth { .. } | Self::Truncated { .. } | Self::AdaptiveTruncated { .. }
        )
    }
}

/// Aggregate weights for the weight-valued estimators.
fn aggregate(est: &Estimator, pi: &SimplexWeights, fc: &FiniteClass, solver: &SolverConfig) -> Result<SimplexWeights> {
    match est {
        Estimator::ExpWeights { beta } => exp_weights(pi, fc, *beta),
        Estimator::QAggregation { beta } => Ok(q_aggregation(pi, fc, *beta, solver)?.require_converged()?.weights),
        Estimator::PriorMean => Ok(pi.clone()),
        _ => Err(invalid(format!("{} does not produce aggregate weights", est.id()))),
    }
}

/// Fitted values on the design points of a fixed-design replication.
pub fn predict_fixed(
    est: &Estimator,
    inst: &FixedInstance,
    y: DVector<f64>,
    solver: &SolverConfig,
) -> Result<DVector<f64>> {
    if est.is_linear() {
        return Err(invalid(format!("{} needs covariates; use a random design", est.id())));
    }
    let fc = inst.class_for(y)?;
    match est {
        Estimator::ProgressiveMixture { c } => progressive_mixture(&fc, &inst.prior, *c, &inst.f),
        _ => mixture_values(&aggregate(est, &inst.prior, &fc, solver)?, &inst.f),
    }
}

/// Predictor values on every support point of a random-design instance.
pub fn predict_support(
    est: &Estimator,
    inst: &DiscreteInstance,
    sample: &RandomSample,
    solver: &SolverConfig,
) -> Result<Vec<f64>> {
    let ds = &sample.design;
    let points = (0..inst.support_size()).map(|k| inst.x.row(k).transpose());
    match est {
        Estimator::Ridge { lambda } => {
            let model = ridge_fit(ds, *lambda)?;
            points.map(|x| model.predict(&x)).collect()
        }
        Estimator::ForsterWarmuth { lambda } => points.map(|x| fw_predict(ds, *lambda, &x)).collect(),
        Estimator::Truncated { lambda, b } => points.map(|x| truncated_ridge_predict(ds, *lambda, *b, &x)).collect(),
        Estimator::AdaptiveTruncated { lambda } => points.map(|x| adaptive_truncated_predict(ds, *lambda, &x)).collect(),
        Estimator::ProgressiveMixture { c } => {
            let (class, pi) = inst.require_class()?;
            let fc = inst.class_on_sample(sample)?;
            Ok(progressive_mixture(&fc, pi, *c, class)?.iter().copied().collect())
        }
        _ => {
            let (class, pi) = inst.require_class()?;
            let fc = inst.class_on_sample(sample)?;
            let w = aggregate(est, pi, &fc, solver)?;
            Ok(mixture_values(&w, class)?.iter().copied().collect())
        }
    }
}

/// Per-replication losses: `||f_hat - f*||_n^2` under fixed design, and
/// `R(f_hat)` minus the reference risk under random design (the reference is
/// zero when the instance has no class).
pub fn mc_losses(spec: &ExperimentSpec, est: &Estimator, replications: usize, solver: &SolverConfig) -> Result<Vec<f64>> {
    match spec.materialize()? {
        Instance::Fixed(inst) => par_replications(replications, |r| {
            let fit = predict_fixed(est, &inst, inst.noisy_targets(r), solver)?;
            Ok(inst.loss(&fit))
        }),
        Instance::Discrete(inst) => {
            let reference = if inst.class.is_some() { inst.reference_risk()? } else { 0.0 };
            par_replications(replications, |r| {
                let sample = inst.sample(r);
                Ok(inst.risk_of(&predict_support(est, &inst, &sample, solver)?) - reference)
            })
        }
    }
}

/// Monte Carlo summary of an estimator's loss, without a bound.
pub fn mc_run(spec: &ExperimentSpec, est: &Estimator, replications: usize, levels: &[f64]) -> Result<MCReport> {
    mc_run_with(spec, est, replications, levels, &SolverConfig::default())
}

pub fn mc_run_with(
    spec: &ExperimentSpec,
    est: &Estimator,
    replications: usize,
    levels: &[f64],
    solver: &SolverConfig,
) -> Result<MCReport> {
    if replications < 2 {
        return Err(invalid("Monte Carlo runs need at least 2 replications"));
    }
    let losses = mc_losses(spec, est, replications, solver)?;
    let summary = Summary::from_losses(&losses, levels)?;
    let (n, m, d) = match spec.materialize()? {
        Instance::Fixed(i) => (i.n(), i.m(), 0),
        Instance::Discrete(i) => (i.n, i.m(), i.d()),
    };
    let mut report = MCReport::from_summary("mc", est.id(), spec.seed, &summary).with_shape(n, m, d);
    report.beta = est.beta();
    Ok(report)
}
