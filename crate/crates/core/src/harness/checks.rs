//! Monte Carlo checks of the localized risk bounds.

use crate::complexity::{global_complexity, local_complexity};
use crate::error::{invalid, Result};
use crate::estimators::{exp_weights, progressive_posteriors, sure_exp_weights, SolverConfig};
use crate::harness::mc::{mc_losses, Estimator};
use crate::harness::spec::ExperimentSpec;
use crate::harness::stats::{par_replications, MCReport, Summary};
use crate::numeric::logsumexp;
use crate::ridge::{adaptive_truncated_predict, clip, fw_predict, ridge_fit};
use crate::simplex::mixture_values;

/// Default `c1` for the random-design Q-aggregation check.
pub const DEFAULT_C1: f64 = 1.0 / 576.0;
/// Default ceiling on implied universal constants.
pub const DEFAULT_CEILING: f64 = 1e4;
/// Largest excess ratio accepted across the model-aggregation sweep.
pub const SWEEP_RATIO_LIMIT: f64 = 2.0;

const LEVELS: [f64; 4] = [0.5, 0.9, 0.95, 0.99];

fn levels_with(delta: f64) -> Vec<f64> {
    let mut v = LEVELS.to_vec();
    let q = 1.0 - delta;
    if !v.contains(&q) {
        v.push(q);
    }
    v
}

fn check_reps(replications: usize) -> Result<()> {
    if replications < 2 {
        return Err(invalid("Monte Carlo checks need at least 2 replications"));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Exponential weights at `beta = n / (8 sigma^2)` against the mean bound
/// `<pi_{-n R / (16 sigma^2)}, ||f - f*||_n^2>`. The report also carries the
/// global complexity at the same temperature as `global_bound`.
pub fn check_thm_fixed_ew(spec: &ExperimentSpec, replications: usize) -> Result<MCReport> {
    check_reps(replications)?;
    let inst = spec.fixed_instance()?;
    let n = inst.n() as f64;
    let s2 = inst.sigma * inst.sigma;
    let beta = n / (8.0 * s2);
    let dist = inst.distances();
    let bound = local_complexity(&inst.prior, &dist, n / (16.0 * s2))?;
    let global = global_complexity(&inst.prior, &dist, n / (16.0 * s2))?;
    let est = Estimator::ExpWeights { beta };
    let losses = mc_losses(spec, &est, replications, &SolverConfig::default())?;
    let summary = Summary::from_losses(&losses, &LEVELS)?;
    Ok(MCReport::from_summary("fixed-ew", est.id(), spec.seed, &summary)
        .with_shape(inst.n(), inst.m(), 0)
        .with_beta(beta)
        .with_extra("global_bound", global)
        .judge_mean(bound))
}

/// Q-aggregation at `beta = n / (12 sigma^2)`: the `(1 - delta)` quantile of
/// `||f_hat - f*||_n^2` against
/// `<pi_{-n R / (36 sigma^2)}, ||f - f*||_n^2> + 18 sigma^2 log(1/delta) / n`.
pub fn check_thm_fixed_q(
    spec: &ExperimentSpec,
    replications: usize,
    delta: f64,
    solver: &SolverConfig,
) -> Result<MCReport> {
    check_reps(replications)?;
    check_delta(delta)?;
    let inst = spec.fixed_instance()?;
    let n = inst.n() as f64;
    let s2 = inst.sigma * inst.sigma;
    let beta = n / (12.0 * s2);
    let localized = local_complexity(&inst.prior, &inst.distances(), n / (36.0 * s2))?;
    let deviation = 18.0 * s2 * (1.0 / delta).ln() / n;
    let est = Estimator::QAggregation { beta };
    let losses = mc_losses(spec, &est, replications, solver)?;
    let summary = Summary::from_losses(&losses, &levels_with(delta))?;
    let q = summary.quantile(1.0 - delta).expect("level requested");
    Ok(MCReport::from_summary("fixed-q", est.id(), spec.seed, &summary)
        .with_shape(inst.n(), inst.m(), 0)
        .with_beta(beta)
        .with_delta(delta)
        .with_extra("localized", localized)
        .with_extra("deviation", deviation)
        .judge_statistic(q, localized + deviation))
}

/// Q-aggregation at `beta = c1 n / b^2` under random design. The deviation
/// constant is unknown, so the report carries
/// `implied_c2 = (q_{1-delta}(R(f_hat)) - localized) n / (b^2 log(3/delta))`
/// and passes when it does not exceed `ceiling`.
pub fn check_thm_random_q(
    spec: &ExperimentSpec,
    replications: usize,
    delta: f64,
    c1: f64,
    ceiling: f64,
    solver: &SolverConfig,
) -> Result<MCReport> {
    check_reps(replications)?;
    check_delta(delta)?;
    if !(c1 > 0.0) || !(ceiling > 0.0) {
        return Err(invalid("c1 and the ceiling must be positive"));
    }
    let inst = spec.discrete_instance()?;
    let (_, pi) = inst.require_class()?;
    let n = inst.n as f64;
    let b2 = inst.b * inst.b;
    let beta = c1 * n / b2;
    let risks = inst.true_risks()?;
    let localized = local_complexity(pi, &risks, c1 * n / (3.0 * b2))?;
    let est = Estimator::QAggregation { beta };
    // mc_losses subtracts the reference risk; add it back for raw risks.
    let reference = inst.reference_risk()?;
    let losses: Vec<f64> = mc_losses(spec, &est, replications, solver)?
        .into_iter()
        .map(|l| l + reference)
        .collect();
    let summary = Summary::from_losses(&losses, &levels_with(delta))?;
    let q = summary.quantile(1.0 - delta).expect("level requested");
    let scale = b2 * (3.0 / delta).ln() / n;
    let mut report = MCReport::from_summary("random-q", est.id(), spec.seed, &summary)
        .with_shape(inst.n, inst.m(), inst.d())
        .with_beta(beta)
        .with_delta(delta)
        .with_extra("c1", c1)
        .with_extra("ceiling", ceiling)
        .with_extra("localized", localized)
        .judge_statistic(q, localized + ceiling * scale);
    report.implied_constant = Some((q - localized) / scale);
    Ok(report)
}

/// Q-aggregation at `beta = n / (576 b^2)` with the uniform prior: the
/// `(1 - delta)` quantile of the excess risk over the best row, compared
/// with `(b^2/n) [log sum_j exp(-c (n/b^2)(R_j - R*)) + log(1/delta)]`,
/// `c = 1/(3 * 576)`. The implied constant is the ratio of the two and the
/// report passes when it does not exceed `ceiling`.
pub fn check_model_aggregation(
    spec: &ExperimentSpec,
    replications: usize,
    delta: f64,
    ceiling: f64,
    solver: &SolverConfig,
) -> Result<MCReport> {
    check_reps(replications)?;
    check_delta(delta)?;
    let inst = spec.discrete_instance()?;
    let (_, pi) = inst.require_class()?;
    let n = inst.n as f64;
    let b2 = inst.b * inst.b;
    let beta = n / (576.0 * b2);
    let risks = inst.true_risks()?;
    let best = inst.reference_risk()?;
    let c = 1.0 / (3.0 * 576.0);
    let logits: Vec<f64> = risks
        .values()
        .iter()
        .zip(pi.log_weights())
        .filter(|(_, lp)| lp.is_finite())
        .map(|(r, _)| -c * (n / b2) * (r - best))
        .collect();
    let bracket = (b2 / n) * (logsumexp(&logits) + (1.0 / delta).ln());
    let est = Estimator::QAggregation { beta };
    let losses = mc_losses(spec, &est, replications, solver)?;
    let summary = Summary::from_losses(&losses, &levels_with(delta))?;
    let q = summary.quantile(1.0 - delta).expect("level requested");
    let mut report = MCReport::from_summary("model-agg", est.id(), spec.seed, &summary)
        .with_shape(inst.n, inst.m(), inst.d())
        .with_beta(beta)
        .with_delta(delta)
        .with_extra("bracket", bracket)
        .with_extra("ceiling", ceiling)
        .judge_statistic(q, ceiling * bracket);
    report.implied_constant = Some(q / bracket);
    Ok(report)
}

/// Outcome of the model-aggregation sweep over class sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub reports: Vec<MCReport>,
    /// Largest over smallest `(1 - delta)` excess quantile.
    pub ratio: f64,
    pub pass: bool,
}

/// Runs [`check_model_aggregation`] on each spec and compares the excess
/// quantiles: the sweep passes when their ratio is at most 2.
pub fn model_aggregation_sweep(
    specs: &[ExperimentSpec],
    replications: usize,
    delta: f64,
    solver: &SolverConfig,
) -> Result<SweepReport> {
    if specs.len() < 2 {
        return Err(invalid("a sweep needs at least two class sizes"));
    }
    let reports = specs
        .iter()
        .map(|s| check_model_aggregation(s, replications, delta, DEFAULT_CEILING, solver))
        .collect::<Result<Vec<_>>>()?;
    let qs: Vec<f64> = reports.iter().map(|r| r.empirical.max(0.0)).collect();
    let hi = qs.iter().copied().fold(0.0, f64::max);
    let lo = qs.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = if hi == 0.0 { 1.0 } else if lo == 0.0 { f64::INFINITY } else { hi / lo };
    Ok(SweepReport {
        pass: ratio <= SWEEP_RATIO_LIMIT,
        reports,
        ratio,
    })
}

/// Risks of the ridge-type predictors on one replication, per `lambda`:
/// `[fw, truncated, adaptive, raw ridge at lambda']`.
fn ridge_family_risks(
    inst: &crate::harness::spec::DiscreteInstance,
    replication: u64,
    lambdas: &[f64],
) -> Result<Vec<[f64; 4]>> {
    let sample = inst.sample(replication);
    let ds = &sample.design;
    let lp_factor = 1.0 + 1.0 / ds.n() as f64;
    let k = inst.support_size();
    lambdas
        .iter()
        .map(|&lambda| {
            let model = ridge_fit(ds, lp_factor * lambda)?;
            let mut vals = [Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k)];
            for p in 0..k {
                let x = inst.x.row(p).transpose();
                let raw = model.predict(&x)?;
                vals[0].push(fw_predict(ds, lambda, &x)?);
                vals[1].push(clip(raw, inst.b));
                vals[2].push(adaptive_truncated_predict(ds, lambda, &x)?);
                vals[3].push(raw);
            }
            Ok([
                inst.risk_of(&vals[0]),
                inst.risk_of(&vals[1]),
                inst.risk_of(&vals[2]),
                inst.risk_of(&vals[3]),
            ])
        })
        .collect()
}

/// For each `lambda`: the Forster-Warmuth-type, truncated and adaptively
/// truncated predictors against
/// `inf_theta {R(theta) + lambda ||theta||^2} + C tr[(Sigma + lambda I)^{-1} Sigma] / (n + 1)`
/// with `C = 2 b^2`, `8 b^2` and `8 b^2` (plus `b^2 / (n + 1)` for the
/// adaptive one), followed by a paired report of truncated minus raw ridge
/// risk against 0.
pub fn check_ridge_family(spec: &ExperimentSpec, replications: usize, lambdas: &[f64]) -> Result<Vec<MCReport>> {
    check_reps(replications)?;
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(invalid("ridge checks need at least one positive lambda"));
    }
    let inst = spec.discrete_instance()?;
    let risks = par_replications(replications, |r| ridge_family_risks(&inst, r, lambdas))?;
    let n1 = inst.n as f64 + 1.0;
    let b2 = inst.b * inst.b;
    let mut out = Vec::new();
    for (li, &lambda) in lambdas.iter().enumerate() {
        let comparator = inst.ridge_comparator(lambda)?;
        let trace = inst.ridge_trace(lambda)?;
        let column = |c: usize| -> Vec<f64> { risks.iter().map(|r| r[li][c]).collect() };
        let specs = [
            ("ridge-fw", "fw", 2.0 * b2 * trace / n1),
            ("ridge-truncated", "truncated", 8.0 * b2 * trace / n1),
            ("ridge-adaptive", "adaptive", 8.0 * b2 * trace / n1 + b2 / n1),
        ];
        for (c, (experiment, id, excess)) in specs.iter().enumerate() {
            let summary = Summary::from_losses(&column(c), &LEVELS)?;
            out.push(
                MCReport::from_summary(experiment, id, spec.seed, &summary)
                    .with_shape(inst.n, 0, inst.d())
                    .with_extra("lambda", lambda)
                    .with_extra("comparator", comparator)
                    .with_extra("trace", trace)
                    .judge_mean(comparator + excess),
            );
        }
        let diff: Vec<f64> = risks.iter().map(|r| r[li][1] - r[li][3]).collect();
        let summary = Summary::from_losses(&diff, &LEVELS)?;
        out.push(
            MCReport::from_summary("ridge-truncation-gain", "truncated-minus-raw", spec.seed, &summary)
                .with_shape(inst.n, 0, inst.d())
                .with_extra("lambda", lambda)
                .judge_mean(0.0),
        );
    }
    Ok(out)
}

/// Averaged risk `(1/(n+1)) sum_i R(f_{rho_i})` of the exponential-weights
/// posteriors with `beta_i = i / 8`, against the global complexity at
/// `(n + 1) / 8`.
pub fn check_progressive_mixture(spec: &ExperimentSpec, replications: usize) -> Result<MCReport> {
    check_reps(replications)?;
    let inst = spec.discrete_instance()?;
    let (class, pi) = inst.require_class()?;
    let c = 8.0;
    let bound = global_complexity(pi, &inst.true_risks()?, (inst.n as f64 + 1.0) / c)?;
    let losses = par_replications(replications, |r| {
        let sample = inst.sample(r);
        let fc = inst.class_on_sample(&sample)?;
        let posts = progressive_posteriors(&fc, pi, c)?;
        let mut total = 0.0;
        for rho in &posts {
            let f = mixture_values(rho, class)?;
            total += inst.risk_of(f.as_slice());
        }
        Ok(total / posts.len() as f64)
    })?;
    let summary = Summary::from_losses(&losses, &LEVELS)?;
    Ok(MCReport::from_summary("progressive", "progressive", spec.seed, &summary)
        .with_shape(inst.n, inst.m(), inst.d())
        .with_extra("c", c)
        .judge_mean(bound))
}

/// Compares the mean of the SURE functional with the mean loss of
/// exponential weights at `beta` (default `n / (8 sigma^2)`); passes when
/// they differ by at most 4 combined standard errors.
pub fn check_sure_unbiased(spec: &ExperimentSpec, replications: usize, beta: Option<f64>) -> Result<MCReport> {
    check_reps(replications)?;
    let inst = spec.fixed_instance()?;
    let n = inst.n() as f64;
    let beta = beta.unwrap_or(n / (8.0 * inst.sigma * inst.sigma));
    let pairs = par_replications(replications, |r| {
        let fc = inst.class_for(inst.noisy_targets(r))?;
        let rho = exp_weights(&inst.prior, &fc, beta)?;
        let loss = inst.loss(&mixture_values(&rho, &inst.f)?);
        let sure = sure_exp_weights(&inst.prior, &fc, inst.sigma, beta)?;
        Ok((loss, sure))
    })?;
    let loss: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let sure: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let ls = Summary::from_losses(&loss, &LEVELS)?;
    let ss = Summary::from_losses(&sure, &LEVELS)?;
    let combined = (ls.stderr * ls.stderr + ss.stderr * ss.stderr).sqrt();
    let diff: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
    let paired = Summary::from_losses(&diff, &LEVELS)?.stderr;
    let gap = (ss.mean - ls.mean).abs();
    Ok(MCReport::from_summary("sure", "ew", spec.seed, &ls)
        .with_shape(inst.n(), inst.m(), 0)
        .with_beta(beta)
        .with_extra("sure_mean", ss.mean)
        .with_extra("sure_stderr", ss.stderr)
        .with_extra("combined_stderr", combined)
        .with_extra("paired_stderr", paired)
        .judge_statistic(gap, 4.0 * combined))
}
