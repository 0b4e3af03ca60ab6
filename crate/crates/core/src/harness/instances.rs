//! Ready-made experiment descriptions used by the CLI and the test suites.
//!
//! Builders draw any randomness up front and return fully explicit specs, so
//! a serialized spec reproduces the instance without re-running the builder.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::harness::rng::{stream_rng, Stream};
use crate::harness::spec::{
    ClassGen, Design, ExperimentSpec, FixedDesign, Prior, RandomDesign, Response, SupportPoint, Truth,
};

/// Fixed design with an `m`-row random dictionary on `[-1, 1]` and a random
/// truth on `[-1, 1]`.
pub fn fixed_dictionary(n: usize, m: usize, sigma: f64, seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        design: Design::Fixed(FixedDesign {
            n,
            sigma,
            class: ClassGen::RandomDictionary { m, scale: 1.0 },
            truth: Truth::Random { scale: 1.0 },
        }),
        prior: Prior::Uniform,
        seed,
    }
}

/// Binary response `Y = +-b` with conditional mean `mu`.
fn signed_response(mu: f64, b: f64) -> Vec<Response> {
    let p_up = 0.5 * (1.0 + mu / b);
    vec![Response { y: b, prob: p_up }, Response { y: -b, prob: 1.0 - p_up }]
}

/// Random design on `k` scalar support points with uniform probabilities and
/// a regression function drawn on `[-b/2, b/2]`. The class holds `m - 1`
/// random rows on `[-b, b]`; when `include_truth` the last row is the
/// regression function itself, otherwise it is one more random row.
pub fn random_dictionary(n: usize, m: usize, k: usize, b: f64, include_truth: bool, seed: u64) -> Result<ExperimentSpec> {
    if m == 0 || k == 0 || !(b > 0.0) {
        return Err(invalid("random dictionary needs m >= 1, k >= 1 and b > 0"));
    }
    let mut rng = stream_rng(seed, 0, Stream::Truth);
    let mu: Vec<f64> = (0..k).map(|_| rng.random_range(-0.5 * b..=0.5 * b)).collect();
    let mut rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..k).map(|_| rng.random_range(-b..=b)).collect())
        .collect();
    if include_truth {
        rows[m - 1] = mu.clone();
    }
    Ok(ExperimentSpec {
        design: Design::RandomDiscrete(RandomDesign {
            n,
            b,
            support: mu
                .iter()
                .enumerate()
                .map(|(i, &mean)| SupportPoint {
                    x: vec![i as f64],
                    prob: 1.0 / k as f64,
                    responses: signed_response(mean, b),
                })
                .collect(),
            class: Some(ClassGen::Explicit { rows }),
            best_row: None,
        }),
        prior: Prior::Uniform,
        seed,
    })
}

/// One good predictor (the regression function `0`) and `m - 1` copies of
/// the constant `sqrt(gap)`, each with excess risk exactly `gap`. Responses
/// are `+-b` with equal probability on four support points.
pub fn one_good_rest_bad(n: usize, m: usize, b: f64, gap: f64, seed: u64) -> Result<ExperimentSpec> {
    if m == 0 || !(b > 0.0) || !(gap > 0.0) || gap.sqrt() > b {
        return Err(invalid("one-good class needs m >= 1, b > 0 and 0 < gap <= b^2"));
    }
    let k = 4;
    let bad = gap.sqrt();
    let mut rows = vec![vec![0.0; k]];
    rows.extend((1..m).map(|_| vec![bad; k]));
    Ok(ExperimentSpec {
        design: Design::RandomDiscrete(RandomDesign {
            n,
            b,
            support: (0..k)
                .map(|i| SupportPoint {
                    x: vec![i as f64],
                    prob: 0.25,
                    responses: signed_response(0.0, b),
                })
                .collect(),
            class: Some(ClassGen::Explicit { rows }),
            best_row: Some(0),
        }),
        prior: Prior::Uniform,
        seed,
    })
}

/// Random design in dimension `d` on `k` support points drawn from the cube
/// `[-1, 1]^d`, with a linear regression function `<theta, x>` scaled so that
/// it stays within `[-b/2, b/2]`, and responses `+-b`.
pub fn linear_bounded(n: usize, d: usize, k: usize, b: f64, seed: u64) -> Result<ExperimentSpec> {
    if d == 0 || k == 0 || !(b > 0.0) {
        return Err(invalid("linear design needs d >= 1, k >= 1 and b > 0"));
    }
    let mut rng = stream_rng(seed, 0, Stream::Truth);
    let xs: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect();
    let theta: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let raw: Vec<f64> = xs.iter().map(|x| x.iter().zip(&theta).map(|(a, t)| a * t).sum()).collect();
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { 0.5 * b / peak } else { 0.0 };
    let probs: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..=1.5)).collect();
    let total: f64 = probs.iter().sum();
    Ok(ExperimentSpec {
        design: Design::RandomDiscrete(RandomDesign {
            n,
            b,
            support: xs
                .into_iter()
                .zip(raw)
                .zip(probs)
                .map(|((x, r), p)| SupportPoint {
                    x,
                    prob: p / total,
                    responses: signed_response(r * scale, b),
                })
                .collect(),
            class: None,
            best_row: None,
        }),
        prior: Prior::Uniform,
        seed,
    })
}
