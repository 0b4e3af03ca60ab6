//! Experiment descriptions and their materialization into concrete instances.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::complexity::trace_logdet_gap;
use crate::error::{invalid, Result};
use crate::estimators::FiniteClass;
use crate::harness::rng::{stream_rng, Stream};
use crate::numeric::spd_solve;
use crate::ridge::DesignSample;
use crate::simplex::{ScoreVector, SimplexWeights};

/// A complete data-generating instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub design: Design,
    #[serde(default)]
    pub prior: Prior,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Design {
    Fixed(FixedDesign),
    RandomDiscrete(RandomDesign),
}

/// `y = f* + sigma Z` on `n` fixed points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedDesign {
    pub n: usize,
    pub sigma: f64,
    pub class: ClassGen,
    pub truth: Truth,
}

/// I.i.d. pairs from a finite-support table with `|Y| <= b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomDesign {
    pub n: usize,
    pub b: f64,
    pub support: Vec<SupportPoint>,
    /// Base predictors evaluated on the support points.
    #[serde(default)]
    pub class: Option<ClassGen>,
    /// Reference row for excess risks; defaults to the risk minimizer.
    #[serde(default)]
    pub best_row: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub x: Vec<f64>,
    pub prob: f64,
    pub responses: Vec<Response>,
}

/// One value of `Y` given `X = x` and its conditional probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub y: f64,
    pub prob: f64,
}

/// How the `M` base predictors are produced on the evaluation points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassGen {
    /// Independent entries, uniform on `[-scale, scale]`.
    RandomDictionary { m: usize, scale: f64 },
    /// `f_0 = 0` and `f_j = f_{j-1} + scale u_j / j` with `u_j` uniform on the cube.
    Nested { m: usize, scale: f64 },
    Explicit { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Truth {
    Explicit { values: Vec<f64> },
    /// Entries uniform on `[-scale, scale]`.
    Random { scale: f64 },
    /// A row of the class.
    Row { index: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Prior {
    #[default]
    Uniform,
    Explicit { probs: Vec<f64> },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

impl ClassGen {
    pub fn m(&self) -> usize {
        match self {
            Self::RandomDictionary { m, .. } | Self::Nested { m, .. } => *m,
            Self::Explicit { rows } => rows.len(),
        }
    }

    /// `M x points` matrix of predictor values.
    pub fn generate(&self, points: usize, seed: u64) -> Result<DMatrix<f64>> {
        let mut rng = stream_rng(seed, 0, Stream::Class);
        match self {
            Self::RandomDictionary { m, scale } => {
                positive("class scale", *scale)?;
                if *m == 0 {
                    return Err(invalid("class needs M >= 1"));
                }
                let vals: Vec<f64> = (0..m * points).map(|_| rng.random_range(-*scale..=*scale)).collect();
                Ok(DMatrix::from_row_slice(*m, points, &vals))
            }
            Self::Nested { m, scale } => {
                positive("class scale", *scale)?;
                if *m == 0 {
                    return Err(invalid("class needs M >= 1"));
                }
                let mut out = DMatrix::zeros(*m, points);
                for j in 1..*m {
                    for i in 0..points {
                        let step: f64 = rng.random_range(-1.0..=1.0);
                        out[(j, i)] = out[(j - 1, i)] + scale * step / j as f64;
                    }
                }
                Ok(out)
            }
            Self::Explicit { rows } => {
                if rows.is_empty() || rows.iter().any(|r| r.len() != points) {
                    return Err(invalid(format!("explicit class rows must have {points} entries")));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                if flat.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("class entries must be finite"));
                }
                Ok(DMatrix::from_row_slice(rows.len(), points, &flat))
            }
        }
    }
}

impl Prior {
    pub fn build(&self, m: usize) -> Result<SimplexWeights> {
        match self {
            Self::Uniform => SimplexWeights::uniform(m),
            Self::Explicit { probs } => {
                if probs.len() != m {
                    return Err(invalid(format!("prior has {} weights for {m} atoms", probs.len())));
                }
                SimplexWeights::from_probs(probs)
            }
        }
    }
}

/// Materialized fixed-design instance.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedInstance {
    pub f: DMatrix<f64>,
    pub f_star: DVector<f64>,
    pub sigma: f64,
    pub prior: SimplexWeights,
    pub seed: u64,
}

impl FixedInstance {
    pub fn n(&self) -> usize {
        self.f.ncols()
    }

    pub fn m(&self) -> usize {
        self.f.nrows()
    }

    /// `||f_j - f*||_n^2` for every row.
    pub fn distances(&self) -> ScoreVector {
        let n = self.n() as f64;
        let d = (0..self.m())
            .map(|j| {
                self.f
                    .row(j)
                    .iter()
                    .zip(self.f_star.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / n
            })
            .collect();
        ScoreVector::risks(d).expect("squared distances are finite")
    }

    /// `y = f* + sigma Z` for the given replication.
    pub fn noisy_targets(&self, replication: u64) -> DVector<f64> {
        let mut rng = stream_rng(self.seed, replication, Stream::Noise);
        DVector::from_iterator(
            self.n(),
            self.f_star.iter().map(|&f| {
                let z: f64 = rng.sample(StandardNormal);
                f + self.sigma * z
            }),
        )
    }

    pub fn class_for(&self, y: DVector<f64>) -> Result<FiniteClass> {
        FiniteClass::new(self.f.clone(), y)
    }

    /// `||g - f*||_n^2`.
    pub fn loss(&self, g: &DVector<f64>) -> f64 {
        (g - &self.f_star).norm_squared() / self.n() as f64
    }
}

/// Materialized random-design instance with exact population quantities.
#[derive(Debug, Clone)]
pub struct DiscreteInstance {
    pub n: usize,
    pub b: f64,
    /// Support covariates, one row per support point.
    pub x: DMatrix<f64>,
    pub px: Vec<f64>,
    pub cond_mean: Vec<f64>,
    pub cond_var: Vec<f64>,
    /// `M x K` predictor values on the support.
    pub class: Option<DMatrix<f64>>,
    pub prior: Option<SimplexWeights>,
    pub best_row: Option<usize>,
    pub seed: u64,
    pairs: Vec<(usize, f64)>,
    sampler: WeightedIndex<f64>,
}

/// One random-design sample: support indices, covariates and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSample {
    pub indices: Vec<usize>,
    pub design: DesignSample,
}

impl DiscreteInstance {
    pub fn support_size(&self) -> usize {
        self.px.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn m(&self) -> usize {
        self.class.as_ref().map_or(0, DMatrix::nrows)
    }

    pub fn require_class(&self) -> Result<(&DMatrix<f64>, &SimplexWeights)> {
        match (&self.class, &self.prior) {
            (Some(c), Some(p)) => Ok((c, p)),
            _ => Err(invalid("this experiment needs a class of base predictors")),
        }
    }

    /// `R(g) = E[(g(X) - Y)^2]` for a predictor given by its support values.
    pub fn risk_of(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.px)
            .zip(self.cond_mean.iter().zip(&self.cond_var))
            .map(|((v, p), (mu, var))| p * ((v - mu) * (v - mu) + var))
            .sum()
    }

    /// Exact risks of the class rows.
    pub fn true_risks(&self) -> Result<ScoreVector> {
        let (class, _) = self.require_class()?;
        let r = (0..class.nrows())
            .map(|j| self.risk_of(&class.row(j).iter().copied().collect::<Vec<_>>()))
            .collect();
        ScoreVector::risks(r)
    }

    /// Risk of the reference row: `best_row` when given, the minimum otherwise.
    pub fn reference_risk(&self) -> Result<f64> {
        let r = self.true_risks()?;
        Ok(match self.best_row {
            Some(j) => r.values()[j],
            None => r.min(),
        })
    }

    /// `E[X X^T]`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let d = self.d();
        let mut s = DMatrix::zeros(d, d);
        for (k, p) in self.px.iter().enumerate() {
            let xk = self.x.row(k).transpose();
            s += &xk * xk.transpose() * *p;
        }
        s
    }

    /// `E[Y X]`.
    pub fn cross_moment(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.d());
        for (k, p) in self.px.iter().enumerate() {
            c += self.x.row(k).transpose() * (p * self.cond_mean[k]);
        }
        c
    }

    /// `inf_theta R(theta) + lambda ||theta||^2` over linear predictors.
    pub fn ridge_comparator(&self, lambda: f64) -> Result<f64> {
        positive("lambda", lambda)?;
        let mut a = self.second_moment();
        for k in 0..self.d() {
            a[(k, k)] += lambda;
        }
        let theta = spd_solve(&a, &self.cross_moment(), "ridge comparator")?;
        let values: Vec<f64> = (&self.x * &theta).iter().copied().collect();
        Ok(self.risk_of(&values) + lambda * theta.norm_squared())
    }

    /// `tr[(Sigma + lambda I)^{-1} Sigma]` with `Sigma = E[X X^T]`.
    pub fn ridge_trace(&self, lambda: f64) -> Result<f64> {
        Ok(trace_logdet_gap(&self.second_moment(), lambda)?.trace_term)
    }

    pub fn sample(&self, replication: u64) -> RandomSample {
        let mut rng = stream_rng(self.seed, replication, Stream::Sample);
        let mut indices = Vec::with_capacity(self.n);
        let mut y = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let (k, v) = self.pairs[self.sampler.sample(&mut rng)];
            indices.push(k);
            y.push(v);
        }
        let d = self.d();
        let x = DMatrix::from_fn(self.n, d, |i, c| self.x[(indices[i], c)]);
        let design = DesignSample::new(x, DVector::from_vec(y)).expect("support values are finite");
        RandomSample { indices, design }
    }

    /// Class values at the sampled points.
    pub fn class_on_sample(&self, sample: &RandomSample) -> Result<FiniteClass> {
        let (class, _) = self.require_class()?;
        let f = DMatrix::from_fn(class.nrows(), sample.indices.len(), |j, i| class[(j, sample.indices[i])]);
        FiniteClass::new(f, sample.design.y().clone())
    }
}

/// A specification turned into concrete matrices.
#[derive(Debug, Clone)]
pub enum Instance {
    Fixed(FixedInstance),
    Discrete(DiscreteInstance),
}

impl ExperimentSpec {
    pub fn materialize(&self) -> Result<Instance> {
        match &self.design {
            Design::Fixed(d) => self.fixed(d).map(Instance::Fixed),
            Design::RandomDiscrete(d) => self.discrete(d).map(Instance::Discrete),
        }
    }

    pub fn fixed_instance(&self) -> Result<FixedInstance> {
        match &self.design {
            Design::Fixed(d) => self.fixed(d),
            Design::RandomDiscrete(_) => Err(invalid("this operation needs a fixed-design experiment")),
        }
    }

    pub fn discrete_instance(&self) -> Result<DiscreteInstance> {
        match &self.design {
            Design::RandomDiscrete(d) => self.discrete(d),
            Design::Fixed(_) => Err(invalid("this operation needs a random-design experiment")),
        }
    }

    fn fixed(&self, d: &FixedDesign) -> Result<FixedInstance> {
        if d.n == 0 {
            return Err(invalid("fixed design needs n >= 1"));
        }
        positive("sigma", d.sigma)?;
        let f = d.class.generate(d.n, self.seed)?;
        let f_star = match &d.truth {
            Truth::Explicit { values } => {
                if values.len() != d.n || values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid(format!("truth must have {} finite entries", d.n)));
                }
                DVector::from_column_slice(values)
            }
            Truth::Random { scale } => {
                positive("truth scale", *scale)?;
                let mut rng = stream_rng(self.seed, 0, Stream::Truth);
                DVector::from_iterator(d.n, (0..d.n).map(|_| rng.random_range(-*scale..=*scale)))
            }
            Truth::Row { index } => {
                if *index >= f.nrows() {
                    return Err(invalid(format!("truth row {index} out of range")));
                }
                f.row(*index).transpose()
            }
        };
        let prior = self.prior.build(f.nrows())?;
        Ok(FixedInstance {
            f,
            f_star,
            sigma: d.sigma,
            prior,
            seed: self.seed,
        })
    }

    fn discrete(&self, d: &RandomDesign) -> Result<DiscreteInstance> {
        if d.n == 0 {
            return Err(invalid("random design needs n >= 1"));
        }
        positive("b", d.b)?;
        let k = d.support.len();
        let dim = d.support.first().map_or(0, |s| s.x.len());
        if k == 0 || dim == 0 || d.support.iter().any(|s| s.x.len() != dim) {
            return Err(invalid("support points need covariates of one common dimension >= 1"));
        }
        let total: f64 = d.support.iter().map(|s| s.prob).sum();
        if d.support.iter().any(|s| !(s.prob >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(invalid("support probabilities must be nonnegative and sum to 1"));
        }
        let mut cond_mean = Vec::with_capacity(k);
        let mut cond_var = Vec::with_capacity(k);
        let mut pairs = Vec::new();
        let mut weights = Vec::new();
        for (idx, s) in d.support.iter().enumerate() {
            if s.x.iter().any(|v| !v.is_finite()) {
                return Err(invalid("support covariates must be finite"));
            }
            let ctotal: f64 = s.responses.iter().map(|r| r.prob).sum();
            if s.responses.is_empty()
                || s.responses.iter().any(|r| !(r.prob >= 0.0))
                || (ctotal - 1.0).abs() > 1e-12
            {
                return Err(invalid(format!("conditional table {idx} must be a probability vector")));
            }
            if s.responses.iter().any(|r| !(r.y.abs() <= d.b)) {
                return Err(invalid(format!("support point {idx} violates |Y| <= b = {}", d.b)));
            }
            let mean: f64 = s.responses.iter().map(|r| r.prob * r.y).sum();
            let var: f64 = s.responses.iter().map(|r| r.prob * (r.y - mean) * (r.y - mean)).sum();
            cond_mean.push(mean);
            cond_var.push(var);
            for r in &s.responses {
                pairs.push((idx, r.y));
                weights.push(s.prob * r.prob);
            }
        }
        let sampler = WeightedIndex::new(&weights).map_err(|e| invalid(format!("sampling table: {e}")))?;
        let flat: Vec<f64> = d.support.iter().flat_map(|s| s.x.iter().copied()).collect();
        let x = DMatrix::from_row_slice(k, dim, &flat);
        let (class, prior) = match &d.class {
            Some(gen) => {
                let c = gen.generate(k, self.seed)?;
                let p = self.prior.build(c.nrows())?;
                (Some(c), Some(p))
            }
            None => (None, None),
        };
        if let Some(j) = d.best_row {
            if class.as_ref().is_none_or(|c| j >= c.nrows()) {
                return Err(invalid(format!("best_row {j} does not index a class row")));
            }
        }
        Ok(DiscreteInstance {
            n: d.n,
            b: d.b,
            x,
            px: d.support.iter().map(|s| s.prob).collect(),
            cond_mean,
            cond_var,
            class,
            prior,
            best_row: d.best_row,
            seed: self.seed,
            pairs,
            sampler,
        })
    }
}

/// `y = f* + sigma Z` for replication `replication`.
pub fn gen_fixed_design(spec: &ExperimentSpec, replication: u64) -> Result<DVector<f64>> {
    Ok(spec.fixed_instance()?.noisy_targets(replication))
}

/// `n` i.i.d. draws from the finite-support table.
pub fn gen_random_design(spec: &ExperimentSpec, replication: u64) -> Result<RandomSample> {
    Ok(spec.discrete_instance()?.sample(replication))
}

/// Exact `R(f_j)` for every class row under the discrete distribution.
pub fn true_risks_discrete(spec: &ExperimentSpec) -> Result<ScoreVector> {
    spec.discrete_instance()?.true_risks()
}
