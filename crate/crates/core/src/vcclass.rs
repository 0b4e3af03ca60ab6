//! Binary projection classes on a finite sample: brute-force VC dimension
//! and star number, and transductive Q-aggregation with a uniform prior over
//! the projection class.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{ensure_dim, invalid, Error, Result};
use crate::estimators::{q_aggregation, FiniteClass, SolverConfig};
use crate::simplex::{tilt_by_risks, SimplexWeights};

/// Largest sample size accepted by [`vc_dimension_bruteforce`].
pub const VC_MAX_POINTS: usize = 20;
/// Largest sample size accepted by [`star_number_bruteforce`].
pub const STAR_MAX_POINTS: usize = 16;

/// `K` distinct binary rows over `m` sample points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionClass {
    rows: Vec<Vec<u8>>,
    m: usize,
}

impl ProjectionClass {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let m = rows.first().map(Vec::len).ok_or_else(|| invalid("projection class needs at least one row"))?;
        if rows.iter().any(|r| r.len() != m) {
            return Err(invalid("projection rows must share one length"));
        }
        if rows.iter().flatten().any(|&v| v > 1) {
            return Err(invalid("projection entries must be 0 or 1"));
        }
        let distinct: HashSet<&Vec<u8>> = rows.iter().collect();
        if distinct.len() != rows.len() {
            return Err(invalid("projection rows must be pairwise distinct"));
        }
        Ok(Self { rows, m })
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Rows as bit masks (bit `x` set when the row is 1 at point `x`).
    fn masks(&self) -> Vec<u64> {
        self.rows
            .iter()
            .map(|r| r.iter().enumerate().fold(0u64, |acc, (x, &v)| acc | (u64::from(v) << x)))
            .collect()
    }

    /// Same functions with the two sample points exchanged.
    pub fn swap_columns(&self, a: usize, b: usize) -> Result<Self> {
        if a >= self.m || b >= self.m {
            return Err(invalid("column index out of range"));
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.swap(a, b);
                r
            })
            .collect();
        Ok(Self { rows, m: self.m })
    }

    /// Real-valued `K x m` matrix of the rows.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.k(), self.m, |j, x| f64::from(self.rows[j][x]))
    }
}

/// Observed labels on the first half of a `2n` sample and held-out labels on
/// the second half.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransductiveSplit {
    labels_first: Vec<u8>,
    labels_second: Vec<u8>,
}

impl TransductiveSplit {
    pub fn new(labels_first: Vec<u8>, labels_second: Vec<u8>) -> Result<Self> {
        ensure_dim("TransductiveSplit", labels_first.len(), labels_second.len())?;
        if labels_first.is_empty() {
            return Err(invalid("transductive split needs n >= 1"));
        }
        if labels_first.iter().chain(&labels_second).any(|&v| v > 1) {
            return Err(invalid("labels must be 0 or 1"));
        }
        Ok(Self {
            labels_first,
            labels_second,
        })
    }

    pub fn n(&self) -> usize {
        self.labels_first.len()
    }

    pub fn m(&self) -> usize {
        2 * self.n()
    }

    pub fn labels_first(&self) -> &[u8] {
        &self.labels_first
    }

    pub fn labels_second(&self) -> &[u8] {
        &self.labels_second
    }

    /// Exchanges point `i` of the first half with point `i` of the second.
    pub fn swap_pair(&self, i: usize) -> Result<Self> {
        if i >= self.n() {
            return Err(invalid("pair index out of range"));
        }
        let mut s = self.clone();
        std::mem::swap(&mut s.labels_first[i], &mut s.labels_second[i]);
        Ok(s)
    }

    fn all_labels(&self) -> Vec<u8> {
        self.labels_first.iter().chain(&self.labels_second).copied().collect()
    }
}

/// Thresholds `x -> 1[x >= t]` restricted to strictly increasing points.
pub fn thresholds_projection(points: &[f64]) -> Result<ProjectionClass> {
    if points.is_empty() {
        return Err(invalid("thresholds need at least one point"));
    }
    if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("threshold points must be finite and strictly increasing"));
    }
    let m = points.len();
    let rows = (0..=m).map(|t| (0..m).map(|x| u8::from(x >= t)).collect()).collect();
    ProjectionClass::new(rows)
}

/// The zero row followed by every standard basis row.
pub fn singletons_projection(m: usize) -> Result<ProjectionClass> {
    if m == 0 {
        return Err(invalid("singletons need m >= 1"));
    }
    let mut rows = vec![vec![0u8; m]];
    rows.extend((0..m).map(|k| (0..m).map(|x| u8::from(x == k)).collect()));
    ProjectionClass::new(rows)
}

fn subsets_of_size(m: usize, s: usize) -> impl Iterator<Item = u64> {
    // Gosper's hack over m-bit masks.
    let limit = 1u64 << m;
    let first = if s == 0 { 0 } else { (1u64 << s) - 1 };
    let mut cur = Some(first);
    std::iter::from_fn(move || {
        let c = cur?;
        if c >= limit && s > 0 {
            return None;
        }
        cur = if s == 0 {
            None
        } else {
            let low = c & c.wrapping_neg();
            let ripple = c + low;
            let next = (((ripple ^ c) >> 2) / low) | ripple;
            Some(next)
        };
        Some(c)
    })
}

/// Largest `s` such that some `s` points are shattered.
pub fn vc_dimension_bruteforce(pc: &ProjectionClass) -> Result<usize> {
    if pc.m() > VC_MAX_POINTS {
        return Err(Error::TooLarge(format!(
            "VC search supports at most {VC_MAX_POINTS} points, got {}",
            pc.m()
        )));
    }
    let masks = pc.masks();
    let max_s = (usize::BITS - 1 - pc.k().leading_zeros()) as usize;
    for s in (1..=max_s.min(pc.m())).rev() {
        let shattered = subsets_of_size(pc.m(), s).any(|set| {
            let patterns: HashSet<u64> = masks.iter().map(|&r| r & set).collect();
            patterns.len() == 1usize << s
        });
        if shattered {
            return Ok(s);
        }
    }
    Ok(0)
}

/// Largest `s` with a centre row `f0`, points `x_1..x_s` and rows `f_i` whose
/// disagreement with `f0` inside `{x_1..x_s}` is exactly `{x_i}`.
pub fn star_number_bruteforce(pc: &ProjectionClass) -> Result<usize> {
    if pc.m() > STAR_MAX_POINTS {
        return Err(Error::TooLarge(format!(
            "star number search supports at most {STAR_MAX_POINTS} points, got {}",
            pc.m()
        )));
    }
    let masks = pc.masks();
    let full = 1u64 << pc.m();
    let best = masks
        .par_iter()
        .map(|&f0| {
            let diffs: Vec<u64> = masks.iter().map(|&f| f ^ f0).filter(|&d| d != 0).collect();
            let mut best = 0u32;
            for set in 1..full {
                let size = set.count_ones();
                if size <= best {
                    continue;
                }
                let mut covered = 0u64;
                for &d in &diffs {
                    let inside = d & set;
                    if inside.count_ones() == 1 {
                        covered |= inside;
                    }
                }
                if covered == set {
                    best = size;
                }
            }
            best
        })
        .max()
        .unwrap_or(0);
    Ok(best as usize)
}

fn half_risks(pc: &ProjectionClass, labels: &[u8], offset: usize) -> Vec<f64> {
    let n = labels.len() as f64;
    pc.rows()
        .iter()
        .map(|r| {
            labels
                .iter()
                .enumerate()
                .filter(|(i, &l)| r[offset + i] != l)
                .count() as f64
                / n
        })
        .collect()
}

/// Outcome of [`transductive_qagg`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransductiveOutcome {
    pub weights: SimplexWeights,
    /// `R'_n(f_rho) - min_j R'_n(f_j)` on the second half (may be negative).
    pub excess: f64,
    pub iterations: usize,
}

fn check_split(pc: &ProjectionClass, split: &TransductiveSplit) -> Result<()> {
    ensure_dim("transductive class columns", split.m(), pc.m())
}

/// Q-aggregation with a uniform prior over the projection class, fitted on
/// the first half and scored on the second.
pub fn transductive_qagg(
    pc: &ProjectionClass,
    split: &TransductiveSplit,
    beta: f64,
    cfg: &SolverConfig,
) -> Result<TransductiveOutcome> {
    check_split(pc, split)?;
    let n = split.n();
    let full = pc.to_matrix();
    let first = full.columns(0, n).into_owned();
    let y: Vec<f64> = split.labels_first().iter().map(|&v| f64::from(v)).collect();
    let fc = FiniteClass::new(first, y.into())?;
    let pi = SimplexWeights::uniform(pc.k())?;
    let res = q_aggregation(&pi, &fc, beta, cfg)?.require_converged()?;

    let second = full.columns(n, n);
    let probs = res.weights.probs();
    let held: Vec<f64> = split.labels_second().iter().map(|&v| f64::from(v)).collect();
    let mix_risk = (0..n)
        .map(|i| {
            let f: f64 = (0..pc.k()).map(|j| probs[j] * second[(j, i)]).sum();
            (f - held[i]) * (f - held[i])
        })
        .sum::<f64>()
        / n as f64;
    let best = half_risks(pc, split.labels_second(), n)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(TransductiveOutcome {
        weights: res.weights,
        excess: mix_risk - best,
        iterations: res.iterations,
    })
}

/// The localized prior `pi_{-(beta/6)(R_n + R'_n)}` over the rows, with the
/// uniform prior. It depends on the labels only through the full-sample
/// disagreement counts, which are invariant under swapping paired points.
pub fn localized_prior(pc: &ProjectionClass, split: &TransductiveSplit, beta: f64) -> Result<SimplexWeights> {
    check_split(pc, split)?;
    let n = split.n() as f64;
    let labels = split.all_labels();
    let total: Vec<f64> = pc
        .rows()
        .iter()
        .map(|r| r.iter().zip(&labels).filter(|(a, b)| a != b).count() as f64 / n)
        .collect();
    tilt_by_risks(&SimplexWeights::uniform(pc.k())?, &total, beta / 6.0)
}
