use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::operator::{assemble_markov, AssemblyOptions, OperatorMatrix};
use super::{fit_line, top_singular_value};
use crate::error::{Error, Result};
use crate::harmonics::FunctionCoefficients;
use crate::lp::LpBlocking;
use crate::measure::SupportMeasure;
use crate::C64;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapReport {
    pub n_block: u32,
    pub cutoff: u32,
    /// `‖T P_{≥N}‖` over the columns in blocks `N..=top−2`.
    pub estimate: f64,
    /// The same quantity at twice the cutoff.
    pub estimate_doubled: f64,
    /// Largest singular value of the full truncated operator.
    pub full_norm: f64,
    /// `|estimate_doubled − estimate| ≤ tolerance`.
    pub converged: bool,
}

/// Largest singular value of `T` restricted to the columns in blocks
/// `N..=top−2`, all rows kept.
pub fn restricted_norm(op: &OperatorMatrix, n_block: u32) -> Result<f64> {
    let blocking = LpBlocking::new(op.backend, op.cutoff);
    let top = blocking.top_block();
    if top < 2 || n_block > top - 2 {
        return Err(Error::Config(format!("block {n_block} is not below the truncation window (top block {top})")));
    }
    let cols: Vec<usize> =
        blocking.high_indices(n_block).into_iter().filter(|&i| blocking.block_of_label[i] <= top - 2).collect();
    let sub = DMatrix::from_fn(op.dim(), cols.len(), |i, j| op.matrix[(i, cols[j])]);
    Ok(top_singular_value(&sub))
}

/// Windowed restricted norm at `cutoff` and `2·cutoff`.
pub fn restricted_gap_estimate(
    mu: &SupportMeasure,
    n_block: u32,
    cutoff: u32,
    options: AssemblyOptions,
    convergence_tol: f64,
) -> Result<GapReport> {
    let op = assemble_markov(mu, cutoff, options)?;
    let estimate = restricted_norm(&op, n_block)?;
    let full_norm = op.top_singular_value();
    let op2 = assemble_markov(mu, 2 * cutoff, options)?;
    let estimate_doubled = restricted_norm(&op2, n_block)?;
    Ok(GapReport {
        n_block,
        cutoff,
        estimate,
        estimate_doubled,
        full_norm,
        converged: (estimate_doubled - estimate).abs() <= convergence_tol,
    })
}

/// Norms along `u, Tu, T²u, …` with the split at block `N`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationTrace {
    pub k: u32,
    pub n_block: u32,
    /// `‖T^ℓ u‖₂`, `ℓ = 0..=ell_max`.
    pub norms: Vec<f64>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl IterationTrace {
    /// Steps ℓ where `‖P_{≥N}T^{ℓ+1}u‖ > gap·‖T^ℓu‖ + ‖P_{<N}T^{ℓ+1}u‖`.
    pub fn recursion_violations(&self, gap: f64) -> Vec<usize> {
        (0..self.norms.len().saturating_sub(1))
            .filter(|&l| self.high[l + 1] > gap * self.norms[l] + self.low[l + 1] + 1e-14)
            .collect()
    }
}

/// A random unit function supported in block `L_k`.
pub fn random_block_function(blocking: &LpBlocking, k: u32, rng: &mut impl Rng) -> Result<FunctionCoefficients> {
    let idx = blocking
        .blocks
        .get(&k)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| Error::Config(format!("block {k} is empty at cutoff {}", blocking.cutoff)))?;
    let mut u = FunctionCoefficients::zeros(blocking.backend, blocking.cutoff);
    for &i in idx {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = if blocking.backend.is_real() { 0.0 } else { rng.sample(StandardNormal) };
        u.values[i] = C64::new(re, im);
    }
    Ok(u.normalized())
}

pub fn highfreq_iteration_experiment(
    op: &OperatorMatrix,
    k: u32,
    ell_max: usize,
    n_block: u32,
    rng: &mut impl Rng,
) -> Result<IterationTrace> {
    let blocking = LpBlocking::new(op.backend, op.cutoff);
    let mut u = random_block_function(&blocking, k, rng)?;
    let (mut norms, mut low, mut high) = (Vec::new(), Vec::new(), Vec::new());
    for l in 0..=ell_max {
        if l > 0 {
            u = op.apply(&u);
        }
        norms.push(u.norm());
        low.push(blocking.project_below(&u, n_block).norm());
        high.push(blocking.project_at_or_above(&u, n_block).norm());
    }
    Ok(IterationTrace { k, n_block, norms, low, high })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LowLeakReport {
    pub n_block: u32,
    /// `(k, mean ‖P_{<N} T u‖₂)` over random unit `u ∈ L_k`.
    pub points: Vec<(u32, f64)>,
    /// Slope of `log₂` of the mean against `k`.
    pub slope: f64,
}

pub fn low_frequency_leak(
    op: &OperatorMatrix,
    n_block: u32,
    ks: &[u32],
    samples: usize,
    rng: &mut impl Rng,
) -> Result<LowLeakReport> {
    let blocking = LpBlocking::new(op.backend, op.cutoff);
    let mut points = Vec::new();
    for &k in ks {
        let mut acc = 0.0;
        for _ in 0..samples {
            let u = random_block_function(&blocking, k, rng)?;
            acc += blocking.project_below(&op.apply(&u), n_block).norm();
        }
        points.push((k, acc / samples as f64));
    }
    let fit: Vec<(f64, f64)> = points.iter().map(|&(k, v)| (k as f64, v.max(1e-300).log2())).collect();
    let slope = if fit.len() >= 2 { fit_line(&fit).0 } else { 0.0 };
    Ok(LowLeakReport { n_block, points, slope })
}
