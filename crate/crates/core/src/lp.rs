//! Littlewood–Paley blocks `L_k = ⊕ {τ : 2ᵏ ≤ c(τ) < 2ᵏ⁺¹}`, Sobolev
//! norms, the Bernstein inequality and block counting.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::flag::FlagPoint;
use crate::group::Backend;
use crate::harmonics::{casimir_value, dim_tau, laplace_eigenvalue, tau_range, FunctionCoefficients, HarmonicBasis};

/// Block index of an isotypic label: `⌊log₂ c(τ)⌋`.
pub fn lp_block_of_tau(backend: Backend, tau: u32) -> u32 {
    let c = 1 + laplace_eigenvalue(backend, tau);
    63 - c.leading_zeros()
}

/// Block index of the label at `index` in the canonical order.
pub fn lp_block_of(basis: &HarmonicBasis, index: usize) -> u32 {
    lp_block_of_tau(basis.backend(), basis.labels()[index].tau)
}

/// Assignment of the canonical labels up to a cutoff to LP blocks.
#[derive(Clone, Debug)]
pub struct LpBlocking {
    pub backend: Backend,
    pub cutoff: u32,
    /// Block index of every label, in canonical order.
    pub block_of_label: Vec<u32>,
    /// Label indices per block; blocks with no labels map to empty vectors.
    pub blocks: BTreeMap<u32, Vec<usize>>,
}

impl LpBlocking {
    pub fn new(backend: Backend, cutoff: u32) -> Self {
        let top = lp_block_of_tau(backend, cutoff);
        let mut blocks: BTreeMap<u32, Vec<usize>> = (0..=top).map(|k| (k, Vec::new())).collect();
        let mut block_of_label = Vec::new();
        for tau in 0..=cutoff {
            let k = lp_block_of_tau(backend, tau);
            for i in tau_range(backend, tau) {
                block_of_label.push(k);
                blocks.get_mut(&k).expect("block exists").push(i);
            }
        }
        LpBlocking { backend, cutoff, block_of_label, blocks }
    }

    pub fn top_block(&self) -> u32 {
        *self.blocks.keys().next_back().unwrap_or(&0)
    }

    /// Whether block `k` contains every label of `L_k`, i.e. the cutoff
    /// does not cut through it.
    pub fn is_complete(&self, k: u32) -> bool {
        casimir_value(self.backend, self.cutoff + 1) >= 2f64.powi(k as i32 + 1)
    }

    /// Label indices in blocks `< n`.
    pub fn low_indices(&self, n: u32) -> Vec<usize> {
        (0..self.block_of_label.len()).filter(|&i| self.block_of_label[i] < n).collect()
    }

    /// Label indices in blocks `≥ n`.
    pub fn high_indices(&self, n: u32) -> Vec<usize> {
        (0..self.block_of_label.len()).filter(|&i| self.block_of_label[i] >= n).collect()
    }

    /// `P_k u`.
    pub fn project_block(&self, u: &FunctionCoefficients, k: u32) -> FunctionCoefficients {
        self.mask(u, |b| b == k)
    }

    /// `P_{<n} u`.
    pub fn project_below(&self, u: &FunctionCoefficients, n: u32) -> FunctionCoefficients {
        self.mask(u, |b| b < n)
    }

    /// `P_{≥n} u`.
    pub fn project_at_or_above(&self, u: &FunctionCoefficients, n: u32) -> FunctionCoefficients {
        self.mask(u, |b| b >= n)
    }

    fn mask(&self, u: &FunctionCoefficients, keep: impl Fn(u32) -> bool) -> FunctionCoefficients {
        let mut out = u.clone();
        for (v, &b) in out.values.iter_mut().zip(&self.block_of_label) {
            if !keep(b) {
                *v = C64::new(0.0, 0.0);
            }
        }
        out
    }

    /// `‖P_k u‖₂` for `k = 0..=top`.
    pub fn block_norms(&self, u: &FunctionCoefficients) -> Vec<f64> {
        let mut sq = vec![0.0; self.top_block() as usize + 1];
        for (v, &b) in u.values.iter().zip(&self.block_of_label) {
            sq[b as usize] += v.norm_sqr();
        }
        sq.into_iter().map(f64::sqrt).collect()
    }
}

/// `‖u‖_{H^s} = (Σ c(τ)^s |u_τ|²)^{1/2}`, the diagonal form.
pub fn sobolev_norm(u: &FunctionCoefficients, s: f64) -> f64 {
    let mut acc = 0.0;
    for tau in 0..=u.cutoff {
        let w = casimir_value(u.backend, tau).powf(s);
        acc += tau_range(u.backend, tau).map(|i| u.values[i].norm_sqr()).sum::<f64>() * w;
    }
    acc.sqrt()
}

/// The block form `(Σ_k 2^{sk} ‖P_k u‖²)^{1/2}`; within a factor `2^{s/2}`
/// of the diagonal form.
pub fn sobolev_norm_blocks(u: &FunctionCoefficients, s: f64) -> f64 {
    let blocking = LpBlocking::new(u.backend, u.cutoff);
    blocking.block_norms(u).iter().enumerate().map(|(k, n)| 2f64.powf(s * k as f64) * n * n).sum::<f64>().sqrt()
}

/// Both sides of `‖u‖_∞ ≤ dim(τ) ‖u‖₂` for an isotypic `u`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BernsteinCheck {
    pub sup_estimate: f64,
    pub l2_norm: f64,
    pub dim_tau: u32,
    pub bound: f64,
}

impl BernsteinCheck {
    /// Allows a relative 1e−12 for rounding; constants attain the bound.
    pub fn holds(&self) -> bool {
        self.sup_estimate <= self.bound * (1.0 + 1e-12)
    }
}

/// Estimates the sup of an isotypic function on a grid at least ten times
/// finer than its band and returns both sides of the inequality.
///
/// Panics if `u` has mass outside `τ`.
pub fn bernstein_check(tau: u32, u: &FunctionCoefficients) -> BernsteinCheck {
    let range = tau_range(u.backend, tau);
    assert!(
        u.values.iter().enumerate().all(|(i, v)| range.contains(&i) || *v == C64::new(0.0, 0.0)),
        "bernstein_check needs a function supported on a single isotypic label"
    );
    let basis = HarmonicBasis::new(u.backend, tau);
    let u = u.with_cutoff(tau);
    let sup = match u.backend {
        Backend::Sl2R => {
            let n = (20 * (tau as usize + 1)).max(64);
            (0..n)
                .map(|q| u.synthesize_with(&basis, &FlagPoint::line(PI * q as f64 / n as f64)).norm())
                .fold(0.0, f64::max)
        }
        Backend::Sl2C => {
            let n_theta = (10 * (tau as usize + 1)).max(32);
            let n_phi = 2 * n_theta;
            let mut sup = 0.0f64;
            for a in 0..=n_theta {
                let theta = PI * a as f64 / n_theta as f64;
                for b in 0..n_phi {
                    let phi = 2.0 * PI * b as f64 / n_phi as f64;
                    sup = sup.max(u.synthesize_with(&basis, &FlagPoint::spherical(theta, phi)).norm());
                }
            }
            sup
        }
    };
    let l2 = u.norm();
    let d = dim_tau(u.backend, tau);
    BernsteinCheck { sup_estimate: sup, l2_norm: l2, dim_tau: d, bound: f64::from(d) * l2 }
}

/// Number of isotypic labels per block, `N_k`, for `τ ≤ cutoff`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockCounts {
    pub backend: Backend,
    pub cutoff: u32,
    pub counts: BTreeMap<u32, u32>,
    /// Blocks whose every label lies at or below the cutoff.
    pub complete: BTreeMap<u32, bool>,
}

impl BlockCounts {
    /// `N_k / 2^{k/2}` over nonempty complete blocks in `range`.
    pub fn normalized(&self, range: std::ops::RangeInclusive<u32>) -> Vec<(u32, f64)> {
        self.counts
            .iter()
            .filter(|(k, n)| range.contains(k) && **n > 0 && self.complete[k])
            .map(|(&k, &n)| (k, f64::from(n) / 2f64.powf(f64::from(k) / 2.0)))
            .collect()
    }

    pub fn total(&self) -> u32 {
        self.counts.values().sum()
    }
}

pub fn block_counts(backend: Backend, cutoff: u32) -> BlockCounts {
    let blocking = LpBlocking::new(backend, cutoff);
    let mut counts: BTreeMap<u32, u32> = blocking.blocks.keys().map(|&k| (k, 0)).collect();
    for tau in 0..=cutoff {
        *counts.get_mut(&lp_block_of_tau(backend, tau)).expect("block exists") += 1;
    }
    let complete = counts.keys().map(|&k| (k, blocking.is_complete(k))).collect();
    BlockCounts { backend, cutoff, counts, complete }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn block_assignment() {
        assert_eq!(lp_block_of_tau(Backend::Sl2R, 0), 0);
        assert_eq!(lp_block_of_tau(Backend::Sl2C, 3), 3);
        assert_eq!(lp_block_of_tau(Backend::Sl2R, 1), 2);
        let blocking = LpBlocking::new(Backend::Sl2R, 8);
        // c = 1 + 4n² never lies in [2, 4) or [8, 16).
        assert!(blocking.blocks[&1].is_empty());
        assert!(blocking.blocks[&3].is_empty());
        assert_eq!(blocking.blocks[&0], vec![0]);
    }

    #[test]
    fn projections_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = FunctionCoefficients::random(Backend::Sl2C, 12, 0..=12, &mut rng);
        let blocking = LpBlocking::new(Backend::Sl2C, 12);
        let mut sum = FunctionCoefficients::zeros(Backend::Sl2C, 12);
        let mut sq = 0.0;
        for &k in blocking.blocks.keys() {
            let p = blocking.project_block(&u, k);
            sq += p.norm().powi(2);
            for (s, v) in sum.values.iter_mut().zip(&p.values) {
                *s += v;
            }
            let other = blocking.project_block(&p, k + 1);
            assert_eq!(other.norm(), 0.0);
        }
        assert_eq!(sum, u);
        assert!((sq - u.norm().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn sobolev_forms() {
        let u = FunctionCoefficients::unit(Backend::Sl2C, 4, 10);
        assert_eq!(u.values.len(), 25);
        assert!((sobolev_norm(&u, 2.0) - 13.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let v = FunctionCoefficients::random(Backend::Sl2R, 40, 0..=40, &mut rng);
            assert!((sobolev_norm(&v, 0.0) - v.norm()).abs() < 1e-12);
            for s in [1.0, 2.0, 4.0] {
                let r = sobolev_norm(&v, s) / sobolev_norm_blocks(&v, s);
                assert!(r >= 2f64.powf(-s) && r <= 2f64.powf(s));
            }
        }
    }

    #[test]
    fn bernstein_closed_forms() {
        let n = 5;
        let idx = 2 * n as usize - 1;
        let u = FunctionCoefficients::unit(Backend::Sl2R, n, idx);
        let c = bernstein_check(n, &u);
        assert!((c.sup_estimate - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(c.bound, 2.0);
        let one = FunctionCoefficients::unit(Backend::Sl2R, 0, 0);
        let c = bernstein_check(0, &one);
        assert!((c.sup_estimate - 1.0).abs() < 1e-15);
        assert_eq!(c.bound, 1.0);
    }

    #[test]
    fn counts_sum_and_first_block() {
        let bc = block_counts(Backend::Sl2R, 64);
        assert_eq!(bc.counts[&0], 1);
        assert_eq!(bc.total(), 65);
        let bc = block_counts(Backend::Sl2C, 128);
        assert_eq!(bc.total(), 129);
        assert!(!bc.complete[&14]);
        assert!(bc.complete[&13]);
    }
}
