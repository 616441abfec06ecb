//! Monte Carlo simulation of the walk `ξ ← gξ`, `g ~ μ`.
//!
//! Trajectory `i` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `i`, so each trajectory's randomness depends only on the master
//! seed and its index. Trajectories run in parallel and are reduced in
//! index order.

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flag::{act_on_flag, FlagPoint};
use crate::group::{Backend, Mat2};
use crate::harmonics::HarmonicBasis;
use crate::measure::SupportMeasure;
use crate::transfer::{fit_line, DensityEstimate};
use crate::{BASIS_ORDER_VERSION, C64};

pub const DEFAULT_BURN_IN: usize = 1000;

#[derive(Clone, Debug)]
pub struct WalkConfig {
    pub measure: SupportMeasure,
    /// Steps per trajectory, burn-in included.
    pub steps: usize,
    pub trajectories: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub initial: FlagPoint,
    /// Moments are recorded for every label up to this cutoff.
    pub moment_cutoff: u32,
    /// Batches per trajectory for the batch-means standard errors.
    pub batches: usize,
}

impl WalkConfig {
    pub fn new(measure: SupportMeasure, steps: usize, trajectories: usize, seed: u64) -> Self {
        let initial = FlagPoint::base(measure.backend());
        WalkConfig {
            measure,
            steps,
            trajectories,
            burn_in: DEFAULT_BURN_IN.min(steps.saturating_sub(1)),
            seed,
            initial,
            moment_cutoff: 8,
            batches: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps <= self.burn_in {
            return Err(Error::Config(format!("steps {} must exceed burn-in {}", self.steps, self.burn_in)));
        }
        if self.trajectories == 0 {
            return Err(Error::Config("at least one trajectory is required".into()));
        }
        if self.batches == 0 || self.batches > self.steps - self.burn_in {
            return Err(Error::Config(format!("batch count {} does not fit the samples", self.batches)));
        }
        if self.initial.backend() != self.measure.backend() {
            return Err(Error::BackendMismatch { expected: self.measure.backend(), found: self.initial.backend() });
        }
        Ok(())
    }

    /// Post-burn-in samples over all trajectories.
    pub fn sample_count(&self) -> usize {
        (self.steps - self.burn_in) * self.trajectories
    }

    fn rng(&self, trajectory: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trajectory as u64);
        rng
    }
}

/// Empirical `∫ conj(e_i) dν` with batch-means standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMoments {
    pub backend: Backend,
    pub cutoff: u32,
    pub basis_order_version: u32,
    pub means: Vec<C64>,
    pub standard_errors: Vec<f64>,
    pub count: usize,
    /// Largest `manifold_defect` of a final walker position.
    pub max_manifold_defect: f64,
}

impl EmpiricalMoments {
    /// CSV with columns `label,re,im,se,count` in canonical order.
    pub fn to_csv(&self) -> String {
        let basis = HarmonicBasis::new(self.backend, self.cutoff);
        let mut out = String::from("label,re,im,se,count\n");
        for (i, label) in basis.labels().iter().enumerate() {
            let m = self.means[i];
            writeln!(out, "{},{},{},{},{}", label.short_name(), m.re, m.im, self.standard_errors[i], self.count)
                .expect("writing to a String");
        }
        out
    }
}

pub fn simulate_walk(config: &WalkConfig) -> Result<EmpiricalMoments> {
    config.validate()?;
    let backend = config.measure.backend();
    let basis = HarmonicBasis::new(backend, config.moment_cutoff);
    let dim = basis.dim();
    let atoms: Vec<_> = config.measure.atoms().iter().map(|a| a.element).collect();
    let sampler = WeightedIndex::new(config.measure.atoms().iter().map(|a| a.weight))
        .map_err(|e| Error::InvalidMeasure(e.to_string()))?;
    let kept = config.steps - config.burn_in;
    let batch_len = kept / config.batches;

    // Per trajectory: batch sums of conj(e_i) and the final defect.
    let per_traj: Vec<(Vec<Vec<C64>>, Vec<usize>, f64)> = (0..config.trajectories)
        .into_par_iter()
        .map(|t| {
            let mut rng = config.rng(t);
            let mut xi = config.initial;
            let mut vals = vec![C64::new(0.0, 0.0); dim];
            let mut sums = vec![vec![C64::new(0.0, 0.0); dim]; config.batches];
            let mut counts = vec![0usize; config.batches];
            for step in 0..config.steps {
                let g = &atoms[sampler.sample(&mut rng)];
                xi = act_on_flag(g, &xi);
                if step >= config.burn_in {
                    let b = ((step - config.burn_in) / batch_len.max(1)).min(config.batches - 1);
                    basis.eval_all(&xi, &mut vals);
                    for (s, v) in sums[b].iter_mut().zip(&vals) {
                        *s += v.conj();
                    }
                    counts[b] += 1;
                }
            }
            (sums, counts, xi.manifold_defect())
        })
        .collect();

    let mut total = vec![C64::new(0.0, 0.0); dim];
    let mut batch_means: Vec<Vec<C64>> = Vec::new();
    let mut count = 0;
    let mut max_manifold_defect: f64 = 0.0;
    for (sums, counts, defect) in &per_traj {
        max_manifold_defect = max_manifold_defect.max(*defect);
        for (s, &c) in sums.iter().zip(counts) {
            for (acc, v) in total.iter_mut().zip(s) {
                *acc += v;
            }
            count += c;
            batch_means.push(s.iter().map(|v| v / c as f64).collect());
        }
    }
    let mut means: Vec<C64> = total.iter().map(|v| v / count as f64).collect();
    let nb = batch_means.len();
    let mut standard_errors: Vec<f64> = (0..dim)
        .map(|i| {
            if nb < 2 {
                return 0.0;
            }
            let var: f64 = batch_means.iter().map(|b| (b[i] - means[i]).norm_sqr()).sum::<f64>() / (nb - 1) as f64;
            (var / nb as f64).sqrt()
        })
        .collect();
    means[0] = C64::new(1.0, 0.0);
    standard_errors[0] = 0.0;
    Ok(EmpiricalMoments {
        backend,
        cutoff: config.moment_cutoff,
        basis_order_version: BASIS_ORDER_VERSION,
        means,
        standard_errors,
        count,
        max_manifold_defect,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabelComparison {
    pub index: usize,
    pub label: String,
    pub empirical: C64,
    pub predicted: C64,
    pub standard_error: f64,
    pub z: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub labels: Vec<LabelComparison>,
    /// `max |z|` over the first ten labels.
    pub max_abs_z_first10: f64,
    pub sample_count: usize,
}

/// z-scores of the empirical moments against the density coefficients:
/// `∫ conj(e_i) g dm` is the `i`-th coefficient of `g`.
pub fn compare_empirical_spectral(moments: &EmpiricalMoments, density: &DensityEstimate) -> Result<ComparisonReport> {
    if moments.basis_order_version != BASIS_ORDER_VERSION {
        return Err(Error::BasisOrder(moments.basis_order_version, BASIS_ORDER_VERSION));
    }
    if moments.backend != density.backend {
        return Err(Error::BackendMismatch { expected: density.backend, found: moments.backend });
    }
    let cutoff = moments.cutoff.min(density.cutoff);
    let basis = HarmonicBasis::new(moments.backend, cutoff);
    let labels: Vec<LabelComparison> = (0..basis.dim())
        .map(|i| {
            let empirical = moments.means[i];
            let predicted = density.coefficients.values[i];
            let se = moments.standard_errors[i];
            let diff = (empirical - predicted).norm();
            let z = if diff == 0.0 {
                0.0
            } else if se > 0.0 {
                diff / se
            } else {
                f64::INFINITY
            };
            LabelComparison {
                index: i,
                label: basis.labels()[i].short_name(),
                empirical,
                predicted,
                standard_error: se,
                z,
            }
        })
        .collect();
    let max_abs_z_first10 = labels.iter().take(10).map(|l| l.z).fold(0.0, f64::max);
    Ok(ComparisonReport { labels, max_abs_z_first10, sample_count: moments.count })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Mean over trajectories of the fitted slope of `‖κ(g_n⋯g_1)‖` in `n`.
    pub rate: f64,
    pub standard_error: f64,
}

impl LyapunovEstimate {
    /// `rate > sigmas · standard_error` (and positive).
    pub fn is_positive(&self, sigmas: f64) -> bool {
        self.rate > 0.0 && self.rate > sigmas * self.standard_error
    }
}

const RENORMALIZE_EVERY: usize = 64;

/// `log σ_max` of a 2×2 matrix.
fn log_top_singular(m: &Mat2) -> f64 {
    let f2: f64 = m.0.iter().flatten().map(|z| z.norm_sqr()).sum();
    let d = m.det().norm();
    let disc = (f2 * f2 - 4.0 * d * d).max(0.0).sqrt();
    0.5 * (0.5 * (f2 + disc)).ln()
}

/// Growth rate of the Cartan projection along the walk. The running product
/// is divided by its Frobenius norm every 64 steps and the logarithm of the
/// divisor carried separately, so `κ(P_n) = L_n + log σ_max(M_n)`.
pub fn lyapunov_estimate(config: &WalkConfig) -> Result<LyapunovEstimate> {
    config.validate()?;
    let backend = config.measure.backend();
    let h_norm = backend.spec().h_norm();
    let atoms: Vec<Mat2> = config.measure.atoms().iter().map(|a| *a.element.matrix()).collect();
    let sampler = WeightedIndex::new(config.measure.atoms().iter().map(|a| a.weight))
        .map_err(|e| Error::InvalidMeasure(e.to_string()))?;
    let slopes: Vec<f64> = (0..config.trajectories)
        .into_par_iter()
        .map(|t| {
            let mut rng = config.rng(t);
            let mut m = Mat2::IDENTITY;
            let mut log_scale = 0.0;
            let mut points = Vec::with_capacity(config.steps / RENORMALIZE_EVERY + 1);
            for n in 1..=config.steps {
                m = atoms[sampler.sample(&mut rng)] * m;
                if n % RENORMALIZE_EVERY == 0 || n == config.steps {
                    let f = m.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    m = m.scale(C64::from(1.0 / f));
                    log_scale += f.ln();
                    points.push((n as f64, h_norm * (log_scale + log_top_singular(&m))));
                }
            }
            if points.len() >= 2 {
                fit_line(&points).0
            } else {
                points.first().map(|p| p.1 / p.0).unwrap_or(0.0)
            }
        })
        .collect();
    let n = slopes.len() as f64;
    let rate = slopes.iter().sum::<f64>() / n;
    let standard_error = if slopes.len() > 1 {
        (slopes.iter().map(|s| (s - rate).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(LyapunovEstimate { rate, standard_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupElement;
    use crate::measure::{build_measure, MeasureFamilySpec};

    #[test]
    fn dirac_walk_stays_put() {
        let mu = SupportMeasure::dirac(GroupElement::identity(Backend::Sl2C));
        let mut cfg = WalkConfig::new(mu, 200, 2, 7);
        cfg.burn_in = 10;
        cfg.initial = FlagPoint::spherical(0.4, 1.1);
        let m = simulate_walk(&cfg).unwrap();
        let basis = HarmonicBasis::new(Backend::Sl2C, cfg.moment_cutoff);
        let at = basis.eval_vec(&cfg.initial);
        for i in 1..basis.dim() {
            assert!((m.means[i] - at[i].conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_walk_equidistributes() {
        let mu = build_measure(Backend::Sl2R, &MeasureFamilySpec::RotationPair { phi: 1.0 }).unwrap();
        let cfg = WalkConfig::new(mu, 20_000, 8, 11);
        let m = simulate_walk(&cfg).unwrap();
        for i in 1..m.means.len() {
            assert!(m.means[i].norm() <= 5.0 * m.standard_errors[i], "label {i}");
        }
        assert_eq!(m.count, cfg.sample_count());
    }

    #[test]
    fn same_seed_same_moments() {
        let mu = build_measure(Backend::Sl2C, &MeasureFamilySpec::ExpBasisFamily { eps: 0.2 }).unwrap();
        let cfg = WalkConfig::new(mu, 3000, 4, 99);
        let a = simulate_walk(&cfg).unwrap();
        let b = simulate_walk(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn lyapunov_special_cases() {
        let k = build_measure(Backend::Sl2R, &MeasureFamilySpec::RotationPair { phi: 0.3 }).unwrap();
        let est = lyapunov_estimate(&WalkConfig::new(k, 5000, 4, 1)).unwrap();
        assert!(est.rate.abs() < 1e-9);

        let d = GroupElement::new(Backend::Sl2R, Mat2::real(std::f64::consts::E, 0.0, 0.0, (-1.0f64).exp())).unwrap();
        let expected = crate::group::kappa_norm(&d);
        let est = lyapunov_estimate(&WalkConfig::new(SupportMeasure::dirac(d), 5000, 2, 1)).unwrap();
        assert!((est.rate - expected).abs() < 1e-9, "{} vs {expected}", est.rate);

        let mu = build_measure(Backend::Sl2R, &MeasureFamilySpec::ExpBasisFamily { eps: 0.25 }).unwrap();
        let est = lyapunov_estimate(&WalkConfig::new(mu, 20_000, 8, 5)).unwrap();
        assert!(est.is_positive(3.0), "{est:?}");
    }
}
