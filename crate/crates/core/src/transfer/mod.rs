//! The Markov operator `(Tu)(ξ) = Σ μ(g) u(g⁻¹ξ)`, its adjoint, the unitary
//! representation π, and the experiments built on them.

mod decay;
mod density;
mod gap;
mod growth;
mod operator;
mod pi;

pub use decay::{lp_spectrum, DecayReport, DecayWindow};
pub use density::{density_from_adjoint, power_iteration_density, stationary_density, DensityEstimate, DensityOptions};
pub use gap::{
    highfreq_iteration_experiment, low_frequency_leak, random_block_function, restricted_gap_estimate, restricted_norm,
    GapReport, IterationTrace, LowLeakReport,
};
pub use growth::{fait_growth_probe, sobolev_growth_probe, GrowthFit};
pub use operator::{assemble_adjoint, assemble_markov, AssemblyOptions, OperatorMatrix};
pub use pi::{pi_act, pi_act_with, PiResult};

use nalgebra::DMatrix;

use crate::C64;

/// Largest singular value of a dense complex matrix.
pub fn top_singular_value(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Ordinary least-squares line `y = a + b x`; returns `(b, a, r²)`.
pub(crate) fn fit_line(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}
