use serde::{Deserialize, Serialize};

use super::operator::OperatorMatrix;
use super::pi::pi_act;
use crate::error::Result;
use crate::group::{kappa_norm, GroupElement};
use crate::harmonics::FunctionCoefficients;
use crate::lp::sobolev_norm;

/// Fit of `y = log(‖Au‖_{H^s}/‖u‖_{H^s})` against an abscissa `x`
/// through the origin.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthFit {
    /// `(x, y)` for every sample with `s > 0`.
    pub points: Vec<(f64, f64)>,
    /// Least-squares slope through the origin.
    pub c_hat: f64,
    /// `max y/x`, the smallest constant consistent with every sample.
    pub c_max: f64,
    pub r_squared: f64,
    /// Largest `log(‖Au‖₂/‖u‖₂) − log bound` at `s = 0`; nonpositive when
    /// the L² bound holds.
    pub l2_excess: f64,
    /// Set when `r_squared < 0.9`.
    pub poor_fit: bool,
}

fn fit_through_origin(points: Vec<(f64, f64)>, l2_excess: f64) -> GrowthFit {
    let useful: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0 > 1e-12).collect();
    let sxx: f64 = useful.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = useful.iter().map(|p| p.0 * p.1).sum();
    let c_hat = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let c_max = useful.iter().map(|p| p.1 / p.0).fold(f64::NEG_INFINITY, f64::max);
    let n = useful.len().max(1) as f64;
    let my = useful.iter().map(|p| p.1).sum::<f64>() / n;
    let ss_res: f64 = useful.iter().map(|p| (p.1 - c_hat * p.0).powi(2)).sum();
    let ss_tot: f64 = useful.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    GrowthFit { points, c_hat, c_max, r_squared, l2_excess, poor_fit: r_squared < 0.9 }
}

/// Probes `‖π(g)u‖_{H^s} ≤ e^{cs‖κ(g)‖}‖u‖_{H^s}` with `x = s‖κ(g)‖`.
pub fn sobolev_growth_probe(
    g_samples: &[GroupElement],
    s_values: &[f64],
    u_samples: &[FunctionCoefficients],
    output_cutoff: u32,
) -> Result<GrowthFit> {
    let mut points = Vec::new();
    let mut l2_excess = f64::NEG_INFINITY;
    for g in g_samples {
        let kappa = kappa_norm(g);
        let rho = g.backend().spec().rho_norm();
        for u in u_samples {
            let gu = pi_act(g, u, output_cutoff)?.coefficients;
            l2_excess = l2_excess.max((gu.norm() / u.norm()).ln() - rho * kappa);
            for &s in s_values.iter().filter(|&&s| s > 0.0) {
                points.push((s * kappa, (sobolev_norm(&gu, s) / sobolev_norm(u, s)).ln()));
            }
        }
    }
    Ok(fit_through_origin(points, l2_excess))
}

/// The same fit for `(T*)^m` with `x = s·m·ε`.
pub fn fait_growth_probe(
    tstar: &OperatorMatrix,
    epsilon: f64,
    s_values: &[f64],
    m_max: usize,
    u_samples: &[FunctionCoefficients],
) -> GrowthFit {
    let rho = tstar.backend.spec().rho_norm();
    let mut points = Vec::new();
    let mut l2_excess = f64::NEG_INFINITY;
    for u in u_samples {
        let u = u.with_cutoff(tstar.cutoff);
        let mut v = u.clone();
        for m in 1..=m_max {
            v = tstar.apply(&v);
            l2_excess = l2_excess.max((v.norm() / u.norm()).ln() - rho * m as f64 * epsilon);
            for &s in s_values.iter().filter(|&&s| s > 0.0) {
                points.push((s * m as f64 * epsilon, (sobolev_norm(&v, s) / sobolev_norm(&u, s)).ln()));
            }
        }
    }
    fit_through_origin(points, l2_excess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Backend;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn compact_elements_preserve_sobolev_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for backend in [Backend::Sl2R, Backend::Sl2C] {
            let u = FunctionCoefficients::random(backend, 6, 0..=6, &mut rng);
            let g = GroupElement::rotation(backend, 0.7);
            let gu = pi_act(&g, &u, 6).unwrap().coefficients;
            for s in [0.5, 1.0, 2.0] {
                assert!((sobolev_norm(&gu, s) / sobolev_norm(&u, s) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn growth_is_positive_and_l2_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let backend = Backend::Sl2R;
        let gs: Vec<GroupElement> = [0.1, 0.2, 0.3].iter().map(|&t| GroupElement::exp_a(backend, t)).collect();
        let us: Vec<FunctionCoefficients> =
            (0..3).map(|_| FunctionCoefficients::random(backend, 8, 1..=8, &mut rng)).collect();
        let fit = sobolev_growth_probe(&gs, &[0.5, 1.0, 2.0], &us, 64).unwrap();
        assert!(fit.c_hat > 0.0);
        assert!(fit.l2_excess <= 1e-9);
    }
}
