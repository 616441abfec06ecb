use serde::{Deserialize, Serialize};

use super::density::DensityEstimate;
use super::fit_line;
use crate::error::{Error, Result};
use crate::lp::LpBlocking;

/// Which blocks enter the slope fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayWindow {
    pub k_min: u32,
    /// Highest block used; always capped at `top − 2`.
    pub k_max: Option<u32>,
    /// Blocks with `‖P_k g‖₂` below this are treated as empty.
    pub noise_floor: f64,
    pub min_points: usize,
}

impl Default for DecayWindow {
    fn default() -> Self {
        DecayWindow { k_min: 1, k_max: None, noise_floor: 1e-13, min_points: 3 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    /// `‖P_k g‖₂` for `k = 0..=top`.
    pub block_norms: Vec<f64>,
    pub fitted_blocks: Vec<u32>,
    /// Slope of `log₂‖P_k g‖₂` against `k`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `t̂ = −2·slope`: `Σ 2^{tk}‖P_k g‖²` converges for `t < t̂`.
    pub sobolev_exponent: f64,
    /// `|Σ‖P_k g‖² − ‖g‖²|`.
    pub parseval_defect: f64,
}

pub fn lp_spectrum(density: &DensityEstimate, window: DecayWindow) -> Result<DecayReport> {
    let g = &density.coefficients;
    let blocking = LpBlocking::new(g.backend, g.cutoff);
    let block_norms = blocking.block_norms(g);
    let total: f64 = block_norms.iter().map(|b| b * b).sum();
    let parseval_defect = (total - g.norm().powi(2)).abs();

    let top = blocking.top_block();
    let hi = top.saturating_sub(2).min(window.k_max.unwrap_or(u32::MAX));
    let fitted: Vec<u32> = (window.k_min..=hi)
        .filter(|&k| !blocking.blocks[&k].is_empty() && block_norms[k as usize] > window.noise_floor)
        .collect();
    if fitted.len() < window.min_points.max(2) {
        return Err(Error::TooFewBlocks { found: fitted.len(), needed: window.min_points.max(2) });
    }
    let points: Vec<(f64, f64)> = fitted.iter().map(|&k| (k as f64, block_norms[k as usize].log2())).collect();
    let (slope, intercept, r_squared) = fit_line(&points);
    Ok(DecayReport {
        block_norms,
        fitted_blocks: fitted,
        slope,
        intercept,
        r_squared,
        sobolev_exponent: -2.0 * slope,
        parseval_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Backend;
    use crate::harmonics::FunctionCoefficients;
    use crate::lp::lp_block_of_tau;
    use crate::C64;

    fn fake_density(values: FunctionCoefficients) -> DensityEstimate {
        DensityEstimate {
            backend: values.backend,
            cutoff: values.cutoff,
            coefficients: values,
            residual: 0.0,
            second_singular_value: 1.0,
            grid_min: 1.0,
            grid_max: 1.0,
        }
    }

    #[test]
    fn constant_density_has_only_block_zero() {
        let g = FunctionCoefficients::unit(Backend::Sl2R, 64, 0);
        let r = lp_spectrum(&fake_density(g), DecayWindow { noise_floor: 0.0, ..Default::default() });
        assert!(matches!(r, Err(Error::TooFewBlocks { .. })));
        let blocking = LpBlocking::new(Backend::Sl2R, 64);
        let norms = blocking.block_norms(&FunctionCoefficients::unit(Backend::Sl2R, 64, 0));
        assert_eq!(norms[0], 1.0);
        assert!(norms[1..].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn recovers_a_planted_slope() {
        // |P_k g| = 2^{-0.75 k} exactly, spread over the block.
        let backend = Backend::Sl2C;
        let cutoff = 64;
        let blocking = LpBlocking::new(backend, cutoff);
        let mut g = FunctionCoefficients::zeros(backend, cutoff);
        g.values[0] = C64::new(1.0, 0.0);
        for (k, idx) in &blocking.blocks {
            if *k == 0 || idx.is_empty() {
                continue;
            }
            let each = 2f64.powf(-0.75 * *k as f64) / (idx.len() as f64).sqrt();
            for &i in idx {
                g.values[i] = C64::new(each, 0.0);
            }
        }
        let r = lp_spectrum(&fake_density(g), DecayWindow::default()).unwrap();
        assert!((r.slope + 0.75).abs() < 1e-12);
        assert!((r.sobolev_exponent - 1.5).abs() < 1e-12);
        assert!(r.parseval_defect < 1e-12);
        assert_eq!(*r.fitted_blocks.last().unwrap(), lp_block_of_tau(backend, cutoff) - 2);
    }
}
