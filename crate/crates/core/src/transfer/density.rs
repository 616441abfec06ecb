use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operator::{assemble_adjoint, AssemblyOptions, OperatorMatrix};
use crate::error::{Error, Result};
use crate::flag::FlagPoint;
use crate::group::Backend;
use crate::harmonics::{FunctionCoefficients, HarmonicBasis};
use crate::measure::SupportMeasure;
use crate::quadrature::QuadratureRule;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityOptions {
    pub assembly_oversampling: u32,
    pub self_check_tol: Option<f64>,
    /// Accept only solutions with `‖T*g − g‖₂` at most this.
    pub residual_tol: f64,
    /// Second-smallest singular value of `T* − I` below this is treated as
    /// a degenerate eigenvalue 1.
    pub degeneracy_tol: f64,
    /// Grid refinement over the quadrature band for the min/max scan.
    pub grid_factor: u32,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions {
            assembly_oversampling: 4,
            self_check_tol: Some(1e-9),
            residual_tol: 1e-8,
            degeneracy_tol: 1e-7,
            grid_factor: 2,
        }
    }
}

/// The stationary density `g` with `T*g = g`, `∫ g dm = 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub backend: Backend,
    pub cutoff: u32,
    pub coefficients: FunctionCoefficients,
    pub residual: f64,
    /// Second-smallest singular value of `T* − I`.
    pub second_singular_value: f64,
    pub grid_min: f64,
    pub grid_max: f64,
}

impl DensityEstimate {
    pub fn mass(&self) -> C64 {
        self.coefficients.values[0]
    }

    /// `grid_min ≥ −tol · grid_max`.
    pub fn is_positive_up_to(&self, tol: f64) -> bool {
        self.grid_min >= -tol * self.grid_max
    }
}

pub fn stationary_density(mu: &SupportMeasure, cutoff: u32, options: DensityOptions) -> Result<DensityEstimate> {
    let tstar = assemble_adjoint(
        mu,
        cutoff,
        AssemblyOptions { oversampling: options.assembly_oversampling, self_check_tol: options.self_check_tol },
    )?;
    density_from_adjoint(&tstar, options)
}

/// Solves `min ‖(T* − I)x‖` over unit `x` by SVD, then rescales to unit mass.
pub fn density_from_adjoint(tstar: &OperatorMatrix, options: DensityOptions) -> Result<DensityEstimate> {
    let n = tstar.dim();
    let m = &tstar.matrix - DMatrix::<C64>::identity(n, n);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V*");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let smallest = order[0];
    let second = order.get(1).map(|&i| svd.singular_values[i]).unwrap_or(f64::INFINITY);
    let x: Vec<C64> = v_t.row(smallest).iter().map(|z| z.conj()).collect();
    if x[0].norm() < 1e-12 {
        return Err(Error::NotConverged { residual: f64::INFINITY, tolerance: options.residual_tol });
    }
    let scale = x[0].inv();
    let values: Vec<C64> = x.iter().map(|z| z * scale).collect();
    finish(tstar, values, second, options)
}

/// Power iteration `x ← T*x` from the constant function; an independent
/// cross-check of the SVD solve.
pub fn power_iteration_density(tstar: &OperatorMatrix, max_iter: usize, tol: f64) -> (FunctionCoefficients, usize) {
    let n = tstar.dim();
    let mut x = DVector::<C64>::zeros(n);
    x[0] = C64::new(1.0, 0.0);
    let mut iters = 0;
    while iters < max_iter {
        let mut y = &tstar.matrix * &x;
        let mass = y[0];
        y /= mass;
        let change = (&y - &x).norm();
        x = y;
        iters += 1;
        if change < tol {
            break;
        }
    }
    let coeffs =
        FunctionCoefficients { backend: tstar.backend, cutoff: tstar.cutoff, values: x.iter().copied().collect() };
    (coeffs, iters)
}

fn finish(tstar: &OperatorMatrix, values: Vec<C64>, second: f64, options: DensityOptions) -> Result<DensityEstimate> {
    let coefficients = FunctionCoefficients::from_values(tstar.backend, tstar.cutoff, values)?;
    let residual = tstar.apply(&coefficients).sub(&coefficients).norm();
    if second < options.degeneracy_tol {
        return Err(Error::NearDegenerate { second });
    }
    if !(residual <= options.residual_tol) {
        return Err(Error::NotConverged { residual, tolerance: options.residual_tol });
    }
    let (grid_min, grid_max) = grid_extrema(&coefficients, options.grid_factor.max(1));
    Ok(DensityEstimate {
        backend: tstar.backend,
        cutoff: tstar.cutoff,
        coefficients,
        residual,
        second_singular_value: second,
        grid_min,
        grid_max,
    })
}

/// Min and max of the real part on the nodes of a rule `factor` times finer
/// than the one needed for the cutoff.
pub(crate) fn grid_extrema(u: &FunctionCoefficients, factor: u32) -> (f64, f64) {
    let basis = HarmonicBasis::new(u.backend, u.cutoff);
    let nodes: Vec<FlagPoint> = match QuadratureRule::for_cutoff(u.backend, u.cutoff.max(1), 2 * factor) {
        Ok(rule) => rule.nodes().to_vec(),
        Err(_) => vec![FlagPoint::base(u.backend)],
    };
    let vals: Vec<f64> = nodes.par_iter().map(|xi| u.synthesize_with(&basis, xi).re).collect();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}
