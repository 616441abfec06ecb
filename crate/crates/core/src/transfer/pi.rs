use crate::error::{Error, Result};
use crate::flag::act_on_flag;
use crate::group::{cartan_coordinate, log_radon_nikodym_weight, GroupElement};
use crate::harmonics::{FunctionCoefficients, HarmonicBasis};
use crate::quadrature::QuadratureRule;
use crate::C64;

/// `π(g)u` truncated to the output cutoff, with the norm of the part that
/// lands between the output cutoff and twice it.
#[derive(Clone, Debug)]
pub struct PiResult {
    pub coefficients: FunctionCoefficients,
    pub leak: f64,
}

/// `(π(g)u)(ξ) = u(g⁻¹ξ) e^{−ρ(σ(g⁻¹, ξ))}`, the unitary form of the
/// quasi-regular representation.
pub fn pi_act(g: &GroupElement, u: &FunctionCoefficients, output_cutoff: u32) -> Result<PiResult> {
    pi_act_with(g, u, output_cutoff, 4, None)
}

/// As [`pi_act`] with an explicit oversampling and an optional leak bound.
pub fn pi_act_with(
    g: &GroupElement,
    u: &FunctionCoefficients,
    output_cutoff: u32,
    oversampling: u32,
    leak_bound: Option<f64>,
) -> Result<PiResult> {
    if g.backend() != u.backend {
        return Err(Error::BackendMismatch { expected: u.backend, found: g.backend() });
    }
    if output_cutoff < u.cutoff {
        return Err(Error::Config(format!("output cutoff {output_cutoff} is below the input cutoff {}", u.cutoff)));
    }
    let wide = 2 * output_cutoff;
    let coeffs = apply_pointwise(g, u, wide, oversampling)?;
    let kept = coeffs.with_cutoff(output_cutoff);
    let leak = coeffs.values[kept.dim()..].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if let Some(bound) = leak_bound {
        if leak > bound {
            return Err(Error::TruncationLeak { leak, bound });
        }
    }
    Ok(PiResult { coefficients: kept, leak })
}

fn apply_pointwise(
    g: &GroupElement,
    u: &FunctionCoefficients,
    cutoff: u32,
    oversampling: u32,
) -> Result<FunctionCoefficients> {
    let backend = u.backend;
    let in_basis = HarmonicBasis::new(backend, u.cutoff);
    let out_basis = HarmonicBasis::new(backend, cutoff);
    let distortion = (2.0 * cartan_coordinate(g)).exp();
    let quad = QuadratureRule::for_pullback(backend, cutoff, oversampling, distortion)?;
    let ginv = g.inverse();
    let m = quad.project(&out_basis, 1, |_, xi, out| {
        let half_weight = (0.5 * log_radon_nikodym_weight(&ginv, xi)).exp();
        out[0] = u.synthesize_with(&in_basis, &act_on_flag(&ginv, xi)) * C64::from(half_weight);
    })?;
    FunctionCoefficients::from_values(backend, cutoff, m.column(0).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{AlgebraVector, Backend};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_element(backend: Backend, rng: &mut ChaCha8Rng, scale: f64) -> GroupElement {
        let dim = backend.spec().algebra_dim();
        let mut x = AlgebraVector::zero(backend);
        for c in x.coordinates.iter_mut().take(dim) {
            *c = scale * (2.0 * rng.random::<f64>() - 1.0);
        }
        GroupElement::exp(&x).unwrap()
    }

    #[test]
    fn identity_acts_trivially() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for backend in [Backend::Sl2R, Backend::Sl2C] {
            let u = FunctionCoefficients::random(backend, 4, 0..=4, &mut rng);
            let r = pi_act(&GroupElement::identity(backend), &u, 4).unwrap();
            assert!(r.coefficients.sub(&u).norm() < 1e-12);
            assert!(r.leak < 1e-12);
        }
    }

    #[test]
    fn nearly_unitary_and_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (backend, cutoff) in [(Backend::Sl2R, 48), (Backend::Sl2C, 16)] {
            for _ in 0..3 {
                let g = small_element(backend, &mut rng, 0.08);
                let h = small_element(backend, &mut rng, 0.08);
                let u = FunctionCoefficients::random(backend, cutoff / 4, 0..=cutoff / 4, &mut rng);
                let gu = pi_act(&g, &u, cutoff).unwrap();
                let rel = (gu.coefficients.norm() / u.norm() - 1.0).abs();
                assert!(rel < 1e-6, "{backend}: {rel:e}");
                let hu = pi_act(&h, &u, cutoff).unwrap().coefficients;
                let ghu = pi_act(&g, &hu, cutoff).unwrap().coefficients;
                let direct = pi_act(&g.compose(&h), &u, cutoff).unwrap().coefficients;
                assert!(ghu.sub(&direct).norm() < 1e-6 * u.norm());
            }
        }
    }

    #[test]
    fn leak_bound_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = FunctionCoefficients::random(Backend::Sl2R, 4, 0..=4, &mut rng);
        let g = GroupElement::exp_a(Backend::Sl2R, 1.5);
        let r = pi_act_with(&g, &u, 4, 4, Some(1e-12));
        assert!(matches!(r, Err(Error::TruncationLeak { .. })));
    }
}
