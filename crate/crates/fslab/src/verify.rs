//! The invariant suite behind `fslab verify`.

use std::time::{Duration, Instant};

use fslab_core::flag::act_on_flag;
use fslab_core::group::{
    cartan_project, cocycle_coordinate, iwasawa_decompose, kappa_norm, radon_nikodym_weight, random_element,
};
use fslab_core::lp::{bernstein_check, LpBlocking};
use fslab_core::matrix_io::{decode, encode};
use fslab_core::measure::{build_measure, MatrixSpec, MeasureFamilySpec};
use fslab_core::transfer::{
    assemble_adjoint, assemble_markov, density_from_adjoint, pi_act, AssemblyOptions, DensityOptions,
};
use fslab_core::walk::{simulate_walk, WalkConfig};
use fslab_core::{Backend, FlagPoint, FunctionCoefficients, HarmonicBasis, QuadratureRule, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BACKENDS: [Backend; 2] = [Backend::Sl2R, Backend::Sl2C];

#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    /// Adds 1e−3 to one entry of `T` before the adjointness comparison.
    pub inject_perturbation: bool,
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl CheckOutcome {
    /// One summary line; independent of timing.
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

type CheckFn = fn(&VerifyOptions) -> Result<String, String>;

const CHECKS: &[(&str, CheckFn)] = &[
    ("cartan-reconstruction", cartan_reconstruction),
    ("iwasawa-reconstruction", iwasawa_reconstruction),
    ("cocycle-identity", cocycle_identity),
    ("radon-nikodym", radon_nikodym),
    ("quadrature-round-trip", quadrature_round_trip),
    ("bernstein", bernstein),
    ("parseval-blocks", parseval_blocks),
    ("measure-epsilon", measure_epsilon),
    ("rotation-oracle", rotation_oracle),
    ("adjointness", adjointness),
    ("markov-constants", markov_constants),
    ("rotation-density", rotation_density),
    ("pi-unitarity", pi_unitarity),
    ("walk-determinism", walk_determinism),
    ("matrix-format", matrix_format),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

pub fn run_checks(options: &VerifyOptions) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|(name, f)| {
            let start = Instant::now();
            let r = f(options);
            let elapsed = start.elapsed();
            let (passed, detail) = match r {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome { name, passed, detail, elapsed }
        })
        .collect()
}

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + tag)
}

fn within(name: &str, value: f64, tol: f64) -> Result<String, String> {
    let text = format!("{name} {value:.3e} (tol {tol:.0e})");
    if value <= tol {
        Ok(text)
    } else {
        Err(text)
    }
}

fn cartan_reconstruction(_: &VerifyOptions) -> Result<String, String> {
    let mut rng = rng(1);
    let mut worst = 0.0f64;
    for backend in BACKENDS {
        for _ in 0..200 {
            let g = random_element(backend, &mut rng, 1.0);
            let c = cartan_project(&g).map_err(|e| e.to_string())?;
            if c.a_coordinate < 0.0 {
                return Err(format!("negative Cartan coordinate {}", c.a_coordinate));
            }
            worst = worst
                .max(c.reconstruct().max_abs_diff(g.matrix()))
                .max(c.k1.matrix().unitarity_defect())
                .max(c.k2.matrix().unitarity_defect());
        }
    }
    within("max error", worst, 1e-10)
}

fn iwasawa_reconstruction(_: &VerifyOptions) -> Result<String, String> {
    let mut rng = rng(2);
    let mut worst = 0.0f64;
    for backend in BACKENDS {
        for _ in 0..200 {
            let g = random_element(backend, &mut rng, 1.0);
            let i = iwasawa_decompose(&g);
            worst = worst.max(i.reconstruct().max_abs_diff(g.matrix())).max(i.k.matrix().unitarity_defect());
        }
    }
    within("max error", worst, 1e-10)
}

fn cocycle_identity(_: &VerifyOptions) -> Result<String, String> {
    let mut rng = rng(3);
    let mut residual = 0.0f64;
    let mut excess = f64::NEG_INFINITY;
    for backend in BACKENDS {
        let h_norm = backend.spec().h_norm();
        for _ in 0..200 {
            let g = random_element(backend, &mut rng, 0.5);
            let h = random_element(backend, &mut rng, 0.5);
            let xi = FlagPoint::random(backend, &mut rng);
            let lhs = cocycle_coordinate(&g.compose(&h), &xi);
            let rhs = cocycle_coordinate(&g, &act_on_flag(&h, &xi)) + cocycle_coordinate(&h, &xi);
            residual = residual.max((lhs - rhs).abs());
            excess = excess.max(h_norm * cocycle_coordinate(&g, &xi).abs() - kappa_norm(&g));
        }
    }
    if excess > 1e-9 {
        return Err(format!("‖σ‖ exceeds ‖κ‖ by {excess:.3e}"));
    }
    within("residual", residual, 1e-9)
}

fn radon_nikodym(_: &VerifyOptions) -> Result<String, String> {
    let mut rng = rng(4);
    let mut worst = 0.0f64;
    for (backend, band) in [(Backend::Sl2R, 256), (Backend::Sl2C, 96)] {
        let rule = QuadratureRule::new(backend, band).map_err(|e| e.to_string())?;
        let basis = HarmonicBasis::new(backend, 4);
        for _ in 0..4 {
            let f = FunctionCoefficients::random(backend, 4, 0..=4, &mut rng);
            let g = random_element(backend, &mut rng, 0.4);
            let plain = rule.integrate(&rule.sample(&basis, &f));
            let moved: Vec<C64> = rule
                .nodes()
                .iter()
                .map(|xi| f.synthesize_with(&basis, &act_on_flag(&g, xi)) * radon_nikodym_weight(&g, xi))
                .collect();
            let moved = rule.integrate(&moved);
            worst = worst.max((plain - moved).norm() / plain.norm().max(f.norm()));
        }
    }
    within("relative error", worst, 1e-6)
}

fn quadrature_round_trip(_: &VerifyOptions) -> Result<String, String> {
    let mut rng = rng(5);
    let mut worst = 0.0f64;
    for (backend, cutoff) in [(Backend::Sl2R, 32), (Backend::Sl2C, 12)] {
        let rule = QuadratureRule::for_cutoff(backend, cutoff, 2).map_err(|e| e.to_string())?;
        let basis = HarmonicBasis::new(backend, cutoff);
        let u = FunctionCoefficients::random(backend, cutoff, 0..=cutoff, &mut rng);
        let back = rule.analyze(&basis, &rule.sample(&basis, &u)).map_err(|e| e.to_string())?;
        worst = worst.max(back.sub(&u).norm() / u.norm());
    }
    within("relative error", worst, 1e-12)
}

fn bernstein(_: &VerifyOptions) -> Result<String, String> {
    let mut rng = rng(6);
    let mut ratio = 0.0f64;
    for (backend, max_tau) in [(Backend::Sl2R, 40), (Backend::Sl2C, 12)] {
        for _ in 0..20 {
            let tau = rng.random_range(0..=max_tau);
            let u = FunctionCoefficients::random(backend, max_tau, tau..=tau, &mut rng);
            let c = bernstein_check(tau, &u);
            if !c.holds() {
                return Err(format!("violated at τ = {tau}: sup {} > bound {}", c.sup_estimate, c.bound));
            }
            ratio = ratio.max(c.sup_estimate / c.bound);
        }
    }
    Ok(format!("largest sup/bound {ratio:.3}"))
}

fn parseval_blocks(_: &VerifyOptions) -> Result<String, String> {
    let mut rng = rng(7);
    let mut worst = 0.0f64;
    for (backend, cutoff) in [(Backend::Sl2R, 64), (Backend::Sl2C, 16)] {
        let blocking = LpBlocking::new(backend, cutoff);
        let u = FunctionCoefficients::random(backend, cutoff, 0..=cutoff, &mut rng);
        let total: f64 = blocking.block_norms(&u).iter().map(|b| b * b).sum();
        worst = worst.max((total - u.norm().powi(2)).abs() / u.norm().powi(2));
    }
    within("relative defect", worst, 1e-12)
}

fn measure_epsilon(_: &VerifyOptions) -> Result<String, String> {
    for backend in BACKENDS {
        let mut last = 0.0;
        for i in 1..=8 {
            let eps = 0.1 * i as f64;
            let mu = build_measure(backend, &MeasureFamilySpec::ExpBasisFamily { eps }).map_err(|e| e.to_string())?;
            let bound = backend.spec().h_norm() * eps;
            if mu.epsilon() <= last || mu.epsilon() > bound + 1e-12 {
                return Err(format!("{backend}: ε(μ) = {} at ε = {eps}", mu.epsilon()));
            }
            last = mu.epsilon();
        }
    }
    Ok("strictly increasing and within the norm bound".into())
}

fn rotation_oracle(_: &VerifyOptions) -> Result<String, String> {
    let phi = 1.0;
    let cutoff = 32;
    let mu = build_measure(Backend::Sl2R, &MeasureFamilySpec::RotationPair { phi }).map_err(|e| e.to_string())?;
    let t = assemble_markov(&mu, cutoff, AssemblyOptions::default()).map_err(|e| e.to_string())?;
    let basis = HarmonicBasis::new(Backend::Sl2R, cutoff);
    let mut worst = 0.0f64;
    for i in 0..t.dim() {
        for j in 0..t.dim() {
            let expect = if i == j { (2.0 * f64::from(basis.labels()[i].tau) * phi).cos() } else { 0.0 };
            worst = worst.max((t.matrix[(i, j)] - C64::new(expect, 0.0)).norm());
        }
    }
    within("max entry error", worst, 1e-10)
}

fn conjugated(backend: Backend, eps: f64) -> Result<fslab_core::SupportMeasure, String> {
    let spec = MeasureFamilySpec::ConjugatedPair { eps, conjugator: MatrixSpec::real([[1.5, 0.5], [0.0, 1.0 / 1.5]]) };
    build_measure(backend, &spec).map_err(|e| e.to_string())
}

fn adjointness(options: &VerifyOptions) -> Result<String, String> {
    let mut worst = 0.0f64;
    for (backend, cutoff) in [(Backend::Sl2R, 32), (Backend::Sl2C, 8)] {
        let mu = conjugated(backend, 0.25)?;
        let mut t = assemble_markov(&mu, cutoff, AssemblyOptions::default()).map_err(|e| e.to_string())?;
        let tstar = assemble_adjoint(&mu, cutoff, AssemblyOptions::default()).map_err(|e| e.to_string())?;
        if options.inject_perturbation {
            t.matrix[(1, 2)] += C64::new(1e-3, 0.0);
        }
        worst = worst.max(t.adjoint_defect(&tstar));
    }
    within("max |T − (T*)*|", worst, 1e-9)
}

fn markov_constants(_: &VerifyOptions) -> Result<String, String> {
    let mut worst = 0.0f64;
    for (backend, cutoff) in [(Backend::Sl2R, 32), (Backend::Sl2C, 8)] {
        let mu = conjugated(backend, 0.25)?;
        let t = assemble_markov(&mu, cutoff, AssemblyOptions::default()).map_err(|e| e.to_string())?;
        worst = worst.max(t.constant_column_defect());
    }
    within("max |T1 − 1|", worst, 1e-10)
}

fn rotation_density(_: &VerifyOptions) -> Result<String, String> {
    let mu = build_measure(Backend::Sl2R, &MeasureFamilySpec::RotationPair { phi: 1.0 }).map_err(|e| e.to_string())?;
    let tstar = assemble_adjoint(&mu, 32, AssemblyOptions::default()).map_err(|e| e.to_string())?;
    let d = density_from_adjoint(&tstar, DensityOptions::default()).map_err(|e| e.to_string())?;
    let off: f64 = d.coefficients.values[1..].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    within("non-constant part", off + (d.mass() - C64::new(1.0, 0.0)).norm(), 1e-10)
}

fn pi_unitarity(_: &VerifyOptions) -> Result<String, String> {
    let mut rng = rng(8);
    let mut worst = 0.0f64;
    for (backend, cutoff) in [(Backend::Sl2R, 16), (Backend::Sl2C, 8)] {
        for _ in 0..5 {
            let g = random_element(backend, &mut rng, 0.15);
            let u = FunctionCoefficients::random(backend, 2, 0..=2, &mut rng);
            let r = pi_act(&g, &u, cutoff).map_err(|e| e.to_string())?;
            let kept = r.coefficients.norm();
            let total = (kept * kept + r.leak * r.leak).sqrt();
            worst = worst.max((total - u.norm()).abs() / u.norm());
        }
    }
    within("relative norm error", worst, 1e-6)
}

fn walk_determinism(_: &VerifyOptions) -> Result<String, String> {
    let mu = conjugated(Backend::Sl2R, 0.25)?;
    let mut cfg = WalkConfig::new(mu, 3000, 4, 11);
    cfg.moment_cutoff = 4;
    let a = simulate_walk(&cfg).map_err(|e| e.to_string())?;
    let b = simulate_walk(&cfg).map_err(|e| e.to_string())?;
    if a != b {
        return Err("two runs with one seed differ".into());
    }
    Ok(format!("{} samples reproduced", a.count))
}

fn matrix_format(_: &VerifyOptions) -> Result<String, String> {
    let mu = conjugated(Backend::Sl2C, 0.25)?;
    let t = assemble_markov(&mu, 4, AssemblyOptions::default()).map_err(|e| e.to_string())?;
    let raw = decode(&encode(&t.matrix, true, false).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    if raw.matrix != t.matrix {
        return Err("round trip changed the matrix".into());
    }
    Ok("bit-exact round trip".into())
}
