use fslab_core::matrix_io::{read_operator, write_operator};
use fslab_core::measure::{build_measure, MatrixSpec, MeasureFamilySpec};
use fslab_core::transfer::{
    assemble_adjoint, assemble_markov, density_from_adjoint, power_iteration_density, AssemblyOptions, DensityOptions,
};
use fslab_core::walk::{compare_empirical_spectral, simulate_walk, WalkConfig};
use fslab_core::Backend;

fn sphere_measure() -> fslab_core::SupportMeasure {
    let spec =
        MeasureFamilySpec::ConjugatedPair { eps: 0.3, conjugator: MatrixSpec::real([[1.5, 0.5], [0.0, 1.0 / 1.5]]) };
    build_measure(Backend::Sl2C, &spec).unwrap()
}

#[test]
fn sphere_density_agrees_with_power_iteration_and_the_walk() {
    let mu = sphere_measure();
    let tstar = assemble_adjoint(&mu, 8, AssemblyOptions::default()).unwrap();
    let d = density_from_adjoint(&tstar, DensityOptions::default()).unwrap();
    assert!(d.residual < 1e-8);
    let (p, _) = power_iteration_density(&tstar, 20_000, 1e-13);
    assert!(p.sub(&d.coefficients).norm() < 1e-8);

    let mut cfg = WalkConfig::new(mu, 30_000, 8, 5);
    cfg.moment_cutoff = 3;
    let m = simulate_walk(&cfg).unwrap();
    let cmp = compare_empirical_spectral(&m, &d).unwrap();
    assert!(cmp.max_abs_z_first10 < 5.0, "{}", cmp.max_abs_z_first10);
}

#[test]
fn operator_files_round_trip() {
    let mu = sphere_measure();
    let t = assemble_markov(&mu, 4, AssemblyOptions::default()).unwrap();
    let dir = std::env::temp_dir().join(format!("fslab-core-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("t.fslmat");
    write_operator(&path, &t).unwrap();
    let back = read_operator(&path).unwrap();
    assert_eq!(back.matrix, t.matrix);
    assert_eq!(back.measure_hash, t.measure_hash);
    assert_eq!(back.quadrature_band, t.quadrature_band);
    std::fs::remove_dir_all(&dir).unwrap();
}
