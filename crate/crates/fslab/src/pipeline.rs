//! The staged pipeline. Stages run in order; a failed stage is recorded in
//! the manifest and its dependents are skipped.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fslab_core::harmonics::basis_dim;
use fslab_core::matrix_io::write_operator;
use fslab_core::transfer::{
    assemble_adjoint, assemble_markov, density_from_adjoint, lp_spectrum, restricted_norm, stationary_density,
    AssemblyOptions, DensityEstimate, DensityOptions, OperatorMatrix,
};
use fslab_core::walk::{
    compare_empirical_spectral, lyapunov_estimate, simulate_walk, ComparisonReport, EmpiricalMoments, LyapunovEstimate,
};
use fslab_core::{Backend, Error, HarmonicBasis, SupportMeasure, BASIS_ORDER_VERSION};
use serde::Serialize;

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::manifest::{sha256_hex, FileEntry, RunManifest, StageRecord, StageStatus, Versions, MANIFEST_NAME};
use crate::CliError;

/// The doubled-cutoff gap estimate is skipped above this basis dimension.
pub const MAX_DOUBLED_GAP_DIM: usize = 4096;

/// Wraps a payload with the run seed and basis-order version.
#[derive(Serialize)]
pub struct Stamped<'a, T: Serialize> {
    pub seed: u64,
    pub basis_order_version: u32,
    #[serde(flatten)]
    pub body: &'a T,
}

pub fn stamped_json<T: Serialize>(seed: u64, body: &T) -> String {
    let s = Stamped { seed, basis_order_version: BASIS_ORDER_VERSION, body };
    serde_json::to_string_pretty(&s).expect("payload serializes") + "\n"
}

fn csv_preamble(seed: u64) -> String {
    format!("# seed={seed} basis_order_version={BASIS_ORDER_VERSION}\n")
}

#[derive(Clone, Debug, Serialize)]
pub struct AtomRecord {
    /// Rows of `[re, im]` pairs.
    pub matrix: [[[f64; 2]; 2]; 2],
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureSummary {
    pub backend: Backend,
    pub epsilon: f64,
    pub symmetric: bool,
    pub compact: bool,
    pub hash: String,
    pub atoms: Vec<AtomRecord>,
}

impl MeasureSummary {
    pub fn of(mu: &SupportMeasure) -> Self {
        let atoms = mu
            .atoms()
            .iter()
            .map(|a| {
                let m = a.element.matrix().0;
                AtomRecord { matrix: m.map(|row| row.map(|z| [z.re, z.im])), weight: a.weight }
            })
            .collect();
        MeasureSummary {
            backend: mu.backend(),
            epsilon: mu.epsilon(),
            symmetric: mu.is_symmetric(),
            compact: mu.is_compact(),
            hash: mu.hash(),
            atoms,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OperatorSummary {
    pub backend: Backend,
    pub cutoff: u32,
    pub dim: usize,
    pub quadrature_band: u32,
    pub markov_self_check_delta: Option<f64>,
    pub adjoint_self_check_delta: Option<f64>,
    /// `max |T − (T*)^*|` between the two independent assemblies.
    pub adjoint_defect: f64,
    /// `max |T·1 − 1|`.
    pub constant_column_defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapOutput {
    pub n_block: u32,
    pub cutoff: u32,
    /// `‖T P_{≥N}‖` over the columns in blocks `N..=top−2`.
    pub estimate: f64,
    pub estimate_doubled: Option<f64>,
    pub full_norm: f64,
    pub converged: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    pub fitted_blocks: Vec<u32>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub sobolev_exponent: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayOutput {
    pub block_norms: Vec<f64>,
    pub parseval_defect: f64,
    /// `None` when too few blocks rise above the noise floor.
    pub fit: Option<DecayFit>,
    pub fit_note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WalkOutput {
    pub sample_count: usize,
    pub max_manifold_defect: f64,
    pub lyapunov: LyapunovEstimate,
    pub comparison: Option<ComparisonReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub eps: f64,
    pub measure_epsilon: f64,
    pub residual: f64,
    pub decay: DecayOutput,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOutput {
    /// Entries ordered by decreasing ε.
    pub entries: Vec<SweepEntry>,
    pub abs_slope_increases_as_eps_decreases: bool,
}

pub fn assembly_options(cfg: &RunConfig) -> AssemblyOptions {
    AssemblyOptions { oversampling: cfg.oversampling, self_check_tol: cfg.self_check_tol }
}

pub fn density_options(cfg: &RunConfig) -> DensityOptions {
    DensityOptions {
        assembly_oversampling: cfg.oversampling,
        self_check_tol: cfg.self_check_tol,
        residual_tol: cfg.solve_tol,
        degeneracy_tol: cfg.degeneracy_tol,
        grid_factor: 2,
    }
}

pub fn operator_summary(t: &OperatorMatrix, tstar: &OperatorMatrix) -> OperatorSummary {
    OperatorSummary {
        backend: t.backend,
        cutoff: t.cutoff,
        dim: t.dim(),
        quadrature_band: t.quadrature_band,
        markov_self_check_delta: t.self_check_delta,
        adjoint_self_check_delta: tstar.self_check_delta,
        adjoint_defect: t.adjoint_defect(tstar),
        constant_column_defect: t.constant_column_defect(),
    }
}

pub fn gap_output(cfg: &RunConfig, mu: &SupportMeasure, t: &OperatorMatrix) -> Result<GapOutput, CliError> {
    let estimate = restricted_norm(t, cfg.gap_block)?;
    let full_norm = t.top_singular_value();
    let estimate_doubled = if basis_dim(cfg.backend, 2 * cfg.cutoff) <= MAX_DOUBLED_GAP_DIM {
        let t2 = assemble_markov(mu, 2 * cfg.cutoff, assembly_options(cfg))?;
        Some(restricted_norm(&t2, cfg.gap_block)?)
    } else {
        None
    };
    Ok(GapOutput {
        n_block: cfg.gap_block,
        cutoff: cfg.cutoff,
        estimate,
        estimate_doubled,
        full_norm,
        converged: estimate_doubled.map(|d| (d - estimate).abs() <= cfg.gap_convergence_tol),
    })
}

pub fn decay_output(cfg: &RunConfig, density: &DensityEstimate) -> Result<DecayOutput, CliError> {
    match lp_spectrum(density, cfg.lp_window) {
        Ok(r) => Ok(DecayOutput {
            block_norms: r.block_norms,
            parseval_defect: r.parseval_defect,
            fit: Some(DecayFit {
                fitted_blocks: r.fitted_blocks,
                slope: r.slope,
                intercept: r.intercept,
                r_squared: r.r_squared,
                sobolev_exponent: r.sobolev_exponent,
            }),
            fit_note: None,
        }),
        Err(e @ Error::TooFewBlocks { .. }) => {
            let g = &density.coefficients;
            let blocking = fslab_core::lp::LpBlocking::new(g.backend, g.cutoff);
            let block_norms = blocking.block_norms(g);
            let total: f64 = block_norms.iter().map(|b| b * b).sum();
            Ok(DecayOutput {
                block_norms,
                parseval_defect: (total - g.norm().powi(2)).abs(),
                fit: None,
                fit_note: Some(e.to_string()),
            })
        }
        Err(e) => Err(e.into()),
    }
}

pub fn density_csv(seed: u64, density: &DensityEstimate) -> String {
    let basis = HarmonicBasis::new(density.backend, density.cutoff);
    let mut out = csv_preamble(seed);
    out.push_str("label,re,im\n");
    for (label, v) in basis.labels().iter().zip(&density.coefficients.values) {
        writeln!(out, "{},{},{}", label.short_name(), v.re, v.im).expect("writing to a String");
    }
    out
}

pub fn walk_csv(seed: u64, moments: &EmpiricalMoments) -> String {
    csv_preamble(seed) + &moments.to_csv()
}

pub fn lyapunov(cfg: &RunConfig, mu: &SupportMeasure) -> Result<LyapunovEstimate, CliError> {
    let mut wc = cfg.walk_config(mu.clone());
    wc.steps = cfg.walk.lyapunov_steps;
    wc.burn_in = 0;
    wc.batches = 1;
    Ok(lyapunov_estimate(&wc)?)
}

pub fn sweep_output(cfg: &RunConfig) -> Result<SweepOutput, CliError> {
    let mut eps = cfg.eps_sweep.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    let mut entries = Vec::new();
    for e in eps {
        let spec = cfg.measure.with_eps(e).ok_or_else(|| CliError::Usage("measure has no ε parameter".into()))?;
        let mu = fslab_core::measure::build_measure(cfg.backend, &spec)?;
        let density = stationary_density(&mu, cfg.cutoff, density_options(cfg))?;
        entries.push(SweepEntry {
            eps: e,
            measure_epsilon: mu.epsilon(),
            residual: density.residual,
            decay: decay_output(cfg, &density)?,
        });
    }
    let slopes: Vec<Option<f64>> = entries.iter().map(|e| e.decay.fit.as_ref().map(|f| f.slope.abs())).collect();
    let increasing =
        slopes.windows(2).all(|w| matches!(w, [Some(a), Some(b)] if b > a)) && slopes.iter().all(Option::is_some);
    Ok(SweepOutput { entries, abs_slope_increases_as_eps_decreases: increasing })
}

struct Run {
    dir: PathBuf,
    seed: u64,
    files: Vec<FileEntry>,
    stages: Vec<StageRecord>,
}

impl Run {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.record(name)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<(), CliError> {
        let text = stamped_json(self.seed, body);
        self.write(name, text.as_bytes())
    }

    fn record(&mut self, name: &str) -> Result<(), CliError> {
        let bytes = std::fs::read(self.dir.join(name))?;
        self.files.push(FileEntry { path: name.to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Run) -> Result<T, CliError>) -> Option<T> {
        let start = Instant::now();
        let result = f(self);
        let seconds = start.elapsed().as_secs_f64();
        let (status, message, value) = match result {
            Ok(v) => (StageStatus::Ok, None, Some(v)),
            Err(e) => (StageStatus::Failed, Some(e.to_string()), None),
        };
        self.stages.push(StageRecord { name: name.to_string(), status, seconds, message });
        value
    }

    fn skip(&mut self, name: &str, because: &str) {
        self.stages.push(StageRecord {
            name: name.to_string(),
            status: StageStatus::Skipped,
            seconds: 0.0,
            message: Some(format!("needs {because}")),
        });
    }
}

/// Runs every stage, writing payloads into `out` and the manifest last.
/// Stage failures are recorded rather than returned; check
/// [`RunManifest::failed`].
pub fn run_pipeline(cfg: &RunConfig, out: &Path) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let start = Instant::now();
    let mut run = Run { dir: out.to_path_buf(), seed: cfg.seed, files: Vec::new(), stages: Vec::new() };
    run.write("config.json", cfg.to_json().as_bytes())?;

    let mu = run.stage("measure", |r| {
        let mu = cfg.build_measure()?;
        r.write_json("measure.json", &MeasureSummary::of(&mu))?;
        Ok(mu)
    });

    let ops = match &mu {
        Some(mu) => run.stage("operators", |r| {
            let t = assemble_markov(mu, cfg.cutoff, assembly_options(cfg))?;
            let tstar = assemble_adjoint(mu, cfg.cutoff, assembly_options(cfg))?;
            write_operator(&r.dir.join("operator.fslmat"), &t)?;
            r.record("operator.fslmat")?;
            r.record("operator.fslmat.json")?;
            write_operator(&r.dir.join("adjoint.fslmat"), &tstar)?;
            r.record("adjoint.fslmat")?;
            r.record("adjoint.fslmat.json")?;
            r.write_json("operators.json", &operator_summary(&t, &tstar))?;
            Ok((t, tstar))
        }),
        None => {
            run.skip("operators", "measure");
            None
        }
    };

    match (&mu, &ops) {
        (Some(mu), Some((t, _))) => {
            run.stage("gap", |r| r.write_json("gap.json", &gap_output(cfg, mu, t)?));
        }
        _ => run.skip("gap", "operators"),
    }

    let density = match &ops {
        Some((_, tstar)) => run.stage("density", |r| {
            let d = density_from_adjoint(tstar, density_options(cfg))?;
            r.write_json("density.json", &d)?;
            r.write("density.csv", density_csv(cfg.seed, &d).as_bytes())?;
            Ok(d)
        }),
        None => {
            run.skip("density", "operators");
            None
        }
    };

    match &density {
        Some(d) => {
            run.stage("decay", |r| r.write_json("decay.json", &decay_output(cfg, d)?));
        }
        None => run.skip("decay", "density"),
    }

    match &mu {
        Some(mu) => {
            run.stage("walk", |r| {
                let moments = simulate_walk(&cfg.walk_config(mu.clone()))?;
                r.write("walk.csv", walk_csv(cfg.seed, &moments).as_bytes())?;
                let comparison = density.as_ref().map(|d| compare_empirical_spectral(&moments, d)).transpose()?;
                let summary = WalkOutput {
                    sample_count: moments.count,
                    max_manifold_defect: moments.max_manifold_defect,
                    lyapunov: lyapunov(cfg, mu)?,
                    comparison,
                };
                r.write_json("walk.json", &summary)
            });
        }
        None => run.skip("walk", "measure"),
    }

    if !cfg.eps_sweep.is_empty() {
        run.stage("sweep", |r| r.write_json("sweep.json", &sweep_output(cfg)?));
    }

    let manifest = RunManifest {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        versions: Versions {
            fslab: env!("CARGO_PKG_VERSION").to_string(),
            basis_order_version: BASIS_ORDER_VERSION,
            config_schema: SCHEMA_VERSION,
        },
        stages: run.stages,
        files: run.files,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(out.join(MANIFEST_NAME), text)?;
    Ok(manifest)
}
