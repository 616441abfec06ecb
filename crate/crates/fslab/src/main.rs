use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fslab::config::RunConfig;
use fslab::decompose::{decompose, parse_matrix};
use fslab::manifest::StageStatus;
use fslab::pipeline::{
    assembly_options, decay_output, density_csv, density_options, gap_output, lyapunov, run_pipeline, stamped_json,
    sweep_output, walk_csv, WalkOutput,
};
use fslab::verify::{run_checks, VerifyOptions};
use fslab::CliError;
use fslab_core::transfer::{assemble_markov, stationary_density};
use fslab_core::walk::simulate_walk;
use fslab_core::Backend;

#[derive(Parser)]
#[command(name = "fslab", version, about = "Transfer operators and random walks on flag manifolds")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured cutoff.
    #[arg(long, global = true)]
    cutoff: Option<u32>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cartan and Iwasawa factors of a 2×2 matrix given as JSON, e.g.
    /// '[[2, 0], [0, 0.5]]' or a path to a file holding it.
    Decompose {
        matrix: String,
        /// Force SL2R or SL2C instead of detecting from the entries.
        #[arg(long)]
        backend: Option<String>,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Runs every stage and writes a manifest.
    Pipeline,
    /// Restricted-gap estimate.
    Gap,
    /// Stationary density.
    Density,
    /// Littlewood–Paley decay of the stationary density.
    Lp,
    /// Monte Carlo walk moments and Lyapunov estimate.
    Walk,
    /// Runs the invariant suite.
    Verify {
        #[arg(long, hide = true)]
        inject_perturbation: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config is required".into()))?;
    RunConfig::load(path)?.with_overrides(cli.seed, cli.cutoff)
}

/// Writes to `out/name` when an output directory is given, else to stdout.
fn emit(out: Option<&Path>, name: &str, text: &str) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Decompose { matrix, backend, json } => {
            let backend = match backend.as_deref() {
                None => None,
                Some("SL2R") => Some(Backend::Sl2R),
                Some("SL2C") => Some(Backend::Sl2C),
                Some(other) => return Err(CliError::Usage(format!("unknown backend {other}"))),
            };
            let text = if Path::new(matrix).is_file() {
                std::fs::read_to_string(matrix).map_err(|e| CliError::Usage(format!("{matrix}: {e}")))?
            } else {
                matrix.clone()
            };
            let (backend, m) = parse_matrix(&text, backend)?;
            let d = decompose(backend, m)?;
            if *json {
                println!("{}", serde_json::to_string_pretty(&d)?);
            } else {
                print!("{}", d.to_text());
            }
        }
        Command::Pipeline => {
            let cfg = load_config(&cli)?;
            let dir =
                out.map(Path::to_path_buf).or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| "fslab-out".into());
            let manifest = run_pipeline(&cfg, &dir)?;
            for s in &manifest.stages {
                let status = match s.status {
                    StageStatus::Ok => "ok",
                    StageStatus::Failed => "FAILED",
                    StageStatus::Skipped => "skipped",
                };
                eprintln!("{:<10} {:<8} {:>9.3} s  {}", s.name, status, s.seconds, s.message.as_deref().unwrap_or(""));
            }
            if manifest.failed() {
                return Err(CliError::Check("one or more stages failed; see manifest.json".into()));
            }
            println!("{}", dir.display());
        }
        Command::Gap => {
            let cfg = load_config(&cli)?;
            let mu = cfg.build_measure()?;
            let t = assemble_markov(&mu, cfg.cutoff, assembly_options(&cfg))?;
            emit(out, "gap.json", &stamped_json(cfg.seed, &gap_output(&cfg, &mu, &t)?))?;
        }
        Command::Density => {
            let cfg = load_config(&cli)?;
            let d = stationary_density(&cfg.build_measure()?, cfg.cutoff, density_options(&cfg))?;
            emit(out, "density.json", &stamped_json(cfg.seed, &d))?;
            if out.is_some() {
                emit(out, "density.csv", &density_csv(cfg.seed, &d))?;
            }
        }
        Command::Lp => {
            let cfg = load_config(&cli)?;
            let d = stationary_density(&cfg.build_measure()?, cfg.cutoff, density_options(&cfg))?;
            emit(out, "decay.json", &stamped_json(cfg.seed, &decay_output(&cfg, &d)?))?;
            if !cfg.eps_sweep.is_empty() {
                emit(out, "sweep.json", &stamped_json(cfg.seed, &sweep_output(&cfg)?))?;
            }
        }
        Command::Walk => {
            let cfg = load_config(&cli)?;
            let mu = cfg.build_measure()?;
            let moments = simulate_walk(&cfg.walk_config(mu.clone()))?;
            let summary = WalkOutput {
                sample_count: moments.count,
                max_manifold_defect: moments.max_manifold_defect,
                lyapunov: lyapunov(&cfg, &mu)?,
                comparison: None,
            };
            emit(out, "walk.csv", &walk_csv(cfg.seed, &moments))?;
            emit(out, "walk.json", &stamped_json(cfg.seed, &summary))?;
        }
        Command::Verify { inject_perturbation } => {
            let outcomes = run_checks(&VerifyOptions { inject_perturbation: *inject_perturbation });
            let mut failed = 0;
            for o in &outcomes {
                println!("{}", o.line());
                eprintln!("  {} took {:.3} s", o.name, o.elapsed.as_secs_f64());
                failed += usize::from(!o.passed);
            }
            println!("{} of {} checks passed", outcomes.len() - failed, outcomes.len());
            if failed > 0 {
                return Err(CliError::Check(format!("{failed} check(s) failed")));
            }
        }
    }
    Ok(())
}
