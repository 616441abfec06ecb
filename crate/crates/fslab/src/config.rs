//! Run configuration.

use std::path::{Path, PathBuf};

use fslab_core::lp::lp_block_of_tau;
use fslab_core::measure::{build_measure, MeasureFamilySpec};
use fslab_core::transfer::DecayWindow;
use fslab_core::walk::WalkConfig;
use fslab_core::{Backend, FlagPoint, SupportMeasure};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub backend: Backend,
    pub measure: MeasureFamilySpec,
    pub cutoff: u32,
    #[serde(default = "default_oversampling")]
    pub oversampling: u32,
    /// Allowed entry change when the assembly quadrature doubles.
    #[serde(default = "default_self_check_tol")]
    pub self_check_tol: Option<f64>,
    #[serde(default = "default_solve_tol")]
    pub solve_tol: f64,
    #[serde(default = "default_degeneracy_tol")]
    pub degeneracy_tol: f64,
    #[serde(default)]
    pub lp_window: DecayWindow,
    /// Low-frequency block bound `N` for the restricted gap.
    #[serde(default = "default_gap_block")]
    pub gap_block: u32,
    #[serde(default = "default_gap_convergence_tol")]
    pub gap_convergence_tol: f64,
    #[serde(default)]
    pub walk: WalkSettings,
    #[serde(default)]
    pub seed: u64,
    /// Extra ε values for a decay sweep over the same family.
    #[serde(default)]
    pub eps_sweep: Vec<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkSettings {
    pub steps: usize,
    pub trajectories: usize,
    pub burn_in: usize,
    pub moment_cutoff: u32,
    pub batches: usize,
    pub initial: Option<FlagPoint>,
    /// Steps per trajectory for the Lyapunov estimate.
    pub lyapunov_steps: usize,
}

impl Default for WalkSettings {
    fn default() -> Self {
        WalkSettings {
            steps: 63_500,
            trajectories: 16,
            burn_in: 1000,
            moment_cutoff: 5,
            batches: 10,
            initial: None,
            lyapunov_steps: 20_000,
        }
    }
}

fn default_oversampling() -> u32 {
    4
}
fn default_self_check_tol() -> Option<f64> {
    Some(1e-8)
}
fn default_solve_tol() -> f64 {
    1e-8
}
fn default_degeneracy_tol() -> f64 {
    1e-7
}
fn default_gap_block() -> u32 {
    5
}
fn default_gap_convergence_tol() -> f64 {
    0.05
}

fn max_cutoff(backend: Backend) -> u32 {
    match backend {
        Backend::Sl2R => 2048,
        Backend::Sl2C => 48,
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(usage(format!("schema_version {} is not {SCHEMA_VERSION}", self.schema_version)));
        }
        let max = max_cutoff(self.backend);
        if self.cutoff < 4 || self.cutoff > max {
            return Err(usage(format!("cutoff {} outside 4..={max} for {}", self.cutoff, self.backend)));
        }
        if !(2..=16).contains(&self.oversampling) {
            return Err(usage(format!("oversampling {} outside 2..=16", self.oversampling)));
        }
        if let Some(t) = self.self_check_tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(usage("self_check_tol must lie in (0, 1)"));
            }
        }
        if !(self.solve_tol > 0.0 && self.solve_tol <= 1e-2) {
            return Err(usage("solve_tol must lie in (0, 1e-2]"));
        }
        if !(self.degeneracy_tol > 0.0 && self.degeneracy_tol < 1.0) {
            return Err(usage("degeneracy_tol must lie in (0, 1)"));
        }
        if !(self.gap_convergence_tol > 0.0) {
            return Err(usage("gap_convergence_tol must be positive"));
        }
        let top = lp_block_of_tau(self.backend, self.cutoff);
        if self.gap_block == 0 || self.gap_block + 2 > top {
            return Err(usage(format!("gap_block {} must lie in 1..={}", self.gap_block, top.saturating_sub(2))));
        }
        if self.lp_window.noise_floor < 0.0 || self.lp_window.min_points < 2 {
            return Err(usage("lp_window needs noise_floor ≥ 0 and min_points ≥ 2"));
        }
        let w = &self.walk;
        if w.steps <= w.burn_in || w.trajectories == 0 || w.batches == 0 || w.batches > w.steps - w.burn_in {
            return Err(usage("walk needs steps > burn_in, trajectories ≥ 1 and 1 ≤ batches ≤ steps − burn_in"));
        }
        if w.moment_cutoff > self.cutoff {
            return Err(usage("walk.moment_cutoff must not exceed cutoff"));
        }
        if w.lyapunov_steps < 2 {
            return Err(usage("walk.lyapunov_steps must be at least 2"));
        }
        if let Some(p) = &w.initial {
            if p.backend() != self.backend {
                return Err(usage("walk.initial lies on the wrong flag manifold"));
            }
            if !(p.manifold_defect() <= 1e-9) {
                return Err(usage("walk.initial is not a point of the flag manifold"));
            }
        }
        self.measure.validate().map_err(|e| usage(e.to_string()))?;
        for &eps in &self.eps_sweep {
            let spec = self
                .measure
                .with_eps(eps)
                .ok_or_else(|| usage("eps_sweep needs an exp-basis-family or conjugated-pair measure"))?;
            spec.validate().map_err(|e| usage(e.to_string()))?;
        }
        Ok(())
    }

    pub fn build_measure(&self) -> Result<SupportMeasure, CliError> {
        build_measure(self.backend, &self.measure).map_err(|e| usage(e.to_string()))
    }

    pub fn walk_config(&self, measure: SupportMeasure) -> WalkConfig {
        let w = &self.walk;
        let mut cfg = WalkConfig::new(measure, w.steps, w.trajectories, self.seed);
        cfg.burn_in = w.burn_in;
        cfg.moment_cutoff = w.moment_cutoff;
        cfg.batches = w.batches;
        if let Some(p) = w.initial {
            cfg.initial = p;
        }
        cfg
    }

    /// Applies command-line overrides and revalidates.
    pub fn with_overrides(mut self, seed: Option<u64>, cutoff: Option<u32>) -> Result<Self, CliError> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(c) = cutoff {
            self.cutoff = c;
        }
        self.validate()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "backend": "SL2R",
        "measure": {"kind": "rotation-pair", "phi": 1.0},
        "cutoff": 32
    }"#;

    #[test]
    fn defaults_fill_in_and_round_trip() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.oversampling, 4);
        assert_eq!(cfg.walk, WalkSettings::default());
        let again = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash(), cfg.hash());
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(RunConfig::from_json(&MINIMAL.replace("32", "1")).is_err());
        assert!(RunConfig::from_json(&MINIMAL.replace("\"cutoff\"", "\"cutof\"")).is_err());
        let sweep = MINIMAL.replace("\"cutoff\": 32", "\"cutoff\": 32, \"eps_sweep\": [0.5]");
        assert!(RunConfig::from_json(&sweep).is_err());
    }
}
