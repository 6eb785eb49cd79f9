//! Run configuration: parsing, validation and the canonical hash.

use std::path::{Path, PathBuf};

use rfsdde::fraccalc::FracOrder;
use rfsdde::{CoefficientFn, HurstParam, InitialPath, ModelSpec, PenaltySpec, TimeGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub drift: CoefficientFn,
    pub sigma: CoefficientFn,
    pub eta: InitialPath,
    pub delay: f64,
    pub horizon: f64,
    pub hurst: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    #[default]
    Reflected,
    /// Uses the last (smallest) entry of the penalty ladder.
    Penalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianReference {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityOptions {
    #[serde(default)]
    pub method: DensityMethod,
    /// Atom threshold; defaults to `1e-4 η_0`.
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// KDE bandwidth; Silverman's rule when absent.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    /// Law of `X_{t0}` in the boundary-inactive regime, for the KS check.
    #[serde(default)]
    pub gaussian_reference: Option<GaussianReference>,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self {
            method: DensityMethod::Reflected,
            theta: None,
            bins: default_bins(),
            bandwidth: None,
            gaussian_reference: None,
        }
    }
}

fn default_bins() -> usize {
    30
}

/// Perturbation direction `h` with `h(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Direction {
    /// `sin(π k t)`
    Sine { frequency: f64 },
    /// `t^p`, `p > 0`
    Power { exponent: f64 },
}

impl Direction {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::Sine { frequency } => (std::f64::consts::PI * frequency * t).sin(),
            Self::Power { exponent } => t.powf(exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivativeOptions {
    #[serde(default)]
    pub direction: Option<Direction>,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Paths with `X_{t0} >= omega_threshold` enter the filtered summaries.
    #[serde(default = "default_omega")]
    pub omega_threshold: f64,
}

impl Default for DerivativeOptions {
    fn default() -> Self {
        Self {
            direction: None,
            fd_step: default_fd_step(),
            omega_threshold: default_omega(),
        }
    }
}

fn default_fd_step() -> f64 {
    1e-4
}

fn default_omega() -> f64 {
    0.5
}

fn default_alpha() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub steps_per_delay: usize,
    /// Strictly decreasing penalty strengths.
    pub penalty_ladder: Vec<f64>,
    /// Drift substeps per cell; derived from the smallest `ε` when absent.
    #[serde(default)]
    pub substep_factor: Option<usize>,
    pub seed: u64,
    pub n_paths: usize,
    pub t0: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub density: DensityOptions,
    #[serde(default)]
    pub derivative: DerivativeOptions,
    /// Not part of the hash: moving a run does not change its outputs.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig {
                drift: CoefficientFn::scaled_tanh(-0.5),
                sigma: CoefficientFn::affine_tanh(0.8, 0.3),
                eta: InitialPath::constant(0.2),
                delay: 0.5,
                horizon: 1.0,
                hurst: 0.75,
            },
            steps_per_delay: 64,
            penalty_ladder: vec![0.02, 0.01],
            substep_factor: None,
            seed: 1,
            n_paths: 4,
            t0: 1.0,
            alpha: 0.3,
            density: DensityOptions::default(),
            derivative: DerivativeOptions::default(),
            output_dir: None,
        }
    }
}

/// A configuration whose invariants have been checked.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: RunConfig,
    pub model: ModelSpec,
    pub ladder: Vec<PenaltySpec>,
    pub alpha: FracOrder,
    pub theta: f64,
    pub hash: String,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// SHA-256 of the compact JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn validate(self) -> Result<Validated, CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("{field}: {msg}")));
        let m = &self.model;
        let hurst = HurstParam::new(m.hurst)?;
        let grid = TimeGrid::new(m.delay, m.horizon, self.steps_per_delay)?;
        let model = ModelSpec::new(m.drift, m.sigma, m.eta, grid, hurst)?;
        if self.n_paths == 0 {
            return bad("n_paths", "must be >= 1".into());
        }
        if self.penalty_ladder.is_empty() {
            return bad("penalty_ladder", "must hold at least one ε".into());
        }
        if self.penalty_ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return bad(
                "penalty_ladder",
                format!("must be strictly decreasing, got {:?}", self.penalty_ladder),
            );
        }
        match grid.forward_index(self.t0) {
            Some(k) if k > 0 => {}
            _ => {
                return bad(
                    "t0",
                    format!("{} is not a grid node in (0, {}]", self.t0, grid.horizon()),
                )
            }
        }
        let alpha = FracOrder::new(self.alpha)
            .map_err(|e| CliError::Config(format!("alpha: {e}")))?;
        let theta = self.density.theta.unwrap_or(1e-4 * model.eta.eta0());
        if !(theta > 0.0) {
            return bad("density.theta", format!("must be > 0, got {theta}"));
        }
        if self.density.bins < 10 {
            return bad("density.bins", format!("must be >= 10, got {}", self.density.bins));
        }
        if let Some(g) = self.density.gaussian_reference {
            if !(g.variance > 0.0) {
                return bad("density.gaussian_reference.variance", "must be > 0".into());
            }
        }
        if !(self.derivative.fd_step > 0.0) {
            return bad("derivative.fd_step", "must be > 0".into());
        }
        let smallest = *self.penalty_ladder.last().unwrap();
        let factor = self
            .substep_factor
            .unwrap_or_else(|| PenaltySpec::required_substeps(smallest, &grid));
        let ladder = self
            .penalty_ladder
            .iter()
            .map(|&eps| {
                let p = PenaltySpec::new(eps, factor)?;
                p.validate(&grid)?;
                Ok(p)
            })
            .collect::<Result<Vec<_>, rfsdde::Error>>()?;
        let hash = self.hash();
        Ok(Validated {
            config: self,
            model,
            ladder,
            alpha,
            theta,
            hash,
        })
    }
}
