//! Coefficient families, initial segments and the assembled model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::HurstParam;
use crate::grid::TimeGrid;

/// Closed-form `C²_b` coefficient families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CoefficientFn {
    /// `c`
    Constant { value: f64 },
    /// `c0 + c1 tanh(x)`
    AffineTanh { c0: f64, c1: f64 },
    /// `β w tanh(x / w)`; `w = 1` gives `β tanh(x)`, large `w` a drift that
    /// is linear (`≈ β x`) on `|x| ≪ w`.
    ScaledTanhDrift {
        beta: f64,
        #[serde(default = "unit_width")]
        width: f64,
    },
}

fn unit_width() -> f64 {
    1.0
}

impl CoefficientFn {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn affine_tanh(c0: f64, c1: f64) -> Self {
        Self::AffineTanh { c0, c1 }
    }

    pub fn scaled_tanh(beta: f64) -> Self {
        Self::ScaledTanhDrift { beta, width: 1.0 }
    }

    pub fn linear_branch(beta: f64, width: f64) -> Self {
        Self::ScaledTanhDrift { beta, width }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::AffineTanh { c0, c1 } => c0 + c1 * x.tanh(),
            Self::ScaledTanhDrift { beta, width } => beta * width * (x / width).tanh(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::AffineTanh { c1, .. } => {
                let t = x.tanh();
                c1 * (1.0 - t * t)
            }
            Self::ScaledTanhDrift { beta, width } => {
                let t = (x / width).tanh();
                beta * (1.0 - t * t)
            }
        }
    }

    /// `inf_x` of the coefficient.
    pub fn infimum(&self) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::AffineTanh { c0, c1 } => c0 - c1.abs(),
            Self::ScaledTanhDrift { beta, width } => -(beta * width).abs(),
        }
    }

    pub fn sup_derivative(&self) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::AffineTanh { c1, .. } => c1.abs(),
            Self::ScaledTanhDrift { beta, .. } => beta.abs(),
        }
    }

    fn validate(&self, field: &'static str) -> Result<()> {
        let finite = match *self {
            Self::Constant { value } => value.is_finite(),
            Self::AffineTanh { c0, c1 } => c0.is_finite() && c1.is_finite(),
            Self::ScaledTanhDrift { beta, width } => {
                beta.is_finite() && width.is_finite() && width > 0.0
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::param(field, format!("non-finite or invalid parameters: {self:?}")))
        }
    }

    /// σ must be bounded away from zero.
    fn validate_positive(&self, field: &'static str) -> Result<()> {
        self.validate(field)?;
        match self {
            Self::ScaledTanhDrift { .. } => Err(Error::param(
                field,
                "scaled_tanh_drift changes sign and cannot be used as a diffusion coefficient",
            )),
            _ if self.infimum() > 0.0 => Ok(()),
            _ => Err(Error::param(
                field,
                format!("diffusion coefficient must be positive (need c0 > |c1|): {self:?}"),
            )),
        }
    }
}

/// Deterministic initial segment `η` on `[−r, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InitialPath {
    /// `η_t = value`
    Constant { value: f64 },
    /// `η_t = eta0 + slope t`
    Affine { eta0: f64, slope: f64 },
    /// `η_t = eta0 + amplitude (cos(frequency t) − 1)`
    Cosine {
        eta0: f64,
        amplitude: f64,
        frequency: f64,
    },
}

impl InitialPath {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Affine { eta0, slope } => eta0 + slope * t,
            Self::Cosine {
                eta0,
                amplitude,
                frequency,
            } => eta0 + amplitude * ((frequency * t).cos() - 1.0),
        }
    }

    pub fn eta0(&self) -> f64 {
        self.eval(0.0)
    }

    fn validate(&self, grid: &TimeGrid) -> Result<()> {
        if !(self.eta0() > 0.0 && self.eta0().is_finite()) {
            return Err(Error::param(
                "eta",
                format!("eta_0 must be positive, got {}", self.eta0()),
            ));
        }
        for k in 0..=grid.zero_index() {
            let t = grid.time(k);
            let v = self.eval(t);
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(
                    "eta",
                    format!("initial path must be non-negative, eta({t}) = {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Coefficients, initial segment, grid and Hurst index of one delay equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub drift: CoefficientFn,
    pub sigma: CoefficientFn,
    pub eta: InitialPath,
    pub grid: TimeGrid,
    pub hurst: HurstParam,
}

impl ModelSpec {
    pub fn new(
        drift: CoefficientFn,
        sigma: CoefficientFn,
        eta: InitialPath,
        grid: TimeGrid,
        hurst: HurstParam,
    ) -> Result<Self> {
        drift.validate("drift")?;
        sigma.validate_positive("sigma")?;
        eta.validate(&grid)?;
        Ok(Self {
            drift,
            sigma,
            eta,
            grid,
            hurst,
        })
    }

    /// Initial segment on the nodes of `[−r, 0]`.
    pub fn initial_segment(&self) -> Vec<f64> {
        (0..=self.grid.zero_index())
            .map(|k| self.eta.eval(self.grid.time(k)))
            .collect()
    }

    /// Same model on a grid with a different number of delay intervals.
    pub fn with_intervals(&self, intervals: usize) -> Result<Self> {
        Ok(Self {
            grid: self.grid.with_intervals(intervals)?,
            ..*self
        })
    }
}
