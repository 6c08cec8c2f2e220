//! The continuous problem: rate, initial data, threshold, exponent and scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::DEFAULT_FLOOR;
use crate::grid::Grid;
use crate::profile::{ProfileSpec, RateSpec};

/// How the survival-threshold sink is generalized to exponents other than 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionForm {
    /// Sink `exp((1-gamma)(u_m - u)/eps)`: balance level stays at `u_m`.
    #[default]
    ThresholdPreserving,
    /// Sink `exp((gamma u_m - (1-gamma) u)/eps)`, i.e. `n^gamma exp(gamma u_m/eps)`.
    DensityPower,
}

fn default_gamma() -> f64 {
    0.5
}

fn default_floor() -> f64 {
    DEFAULT_FLOOR
}

fn default_lipschitz() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub rate: RateSpec,
    pub u0: ProfileSpec,
    pub u_m: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub reaction_form: ReactionForm,
    pub epsilon: f64,
    #[serde(default = "default_floor")]
    pub u_floor: f64,
    /// Declared bound on the grid Lipschitz constants of `rate` and `u0`.
    #[serde(default = "default_lipschitz")]
    pub lipschitz_bound: f64,
}

impl ProblemSpec {
    pub fn new(rate: RateSpec, u0: ProfileSpec, u_m: f64, epsilon: f64) -> Self {
        ProblemSpec {
            rate,
            u0,
            u_m,
            gamma: default_gamma(),
            reaction_form: ReactionForm::default(),
            epsilon,
            u_floor: default_floor(),
            lipschitz_bound: default_lipschitz(),
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        ProblemSpec { epsilon, ..self.clone() }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        ProblemSpec { gamma, ..self.clone() }
    }

    pub fn with_u0(&self, u0: ProfileSpec) -> Self {
        ProblemSpec { u0, ..self.clone() }
    }

    /// Checks the scalar parameters only.
    pub fn validate_parameters(&self) -> Result<()> {
        if !(self.u_m < 0.0) {
            return Err(Error::Validation(format!("u_m = {} must be negative", self.u_m)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Validation(format!("gamma = {} must lie in (0, 1)", self.gamma)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Validation(format!("epsilon = {} must be positive", self.epsilon)));
        }
        if !(self.u_floor < self.u_m - 10.0) {
            return Err(Error::Validation(format!(
                "u_floor = {} must lie below u_m - 10 = {}",
                self.u_floor,
                self.u_m - 10.0
            )));
        }
        self.rate.validate()?;
        self.u0.validate()
    }

    /// Full validation against a grid, including the Lipschitz bound on the
    /// sampled rate and initial data.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.validate_parameters()?;
        grid.validate()?;
        for (name, p) in [("rate", &self.rate), ("u0", &self.u0)] {
            let lip = p.sample(grid)?.lipschitz(f64::NEG_INFINITY);
            if lip > self.lipschitz_bound {
                return Err(Error::Validation(format!(
                    "{name} has grid Lipschitz constant {lip:.4} above the declared bound {}",
                    self.lipschitz_bound
                )));
            }
        }
        Ok(())
    }

    pub fn constant_rate(&self) -> Option<f64> {
        self.rate.as_constant()
    }
}
