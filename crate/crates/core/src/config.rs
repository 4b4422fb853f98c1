use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Episode parameters carried by a scenario.
///
/// `n_damaged = 0` is allowed (degenerate, fully-healthy episode); all other
/// counts must be at least 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub n_crews: usize,
    pub n_depots: usize,
    pub n_damaged: usize,
    #[serde(default = "default_horizon")]
    pub horizon_steps: u32,
    #[serde(default = "default_step_hours")]
    pub step_hours: f64,
    #[serde(default = "default_crew_capacity")]
    pub crew_capacity: u32,
    #[serde(default)]
    pub seed: u64,
}

fn default_horizon() -> u32 {
    48
}

fn default_step_hours() -> f64 {
    1.0
}

fn default_crew_capacity() -> u32 {
    5
}

impl EpisodeConfig {
    pub fn new(n_crews: usize, n_depots: usize, n_damaged: usize) -> Self {
        Self {
            n_crews,
            n_depots,
            n_damaged,
            horizon_steps: default_horizon(),
            step_hours: default_step_hours(),
            crew_capacity: default_crew_capacity(),
            seed: 0,
        }
    }

    /// Total episode duration in hours.
    pub fn episode_hours(&self) -> f64 {
        f64::from(self.horizon_steps) * self.step_hours
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_crews == 0 {
            return Err(Error::InvalidConfig("n_crews must be >= 1".into()));
        }
        if self.n_depots == 0 {
            return Err(Error::InvalidConfig("n_depots must be >= 1".into()));
        }
        if self.horizon_steps == 0 {
            return Err(Error::InvalidConfig("horizon_steps must be >= 1".into()));
        }
        if self.crew_capacity == 0 {
            return Err(Error::InvalidConfig("crew_capacity must be >= 1".into()));
        }
        if !(self.step_hours.is_finite() && self.step_hours > 0.0) {
            return Err(Error::InvalidConfig("step_hours must be positive".into()));
        }
        Ok(())
    }
}
