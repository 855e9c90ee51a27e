use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trading times `0 = t_0 < t_1 < ... < t_N = T`.
///
/// Every vector and matrix in the crate is indexed on such a grid, so the
/// grid is validated once at construction and then treated as immutable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    /// Relative tolerance used to classify a grid as equidistant.
    pub const EQUIDISTANT_RTOL: f64 = 1e-12;

    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidGrid("need at least two trading times".into()));
        }
        if !times.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidGrid("times must be finite".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidGrid("grid must start at t = 0".into()));
        }
        if !times.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidGrid("times must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    /// The grid `{ k T / n_steps | k = 0, ..., n_steps }`.
    pub fn equidistant(n_steps: usize, horizon: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidGrid("need at least one trading interval".into()));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidGrid("horizon must be positive".into()));
        }
        let times = (0..=n_steps)
            .map(|k| k as f64 * horizon / n_steps as f64)
            .collect();
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of trading times, N + 1.
    pub fn n_points(&self) -> usize {
        self.times.len()
    }

    /// Number of trading intervals, N.
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn is_equidistant(&self) -> bool {
        let dt = self.horizon() / self.n_steps() as f64;
        self.times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= Self::EQUIDISTANT_RTOL * dt)
    }

    /// Grid spacing, when the grid is equidistant.
    pub fn dt(&self) -> Option<f64> {
        self.is_equidistant()
            .then(|| self.horizon() / self.n_steps() as f64)
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;

    fn try_from(times: Vec<f64>) -> Result<Self> {
        Self::new(times)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(grid: TimeGrid) -> Self {
        grid.times
    }
}
