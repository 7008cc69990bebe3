use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One observation `(t, budget, share)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(T, T, T)", into = "(T, T, T)")]
pub struct Sample<T: Copy> {
    pub t: T,
    pub budget: T,
    pub share: T,
}

impl<T: Copy> From<(T, T, T)> for Sample<T> {
    fn from((t, budget, share): (T, T, T)) -> Self {
        Self { t, budget, share }
    }
}

impl<T: Copy> From<Sample<T>> for (T, T, T) {
    fn from(s: Sample<T>) -> Self {
        (s.t, s.budget, s.share)
    }
}

/// Output value forced back into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampEvent<T> {
    pub t: T,
    pub raw: T,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryMeta<T> {
    pub source: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clamp_events: Vec<ClampEvent<T>>,
    /// Free-form description of how the series was produced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

/// Time-ordered market share series with the budget applied at each sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + Deserialize<'de>"
))]
pub struct Trajectory<T: Copy> {
    pub meta: TrajectoryMeta<T>,
    samples: Vec<Sample<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(samples: Vec<Sample<T>>, source: impl Into<String>) -> Result<Self> {
        let traj = Self {
            meta: TrajectoryMeta {
                source: source.into(),
                ..Default::default()
            },
            samples,
        };
        traj.validate()?;
        Ok(traj)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if !s.t.is_finite() {
                return Err(Error::TimeGrid { index: i });
            }
            if !(s.budget >= T::zero() && s.budget.is_finite()) {
                return Err(Error::Domain {
                    what: "budget",
                    value: s.budget.to_f64_lossy(),
                    domain: "b >= 0",
                });
            }
            crate::model::check_share("share", s.share)?;
        }
        if let Some(i) = self.samples.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::TimeGrid { index: i + 1 });
        }
        Ok(())
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn budgets(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.budget).collect()
    }

    pub fn shares(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.share).collect()
    }

    /// Splits off the last `fraction` of samples (rounded down).
    pub fn split_tail(&self, fraction: f64) -> (Vec<Sample<T>>, Vec<Sample<T>>) {
        let n = self.samples.len();
        let tail = ((n as f64) * fraction).floor() as usize;
        let (head, rest) = self.samples.split_at(n - tail.min(n));
        (head.to_vec(), rest.to_vec())
    }

    pub fn into_samples(self) -> Vec<Sample<T>> {
        self.samples
    }
}
