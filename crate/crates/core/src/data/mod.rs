//! Campaign records, CSV ingestion, normalization to market share and
//! synthetic data generation.

mod records;
mod synthetic;

pub use records::{format_float, load_csv, read_csv, write_csv, write_records, CampaignRecord, CsvSchema};
pub use synthetic::{generate_synthetic, BudgetPattern, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{Sample, Trajectory};

/// Sales-to-share divisor and the affine map applied to time stamps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    pub market_potential: f64,
    pub time_origin: f64,
    pub time_scale: f64,
}

/// Multiplier on the largest observed response used when no market
/// potential is given.
pub const DEFAULT_POTENTIAL_FACTOR: f64 = 1.05;

impl NormalizationConfig {
    pub fn new(market_potential: f64) -> Self {
        Self {
            market_potential,
            time_origin: 0.0,
            time_scale: 1.0,
        }
    }

    /// `M = 1.05 * max(response)`.
    pub fn from_records(records: &[CampaignRecord]) -> Result<Self> {
        let max = records.iter().map(|r| r.response).fold(0.0, f64::max);
        if !(max > 0.0) {
            return Err(Error::InvalidParameter {
                name: "market_potential",
                value: max,
                reason: "largest response must be positive to derive a default",
            });
        }
        Ok(Self::new(DEFAULT_POTENTIAL_FACTOR * max))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.market_potential > 0.0 && self.market_potential.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "market_potential",
                value: self.market_potential,
                reason: "must be positive and finite",
            });
        }
        if !self.time_origin.is_finite() {
            return Err(Error::InvalidParameter {
                name: "time_origin",
                value: self.time_origin,
                reason: "must be finite",
            });
        }
        if !(self.time_scale > 0.0 && self.time_scale.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "time_scale",
                value: self.time_scale,
                reason: "must be positive and finite",
            });
        }
        Ok(())
    }
}

/// `share = response / M`, `time = (t - origin) * scale`.
///
/// Fails with the indices of every record whose share leaves `[0, 1]`.
pub fn normalize(records: &[CampaignRecord], config: &NormalizationConfig) -> Result<Trajectory<f64>> {
    config.validate()?;
    let mut bad = Vec::new();
    let samples: Vec<Sample<f64>> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let share = r.response / config.market_potential;
            if !(0.0..=1.0).contains(&share) {
                bad.push(i);
            }
            Sample {
                t: (r.t - config.time_origin) * config.time_scale,
                budget: r.budget,
                share,
            }
        })
        .collect();
    if !bad.is_empty() {
        return Err(Error::ShareOutOfRange { rows: bad });
    }
    let mut traj = Trajectory::new(samples, "csv")?;
    traj.meta.provenance = Some(serde_json::to_value(config)?);
    Ok(traj)
}

/// Inverse of [`normalize`].
pub fn denormalize(traj: &Trajectory<f64>, config: &NormalizationConfig) -> Vec<CampaignRecord> {
    traj.samples()
        .iter()
        .map(|s| CampaignRecord {
            t: s.t / config.time_scale + config.time_origin,
            budget: s.budget,
            response: s.share * config.market_potential,
        })
        .collect()
}

/// Records carrying shares directly (`M = 1`).
pub fn to_records(traj: &Trajectory<f64>) -> Vec<CampaignRecord> {
    denormalize(traj, &NormalizationConfig::new(1.0))
}

pub fn trajectory_to_json(traj: &Trajectory<f64>) -> Result<String> {
    Ok(serde_json::to_string_pretty(traj)?)
}

pub fn trajectory_from_json(text: &str) -> Result<Trajectory<f64>> {
    let traj: Trajectory<f64> = serde_json::from_str(text)?;
    traj.validate()?;
    Ok(traj)
}
