use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{simulate, ConstantBudget, GvwParams, PiecewiseConstant, PulseTrain};
use crate::trajectory::{Sample, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BudgetPattern {
    Constant {
        level: f64,
    },
    /// `on` time units at a level, `off` at zero; pulses cycle through `levels`.
    PulseTrain {
        levels: Vec<f64>,
        on: f64,
        off: f64,
    },
    /// Piecewise constant, redrawn every `hold` time units by a Gaussian
    /// step of std `sigma` reflected into `[min, max]`, starting mid-range.
    RandomWalk {
        min: f64,
        max: f64,
        sigma: f64,
        hold: f64,
    },
}

/// Complete description of a generated data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub true_params: GvwParams<f64>,
    pub budget_pattern: BudgetPattern,
    pub n_samples: usize,
    /// Samples are taken at `n_samples` uniform times on `[0, horizon]`.
    pub horizon: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub x0: f64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        self.true_params.validate()?;
        let bad = |name, value: f64, reason| Err(Error::InvalidParameter { name, value, reason });
        if self.n_samples < 2 {
            return bad("n_samples", self.n_samples as f64, "must be >= 2");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon", self.horizon, "must be positive and finite");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma", self.noise_sigma, "must be >= 0");
        }
        crate::model::check_share("x0", self.x0)?;
        match &self.budget_pattern {
            BudgetPattern::Constant { level } => {
                if !(*level >= 0.0 && level.is_finite()) {
                    return bad("level", *level, "must be >= 0");
                }
            }
            BudgetPattern::PulseTrain { levels, on, off } => {
                if levels.is_empty() {
                    return bad("levels", 0.0, "need at least one level");
                }
                if let Some(&l) = levels.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
                    return bad("levels", l, "must be >= 0");
                }
                if !(*on > 0.0 && on.is_finite()) {
                    return bad("on", *on, "must be > 0");
                }
                if !(*off >= 0.0 && off.is_finite()) {
                    return bad("off", *off, "must be >= 0");
                }
            }
            BudgetPattern::RandomWalk { min, max, sigma, hold } => {
                if !(*min >= 0.0 && max > min && max.is_finite()) {
                    return bad("max", *max, "need 0 <= min < max");
                }
                if !(*sigma >= 0.0 && sigma.is_finite()) {
                    return bad("sigma", *sigma, "must be >= 0");
                }
                if !(*hold > 0.0 && hold.is_finite()) {
                    return bad("hold", *hold, "must be > 0");
                }
            }
        }
        Ok(())
    }

    /// Uniform sample times on `[0, horizon]`.
    pub fn times(&self) -> Vec<f64> {
        let step = self.horizon / (self.n_samples - 1) as f64;
        (0..self.n_samples).map(|i| i as f64 * step).collect()
    }
}

fn reflect(mut v: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    // fold into [lo, lo + 2 width) then mirror the upper half
    v = (v - lo).rem_euclid(2.0 * width);
    if v > width {
        v = 2.0 * width - v;
    }
    lo + v
}

fn random_walk(min: f64, max: f64, sigma: f64, hold: f64, horizon: f64, rng: &mut ChaCha8Rng) -> PiecewiseConstant<f64> {
    let steps = (horizon / hold).ceil() as usize + 1;
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let mut level = 0.5 * (min + max);
    let mut starts = Vec::with_capacity(steps);
    let mut values = Vec::with_capacity(steps);
    for i in 0..steps {
        starts.push(i as f64 * hold);
        values.push(level);
        level = reflect(level + normal.sample(rng), min, max);
    }
    PiecewiseConstant::new(starts, values)
}

/// Simulates the spec's trajectory, samples it and adds clamped Gaussian
/// share noise. The spec is stored in the trajectory's provenance.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Trajectory<f64>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let times = spec.times();
    let clean = match &spec.budget_pattern {
        BudgetPattern::Constant { level } => simulate(&spec.true_params, &ConstantBudget(*level), spec.x0, &times)?,
        BudgetPattern::PulseTrain { levels, on, off } => simulate(
            &spec.true_params,
            &PulseTrain::new(levels.clone(), *on, *off),
            spec.x0,
            &times,
        )?,
        BudgetPattern::RandomWalk { min, max, sigma, hold } => {
            let walk = random_walk(*min, *max, *sigma, *hold, spec.horizon, &mut rng);
            simulate(&spec.true_params, &walk, spec.x0, &times)?
        }
    };
    // noise draws come from their own stream so the budget path does not
    // depend on the noise level
    rng.set_stream(1);
    let meta = clean.meta.clone();
    let samples: Vec<Sample<f64>> = if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
        clean
            .into_samples()
            .into_iter()
            .map(|s| Sample {
                share: (s.share + normal.sample(&mut rng)).clamp(0.0, 1.0),
                ..s
            })
            .collect()
    } else {
        clean.into_samples()
    };
    let mut traj = Trajectory::new(samples, "synthetic")?;
    traj.meta.clamp_events = meta.clamp_events;
    traj.meta.provenance = Some(serde_json::to_value(spec)?);
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(pattern: BudgetPattern, sigma: f64) -> SyntheticSpec {
        SyntheticSpec {
            true_params: GvwParams::new(0.1, 0.7, 0.8, 0.01).unwrap(),
            budget_pattern: pattern,
            n_samples: 500,
            horizon: 100.0,
            noise_sigma: sigma,
            seed: 42,
            x0: 0.05,
        }
    }

    fn walk() -> BudgetPattern {
        BudgetPattern::RandomWalk {
            min: 0.1,
            max: 2.0,
            sigma: 0.3,
            hold: 5.0,
        }
    }

    #[test]
    fn noiseless_samples_lie_on_the_simulation() {
        let s = spec(
            BudgetPattern::PulseTrain {
                levels: vec![1.0, 0.3],
                on: 10.0,
                off: 5.0,
            },
            0.0,
        );
        let traj = generate_synthetic(&s).unwrap();
        let direct = simulate(
            &s.true_params,
            &PulseTrain::new(vec![1.0, 0.3], 10.0, 5.0),
            s.x0,
            &s.times(),
        )
        .unwrap();
        assert_eq!(traj.shares(), direct.shares());
        assert_eq!(traj.budgets(), direct.budgets());
        assert_eq!(traj.meta.provenance, Some(serde_json::to_value(&s).unwrap()));
    }

    #[test]
    fn seeded_output_is_bit_identical() {
        let a = generate_synthetic(&spec(walk(), 0.01)).unwrap();
        let b = generate_synthetic(&spec(walk(), 0.01)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SyntheticSpec { seed: 43, ..spec(walk(), 0.01) }).unwrap();
        assert_ne!(a.shares(), c.shares());
    }

    #[test]
    fn noise_level_matches_sigma() {
        let clean = generate_synthetic(&spec(walk(), 0.0)).unwrap();
        let noisy = generate_synthetic(&spec(walk(), 0.01)).unwrap();
        assert_eq!(clean.budgets(), noisy.budgets());
        let diffs: Vec<f64> = clean
            .shares()
            .iter()
            .zip(noisy.shares())
            .filter(|(c, _)| **c > 0.04 && **c < 0.96)
            .map(|(c, n)| n - c)
            .collect();
        assert!(diffs.len() > 200, "{} usable samples", diffs.len());
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((0.008..=0.012).contains(&sd), "sd = {sd}");
    }

    #[test]
    fn random_walk_stays_in_range() {
        let traj = generate_synthetic(&spec(walk(), 0.0)).unwrap();
        assert!(traj.budgets().iter().all(|&b| (0.1..=2.0).contains(&b)));
        let distinct = traj.budgets().windows(2).filter(|w| w[0] != w[1]).count();
        assert!(distinct > 10);
    }

    #[test]
    fn reflection() {
        assert_eq!(reflect(2.5, 0.0, 2.0), 1.5);
        assert_eq!(reflect(-0.5, 0.0, 2.0), 0.5);
        assert_eq!(reflect(1.0, 0.0, 2.0), 1.0);
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(BudgetPattern::Constant { level: 1.0 }, 0.0);
        s.n_samples = 1;
        assert!(generate_synthetic(&s).is_err());
        let s = spec(BudgetPattern::Constant { level: 1.0 }, -0.1);
        assert!(generate_synthetic(&s).is_err());
    }
}
