use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{jacobian_unchecked, value_and_slope};
use super::{MlpSpec, MlpWeights};
use crate::error::{Error, Result};
use crate::lm::{sum_sq, DampingScaling, LeastSquares, Lm, LmConfig, Step};
use crate::scalar::Scalar;
use crate::trajectory::Trajectory;

/// Levenberg-Marquardt training settings. Defaults: damping 0.001, grown
/// by 10 on a rejected step and shrunk by 0.1 on an accepted one, 1000 epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lm_initial: f64,
    pub lm_increase: f64,
    pub lm_decrease: f64,
    pub lm_ceiling: f64,
    pub max_epochs: usize,
    /// Chronological tail held out for model selection, in `[0, 0.5]`.
    pub validation_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub init: Init,
}

/// Starting weights for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// [`MlpWeights::glorot`].
    #[default]
    Glorot,
    /// [`MlpWeights::hinge_basis`] followed by [`MlpWeights::fit_spline`]
    /// on the training data.
    Hinge,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lm_initial: 1e-3,
            lm_increase: 10.0,
            lm_decrease: 0.1,
            lm_ceiling: 1e10,
            max_epochs: 1000,
            validation_fraction: 0.2,
            seed: 0,
            init: Init::Glorot,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, value: f64, reason| {
            Err(Error::InvalidParameter { name, value, reason })
        };
        if !(self.lm_initial > 0.0) {
            return bad("lm_initial", self.lm_initial, "must be > 0");
        }
        if !(self.lm_increase > 1.0) {
            return bad("lm_increase", self.lm_increase, "must be > 1");
        }
        if !(self.lm_decrease > 0.0 && self.lm_decrease < 1.0) {
            return bad("lm_decrease", self.lm_decrease, "must lie in (0, 1)");
        }
        if !(self.lm_ceiling > self.lm_initial) {
            return bad("lm_ceiling", self.lm_ceiling, "must exceed lm_initial");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs", 0.0, "must be >= 1");
        }
        if !(0.0..=0.5).contains(&self.validation_fraction) {
            return bad("validation_fraction", self.validation_fraction, "must lie in [0, 0.5]");
        }
        Ok(())
    }
}

/// Trained network plus the affine map from model time to network input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surrogate<T> {
    pub spec: MlpSpec,
    pub weights: MlpWeights<T>,
    pub standardization: Standardization<T>,
}

/// Network input is `(t - time_offset) * time_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization<T> {
    pub time_offset: T,
    pub time_scale: T,
}

impl<T: Scalar> Surrogate<T> {
    fn input(&self, t: T) -> T {
        (t - self.standardization.time_offset) * self.standardization.time_scale
    }

    pub fn predict(&self, t: T) -> T {
        super::net::forward_unchecked(&self.weights, self.input(t))
    }

    /// Time derivative in model time units (chain rule through the input map).
    pub fn rate(&self, t: T) -> T {
        value_and_slope(&self.weights, self.input(t)).1 * self.standardization.time_scale
    }

    pub fn predict_with_rate(&self, t: T) -> (T, T) {
        let (y, dy) = value_and_slope(&self.weights, self.input(t));
        (y, dy * self.standardization.time_scale)
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let s: Self = serde_json::from_str(text)?;
        s.spec.validate()?;
        s.weights.check(&s.spec)?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxEpochs,
    /// Damping reached its ceiling without finding a decrease.
    DampingCeiling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport<T> {
    /// Weights of the selected epoch.
    pub surrogate: Surrogate<T>,
    /// Training MSE at epoch 0 (initial weights) and after each epoch.
    pub train_mse: Vec<T>,
    /// Validation MSE per epoch; empty without a validation set.
    pub validation_mse: Vec<T>,
    pub best_epoch: usize,
    pub best_validation_mse: Option<T>,
    pub epochs_run: usize,
    pub stop: StopReason,
}

struct Fit<'a, T> {
    spec: &'a MlpSpec,
    template: MlpWeights<T>,
    inputs: Vec<T>,
    targets: Vec<T>,
}

impl<T: Scalar> Fit<'_, T> {
    fn weights(&self, flat: &[T]) -> MlpWeights<T> {
        let mut w = self.template.clone();
        w.set_flat(flat);
        w
    }
}

impl<T: Scalar> LeastSquares<T> for Fit<'_, T> {
    fn n_params(&self) -> usize {
        self.spec.n_params()
    }

    fn residuals(&self, params: &[T]) -> Vec<T> {
        let w = self.weights(params);
        self.inputs
            .iter()
            .zip(&self.targets)
            .map(|(&t, &y)| super::net::forward_unchecked(&w, t) - y)
            .collect()
    }

    fn jacobian(&self, params: &[T]) -> Vec<T> {
        jacobian_unchecked(self.spec, &self.weights(params), &self.inputs)
    }
}

fn mse<T: Scalar>(weights: &MlpWeights<T>, inputs: &[T], targets: &[T]) -> T {
    let sse = inputs
        .iter()
        .zip(targets)
        .fold(T::zero(), |acc, (&t, &y)| {
            let e = super::net::forward_unchecked(weights, t) - y;
            acc + e * e
        });
    sse / T::from_usize_lossy(inputs.len())
}

/// Fits the network to `data`'s share series by full-batch Levenberg-Marquardt.
///
/// Times are mapped onto `[0, 1]`; shares are used as they are. The returned
/// weights are those with the lowest validation MSE (training MSE when no
/// validation set is held out).
pub fn lm_train<T: Scalar>(spec: &MlpSpec, data: &Trajectory<T>, config: &TrainConfig) -> Result<TrainReport<T>> {
    spec.validate()?;
    config.validate()?;
    if data.is_empty() {
        return Err(Error::TooFewPoints { required: 1, got: 0 });
    }
    let times = data.times();
    let (t_min, t_max) = (times[0], times[times.len() - 1]);
    let span = t_max - t_min;
    let standardization = Standardization {
        time_offset: t_min,
        time_scale: if span > T::zero() { T::one() / span } else { T::one() },
    };
    let to_input = |t: T| (t - standardization.time_offset) * standardization.time_scale;

    let (train, valid) = data.split_tail(config.validation_fraction);
    if train.is_empty() {
        return Err(Error::TooFewPoints { required: 1, got: 0 });
    }
    let valid_inputs: Vec<T> = valid.iter().map(|s| to_input(s.t)).collect();
    let valid_targets: Vec<T> = valid.iter().map(|s| s.share).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let inputs: Vec<T> = train.iter().map(|s| to_input(s.t)).collect();
    let targets: Vec<T> = train.iter().map(|s| s.share).collect();
    let init = match config.init {
        Init::Glorot => MlpWeights::<T>::glorot(spec, &mut rng),
        Init::Hinge => {
            let mut w = MlpWeights::<T>::hinge_basis(spec, &mut rng);
            w.fit_spline(&inputs, &targets);
            w
        }
    };
    let problem = Fit {
        spec,
        template: init.clone(),
        inputs,
        targets,
    };
    let n_train = T::from_usize_lossy(problem.inputs.len());

    let mut lm = Lm::new(LmConfig {
        initial: T::lit(config.lm_initial),
        increase: T::lit(config.lm_increase),
        decrease: T::lit(config.lm_decrease),
        ceiling: T::lit(config.lm_ceiling),
        scaling: DampingScaling::Identity,
    });
    let mut params = init.flatten();
    let mut residuals = problem.residuals(&params);
    let initial_loss = sum_sq(&residuals);
    if !initial_loss.is_finite() {
        return Err(Error::Training("non-finite loss at initialization".into()));
    }

    let has_valid = !valid_inputs.is_empty();
    let mut train_mse = vec![initial_loss / n_train];
    let mut validation_mse = Vec::new();
    let score = |w: &MlpWeights<T>, train_value: T| {
        if has_valid {
            mse(w, &valid_inputs, &valid_targets)
        } else {
            train_value
        }
    };
    let first = score(&init, train_mse[0]);
    if has_valid {
        validation_mse.push(first);
    }
    let mut best = (0usize, first, params.clone());
    let mut accepted_any = false;
    let mut stop = StopReason::MaxEpochs;
    let mut epochs_run = 0;

    for epoch in 1..=config.max_epochs {
        epochs_run = epoch;
        match lm.step(&problem, &mut params, &mut residuals) {
            Step::Accepted { loss, .. } => {
                accepted_any = true;
                let train_value = loss / n_train;
                train_mse.push(train_value);
                let w = problem.weights(&params);
                let s = score(&w, train_value);
                if has_valid {
                    validation_mse.push(s);
                }
                if s < best.1 {
                    best = (epoch, s, params.clone());
                }
            }
            Step::Stalled { .. } => {
                if !accepted_any && initial_loss > T::zero() {
                    return Err(Error::DampingOverflow {
                        ceiling: config.lm_ceiling,
                    });
                }
                // the epoch changed nothing
                train_mse.push(*train_mse.last().unwrap());
                if has_valid {
                    validation_mse.push(*validation_mse.last().unwrap());
                }
                stop = StopReason::DampingCeiling;
                break;
            }
        }
    }

    Ok(TrainReport {
        surrogate: Surrogate {
            spec: spec.clone(),
            weights: problem.weights(&best.2),
            standardization,
        },
        train_mse,
        validation_mse,
        best_epoch: best.0,
        best_validation_mse: has_valid.then_some(best.1),
        epochs_run,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Sample;

    fn series(f: impl Fn(f64) -> f64, n: usize) -> Trajectory<f64> {
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 * 0.5;
                Sample { t, budget: 1.0, share: f(t) }
            })
            .collect();
        Trajectory::new(samples, "test").unwrap()
    }

    #[test]
    fn config_bounds() {
        assert!(TrainConfig::default().validate().is_ok());
        let zero = TrainConfig { max_epochs: 0, ..Default::default() };
        assert!(zero.validate().is_err());
        let inc = TrainConfig { lm_increase: 1.0, ..Default::default() };
        assert!(inc.validate().is_err());
        let dec = TrainConfig { lm_decrease: 1.0, ..Default::default() };
        assert!(dec.validate().is_err());
        let split = TrainConfig { validation_fraction: 0.6, ..Default::default() };
        assert!(split.validate().is_err());
    }

    #[test]
    fn constant_target() {
        let data = series(|_| 0.37, 30);
        let spec = MlpSpec::new(vec![4, 8]).unwrap();
        let cfg = TrainConfig { validation_fraction: 0.0, ..Default::default() };
        let report = lm_train(&spec, &data, &cfg).unwrap();
        assert!(*report.train_mse.last().unwrap() < 1e-10);
    }

    #[test]
    fn one_epoch_is_one_step() {
        let data = series(|t| 0.01 * t, 20);
        let spec = MlpSpec::new(vec![4, 8]).unwrap();
        let cfg = TrainConfig { max_epochs: 1, ..Default::default() };
        let report = lm_train(&spec, &data, &cfg).unwrap();
        assert_eq!(report.epochs_run, 1);
        assert_eq!(report.train_mse.len(), 2);
        assert_eq!(report.validation_mse.len(), 2);
    }

    #[test]
    fn reports_best_validation_epoch() {
        let data = series(|t| 0.2 + 0.05 * (0.3 * t).sin(), 60);
        let spec = MlpSpec::new(vec![4, 8]).unwrap();
        let cfg = TrainConfig { max_epochs: 60, ..Default::default() };
        let report = lm_train(&spec, &data, &cfg).unwrap();
        let min = report.validation_mse.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(report.best_validation_mse, Some(min));
        assert_eq!(report.validation_mse[report.best_epoch], min);
        assert!(report.train_mse.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn surrogate_json_roundtrip_is_exact() {
        let data = series(|t| 0.1 + 0.01 * t, 20);
        let spec = MlpSpec::new(vec![3, 4]).unwrap();
        let cfg = TrainConfig { max_epochs: 20, ..Default::default() };
        let s = lm_train(&spec, &data, &cfg).unwrap().surrogate;
        let back = Surrogate::<f64>::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        let bad = s.to_json().unwrap().replacen("\"hidden_widths\": [\n      3,", "\"hidden_widths\": [\n      5,", 1);
        assert!(Surrogate::<f64>::from_json(&bad).is_err());
    }

    #[test]
    fn hinge_start_reproduces_a_representable_spline() {
        // knots of a width-4 first layer sit at u = 0, 0.25, 0.5, 0.75
        let data = series(
            |t| {
                let u = t / 29.5;
                0.1 + 0.2 * u - 0.3 * (u - 0.5).max(0.0)
            },
            60,
        );
        let spec = MlpSpec::new(vec![4, 2]).unwrap();
        let cfg = TrainConfig {
            validation_fraction: 0.0,
            init: Init::Hinge,
            max_epochs: 5,
            ..Default::default()
        };
        let report = lm_train(&spec, &data, &cfg).unwrap();
        assert!(report.train_mse[0] < 1e-15, "{}", report.train_mse[0]);
        let glorot = lm_train(&spec, &data, &TrainConfig { init: Init::Glorot, ..cfg }).unwrap();
        assert!(glorot.train_mse[0] > report.train_mse[0]);
    }
}
