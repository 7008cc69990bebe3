//! Parameter estimation from an observed share series.
//!
//! Both paths reduce the problem to matching observed rates: given share
//! estimates `y_l` and rates `dy_l` at the sample times, minimize
//!
//! ```text
//! sum_l (dy_l - [rho b_l^alpha (1 - y_l)^beta - delta y_l])^2
//! ```
//!
//! over box-bounded `(rho, alpha, beta, delta)`. [`fit_gvw`] takes `y` and
//! `dy` from a trained surrogate network, [`fit_gvw_fd`] from finite
//! differences of the raw shares.

mod rates;

pub use rates::{central_differences, segmented_differences, rate_residuals, RateObservation, RateProblem};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{minimize, DampingScaling, LeastSquares, LmConfig, Termination};
use crate::model::GvwParams;
use crate::surrogate::{lm_train, Init, MlpSpec, TrainConfig, TrainReport};
use crate::trajectory::Trajectory;

/// Budget coefficient of variation below which `alpha` cannot be separated
/// from `rho`.
pub const IDENTIFIABILITY_CV: f64 = 1e-3;

/// Value `alpha` is pinned to when it is not identifiable.
pub const PINNED_ALPHA: f64 = 1.0;

/// Box constraints on `(rho, alpha, beta, delta)`, in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub lower: [f64; 4],
    pub upper: [f64; 4],
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            lower: [1e-8, 0.05, 0.0, -1.0],
            upper: [10.0, 2.0, 2.0, 1.0],
        }
    }
}

impl ParamBounds {
    pub fn validate(&self) -> Result<()> {
        for i in 0..4 {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParameter {
                    name: PARAM_NAMES[i],
                    value: lo,
                    reason: "bounds must be finite with lower <= upper",
                });
            }
        }
        if !(self.lower[0] > 0.0 && self.lower[1] > 0.0 && self.upper[1] <= 2.0) {
            return Err(Error::InvalidParameter {
                name: "bounds",
                value: self.lower[0],
                reason: "need rho > 0 and alpha in (0, 2]",
            });
        }
        if !(self.lower[2] >= 0.0 && self.upper[2] <= 2.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: self.lower[2],
                reason: "bounds must lie in [0, 2]",
            });
        }
        Ok(())
    }

    pub fn contains(&self, p: &[f64; 4]) -> bool {
        (0..4).all(|i| self.lower[i] <= p[i] && p[i] <= self.upper[i])
    }
}

const PARAM_NAMES: [&str; 4] = ["rho", "alpha", "beta", "delta"];

pub(crate) fn to_array(p: &GvwParams<f64>) -> [f64; 4] {
    [p.rho, p.alpha, p.beta, p.delta]
}

pub(crate) fn from_slice(v: &[f64]) -> GvwParams<f64> {
    GvwParams {
        rho: v[0],
        alpha: v[1],
        beta: v[2],
        delta: v[3],
    }
}

/// Stopping rules for the rate fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub gradient_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            step_tolerance: 1e-10,
            gradient_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlsSolution {
    pub params: GvwParams<f64>,
    /// Final sum of squared residuals.
    pub loss: f64,
    /// Sum of squares at the start and after every accepted step.
    pub history: Vec<f64>,
    pub iterations: usize,
}

struct Bounded<'a, P: ?Sized> {
    inner: &'a P,
    bounds: &'a ParamBounds,
}

impl<P: LeastSquares<f64> + ?Sized> LeastSquares<f64> for Bounded<'_, P> {
    fn n_params(&self) -> usize {
        4
    }

    fn residuals(&self, params: &[f64]) -> Vec<f64> {
        self.inner.residuals(params)
    }

    fn jacobian(&self, params: &[f64]) -> Vec<f64> {
        self.inner.jacobian(params)
    }

    fn bounds(&self) -> Option<(&[f64], &[f64])> {
        Some((&self.bounds.lower, &self.bounds.upper))
    }
}

/// Bounded Levenberg-Marquardt on a four-parameter residual function.
pub fn nls_solve<P>(residual_fn: &P, start: GvwParams<f64>, bounds: &ParamBounds, options: &SolverOptions) -> Result<NlsSolution>
where
    P: LeastSquares<f64> + ?Sized,
{
    bounds.validate()?;
    let start = to_array(&start);
    if !bounds.contains(&start) {
        return Err(Error::InvalidParameter {
            name: "start",
            value: start[0],
            reason: "starting point lies outside the bounds",
        });
    }
    let problem = Bounded {
        inner: residual_fn,
        bounds,
    };
    let config = LmConfig {
        scaling: DampingScaling::Diagonal,
        ..LmConfig::default()
    };
    let stop = Termination {
        max_iterations: options.max_iterations,
        step_tolerance: options.step_tolerance,
        gradient_tolerance: options.gradient_tolerance,
    };
    let m = minimize(&problem, start.to_vec(), config, stop)?;
    Ok(NlsSolution {
        params: from_slice(&m.params),
        loss: m.loss,
        history: m.history,
        iterations: m.iterations,
    })
}

/// Everything needed to fit one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationProblem {
    pub data: Trajectory<f64>,
    pub bounds: ParamBounds,
    pub surrogate_spec: MlpSpec,
    pub train_config: TrainConfig,
    pub multistart_count: usize,
    /// Seeds the Latin-hypercube starts.
    pub seed: u64,
    pub solver: SolverOptions,
}

impl EstimationProblem {
    /// Default bounds, 16 starts and a `1-64-2-1` surrogate started from a
    /// linear spline and trained on every sample.
    pub fn new(data: Trajectory<f64>) -> Self {
        Self {
            data,
            bounds: ParamBounds::default(),
            surrogate_spec: MlpSpec::new(vec![64, 2]).expect("valid widths"),
            train_config: TrainConfig {
                validation_fraction: 0.0,
                init: Init::Hinge,
                ..TrainConfig::default()
            },
            multistart_count: 16,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        self.surrogate_spec.validate()?;
        self.train_config.validate()?;
        if self.multistart_count == 0 {
            return Err(Error::InvalidParameter {
                name: "multistart_count",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        self.data.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dnn,
    Fd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartStatus {
    Converged,
    /// Finished with a parameter on its bound.
    HitBound,
    /// Non-finite loss or solver failure.
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub index: usize,
    pub start: GvwParams<f64>,
    pub params: GvwParams<f64>,
    pub start_loss: f64,
    pub loss: f64,
    pub iterations: usize,
    pub status: StartStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: GvwParams<f64>,
    /// Mean squared rate residual at `params`.
    pub residual_mse: f64,
    pub method: Method,
    /// `false` when the budget barely varies; `alpha` is then pinned.
    pub alpha_identifiable: bool,
    pub surrogate_report: Option<TrainReport<f64>>,
    pub starts_tried: usize,
    pub starts: Vec<StartOutcome>,
    /// Share and rate estimates the parameters were fitted to.
    pub observations: Vec<RateObservation>,
}

impl FitReport {
    /// Index of the start whose result was reported.
    pub fn best_start(&self) -> Option<usize> {
        select_best(&self.starts)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let surrogate = self.surrogate_report.as_ref().map(|r| {
            serde_json::json!({
                "spec": r.surrogate.spec,
                "best_epoch": r.best_epoch,
                "val_mse": r.best_validation_mse,
                "train_mse": r.train_mse.get(r.best_epoch),
                "epochs_run": r.epochs_run,
                "stop": r.stop,
            })
        });
        serde_json::json!({
            "rho": self.params.rho,
            "alpha": self.alpha_identifiable.then_some(self.params.alpha),
            "beta": self.params.beta,
            "delta": self.params.delta,
            "mse": self.residual_mse,
            "method": self.method,
            "alpha_identifiable": self.alpha_identifiable,
            "starts": self.starts_tried,
            "start_outcomes": self.starts,
            "surrogate": surrogate,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json_value())?)
    }

    /// `rho alpha beta delta mse`, the parameter-table column order.
    pub fn table_row(&self) -> String {
        let alpha = if self.alpha_identifiable {
            format!("{:.3e}", self.params.alpha)
        } else {
            "n/a".to_string()
        };
        format!(
            "{:.3e}  {}  {:.3e}  {:.3e}  {:.3e}",
            self.params.rho, alpha, self.params.beta, self.params.delta, self.residual_mse
        )
    }
}

/// Coefficient of variation of the budget column.
pub fn budget_cv(data: &Trajectory<f64>) -> f64 {
    let b = data.budgets();
    let n = b.len() as f64;
    let mean = b.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    let var = b.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean.abs()
}

/// Latin-hypercube starting points, `rho` stratified on a log scale.
pub fn latin_hypercube_starts(bounds: &ParamBounds, count: usize, seed: u64) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(4);
    for dim in 0..4 {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(&mut rng);
        let (lo, hi) = (bounds.lower[dim], bounds.upper[dim]);
        let col = strata
            .into_iter()
            .map(|s| {
                let u = (s as f64 + rng.random::<f64>()) / count as f64;
                if dim == 0 {
                    (lo.ln() + u * (hi.ln() - lo.ln())).exp().clamp(lo, hi)
                } else {
                    lo + u * (hi - lo)
                }
            })
            .collect();
        columns.push(col);
    }
    (0..count)
        .map(|i| [columns[0][i], columns[1][i], columns[2][i], columns[3][i]])
        .collect()
}

fn select_best(starts: &[StartOutcome]) -> Option<usize> {
    starts
        .iter()
        .filter(|s| s.status == StartStatus::Converged)
        .fold(None::<&StartOutcome>, |best, s| match best {
            Some(b) if b.loss <= s.loss => Some(b),
            _ => Some(s),
        })
        .map(|s| s.index)
}

fn on_bound(p: &[f64; 4], bounds: &ParamBounds, pinned_alpha: bool) -> bool {
    (0..4).any(|i| {
        if i == 1 && pinned_alpha {
            return false;
        }
        let (lo, hi) = (bounds.lower[i], bounds.upper[i]);
        let tol = 1e-9 * (hi - lo).max(1e-300);
        p[i] <= lo + tol || p[i] >= hi - tol
    })
}

/// Multistart rate fit shared by both estimation paths.
pub fn fit_rates(
    observations: Vec<RateObservation>,
    bounds: &ParamBounds,
    multistart_count: usize,
    seed: u64,
    options: &SolverOptions,
    alpha_identifiable: bool,
) -> Result<(Vec<StartOutcome>, GvwParams<f64>, f64)> {
    bounds.validate()?;
    let mut bounds = *bounds;
    if !alpha_identifiable {
        bounds.lower[1] = PINNED_ALPHA;
        bounds.upper[1] = PINNED_ALPHA;
    }
    let problem = RateProblem::new(observations, !alpha_identifiable)?;
    let starts = latin_hypercube_starts(&bounds, multistart_count, seed);

    let outcomes: Vec<StartOutcome> = starts
        .par_iter()
        .enumerate()
        .map(|(index, start)| {
            let start_params = from_slice(start);
            let start_loss = crate::lm::sum_sq(&problem.residuals(start));
            match nls_solve(&problem, start_params, &bounds, options) {
                Ok(sol) => {
                    let status = if !sol.loss.is_finite() {
                        StartStatus::Diverged
                    } else if on_bound(&to_array(&sol.params), &bounds, !alpha_identifiable) {
                        StartStatus::HitBound
                    } else {
                        StartStatus::Converged
                    };
                    StartOutcome {
                        index,
                        start: start_params,
                        params: sol.params,
                        start_loss,
                        loss: sol.loss,
                        iterations: sol.iterations,
                        status,
                    }
                }
                Err(_) => StartOutcome {
                    index,
                    start: start_params,
                    params: start_params,
                    start_loss,
                    loss: f64::NAN,
                    iterations: 0,
                    status: StartStatus::Diverged,
                },
            }
        })
        .collect();

    match select_best(&outcomes) {
        Some(i) => {
            let best = &outcomes[i];
            Ok((outcomes.clone(), best.params, best.loss))
        }
        None => {
            let diagnostics = outcomes
                .iter()
                .map(|o| {
                    format!(
                        "#{} {:?} loss={:e} at (rho={:e}, alpha={}, beta={}, delta={:e})",
                        o.index, o.status, o.loss, o.params.rho, o.params.alpha, o.params.beta, o.params.delta
                    )
                })
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::AllStartsFailed {
                starts: outcomes.len(),
                diagnostics,
            })
        }
    }
}

fn finish(
    observations: Vec<RateObservation>,
    problem: &EstimationProblem,
    method: Method,
    surrogate_report: Option<TrainReport<f64>>,
) -> Result<FitReport> {
    let alpha_identifiable = budget_cv(&problem.data) >= IDENTIFIABILITY_CV;
    let n = observations.len() as f64;
    let (starts, params, loss) = fit_rates(
        observations.clone(),
        &problem.bounds,
        problem.multistart_count,
        problem.seed,
        &problem.solver,
        alpha_identifiable,
    )?;
    Ok(FitReport {
        params,
        residual_mse: loss / n,
        method,
        alpha_identifiable,
        surrogate_report,
        starts_tried: starts.len(),
        starts,
        observations,
    })
}

/// Trains the surrogate on the share series, reads shares and rates off it
/// at the sample times and fits the rate equation.
pub fn fit_gvw(problem: &EstimationProblem) -> Result<FitReport> {
    problem.validate()?;
    if problem.data.len() < 10 {
        return Err(Error::TooFewPoints {
            required: 10,
            got: problem.data.len(),
        });
    }
    let report = lm_train(&problem.surrogate_spec, &problem.data, &problem.train_config)?;
    let net = &report.surrogate;
    let observations = problem
        .data
        .samples()
        .iter()
        .map(|s| {
            let (y, dy) = net.predict_with_rate(s.t);
            RateObservation {
                t: s.t,
                rate: dy,
                share: y.clamp(0.0, 1.0),
                budget: s.budget,
            }
        })
        .collect();
    finish(observations, problem, Method::Dnn, Some(report))
}

/// Same rate fit with rates from finite differences of the observed shares.
pub fn fit_gvw_fd(problem: &EstimationProblem) -> Result<FitReport> {
    problem.validate()?;
    if problem.data.len() < 3 {
        return Err(Error::TooFewPoints {
            required: 3,
            got: problem.data.len(),
        });
    }
    let times = problem.data.times();
    let shares = problem.data.shares();
    let rates = segmented_differences(&times, &shares, &problem.data.budgets())?;
    let observations = problem
        .data
        .samples()
        .iter()
        .zip(rates)
        .map(|(s, rate)| RateObservation {
            t: s.t,
            rate,
            share: s.share,
            budget: s.budget,
        })
        .collect();
    finish(observations, problem, Method::Fd, None)
}
