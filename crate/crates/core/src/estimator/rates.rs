use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::LeastSquares;
use crate::model::{check_share, GvwParams};

/// Share estimate, its time derivative and the budget at one sample time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateObservation {
    pub t: f64,
    pub rate: f64,
    pub share: f64,
    pub budget: f64,
}

fn check(obs: &[RateObservation]) -> Result<()> {
    for o in obs {
        check_share("share", o.share)?;
        if !(o.budget >= 0.0 && o.budget.is_finite()) {
            return Err(Error::Domain {
                what: "budget",
                value: o.budget,
                domain: "b >= 0",
            });
        }
        if !o.rate.is_finite() {
            return Err(Error::NonFiniteRate { t: o.t });
        }
    }
    Ok(())
}

fn residual(p: &GvwParams<f64>, o: &RateObservation) -> f64 {
    o.rate - p.rate_unchecked(o.budget, o.share)
}

/// `rate_l - [rho b_l^alpha (1 - share_l)^beta - delta share_l]` per observation.
pub fn rate_residuals(params: &GvwParams<f64>, obs: &[RateObservation]) -> Result<Vec<f64>> {
    params.validate()?;
    check(obs)?;
    Ok(obs.iter().map(|o| residual(params, o)).collect())
}

/// Rate residuals as a least-squares problem in `(rho, alpha, beta, delta)`.
///
/// With `pin_alpha` the `alpha` column of the Jacobian is zero, so the
/// solver never moves it.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProblem {
    obs: Vec<RateObservation>,
    pin_alpha: bool,
}

impl RateProblem {
    pub fn new(obs: Vec<RateObservation>, pin_alpha: bool) -> Result<Self> {
        check(&obs)?;
        if obs.is_empty() {
            return Err(Error::TooFewPoints { required: 1, got: 0 });
        }
        Ok(Self { obs, pin_alpha })
    }

    pub fn observations(&self) -> &[RateObservation] {
        &self.obs
    }
}

impl LeastSquares<f64> for RateProblem {
    fn n_params(&self) -> usize {
        4
    }

    fn residuals(&self, params: &[f64]) -> Vec<f64> {
        let p = super::from_slice(params);
        self.obs.iter().map(|o| residual(&p, o)).collect()
    }

    fn jacobian(&self, params: &[f64]) -> Vec<f64> {
        let p = super::from_slice(params);
        let mut jac = Vec::with_capacity(4 * self.obs.len());
        for o in &self.obs {
            let untapped_share = 1.0 - o.share;
            // rho b^alpha (1 - x)^beta
            let gain = p.effort(o.budget) * p.untapped(o.share);
            let d_rho = if o.budget > 0.0 {
                -o.budget.powf(p.alpha) * p.untapped(o.share)
            } else {
                0.0
            };
            // b^alpha ln b -> 0 as b -> 0, u^beta ln u -> 0 as u -> 0
            let d_alpha = if o.budget > 0.0 && !self.pin_alpha {
                -gain * o.budget.ln()
            } else {
                0.0
            };
            let d_beta = if untapped_share > 0.0 {
                -gain * untapped_share.ln()
            } else {
                0.0
            };
            jac.extend_from_slice(&[d_rho, d_alpha, d_beta, o.share]);
        }
        jac
    }
}

/// Like [`central_differences`], but a change of budget between two samples
/// is treated as a series end: within each run of equal budget of at least
/// three samples the one-sided formulas apply at the run edges, so no
/// difference straddles a jump in the rate. Shorter runs keep the plain
/// central estimates.
pub fn segmented_differences(times: &[f64], values: &[f64], budgets: &[f64]) -> Result<Vec<f64>> {
    let mut out = central_differences(times, values)?;
    if budgets.len() != times.len() {
        return Err(Error::ShapeMismatch(format!("{} times for {} budgets", times.len(), budgets.len())));
    }
    let mut start = 0;
    while start < times.len() {
        let mut end = start + 1;
        while end < times.len() && budgets[end] == budgets[start] {
            end += 1;
        }
        if end - start >= 3 && end - start < times.len() {
            let run = central_differences(&times[start..end], &values[start..end])?;
            out[start..end].copy_from_slice(&run);
        }
        start = end;
    }
    Ok(out)
}

/// Derivative estimates of `values` sampled at increasing `times`: the
/// three-point central formula inside (exact for quadratics on any
/// spacing) and three-point one-sided formulas at the ends.
pub fn central_differences(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let n = times.len();
    if n != values.len() {
        return Err(Error::ShapeMismatch(format!("{n} times for {} values", values.len())));
    }
    if n < 3 {
        return Err(Error::TooFewPoints { required: 3, got: n });
    }
    if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::TimeGrid { index: i + 1 });
    }
    // derivative at `at` of the quadratic through three points
    let three_point = |i: usize, at: f64| {
        let (t0, t1, t2) = (times[i], times[i + 1], times[i + 2]);
        let (y0, y1, y2) = (values[i], values[i + 1], values[i + 2]);
        let l0 = (2.0 * at - t1 - t2) / ((t0 - t1) * (t0 - t2));
        let l1 = (2.0 * at - t0 - t2) / ((t1 - t0) * (t1 - t2));
        let l2 = (2.0 * at - t0 - t1) / ((t2 - t0) * (t2 - t1));
        l0 * y0 + l1 * y1 + l2 * y2
    };
    let mut out = Vec::with_capacity(n);
    out.push(three_point(0, times[0]));
    for i in 1..n - 1 {
        out.push(three_point(i - 1, times[i]));
    }
    out.push(three_point(n - 3, times[n - 1]));
    Ok(out)
}
