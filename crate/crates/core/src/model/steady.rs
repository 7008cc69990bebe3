use serde::{Deserialize, Serialize};

use super::GvwParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A share/budget pair at which the response rate vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState<T> {
    pub x_bar: T,
    pub b_bar: T,
}

impl<T: Scalar> SteadyState<T> {
    pub fn from_share(params: &GvwParams<T>, x_bar: T) -> Result<Self> {
        Ok(Self {
            x_bar,
            b_bar: steady_budget(params, x_bar)?,
        })
    }

    pub fn from_budget(params: &GvwParams<T>, b_bar: T) -> Result<Self> {
        Ok(Self {
            x_bar: steady_share(params, b_bar)?,
            b_bar,
        })
    }
}

fn require_positive_decay<T: Scalar>(params: &GvwParams<T>) -> Result<()> {
    params.validate()?;
    if params.delta > T::zero() {
        Ok(())
    } else {
        Err(Error::NoSteadyState(format!(
            "decay index {} <= 0, no positive steady budget exists",
            params.delta
        )))
    }
}

/// Budget that holds the share at `x_bar`:
/// `[delta x_bar / (rho (1 - x_bar)^beta)]^(1 / alpha)`.
pub fn steady_budget<T: Scalar>(params: &GvwParams<T>, x_bar: T) -> Result<T> {
    require_positive_decay(params)?;
    if !(x_bar > T::zero() && x_bar < T::one()) {
        return Err(Error::Domain {
            what: "x_bar",
            value: x_bar.to_f64_lossy(),
            domain: "(0, 1)",
        });
    }
    let ratio = params.delta * x_bar / (params.rho * params.untapped(x_bar));
    Ok(ratio.powf(T::one() / params.alpha))
}

/// Share held by a constant budget `b_bar`, by bisection on the rate.
pub fn steady_share<T: Scalar>(params: &GvwParams<T>, b_bar: T) -> Result<T> {
    require_positive_decay(params)?;
    if !(b_bar > T::zero() && b_bar.is_finite()) {
        return Err(Error::Domain {
            what: "b_bar",
            value: b_bar.to_f64_lossy(),
            domain: "b_bar > 0",
        });
    }
    let effort = params.effort(b_bar);
    let rate = |x: T| effort * params.untapped(x) - params.delta * x;
    if rate(T::one()) >= T::zero() {
        return Err(Error::NoSteadyState(format!(
            "share saturates at 1 for budget {b_bar} (beta = {})",
            params.beta
        )));
    }
    Ok(bisect_decreasing(rate, T::zero(), T::one()))
}

/// Share `x` with `delta x = rho (1 - x)^beta`, where the sign of the
/// steady-share response to `alpha` flips.
pub fn elasticity_threshold<T: Scalar>(params: &GvwParams<T>) -> Result<T> {
    require_positive_decay(params)?;
    let f = |x: T| params.rho * params.untapped(x) - params.delta * x;
    if f(T::one()) >= T::zero() {
        return Err(Error::NoSteadyState(format!(
            "no threshold in (0, 1) for beta = {}",
            params.beta
        )));
    }
    Ok(bisect_decreasing(f, T::zero(), T::one()))
}

/// Root of `f` on `[lo, hi]` given `f(lo) > 0 >= f(hi)`, to float resolution.
pub(crate) fn bisect_decreasing<T: Scalar>(f: impl Fn(T) -> T, mut lo: T, mut hi: T) -> T {
    for _ in 0..2000 {
        let mid = lo + (hi - lo) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo + (hi - lo) * T::lit(0.5)
}

/// Long-run share under constant budget `b` starting from `x0`, found by
/// integrating until the rate vanishes. Works for any sign of `delta`.
pub fn settle<T: Scalar>(params: &GvwParams<T>, b: T, x0: T) -> Result<T> {
    if params.delta > T::zero() && b > T::zero() {
        return steady_share(params, b);
    }
    params.validate()?;
    let effort = params.effort(b);
    let stiffness = effort * params.beta.max(T::one()) + params.delta.abs();
    if stiffness == T::zero() {
        return Ok(x0);
    }
    let h = T::lit(0.5) / stiffness;
    let half = h * T::lit(0.5);
    let f = |x: T| params.rate_unchecked(b, x.max(T::zero()).min(T::one()));
    let mut x = x0;
    let tol = T::tol(1e-12);
    for _ in 0..5_000_000 {
        let k1 = f(x);
        let pinned = (x >= T::one() && k1 >= T::zero()) || (x <= T::zero() && k1 <= T::zero());
        if pinned || k1.abs() <= tol * stiffness {
            return Ok(x);
        }
        let k2 = f(x + half * k1);
        let k3 = f(x + half * k2);
        let k4 = f(x + h * k3);
        x += h / T::lit(6.0) * (k1 + T::lit(2.0) * (k2 + k3) + k4);
        x = x.max(T::zero()).min(T::one());
    }
    Err(Error::IntegrationNotConverged {
        tolerance: 1e-12,
        refinements: 0,
        difference: f(x).abs().to_f64_lossy(),
    })
}
