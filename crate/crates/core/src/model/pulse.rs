//! Rectangular-pulse response through the second-order expansion of
//! `(1 - x)^beta` around zero share.

use serde::{Deserialize, Serialize};

use super::GvwParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Constant budget `b0` on `[0, t_end]`, nothing afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec<T> {
    pub b0: T,
    pub t_end: T,
    pub x0: T,
}

impl<T: Scalar> PulseSpec<T> {
    pub fn new(b0: T, t_end: T, x0: T) -> Result<Self> {
        let spec = Self { b0, t_end, x0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, value: T, reason| Error::InvalidParameter {
            name,
            value: value.to_f64_lossy(),
            reason,
        };
        if !(self.b0 > T::zero() && self.b0.is_finite()) {
            return Err(bad("b0", self.b0, "must be > 0"));
        }
        if !(self.t_end > T::zero() && self.t_end.is_finite()) {
            return Err(bad("t_end", self.t_end, "must be > 0"));
        }
        if !(self.x0 >= T::zero() && self.x0 < T::one()) {
            return Err(bad("x0", self.x0, "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// `dx/dt = k1 x^2 + k2 x + k3` and its equilibrium in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticReduction<T> {
    pub k1: T,
    pub k2: T,
    pub k3: T,
    pub x_hat: T,
}

impl<T: Scalar> QuadraticReduction<T> {
    pub fn rate(&self, x: T) -> T {
        (self.k1 * x + self.k2) * x + self.k3
    }

    /// Linearization slope at the equilibrium, `2 k1 x_hat + k2`.
    pub fn slope(&self) -> T {
        T::lit(2.0) * self.k1 * self.x_hat + self.k2
    }
}

/// Coefficients `(k1, k2, k3)` of the second-order expansion of the rate
/// around `x = 0` at pulse level `b0`.
pub fn taylor_coefficients<T: Scalar>(params: &GvwParams<T>, b0: T) -> Result<(T, T, T)> {
    params.validate()?;
    if !(b0 > T::zero() && b0.is_finite()) {
        return Err(Error::Domain {
            what: "b0",
            value: b0.to_f64_lossy(),
            domain: "b0 > 0",
        });
    }
    let effort = params.effort(b0);
    let beta = params.beta;
    let k1 = effort * beta * (beta - T::one()) / T::lit(2.0);
    let k2 = -effort * beta - params.delta;
    Ok((k1, k2, effort))
}

/// Substitutes `(1 - x)^beta ~ 1 - beta x + beta (beta - 1) x^2 / 2` at constant budget.
///
/// When both roots fall in `[0, 1]` the smaller one is the attracting
/// equilibrium and is selected.
pub fn taylor_reduce<T: Scalar>(params: &GvwParams<T>, b0: T) -> Result<QuadraticReduction<T>> {
    let (k1, k2, k3) = taylor_coefficients(params, b0)?;
    let two = T::lit(2.0);
    let no_root = || Error::NoRootInUnitInterval {
        k1: k1.to_f64_lossy(),
        k2: k2.to_f64_lossy(),
        k3: k3.to_f64_lossy(),
    };

    let roots: Vec<T> = if k1 == T::zero() {
        if k2 == T::zero() {
            return Err(no_root());
        }
        vec![-k3 / k2]
    } else {
        let disc = k2 * k2 - T::lit(4.0) * k1 * k3;
        if disc < T::zero() {
            return Err(no_root());
        }
        let sq = disc.sqrt();
        let q = -(k2 + k2.signum() * sq) / two;
        if q == T::zero() {
            vec![T::zero()]
        } else {
            vec![q / k1, k3 / q]
        }
    };

    let slack = T::epsilon() * T::lit(16.0);
    let x_hat = roots
        .into_iter()
        .filter(|r| r.is_finite() && *r >= -slack && *r <= T::one() + slack)
        .fold(None, |best: Option<T>, r| Some(best.map_or(r, |b| b.min(r))))
        .ok_or_else(no_root)?;
    Ok(QuadraticReduction {
        k1,
        k2,
        k3,
        x_hat: x_hat.max(T::zero()).min(T::one()),
    })
}

/// Market share under a rectangular pulse.
///
/// Within the pulse the quadratic reduction is solved as a Bernoulli equation
/// around `x_hat`; after it the share decays as `x(T) e^{-delta (t - T)}`.
pub fn pulse_response<T: Scalar>(params: &GvwParams<T>, pulse: &PulseSpec<T>, t: T) -> Result<T> {
    pulse.validate()?;
    if !(t >= T::zero()) {
        return Err(Error::Domain {
            what: "t",
            value: t.to_f64_lossy(),
            domain: "t >= 0",
        });
    }
    let red = taylor_reduce(params, pulse.b0)?;
    if t <= pulse.t_end {
        in_pulse(&red, pulse.x0, t)
    } else {
        let at_end = in_pulse(&red, pulse.x0, pulse.t_end)?;
        Ok(at_end * (-params.delta * (t - pulse.t_end)).exp())
    }
}

fn in_pulse<T: Scalar>(red: &QuadraticReduction<T>, x0: T, t: T) -> Result<T> {
    let x_hat = red.x_hat;
    let offset = x0 - x_hat;
    if offset == T::zero() {
        return Ok(x_hat);
    }
    if red.k1 == T::zero() {
        return Ok(x_hat + offset * (red.k2 * t).exp());
    }
    let lambda = red.slope();
    if lambda.abs() <= T::epsilon() * T::lit(16.0) * (red.k2.abs() + red.k1.abs()) {
        // double root: the closed form degenerates
        return Ok(integrate_quadratic(red, x0, t, T::lit(1e-3)));
    }
    // z = 1 / w with w' = -lambda w - k1; written so the exponential never overflows
    let ratio = red.k1 / lambda;
    let z = if lambda < T::zero() {
        let decay = (lambda * t).exp();
        let denom = ratio * (T::one() - decay) + T::one() / offset;
        decay / denom
    } else {
        let grow = (-lambda * t).exp();
        let w = ratio * (grow - T::one()) + grow / offset;
        T::one() / w
    };
    if !z.is_finite() {
        return Err(Error::SingularPulse { t: t.to_f64_lossy() });
    }
    Ok(x_hat + z)
}

/// Classical RK4 on the quadratic reduction with step at most `max_step`.
pub fn integrate_quadratic<T: Scalar>(red: &QuadraticReduction<T>, x0: T, t: T, max_step: T) -> T {
    if t <= T::zero() {
        return x0;
    }
    let n = (t / max_step).ceil().to_usize().unwrap_or(1).max(1);
    let h = t / T::from_usize_lossy(n);
    let half = h * T::lit(0.5);
    let mut x = x0;
    for _ in 0..n {
        let k1 = red.rate(x);
        let k2 = red.rate(x + half * k1);
        let k3 = red.rate(x + half * k2);
        let k4 = red.rate(x + h * k3);
        x += h / T::lit(6.0) * (k1 + T::lit(2.0) * (k2 + k3) + k4);
    }
    x
}
