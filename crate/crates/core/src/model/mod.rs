//! The generalized Vidale-Wolfe response dynamics
//!
//! ```text
//! dx/dt = rho * b^alpha * (1 - x)^beta - delta * x
//! ```
//!
//! with `x` the market share and `b` the advertising budget rate.

mod budget;
mod integrate;
mod pulse;
mod steady;
mod sweep;

pub use budget::{Budget, ConstantBudget, PiecewiseConstant, PulseTrain};
pub use integrate::{simulate, simulate_with, IntegratorConfig};
pub use pulse::{
    integrate_quadratic, pulse_response, taylor_coefficients, taylor_reduce, PulseSpec, QuadraticReduction};
pub use steady::{elasticity_threshold, settle, steady_budget, steady_share, SteadyState};
pub use sweep::{
    classify_shape, log_spaced, sensitivity_sweep, CurveShape, SweepCurve, SweepIndex,
    SHAPE_TOLERANCE,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Model indexes `(rho, alpha, beta, delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GvwParams<T> {
    /// Ad effectiveness, > 0.
    pub rho: T,
    /// Ad elasticity exponent on the budget, in (0, 2].
    pub alpha: T,
    /// Word-of-mouth exponent on the untapped market, in [0, 2].
    pub beta: T,
    /// Decay index. Negative values are accepted for dynamics only.
    pub delta: T,
}

impl<T: Scalar> GvwParams<T> {
    pub fn new(rho: T, alpha: T, beta: T, delta: T) -> Result<Self> {
        let p = Self {
            rho,
            alpha,
            beta,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, value: T, reason| Error::InvalidParameter {
            name,
            value: value.to_f64_lossy(),
            reason,
        };
        if !(self.rho.is_finite() && self.rho > T::zero()) {
            return Err(bad("rho", self.rho, "must be finite and > 0"));
        }
        if !(self.alpha > T::zero() && self.alpha <= T::lit(2.0)) {
            return Err(bad("alpha", self.alpha, "must lie in (0, 2]"));
        }
        if !(self.beta >= T::zero() && self.beta <= T::lit(2.0)) {
            return Err(bad("beta", self.beta, "must lie in [0, 2]"));
        }
        if !self.delta.is_finite() {
            return Err(bad("delta", self.delta, "must be finite"));
        }
        Ok(())
    }

    /// Effective advertising effort `rho * b^alpha`, with `0^alpha = 0`.
    #[inline]
    pub fn effort(&self, b: T) -> T {
        if b <= T::zero() {
            T::zero()
        } else {
            self.rho * b.powf(self.alpha)
        }
    }

    /// Untapped-market factor `(1 - x)^beta`; `0^0 = 1`.
    #[inline]
    pub fn untapped(&self, x: T) -> T {
        let rest = T::one() - x;
        if rest <= T::zero() {
            if self.beta == T::zero() {
                T::one()
            } else {
                T::zero()
            }
        } else {
            rest.powf(self.beta)
        }
    }

    /// Rate without domain checks; callers guarantee `b >= 0` and `x` in `[0, 1]`.
    #[inline]
    pub(crate) fn rate_unchecked(&self, b: T, x: T) -> T {
        self.effort(b) * self.untapped(x) - self.delta * x
    }
}

/// Instantaneous share change `rho * b^alpha * (1 - x)^beta - delta * x`.
pub fn response_rate<T: Scalar>(params: &GvwParams<T>, b: T, x: T) -> Result<T> {
    if !(b >= T::zero()) || !b.is_finite() {
        return Err(Error::Domain {
            what: "budget",
            value: b.to_f64_lossy(),
            domain: "b >= 0",
        });
    }
    check_share("share", x)?;
    Ok(params.rate_unchecked(b, x))
}

/// `1 - x + 2 (1 - beta) x (1 - x)`, the word-of-mouth approximation of
/// `(1 - x)^beta`. Kept for comparison only; the dynamics use the exact power.
pub fn wom_approximation<T: Scalar>(beta: T, x: T) -> T {
    let one = T::one();
    one - x + T::lit(2.0) * (one - beta) * x * (one - x)
}

pub(crate) fn check_share<T: Scalar>(what: &'static str, x: T) -> Result<()> {
    if x >= T::zero() && x <= T::one() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: x.to_f64_lossy(),
            domain: "[0, 1]",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vw() -> GvwParams<f64> {
        GvwParams::new(0.1, 1.0, 1.0, 0.01).unwrap()
    }

    #[test]
    fn rate_at_zero_share_is_pure_effort() {
        assert_relative_eq!(response_rate(&vw(), 1.0, 0.0).unwrap(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn rate_without_budget_is_decay() {
        assert_relative_eq!(response_rate(&vw(), 0.0, 0.5).unwrap(), -0.005, epsilon = 1e-15);
    }

    #[test]
    fn rate_google_row_matches_high_precision_oracle() {
        // Term-by-term evaluation in 50-digit arithmetic:
        //   100^0.422 = 6.98232404077171...
        //   0.8^0.948 = 0.80933683680327...
        //   rate = 9.537e-4 * 6.998.. * 0.8096.. + 3.556e-4 * 0.2
        let p = GvwParams::new(9.537e-4, 0.422, 0.948, -3.556e-4).unwrap();
        let got = response_rate(&p, 100.0, 0.2).unwrap();
        assert_relative_eq!(got, 5.460_528_342_653_908e-3, max_relative = 1e-13);
    }

    #[test]
    fn boundary_conventions() {
        let p = GvwParams::new(0.1, 0.5, 0.0, 0.01).unwrap();
        // beta = 0: (1 - 1)^0 = 1
        assert_relative_eq!(response_rate(&p, 4.0, 1.0).unwrap(), 0.2 - 0.01);
        let q = GvwParams::<f64>::new(0.1, 0.5, 0.7, 0.01).unwrap();
        assert_relative_eq!(response_rate(&q, 4.0, 1.0).unwrap(), -0.01);
        // alpha < 1 at zero budget: no infinite marginal response, rate is finite
        assert!(response_rate(&q, 0.0, 0.0).unwrap().is_finite());
    }

    #[test]
    fn rate_rejects_out_of_domain_inputs() {
        assert!(response_rate(&vw(), -1.0, 0.5).is_err());
        assert!(response_rate(&vw(), 1.0, 1.5).is_err());
        assert!(response_rate(&vw(), 1.0, -0.1).is_err());
        assert!(response_rate(&vw(), f64::NAN, 0.1).is_err());
    }

    #[test]
    fn params_bounds() {
        assert!(GvwParams::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(GvwParams::new(0.1, 0.0, 1.0, 0.0).is_err());
        assert!(GvwParams::new(0.1, 2.5, 1.0, 0.0).is_err());
        assert!(GvwParams::new(0.1, 1.0, -0.1, 0.0).is_err());
        assert!(GvwParams::new(0.1, 1.0, 2.0, -0.5).is_ok());
    }

    #[test]
    fn wom_form() {
        assert_relative_eq!(wom_approximation(1.0, 0.3), 0.7);
        assert_relative_eq!(wom_approximation(0.37, 0.0), 1.0);
        assert_relative_eq!(wom_approximation(0.5, 0.5), 0.75);
    }

    #[test]
    fn generic_over_f32() {
        let p = GvwParams::<f32>::new(0.1, 1.0, 1.0, 0.01).unwrap();
        assert!((response_rate(&p, 1.0f32, 0.0).unwrap() - 0.1).abs() < 1e-7);
    }
}
