use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{settle, steady_share, GvwParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Second divided differences within this band count as zero.
pub const SHAPE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepIndex {
    Alpha,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveShape {
    Concave,
    SShaped,
    Undetermined,
}

impl CurveShape {
    pub fn label(self) -> &'static str {
        match self {
            CurveShape::Concave => "concave",
            CurveShape::SShaped => "s-shaped",
            CurveShape::Undetermined => "undetermined",
        }
    }
}

/// Steady response to each budget for one value of the swept index.
#[derive(Debug)]
pub struct SweepCurve<T> {
    pub index: SweepIndex,
    pub value: T,
    /// `(budget, share)` pairs, or the error that stopped this curve.
    pub points: Result<Vec<(T, T)>>,
}

impl<T: Scalar> SweepCurve<T> {
    /// Shape of the response against log budget.
    pub fn shape(&self) -> Result<CurveShape> {
        match &self.points {
            Ok(points) => {
                let logged: Vec<(T, T)> = points.iter().map(|&(b, x)| (b.ln(), x)).collect();
                classify_shape(&logged)
            }
            Err(e) => Err(Error::Training(format!("curve unavailable: {e}"))),
        }
    }
}

/// `n` points evenly spaced in log between `lo` and `hi` inclusive.
pub fn log_spaced<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    assert!(lo > T::zero() && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    let last = T::from_usize_lossy(n - 1);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * T::from_usize_lossy(i) / last).exp()
            }
        })
        .collect()
}

/// Steady-state share across `budget_grid` for each value of `vary`.
///
/// Curves come back in the order of `values`; a failing curve keeps its
/// error and the rest of the sweep continues.
pub fn sensitivity_sweep<T: Scalar>(
    base: &GvwParams<T>,
    vary: SweepIndex,
    values: &[T],
    budget_grid: &[T],
) -> Vec<SweepCurve<T>> {
    values
        .par_iter()
        .map(|&value| {
            let params = match vary {
                SweepIndex::Alpha => GvwParams { alpha: value, ..*base },
                SweepIndex::Beta => GvwParams { beta: value, ..*base },
            };
            let points = params.validate().and_then(|_| {
                budget_grid
                    .iter()
                    .map(|&b| {
                        let x = if params.delta > T::zero() {
                            steady_share(&params, b)?
                        } else {
                            settle(&params, b, T::zero())?
                        };
                        Ok((b, x))
                    })
                    .collect::<Result<Vec<_>>>()
            });
            SweepCurve {
                index: vary,
                value,
                points,
            }
        })
        .collect()
}

/// Labels a sampled curve by the sign pattern of its second divided differences.
///
/// `s-shaped`: convex then concave with exactly one sign change;
/// `concave`: never convex beyond the tolerance band.
pub fn classify_shape<T: Scalar>(curve: &[(T, T)]) -> Result<CurveShape> {
    if curve.len() < 5 {
        return Err(Error::TooFewPoints {
            required: 5,
            got: curve.len(),
        });
    }
    if let Some(i) = curve.windows(2).position(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::NotIncreasing {
            what: "budget",
            index: i + 1,
        });
    }
    let tol = T::lit(SHAPE_TOLERANCE);
    let signs: Vec<i8> = curve
        .windows(3)
        .map(|w| {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            let (x2, y2) = w[2];
            let d2 = T::lit(2.0) * ((y2 - y1) / (x2 - x1) - (y1 - y0) / (x1 - x0)) / (x2 - x0);
            if d2 > tol {
                1
            } else if d2 < -tol {
                -1
            } else {
                0
            }
        })
        .filter(|&s| s != 0)
        .collect();

    if signs.iter().all(|&s| s < 0) {
        return Ok(CurveShape::Concave);
    }
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    if signs.first() == Some(&1) && signs.last() == Some(&-1) && changes == 1 {
        Ok(CurveShape::SShaped)
    } else {
        Ok(CurveShape::Undetermined)
    }
}
