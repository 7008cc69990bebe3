//! Log-log lagged-sales econometric baseline
//!
//! ```text
//! log s_t = log c0 + c1 log s_{t-1} + c2 log b_t + mu_t
//! ```
//!
//! fitted by ordinary least squares, and a side-by-side comparison with the
//! GVW model on a rectangular pulse and a steady-state budget grid.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{simulate, steady_share, GvwParams, PulseSpec};
use crate::trajectory::Trajectory;

/// Above this condition number of the normal matrix the fit switches to the
/// SVD pseudo-inverse.
pub const NORMAL_EQUATIONS_MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconParams {
    /// Multiplicative constant.
    pub c0: f64,
    /// Carryover coefficient on lagged sales.
    pub c1: f64,
    /// Advertising coefficient.
    pub c2: f64,
}

impl EconParams {
    pub fn new(c0: f64, c1: f64, c2: f64) -> Result<Self> {
        let p = Self { c0, c1, c2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0 && self.c0.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "c0",
                value: self.c0,
                reason: "must be positive and finite",
            });
        }
        for (name, v) in [("c1", self.c1), ("c2", self.c2)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be finite",
                });
            }
        }
        Ok(())
    }

    /// Elasticity of steady-state sales with respect to budget, `c2 / (1 - c1)`.
    pub fn steady_exponent(&self) -> Result<f64> {
        if self.c1 >= 1.0 {
            return Err(Error::NoSteadyState(format!("carryover c1 = {} is not below 1", self.c1)));
        }
        Ok(self.c2 / (1.0 - self.c1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub params: EconParams,
    /// Log-space residual per usable row; row `l` belongs to sample `l + 1`.
    pub residuals: Vec<f64>,
    /// `true` when the SVD pseudo-inverse replaced the normal equations.
    pub used_pseudo_inverse: bool,
}

/// OLS fit on the share (or sales) column of `data`.
pub fn fit_ols(data: &Trajectory<f64>) -> Result<OlsFit> {
    fit_ols_series(&data.shares(), &data.budgets())
}

/// OLS of `log s_t` on `[1, log s_{t-1}, log b_t]`; the first sample only
/// serves as a lag.
pub fn fit_ols_series(sales: &[f64], budgets: &[f64]) -> Result<OlsFit> {
    if sales.len() != budgets.len() {
        return Err(Error::ShapeMismatch(format!("{} sales for {} budgets", sales.len(), budgets.len())));
    }
    let rows = sales.len().saturating_sub(1);
    if rows < 4 {
        return Err(Error::TooFewPoints { required: 4, got: rows });
    }
    for (row, &s) in sales.iter().enumerate() {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonPositive { row, what: "sales", value: s });
        }
    }
    for (row, &b) in budgets.iter().enumerate().skip(1) {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::NonPositive { row, what: "budget", value: b });
        }
    }

    let design = DMatrix::from_fn(rows, 3, |l, k| match k {
        0 => 1.0,
        1 => sales[l].ln(),
        _ => budgets[l + 1].ln(),
    });
    let target = DVector::from_fn(rows, |l, _| sales[l + 1].ln());

    let svd = design.clone().svd(false, false);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let ratio = if s_max > 0.0 { s_min / s_max } else { 0.0 };
    if ratio <= rows.max(3) as f64 * f64::EPSILON {
        return Err(Error::RankDeficient { ratio });
    }
    let condition = (s_max / s_min).powi(2);
    let use_pinv = condition > NORMAL_EQUATIONS_MAX_CONDITION;
    let coef = if use_pinv {
        let svd = design.clone().svd(true, true);
        svd.solve(&target, s_max * rows.max(3) as f64 * f64::EPSILON)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?
    } else {
        let normal = design.tr_mul(&design);
        let rhs = design.tr_mul(&target);
        normal
            .cholesky()
            .ok_or(Error::RankDeficient { ratio })?
            .solve(&rhs)
    };
    let residuals = (&target - &design * &coef).iter().copied().collect();
    Ok(OlsFit {
        params: EconParams {
            c0: coef[0].exp(),
            c1: coef[1],
            c2: coef[2],
        },
        residuals,
        used_pseudo_inverse: use_pinv,
    })
}

fn positive(what: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: v,
            domain: "> 0",
        })
    }
}

/// `c0 s_prev^c1 b^c2`.
pub fn predict_econ(params: &EconParams, s_prev: f64, b: f64) -> Result<f64> {
    params.validate()?;
    positive("s_prev", s_prev)?;
    positive("budget", b)?;
    Ok(params.c0 * s_prev.powf(params.c1) * b.powf(params.c2))
}

/// Fixed point `(c0 b^c2)^(1 / (1 - c1))` of the recursion at constant budget.
pub fn steady_state_econ(params: &EconParams, b_bar: f64) -> Result<f64> {
    params.validate()?;
    positive("b_bar", b_bar)?;
    params.steady_exponent()?;
    Ok((params.c0 * b_bar.powf(params.c2)).powf(1.0 / (1.0 - params.c1)))
}

/// Runs the recursion from `s0` with `budgets[t]` applied at step `t >= 1`;
/// `budgets[0]` is ignored. A zero budget drops the advertising factor, so
/// sales evolve as `c0 s^c1` once spending stops.
pub fn simulate_econ(params: &EconParams, s0: f64, budgets: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    positive("s0", s0)?;
    let mut out = Vec::with_capacity(budgets.len());
    let mut s = s0;
    for (t, &b) in budgets.iter().enumerate() {
        if t > 0 {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::Domain {
                    what: "budget",
                    value: b,
                    domain: "b >= 0",
                });
            }
            let ad = if b > 0.0 { b.powf(params.c2) } else { 1.0 };
            s = params.c0 * s.powf(params.c1) * ad;
        }
        out.push(s);
    }
    Ok(out)
}

/// Pulse and budget grid on which the two models are compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonScenario {
    pub pulse: PulseSpec<f64>,
    /// Both pulse curves are reported at integer times `0..=horizon`.
    pub horizon: usize,
    pub budget_grid: Vec<f64>,
}

impl Default for ComparisonScenario {
    fn default() -> Self {
        Self {
            pulse: PulseSpec {
                b0: 1.0,
                t_end: 20.0,
                x0: 0.01,
            },
            horizon: 60,
            budget_grid: crate::model::log_spaced(0.05, 20.0, 25),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Returns {
    /// Every second difference of the steady-state curve is negative.
    Diminishing,
    /// Negative over the upper end of the grid only.
    EventuallyDiminishing,
    Constant,
    Increasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCurves {
    /// Share or sales at `0..=horizon`.
    pub pulse: Vec<f64>,
    /// Per-unit-time log decay over the first step after the pulse ends.
    pub decay_rate: f64,
    pub steady: Vec<f64>,
    pub returns: Returns,
    pub saturates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: ComparisonScenario,
    pub times: Vec<f64>,
    pub gvw: ModelCurves,
    pub econbase: ModelCurves,
    /// `c2 / (1 - c1)`; Econbase returns diminish iff this lies below 1.
    pub econ_steady_exponent: f64,
    /// Econbase log-space deviation from its zero-ad level shrinks by `c1` per step.
    pub econ_log_contraction: f64,
    /// Word-of-mouth strength `1 - beta`.
    pub gvw_wom: f64,
    pub saturation_verdict: String,
}

impl Comparison {
    /// Report grouped by finding: pulse response and post-pulse decay,
    /// steady-state curves, diminishing returns, saturation.
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "scenario": self.scenario,
            "pulse_response": {
                "times": self.times,
                "gvw": self.gvw.pulse,
                "econbase": self.econbase.pulse,
                "gvw_decay_rate": self.gvw.decay_rate,
                "econbase_decay_rate": self.econbase.decay_rate,
                "econbase_log_contraction": self.econ_log_contraction,
            },
            "steady_state": {
                "budgets": self.scenario.budget_grid,
                "gvw": self.gvw.steady,
                "econbase": self.econbase.steady,
            },
            "diminishing_returns": {
                "gvw": self.gvw.returns,
                "econbase": self.econbase.returns,
                "econbase_exponent": self.econ_steady_exponent,
                "econbase_condition_holds": self.econ_steady_exponent < 1.0,
            },
            "saturation": {
                "gvw_bounded": self.gvw.saturates,
                "econbase_bounded": self.econbase.saturates,
                "gvw_wom": self.gvw_wom,
                "verdict": self.saturation_verdict,
            },
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json_value())?)
    }
}

fn returns_of(grid: &[f64], curve: &[f64]) -> Returns {
    let second: Vec<f64> = (1..curve.len().saturating_sub(1))
        .map(|i| {
            let left = (curve[i] - curve[i - 1]) / (grid[i] - grid[i - 1]);
            let right = (curve[i + 1] - curve[i]) / (grid[i + 1] - grid[i]);
            (right - left) / (grid[i + 1] - grid[i - 1])
        })
        .collect();
    let scale = curve.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale / (grid[grid.len() - 1] - grid[0]).powi(2);
    if second.iter().all(|d| d.abs() <= tol) {
        Returns::Constant
    } else if second.iter().all(|&d| d < -tol) {
        Returns::Diminishing
    } else if second.last().is_some_and(|&d| d < -tol) {
        Returns::EventuallyDiminishing
    } else {
        Returns::Increasing
    }
}

fn decay_after(curve: &[f64], t_end: f64) -> f64 {
    let i = (t_end.ceil() as usize).min(curve.len() - 1);
    if i + 1 < curve.len() && curve[i] > 0.0 && curve[i + 1] > 0.0 {
        (curve[i] / curve[i + 1]).ln()
    } else {
        f64::NAN
    }
}

/// Runs both models on the scenario's pulse and budget grid.
pub fn compare_models(gvw: &GvwParams<f64>, econ: &EconParams, scenario: &ComparisonScenario) -> Result<Comparison> {
    gvw.validate()?;
    econ.validate()?;
    scenario.pulse.validate()?;
    if scenario.horizon == 0 {
        return Err(Error::TooFewPoints { required: 1, got: 0 });
    }
    if scenario.budget_grid.len() < 3 {
        return Err(Error::TooFewPoints {
            required: 3,
            got: scenario.budget_grid.len(),
        });
    }
    if let Some(i) = scenario.budget_grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::NotIncreasing {
            what: "budget grid",
            index: i + 1,
        });
    }
    let pulse = scenario.pulse;
    let times: Vec<f64> = (0..=scenario.horizon).map(|t| t as f64).collect();
    let budget = |t: f64| if t < pulse.t_end { pulse.b0 } else { 0.0 };

    let gvw_pulse = simulate(gvw, &budget, pulse.x0, &times)?.shares();
    let econ_budgets: Vec<f64> = times.iter().map(|&t| budget(t - 1.0)).collect();
    let econ_pulse = simulate_econ(econ, pulse.x0, &econ_budgets)?;

    let grid = &scenario.budget_grid;
    let gvw_steady = grid.iter().map(|&b| steady_share(gvw, b)).collect::<Result<Vec<_>>>()?;
    let econ_steady = grid.iter().map(|&b| steady_state_econ(econ, b)).collect::<Result<Vec<_>>>()?;

    let econ_saturates = econ.c2 <= 0.0;
    let saturation_verdict = if econ_saturates {
        "GVW saturates, Econbase is non-increasing in budget".to_string()
    } else {
        "GVW saturates, Econbase does not".to_string()
    };
    Ok(Comparison {
        scenario: scenario.clone(),
        gvw: ModelCurves {
            decay_rate: decay_after(&gvw_pulse, pulse.t_end),
            returns: returns_of(grid, &gvw_steady),
            saturates: true,
            pulse: gvw_pulse,
            steady: gvw_steady,
        },
        econbase: ModelCurves {
            decay_rate: decay_after(&econ_pulse, pulse.t_end),
            returns: returns_of(grid, &econ_steady),
            saturates: econ_saturates,
            pulse: econ_pulse,
            steady: econ_steady,
        },
        times,
        econ_steady_exponent: econ.steady_exponent()?,
        econ_log_contraction: econ.c1,
        gvw_wom: 1.0 - gvw.beta,
        saturation_verdict,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn generated(p: &EconParams, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let budgets: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..5.0)).collect();
        let sales = simulate_econ(p, 0.3, &budgets).unwrap();
        (sales, budgets)
    }

    #[test]
    fn noiseless_fit_is_exact() {
        let p = EconParams::new(0.8, 0.6, 0.3).unwrap();
        let (s, b) = generated(&p, 40, 1);
        let fit = fit_ols_series(&s, &b).unwrap();
        assert_relative_eq!(fit.params.c0, p.c0, max_relative = 1e-8);
        assert!((fit.params.c1 - p.c1).abs() < 1e-8);
        assert!((fit.params.c2 - p.c2).abs() < 1e-8);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-10));
        assert_eq!(fit.residuals.len(), 39);
    }

    #[test]
    fn fit_from_trajectory() {
        use crate::trajectory::Sample;
        let p = EconParams::new(0.5, 0.4, 0.2).unwrap();
        let (s, b) = generated(&p, 30, 2);
        let samples = s
            .iter()
            .zip(&b)
            .enumerate()
            .map(|(i, (&share, &budget))| Sample { t: i as f64, budget, share })
            .collect();
        let traj = Trajectory::new(samples, "econ").unwrap();
        let fit = fit_ols(&traj).unwrap();
        assert!((fit.params.c1 - 0.4).abs() < 1e-8);
    }

    #[test]
    fn constant_series_is_rank_deficient() {
        let err = fit_ols_series(&[0.5; 10], &[1.0; 10]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }), "{err}");
    }

    #[test]
    fn nonpositive_rows_are_named() {
        let mut s = vec![0.5, 0.6, 0.7, 0.6, 0.5, 0.4];
        let b = vec![1.0, 2.0, 1.0, 3.0, 2.0, 1.0];
        s[3] = 0.0;
        match fit_ols_series(&s, &b) {
            Err(Error::NonPositive { row: 3, what: "sales", .. }) => {}
            other => panic!("{other:?}"),
        }
        let mut b2 = b.clone();
        b2[4] = -1.0;
        assert!(matches!(
            fit_ols_series(&[0.5, 0.6, 0.7, 0.6, 0.5, 0.4], &b2),
            Err(Error::NonPositive { row: 4, what: "budget", .. })
        ));
        assert!(matches!(
            fit_ols_series(&s[..4], &b[..4]),
            Err(Error::TooFewPoints { required: 4, got: 3 })
        ));
    }

    #[test]
    fn shuffled_budget_has_no_effect() {
        let p = EconParams::new(0.7, 0.5, 0.3).unwrap();
        let (s, mut b) = generated(&p, 500, 3);
        b.shuffle(&mut ChaCha8Rng::seed_from_u64(4));
        // sales driven by the original order; regress on an independent permutation
        let fit = fit_ols_series(&s, &b).unwrap();
        let (s2, _) = generated(&p, 500, 3);
        assert_eq!(s, s2);
        assert!(fit.params.c2.abs() < 0.05, "c2 = {}", fit.params.c2);
    }

    #[test]
    fn degenerate_predictions() {
        let constant = EconParams::new(1.0, 0.0, 0.0).unwrap();
        let persist = EconParams::new(1.0, 1.0, 0.0).unwrap();
        for (s, b) in [(0.1, 2.0), (3.0, 0.5), (1e-4, 1e3)] {
            assert_eq!(predict_econ(&constant, s, b).unwrap(), 1.0);
            assert_eq!(predict_econ(&persist, s, b).unwrap(), s);
        }
        assert!(predict_econ(&constant, 0.0, 1.0).is_err());
        assert!(predict_econ(&constant, 1.0, -1.0).is_err());
    }

    #[test]
    fn recursive_prediction_reproduces_fitted_series() {
        let p = EconParams::new(0.9, 0.7, 0.25).unwrap();
        let (s, b) = generated(&p, 50, 5);
        let fit = fit_ols_series(&s, &b).unwrap();
        let mut prev = s[0];
        for t in 1..s.len() {
            prev = predict_econ(&fit.params, prev, b[t]).unwrap();
            assert_relative_eq!(prev, s[t], max_relative = 1e-6);
        }
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let memoryless = EconParams::new(2.0, 0.0, 0.5).unwrap();
        assert_relative_eq!(steady_state_econ(&memoryless, 4.0).unwrap(), 4.0, max_relative = 1e-15);
        let p = EconParams::new(0.6, 0.8, 0.3).unwrap();
        for b in [0.1, 1.0, 7.5, 300.0] {
            let s = steady_state_econ(&p, b).unwrap();
            assert_relative_eq!(predict_econ(&p, s, b).unwrap(), s, max_relative = 1e-10);
        }
        assert!(matches!(
            steady_state_econ(&EconParams::new(1.0, 1.0, 0.2).unwrap(), 1.0),
            Err(Error::NoSteadyState(_))
        ));
    }

    #[test]
    fn iteration_converges_to_steady_state() {
        let p = EconParams::new(0.6, 0.8, 0.3).unwrap();
        let target = steady_state_econ(&p, 2.0).unwrap();
        for s0 in [1e-3, 0.5, 50.0] {
            let mut s = s0;
            for _ in 0..200 {
                s = predict_econ(&p, s, 2.0).unwrap();
            }
            assert_relative_eq!(s, target, max_relative = 1e-12);
        }
    }

    fn gvw() -> GvwParams<f64> {
        GvwParams::new(0.1, 0.7, 0.8, 0.01).unwrap()
    }

    #[test]
    fn comparison_report() {
        let econ = EconParams::new(0.5, 0.6, 0.3).unwrap();
        let cmp = compare_models(&gvw(), &econ, &ComparisonScenario::default()).unwrap();
        assert_eq!(cmp.saturation_verdict, "GVW saturates, Econbase does not");
        assert!(cmp.gvw.steady.iter().all(|&x| x < 1.0));
        assert_eq!(cmp.gvw.pulse.len(), 61);
        assert_eq!(cmp.econbase.pulse.len(), 61);
        assert_relative_eq!(cmp.gvw.decay_rate, 0.01, max_relative = 1e-6);
        assert_relative_eq!(cmp.econ_steady_exponent, 0.75, max_relative = 1e-12);
        assert_eq!(cmp.econbase.returns, Returns::Diminishing);
        let v: serde_json::Value = serde_json::from_str(&cmp.to_json().unwrap()).unwrap();
        assert_eq!(v["diminishing_returns"]["econbase"], "diminishing");
        assert_eq!(v["saturation"]["verdict"], "GVW saturates, Econbase does not");
        assert_eq!(v["pulse_response"]["gvw"].as_array().unwrap().len(), 61);
        assert_eq!(v["steady_state"]["budgets"].as_array().unwrap().len(), 25);
    }

    #[test]
    fn econbase_returns_follow_the_exponent() {
        let scenario = ComparisonScenario::default();
        for (c1, c2) in [(0.5, 0.3), (0.5, 0.6), (0.2, 0.4), (0.9, 0.05), (0.9, 0.2)] {
            let econ = EconParams::new(0.5, c1, c2).unwrap();
            let cmp = compare_models(&gvw(), &econ, &scenario).unwrap();
            let exponent = c2 / (1.0 - c1);
            let expected = if exponent < 1.0 { Returns::Diminishing } else { Returns::Increasing };
            assert_eq!(cmp.econbase.returns, expected, "c1 {c1} c2 {c2}");
        }
    }

    #[test]
    fn econbase_steady_state_is_unbounded() {
        let econ = EconParams::new(0.5, 0.6, 0.3).unwrap();
        let big = steady_state_econ(&econ, 1e12).unwrap();
        assert!(big > 1e3);
        let x = steady_share(&gvw(), 1e12).unwrap();
        assert!(x <= 1.0);
    }

    #[test]
    fn post_pulse_decay_matches_closed_forms() {
        let econ = EconParams::new(0.5, 0.6, 0.3).unwrap();
        let cmp = compare_models(&gvw(), &econ, &ComparisonScenario::default()).unwrap();
        let end = 20;
        for t in end..cmp.times.len() - 1 {
            assert_relative_eq!(cmp.gvw.pulse[t + 1], cmp.gvw.pulse[t] * (-0.01f64).exp(), max_relative = 1e-6);
            // log deviation from ln c0 / (1 - c1) contracts by c1
            let floor = econ.c0.ln() / (1.0 - econ.c1);
            let dev = |s: f64| s.ln() - floor;
            assert_relative_eq!(
                dev(cmp.econbase.pulse[t + 1]),
                econ.c1 * dev(cmp.econbase.pulse[t]),
                max_relative = 1e-9
            );
        }
    }
}
