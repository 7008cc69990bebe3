use super::{check_share, Budget, GvwParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::trajectory::{ClampEvent, Sample, Trajectory};

/// Fixed-step RK4 settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Initial step is the smallest sample spacing divided by this.
    pub steps_per_interval: usize,
    /// Required agreement between a pass and the pass at half the step.
    pub tolerance: f64,
    pub max_refinements: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            steps_per_interval: 20,
            tolerance: 1e-8,
            max_refinements: 12,
        }
    }
}

/// Integrates the response dynamics from `x0` and samples them at `t_grid`
/// (the first grid time is the initial time).
pub fn simulate<T, B>(params: &GvwParams<T>, budget: &B, x0: T, t_grid: &[T]) -> Result<Trajectory<T>>
where
    T: Scalar,
    B: Budget<T> + ?Sized,
{
    simulate_with(params, budget, x0, t_grid, &IntegratorConfig::default())
}

pub fn simulate_with<T, B>(
    params: &GvwParams<T>,
    budget: &B,
    x0: T,
    t_grid: &[T],
    config: &IntegratorConfig,
) -> Result<Trajectory<T>>
where
    T: Scalar,
    B: Budget<T> + ?Sized,
{
    params.validate()?;
    check_share("x0", x0)?;
    if t_grid.is_empty() {
        return Err(Error::TooFewPoints {
            required: 1,
            got: 0,
        });
    }
    if let Some(i) = t_grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::TimeGrid { index: i + 1 });
    }

    let min_dt = t_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(T::infinity(), T::min);
    let mut substeps = config.steps_per_interval.max(1);
    let tol = T::tol(config.tolerance);

    let mut coarse = integrate_pass(params, budget, x0, t_grid, min_dt, substeps)?;
    let mut last_diff = T::zero();
    if t_grid.len() > 1 {
        let mut converged = false;
        for _ in 0..config.max_refinements {
            substeps *= 2;
            let fine = integrate_pass(params, budget, x0, t_grid, min_dt, substeps)?;
            last_diff = coarse
                .raw
                .iter()
                .zip(&fine.raw)
                .map(|(a, b)| (*a - *b).abs())
                .fold(T::zero(), T::max);
            coarse = fine;
            if last_diff <= tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::IntegrationNotConverged {
                tolerance: config.tolerance,
                refinements: config.max_refinements,
                difference: last_diff.to_f64_lossy(),
            });
        }
    }

    let samples = t_grid
        .iter()
        .zip(&coarse.raw)
        .map(|(&t, &x)| {
            let b = budget.budget(t);
            Sample {
                t,
                budget: if b > T::zero() { b } else { T::zero() },
                share: x.max(T::zero()).min(T::one()),
            }
        })
        .collect();
    let mut traj = Trajectory::new(samples, "simulation")?;
    traj.meta.clamp_events = coarse.clamps;
    Ok(traj)
}

struct Pass<T> {
    raw: Vec<T>,
    clamps: Vec<ClampEvent<T>>,
}

fn integrate_pass<T, B>(
    params: &GvwParams<T>,
    budget: &B,
    x0: T,
    t_grid: &[T],
    min_dt: T,
    substeps: usize,
) -> Result<Pass<T>>
where
    T: Scalar,
    B: Budget<T> + ?Sized,
{
    let h_max = min_dt / T::from_usize_lossy(substeps);
    let mut raw = Vec::with_capacity(t_grid.len());
    let mut clamps = Vec::new();
    let mut x = x0;
    raw.push(x);

    for w in t_grid.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mut edges = vec![t0];
        edges.extend(budget.breakpoints(t0, t1));
        edges.push(t1);

        let mut worst: Option<T> = None;
        for seg in edges.windows(2) {
            let (a, c) = (seg[0], seg[1]);
            let len = c - a;
            // Budget is sampled strictly inside the segment so that jumps at
            // its ends resolve to the value owned by this segment.
            let guard = len * T::epsilon().sqrt();
            let lo = a + guard;
            let hi = c - guard;
            let n = (len / h_max).ceil().to_usize().unwrap_or(1).max(1);
            let h = len / T::from_usize_lossy(n);
            for k in 0..n {
                let t = a + h * T::from_usize_lossy(k);
                let half = h * T::lit(0.5);
                let f = |tau: T, state: T| -> Result<T> {
                    let at = tau.max(lo).min(hi);
                    let b = budget.budget(at);
                    if b < T::zero() {
                        return Err(Error::Domain {
                            what: "budget",
                            value: b.to_f64_lossy(),
                            domain: "b >= 0",
                        });
                    }
                    let r = params.rate_unchecked(b, state.max(T::zero()).min(T::one()));
                    if r.is_finite() {
                        Ok(r)
                    } else {
                        Err(Error::NonFiniteRate { t: at.to_f64_lossy() })
                    }
                };
                let k1 = f(t, x)?;
                let k2 = f(t + half, x + half * k1)?;
                let k3 = f(t + half, x + half * k2)?;
                let k4 = f(t + h, x + h * k3)?;
                x += h / T::lit(6.0) * (k1 + T::lit(2.0) * (k2 + k3) + k4);
                if x < T::zero() || x > T::one() {
                    let dev = if x < T::zero() { x } else { x - T::one() };
                    if worst.is_none_or(|w: T| dev.abs() > w.abs()) {
                        worst = Some(dev);
                    }
                    x = x.max(T::zero()).min(T::one());
                }
            }
        }
        if let Some(dev) = worst {
            let raw_value = if dev < T::zero() { dev } else { T::one() + dev };
            clamps.push(ClampEvent {
                t: t1,
                raw: raw_value,
            });
        }
        raw.push(x);
    }
    Ok(Pass { raw, clamps })
}
