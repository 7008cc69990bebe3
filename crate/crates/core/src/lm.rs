//! Levenberg-Marquardt iteration shared by network training and the
//! parameter fit.
//!
//! Each [`Lm::step`] solves `(J^T J + mu D) delta = J^T r` and moves to
//! `p - delta`, projected onto optional box bounds. A candidate is accepted
//! only if the sum of squared residuals strictly decreases; `mu` then shrinks
//! by the decrease factor, otherwise it grows by the increase factor and the
//! solve is retried. Once `mu` passes its ceiling the step reports a stall.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Residual vector and Jacobian of a least-squares problem in `n` parameters.
pub trait LeastSquares<T: Scalar> {
    fn n_params(&self) -> usize;

    fn residuals(&self, params: &[T]) -> Vec<T>;

    /// Row-major `m x n` Jacobian of [`LeastSquares::residuals`].
    fn jacobian(&self, params: &[T]) -> Vec<T>;

    /// Box constraints `(lower, upper)`, if any.
    fn bounds(&self) -> Option<(&[T], &[T])> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingScaling {
    /// `mu I`
    Identity,
    /// `mu diag(J^T J)`, invariant to parameter scaling.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig<T> {
    pub initial: T,
    pub increase: T,
    pub decrease: T,
    pub ceiling: T,
    pub scaling: DampingScaling,
}

impl<T: Scalar> Default for LmConfig<T> {
    fn default() -> Self {
        Self {
            initial: T::lit(1e-3),
            increase: T::lit(10.0),
            decrease: T::lit(0.1),
            ceiling: T::lit(1e10),
            scaling: DampingScaling::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step<T> {
    Accepted {
        loss: T,
        step_norm: T,
        /// Infinity norm of the projected gradient at the start of the step.
        gradient_norm: T,
        trials: usize,
    },
    /// No decrease found before the damping ceiling.
    Stalled { gradient_norm: T },
}

/// Sum of squares.
pub fn sum_sq<T: Scalar>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |acc, &v| acc + v * v)
}

pub struct Lm<T> {
    config: LmConfig<T>,
    mu: T,
}

impl<T: Scalar> Lm<T> {
    pub fn new(config: LmConfig<T>) -> Self {
        Self {
            mu: config.initial,
            config,
        }
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    /// One outer iteration from `params` whose residuals are `residuals`.
    /// Both are updated in place on acceptance.
    pub fn step<P>(&mut self, problem: &P, params: &mut Vec<T>, residuals: &mut Vec<T>) -> Step<T>
    where
        P: LeastSquares<T> + ?Sized,
    {
        let n = params.len();
        let m = residuals.len();
        let jac = problem.jacobian(params);
        debug_assert_eq!(jac.len(), m * n);

        // normal matrix (upper triangle mirrored) and gradient
        let mut normal = vec![T::zero(); n * n];
        let mut grad = vec![T::zero(); n];
        for (row, &r) in jac.chunks_exact(n).zip(residuals.iter()) {
            for i in 0..n {
                let ji = row[i];
                if ji == T::zero() {
                    continue;
                }
                grad[i] += ji * r;
                let dst = &mut normal[i * n..(i + 1) * n];
                for j in i..n {
                    dst[j] += ji * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                normal[i * n + j] = normal[j * n + i];
            }
        }

        let bounds = problem.bounds();
        let gradient_norm = projected_gradient_norm(params, &grad, bounds);
        let loss = sum_sq(residuals);
        let diag_floor = normal
            .iter()
            .step_by(n + 1)
            .fold(T::zero(), |a, &d| a.max(d))
            * T::epsilon();

        let mut trials = 0;
        let floor = T::epsilon();
        while self.mu <= self.config.ceiling {
            trials += 1;
            let mut system = normal.clone();
            for i in 0..n {
                let d = match self.config.scaling {
                    DampingScaling::Identity => T::one(),
                    DampingScaling::Diagonal => normal[i * n + i].max(diag_floor).max(T::min_positive_value()),
                };
                system[i * n + i] += self.mu * d;
            }
            let mut delta = grad.clone();
            if !cholesky_solve(&mut system, n, &mut delta) {
                self.mu = self.mu * self.config.increase;
                continue;
            }
            let mut candidate: Vec<T> = params.iter().zip(&delta).map(|(&p, &d)| p - d).collect();
            if let Some((lo, hi)) = bounds {
                for ((c, &l), &h) in candidate.iter_mut().zip(lo).zip(hi) {
                    *c = c.max(l).min(h);
                }
            }
            let cand_res = problem.residuals(&candidate);
            let cand_loss = sum_sq(&cand_res);
            if cand_loss.is_finite() && cand_loss < loss {
                let step_norm = candidate
                    .iter()
                    .zip(params.iter())
                    .map(|(a, b)| (*a - *b).abs())
                    .fold(T::zero(), T::max);
                *params = candidate;
                *residuals = cand_res;
                self.mu = (self.mu * self.config.decrease).max(floor);
                return Step::Accepted {
                    loss: cand_loss,
                    step_norm,
                    gradient_norm,
                    trials,
                };
            }
            self.mu = self.mu * self.config.increase;
        }
        Step::Stalled { gradient_norm }
    }
}

/// Drives [`Lm::step`] until a stop criterion holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Termination<T> {
    pub max_iterations: usize,
    pub step_tolerance: T,
    pub gradient_tolerance: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T> {
    pub params: Vec<T>,
    pub loss: T,
    /// Loss before the first iteration and after each accepted step.
    pub history: Vec<T>,
    pub iterations: usize,
}

pub fn minimize<T, P>(
    problem: &P,
    start: Vec<T>,
    config: LmConfig<T>,
    stop: Termination<T>,
) -> Result<Minimum<T>>
where
    T: Scalar,
    P: LeastSquares<T> + ?Sized,
{
    let mut params = start;
    if let Some((lo, hi)) = problem.bounds() {
        for ((p, &l), &h) in params.iter_mut().zip(lo).zip(hi) {
            *p = p.max(l).min(h);
        }
    }
    let mut residuals = problem.residuals(&params);
    let mut loss = sum_sq(&residuals);
    if !loss.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let mut lm = Lm::new(config);
    let mut history = vec![loss];
    let mut iterations = 0;
    while iterations < stop.max_iterations {
        iterations += 1;
        match lm.step(problem, &mut params, &mut residuals) {
            Step::Accepted {
                loss: l,
                step_norm,
                gradient_norm,
                ..
            } => {
                loss = l;
                history.push(l);
                if gradient_norm < stop.gradient_tolerance || step_norm < stop.step_tolerance {
                    break;
                }
            }
            Step::Stalled { .. } => break,
        }
    }
    Ok(Minimum {
        params,
        loss,
        history,
        iterations,
    })
}

fn projected_gradient_norm<T: Scalar>(params: &[T], grad: &[T], bounds: Option<(&[T], &[T])>) -> T {
    grad.iter()
        .enumerate()
        .map(|(i, &g)| match bounds {
            Some((lo, hi)) if (params[i] <= lo[i] && g > T::zero()) || (params[i] >= hi[i] && g < T::zero()) => {
                T::zero()
            }
            _ => g.abs(),
        })
        .fold(T::zero(), T::max)
}

/// Solves `a x = b` for symmetric positive definite `a` (row-major `n x n`,
/// overwritten by its Cholesky factor). `b` receives the solution.
/// Returns `false` if `a` is not numerically positive definite.
pub fn cholesky_solve<T: Scalar>(a: &mut [T], n: usize, b: &mut [T]) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    // L y = b
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    // L^T x = y
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_small_system() {
        let mut a = vec![4.0, 2.0, 2.0, 3.0];
        let mut b = vec![2.0f64, 1.0];
        assert!(cholesky_solve(&mut a, 2, &mut b));
        assert!((b[0] - 0.5).abs() < 1e-15 && b[1].abs() < 1e-15);
        let mut singular = vec![1.0, 1.0, 1.0, 1.0];
        let mut rhs = vec![1.0, 1.0];
        assert!(!cholesky_solve(&mut singular, 2, &mut rhs));
    }

    /// r_i = a * exp(b * x_i) - y_i
    struct ExpFit {
        x: Vec<f64>,
        y: Vec<f64>,
    }

    impl LeastSquares<f64> for ExpFit {
        fn n_params(&self) -> usize {
            2
        }
        fn residuals(&self, p: &[f64]) -> Vec<f64> {
            self.x.iter().zip(&self.y).map(|(x, y)| p[0] * (p[1] * x).exp() - y).collect()
        }
        fn jacobian(&self, p: &[f64]) -> Vec<f64> {
            self.x
                .iter()
                .flat_map(|x| [(p[1] * x).exp(), p[0] * x * (p[1] * x).exp()])
                .collect()
        }
    }

    #[test]
    fn fits_exponential_and_loss_is_monotone() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let y = x.iter().map(|x| 2.0 * (-0.7 * x).exp()).collect();
        let problem = ExpFit { x, y };
        let stop = Termination {
            max_iterations: 200,
            step_tolerance: 1e-14,
            gradient_tolerance: 1e-14,
        };
        for scaling in [DampingScaling::Identity, DampingScaling::Diagonal] {
            let cfg = LmConfig { scaling, ..Default::default() };
            let min = minimize(&problem, vec![1.0, 0.0], cfg, stop).unwrap();
            assert!((min.params[0] - 2.0).abs() < 1e-8, "{scaling:?} {:?}", min.params);
            assert!((min.params[1] + 0.7).abs() < 1e-8);
            assert!(min.history.windows(2).all(|w| w[1] < w[0]));
        }
    }

    struct Bounded(Vec<f64>, Vec<f64>);

    impl LeastSquares<f64> for Bounded {
        fn n_params(&self) -> usize {
            1
        }
        fn residuals(&self, p: &[f64]) -> Vec<f64> {
            vec![p[0] - 3.0]
        }
        fn jacobian(&self, _p: &[f64]) -> Vec<f64> {
            vec![1.0]
        }
        fn bounds(&self) -> Option<(&[f64], &[f64])> {
            Some((&self.0, &self.1))
        }
    }

    #[test]
    fn respects_bounds() {
        let problem = Bounded(vec![0.0], vec![1.0]);
        let stop = Termination {
            max_iterations: 50,
            step_tolerance: 1e-12,
            gradient_tolerance: 1e-12,
        };
        let min = minimize(&problem, vec![0.5], LmConfig::default(), stop).unwrap();
        assert!((min.params[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let problem = ExpFit {
            x: vec![1000.0],
            y: vec![0.0],
        };
        let stop = Termination {
            max_iterations: 5,
            step_tolerance: 0.0,
            gradient_tolerance: 0.0,
        };
        assert!(matches!(
            minimize(&problem, vec![1.0, 1.0], LmConfig::default(), stop),
            Err(Error::NonFiniteStart)
        ));
    }
}
