use crate::scalar::Scalar;

/// An advertising budget schedule `t -> b(t)`.
///
/// Schedules with jumps report them through [`Budget::breakpoints`] so the
/// integrator never steps across a discontinuity.
pub trait Budget<T> {
    fn budget(&self, t: T) -> T;

    /// Jump times strictly inside `(from, to)`, ascending.
    fn breakpoints(&self, _from: T, _to: T) -> Vec<T> {
        Vec::new()
    }
}

impl<T, F> Budget<T> for F
where
    F: Fn(T) -> T,
{
    fn budget(&self, t: T) -> T {
        self(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantBudget<T>(pub T);

impl<T: Scalar> Budget<T> for ConstantBudget<T> {
    fn budget(&self, _t: T) -> T {
        self.0
    }
}

/// Rectangular pulses starting at `start`: `on` time units at a level, then
/// `off` time units of zero spend. Successive pulses cycle through `levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrain<T> {
    pub levels: Vec<T>,
    pub on: T,
    pub off: T,
    pub start: T,
}

impl<T: Scalar> PulseTrain<T> {
    pub fn new(levels: Vec<T>, on: T, off: T) -> Self {
        assert!(!levels.is_empty(), "pulse train needs at least one level");
        assert!(on > T::zero() && off >= T::zero());
        Self {
            levels,
            on,
            off,
            start: T::zero(),
        }
    }

    fn period(&self) -> T {
        self.on + self.off
    }
}

impl<T: Scalar> Budget<T> for PulseTrain<T> {
    fn budget(&self, t: T) -> T {
        if t < self.start {
            return T::zero();
        }
        let k = ((t - self.start) / self.period()).floor();
        let phase = t - self.start - k * self.period();
        if phase < self.on {
            let idx = k.to_usize().unwrap_or(0) % self.levels.len();
            self.levels[idx]
        } else {
            T::zero()
        }
    }

    fn breakpoints(&self, from: T, to: T) -> Vec<T> {
        let mut out = Vec::new();
        let period = self.period();
        let first = ((from - self.start) / period).floor().max(T::zero());
        let mut k = first;
        loop {
            let rise = self.start + k * period;
            if rise >= to {
                break;
            }
            if rise > from {
                out.push(rise);
            }
            let fall = rise + self.on;
            if self.off > T::zero() && fall > from && fall < to {
                out.push(fall);
            }
            k += T::one();
        }
        out
    }
}

/// Step function: `values[i]` applies on `[starts[i], starts[i + 1])`,
/// the last value holds forever, zero before `starts[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant<T> {
    starts: Vec<T>,
    values: Vec<T>,
}

impl<T: Scalar> PiecewiseConstant<T> {
    pub fn new(starts: Vec<T>, values: Vec<T>) -> Self {
        assert_eq!(starts.len(), values.len());
        assert!(starts.windows(2).all(|w| w[0] < w[1]));
        Self { starts, values }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

impl<T: Scalar> Budget<T> for PiecewiseConstant<T> {
    fn budget(&self, t: T) -> T {
        match self.starts.partition_point(|&s| s <= t) {
            0 => T::zero(),
            i => self.values[i - 1],
        }
    }

    fn breakpoints(&self, from: T, to: T) -> Vec<T> {
        self.starts
            .iter()
            .copied()
            .filter(|&s| s > from && s < to)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_train_cycles_levels() {
        let p = PulseTrain::new(vec![1.0, 2.0], 3.0, 2.0);
        assert_eq!(p.budget(0.0), 1.0);
        assert_eq!(p.budget(2.9), 1.0);
        assert_eq!(p.budget(3.0), 0.0);
        assert_eq!(p.budget(5.0), 2.0);
        assert_eq!(p.budget(10.5), 1.0);
        assert_eq!(p.budget(-1.0), 0.0);
        assert_eq!(p.breakpoints(0.0, 11.0), vec![3.0, 5.0, 8.0, 10.0]);
        assert_eq!(p.breakpoints(3.0, 5.0), Vec::<f64>::new());
    }

    #[test]
    fn step_function() {
        let s = PiecewiseConstant::new(vec![0.0, 1.0, 2.5], vec![4.0, 5.0, 6.0]);
        assert_eq!(s.budget(-0.1), 0.0);
        assert_eq!(s.budget(0.0), 4.0);
        assert_eq!(s.budget(1.0), 5.0);
        assert_eq!(s.budget(9.0), 6.0);
        assert_eq!(s.breakpoints(0.0, 3.0), vec![1.0, 2.5]);
    }

    #[test]
    fn closures_are_budgets() {
        let b = |t: f64| 2.0 * t;
        assert_eq!(b.budget(1.5), 3.0);
        assert!(b.breakpoints(0.0, 10.0).is_empty());
    }
}
