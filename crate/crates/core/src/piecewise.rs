//! Right-continuous piecewise-constant functions of time.

use alloc::vec::Vec;

use crate::{Error, Result};

/// A step function on `[0, ∞)`: `values[i]` holds on `[times[i], times[i+1])`
/// and the last value extends to infinity. The first breakpoint is always 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant<T> {
    times: Vec<f64>,
    values: Vec<T>,
}

impl<T> PiecewiseConstant<T> {
    /// Builds the function from `(time, value)` pairs.
    pub fn new(points: Vec<(f64, T)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidSchedule("no breakpoints"));
        }
        if points[0].0 != 0.0 {
            return Err(Error::InvalidSchedule("first breakpoint must be at t=0"));
        }
        let mut times = Vec::with_capacity(points.len());
        let mut values = Vec::with_capacity(points.len());
        for (t, v) in points {
            if !t.is_finite() {
                return Err(Error::InvalidSchedule("breakpoint time is not finite"));
            }
            if let Some(&last) = times.last() {
                if t <= last {
                    return Err(Error::InvalidSchedule(
                        "breakpoints must be strictly increasing",
                    ));
                }
            }
            times.push(t);
            values.push(v);
        }
        Ok(Self { times, values })
    }

    pub fn constant(value: T) -> Self {
        Self {
            times: alloc::vec![0.0],
            values: alloc::vec![value],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn is_constant(&self) -> bool
    where
        T: PartialEq,
    {
        self.values.windows(2).all(|w| w[0] == w[1])
    }

    fn index(&self, t: f64) -> usize {
        self.times.partition_point(|&b| b <= t).saturating_sub(1)
    }

    /// Value on the segment containing `t` (right-continuous).
    pub fn at(&self, t: f64) -> &T {
        &self.values[self.index(t)]
    }

    /// Constant pieces of the function restricted to `[a, b]`, as
    /// `(lo, hi, value)` triples in increasing order.
    pub fn pieces(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64, &T)> + '_ {
        let start = self.index(a);
        (start..self.times.len()).map_while(move |i| {
            let lo = if i == start { a } else { self.times[i] };
            if lo >= b {
                return None;
            }
            let hi = self.times.get(i + 1).map_or(b, |&next| next.min(b));
            Some((lo, hi, &self.values[i]))
        })
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PiecewiseConstant<U> {
        PiecewiseConstant {
            times: self.times.clone(),
            values: self.values.iter().map(&mut f).collect(),
        }
    }
}

impl PiecewiseConstant<f64> {
    /// Exact integral over `[a, b]`, `a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.pieces(a, b).map(|(lo, hi, v)| v * (hi - lo)).sum()
    }

    pub fn sup_abs(&self, horizon: f64) -> f64 {
        self.pieces(0.0, horizon)
            .map(|(_, _, v)| v.abs())
            .fold(0.0, f64::max)
    }
}

/// Sorted union of breakpoints lying in `[0, horizon)`.
pub(crate) fn merge_breakpoints<'a>(
    sets: impl IntoIterator<Item = &'a [f64]>,
    horizon: f64,
) -> Vec<f64> {
    let mut all: Vec<f64> = sets
        .into_iter()
        .flatten()
        .copied()
        .filter(|&t| t < horizon)
        .collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}
