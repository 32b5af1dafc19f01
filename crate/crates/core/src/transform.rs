//! Monotone state-space maps stored as paired grids.

use crate::density::{cell_index, check_grid, interpolate};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A nondecreasing map `K` from source states `x` to target states `y = K(x)`.
///
/// Flat stretches are allowed so that transforms built from densities with
/// zero segments can be represented; [`is_strictly_increasing`](Self::is_strictly_increasing)
/// tells whether the map is invertible everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTransform<T> {
    x: Vec<T>,
    y: Vec<T>,
}

impl<T: Scalar> StateTransform<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        check_grid(&x, "transform source grid")?;
        if x.len() != y.len() {
            return Err(Error::Structure(format!(
                "transform has {} source and {} target states",
                x.len(),
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structure("transform has non-finite targets".into()));
        }
        if let Some(i) = y.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Structure(format!("transform decreases at index {}", i + 1)));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn into_parts(self) -> (Vec<T>, Vec<T>) {
        (self.x, self.y)
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.y.windows(2).all(|w| w[1] > w[0])
    }

    /// `K(x)` by linear interpolation.
    pub fn eval(&self, x: T) -> Result<T> {
        interpolate(&self.x, &self.y, x).ok_or_else(|| {
            Error::Range(format!(
                "state {x} outside transform domain [{}, {}]",
                self.x[0],
                self.x[self.x.len() - 1]
            ))
        })
    }

    /// `K'` at every node: weighted central differences inside, one-sided at the ends.
    pub fn derivative(&self) -> Vec<T> {
        let (x, y) = (&self.x, &self.y);
        let n = x.len();
        let mut d = Vec::with_capacity(n);
        d.push((y[1] - y[0]) / (x[1] - x[0]));
        for i in 1..n - 1 {
            let (hl, hr) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let (sl, sr) = ((y[i] - y[i - 1]) / hl, (y[i + 1] - y[i]) / hr);
            d.push((hr * sl + hl * sr) / (hl + hr));
        }
        d.push((y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]));
        d
    }

    /// The payoff `f = K⁻¹` at a target state; the leftmost preimage on flat stretches.
    pub fn inverse(&self, y: T) -> Result<T> {
        let (lo, hi) = (self.y[0], self.y[self.y.len() - 1]);
        if !(y >= lo && y <= hi) {
            return Err(Error::Range(format!("target {y} outside transform range [{lo}, {hi}]")));
        }
        let j = self.y.partition_point(|&v| v < y);
        if j == 0 {
            return Ok(self.x[0]);
        }
        if self.y[j] == y {
            return Ok(self.x[j]);
        }
        let t = (y - self.y[j - 1]) / (self.y[j] - self.y[j - 1]);
        Ok(self.x[j - 1] + t * (self.x[j] - self.x[j - 1]))
    }

    /// Cell of the source grid containing `x`.
    pub fn cell(&self, x: T) -> usize {
        cell_index(&self.x, x)
    }
}
