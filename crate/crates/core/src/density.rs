//! Densities sampled on a grid: quadrature, CDF and quantiles, moments.
//!
//! A [`GridDensity`] stores a nonnegative function at strictly increasing
//! states and is read as the piecewise-linear interpolant of those samples.
//! Every integral is the composite trapezoid rule on the stored grid, which is
//! exact for that interpolant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mass tolerance for [`DensityKind::Probability`].
pub const PROBABILITY_MASS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityKind {
    /// State-price density; integrates to a discount factor in (0, 1].
    Spd,
    /// Probability density; integrates to one.
    Probability,
}

/// Composite trapezoid rule.
pub fn trapezoid<T: Scalar>(x: &[T], y: &[T]) -> T {
    let half = T::of(0.5);
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| half * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Trapezoid cell weights `w` with `Σ w_j y_j` equal to [`trapezoid`].
pub fn trapezoid_weights<T: Scalar>(x: &[T]) -> Vec<T> {
    let n = x.len();
    let half = T::of(0.5);
    let mut w = vec![T::zero(); n];
    for j in 0..n.saturating_sub(1) {
        let dx = half * (x[j + 1] - x[j]);
        w[j] = w[j] + dx;
        w[j + 1] = w[j + 1] + dx;
    }
    w
}

/// Running trapezoid integral; element `i` is the integral over `[x_0, x_i]`.
pub fn cumulative_trapezoid<T: Scalar>(x: &[T], y: &[T]) -> Vec<T> {
    let half = T::of(0.5);
    let mut out = Vec::with_capacity(x.len());
    let mut acc = T::zero();
    out.push(acc);
    for i in 1..x.len() {
        acc = acc + half * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
        out.push(acc);
    }
    out
}

/// Index `j` with `grid[j] <= x < grid[j + 1]`, clamped to the last cell.
pub(crate) fn cell_index<T: Scalar>(grid: &[T], x: T) -> usize {
    let upper = grid.partition_point(|&g| g <= x);
    upper.saturating_sub(1).min(grid.len() - 2)
}

/// Linear interpolation of `(grid, values)` at `x`; `None` outside the grid.
pub(crate) fn interpolate<T: Scalar>(grid: &[T], values: &[T], x: T) -> Option<T> {
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if !(x >= lo && x <= hi) {
        return None;
    }
    let j = cell_index(grid, x);
    let t = (x - grid[j]) / (grid[j + 1] - grid[j]);
    Some(values[j] + t * (values[j + 1] - values[j]))
}

pub(crate) fn check_grid<T: Scalar>(grid: &[T], what: &str) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: grid.len(),
        });
    }
    if grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::Structure(format!("{what} contains non-finite states")));
    }
    if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Structure(format!(
            "{what} is not strictly increasing at index {}",
            i + 1
        )));
    }
    Ok(())
}

/// A nonnegative function sampled on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity<T> {
    grid: Vec<T>,
    values: Vec<T>,
    kind: DensityKind,
}

impl<T: Scalar> GridDensity<T> {
    pub fn new(grid: Vec<T>, values: Vec<T>, kind: DensityKind) -> Result<Self> {
        check_grid(&grid, "density grid")?;
        if grid.len() != values.len() {
            return Err(Error::Structure(format!(
                "grid has {} states but {} values",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= T::zero())) {
            return Err(Error::InvalidDensity(format!(
                "value at index {i} is {} (must be finite and nonnegative)",
                values[i]
            )));
        }
        let d = Self { grid, values, kind };
        let mass = d.mass().f64();
        match kind {
            DensityKind::Probability if (mass - 1.0).abs() > PROBABILITY_MASS_TOL => {
                Err(Error::InvalidDensity(format!("probability density has mass {mass}")))
            }
            DensityKind::Spd if !(mass > 0.0 && mass <= 1.0 + PROBABILITY_MASS_TOL) => Err(
                Error::InvalidDensity(format!("state-price density has mass {mass} outside (0, 1]")),
            ),
            _ => Ok(d),
        }
    }

    pub fn spd(grid: Vec<T>, values: Vec<T>) -> Result<Self> {
        Self::new(grid, values, DensityKind::Spd)
    }

    pub fn probability(grid: Vec<T>, values: Vec<T>) -> Result<Self> {
        Self::new(grid, values, DensityKind::Probability)
    }

    /// Divides `values` by their trapezoid mass and tags the result as a probability density.
    pub fn normalized(grid: Vec<T>, values: Vec<T>) -> Result<Self> {
        check_grid(&grid, "density grid")?;
        if grid.len() != values.len() {
            return Err(Error::Structure("grid and values differ in length".into()));
        }
        let mass = trapezoid(&grid, &values);
        if !(mass > T::zero() && mass.is_finite()) {
            return Err(Error::Degenerate(format!("cannot normalize a density with mass {mass}")));
        }
        let values = values.into_iter().map(|v| v / mass).collect();
        Self::probability(grid, values)
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn into_parts(self) -> (Vec<T>, Vec<T>, DensityKind) {
        (self.grid, self.values, self.kind)
    }

    pub fn lower(&self) -> T {
        self.grid[0]
    }

    pub fn upper(&self) -> T {
        self.grid[self.grid.len() - 1]
    }

    pub fn mass(&self) -> T {
        trapezoid(&self.grid, &self.values)
    }

    /// Density value by linear interpolation; states outside the grid are a range error.
    pub fn eval(&self, x: T) -> Result<T> {
        interpolate(&self.grid, &self.values, x).ok_or_else(|| {
            Error::Range(format!(
                "state {x} outside density grid [{}, {}]",
                self.lower(),
                self.upper()
            ))
        })
    }

    /// CDF at every grid node (unnormalized: the last entry is the mass).
    pub fn cumulative(&self) -> Vec<T> {
        cumulative_trapezoid(&self.grid, &self.values)
    }

    /// Integral of the density over `(-inf, x]`.
    pub fn cdf(&self, x: T) -> T {
        if x <= self.lower() {
            return T::zero();
        }
        if x >= self.upper() {
            return self.mass();
        }
        let cum = self.cumulative();
        self.cdf_with(&cum, x)
    }

    pub(crate) fn cdf_with(&self, cum: &[T], x: T) -> T {
        if x <= self.lower() {
            return T::zero();
        }
        if x >= self.upper() {
            return cum[cum.len() - 1];
        }
        let j = cell_index(&self.grid, x);
        let fx = interpolate(&self.grid, &self.values, x).expect("x inside grid");
        cum[j] + T::of(0.5) * (x - self.grid[j]) * (self.values[j] + fx)
    }

    /// State at which the normalized CDF reaches `p`.
    ///
    /// `p` is a probability in (0, 1) of the normalized density `self / mass`.
    /// Inverts the piecewise-quadratic CDF of the piecewise-linear density,
    /// taking the leftmost node when a level is attained on a flat stretch.
    pub fn quantile(&self, p: T) -> Result<T> {
        let cum = self.cumulative();
        self.quantile_with(&cum, p)
    }

    pub(crate) fn quantile_with(&self, cum: &[T], p: T) -> Result<T> {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::Range(format!("quantile level {p} outside (0, 1)")));
        }
        let mass = cum[cum.len() - 1];
        if !(mass > T::zero()) {
            return Err(Error::Degenerate("density has zero mass".into()));
        }
        let target = p * mass;
        let j = cum.partition_point(|&c| c < target);
        if j == 0 {
            return Ok(self.grid[0]);
        }
        if j >= cum.len() {
            return Err(Error::Range(format!("level {p} not covered by the grid")));
        }
        if cum[j] == target {
            return Ok(self.grid[j]);
        }
        let (a, b) = (self.values[j - 1], self.values[j]);
        let w = self.grid[j] - self.grid[j - 1];
        let r = target - cum[j - 1];
        let root = (a * a + T::of(2.0) * (b - a) * r / w).max(T::zero()).sqrt();
        let u = T::of(2.0) * r / (a + root);
        Ok(self.grid[j - 1] + u.min(w))
    }

    pub fn median(&self) -> Result<T> {
        self.quantile(T::of(0.5))
    }

    /// Interquartile range of the normalized density.
    pub fn iqr(&self) -> Result<T> {
        let cum = self.cumulative();
        Ok(self.quantile_with(&cum, T::of(0.75))? - self.quantile_with(&cum, T::of(0.25))?)
    }

    /// Same shape rescaled to unit mass.
    pub fn to_probability(&self) -> Result<Self> {
        Self::normalized(self.grid.clone(), self.values.clone())
    }

    /// Change of variables `x -> x / spot - 1`.
    pub fn to_returns(&self, spot: T) -> Result<Self> {
        if !(spot > T::zero()) {
            return Err(Error::Domain(format!("spot {spot} must be positive")));
        }
        let grid = self.grid.iter().map(|&x| x / spot - T::one()).collect();
        let values = self.values.iter().map(|&v| v * spot).collect();
        Self::new(grid, values, self.kind)
    }

    /// Moments of the normalized density.
    pub fn moments(&self) -> Result<MomentSummary<T>> {
        let mass = self.mass();
        if !(mass > T::zero()) {
            return Err(Error::Degenerate("moments of a zero-mass density".into()));
        }
        let x = &self.grid;
        let f: Vec<T> = self.values.iter().map(|&v| v / mass).collect();
        let weighted = |g: &dyn Fn(T) -> T| -> T {
            let y: Vec<T> = x.iter().zip(&f).map(|(&xi, &fi)| g(xi) * fi).collect();
            trapezoid(x, &y)
        };
        let mean = weighted(&|s| s);
        let m2 = weighted(&|s| (s - mean).powi(2));
        let m3 = weighted(&|s| (s - mean).powi(3));
        let m4 = weighted(&|s| (s - mean).powi(4));
        if !(m2 > T::zero()) {
            return Err(Error::Degenerate("density has zero variance".into()));
        }
        let std = m2.sqrt();
        Ok(MomentSummary {
            mean,
            median: self.median()?,
            std,
            skew: m3 / (m2 * std),
            kurtosis: m4 / (m2 * m2),
        })
    }
}

/// Location, spread and shape statistics of a density. Kurtosis is raw (normal = 3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary<T> {
    pub mean: T,
    pub median: T,
    pub std: T,
    pub skew: T,
    pub kurtosis: T,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    fn uniform() -> GridDensity<f64> {
        let x = linspace(0.0, 1.0, 1001);
        let y = vec![1.0; 1001];
        GridDensity::probability(x, y).unwrap()
    }

    #[test]
    fn uniform_quantiles() {
        let d = uniform();
        assert!((d.quantile(0.5).unwrap() - 0.5).abs() < 1e-12);
        assert!((d.iqr().unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(d.cdf(0.0), 0.0);
        assert!((d.cdf(1.0) - d.mass()).abs() < 1e-15);
    }

    #[test]
    fn lognormal_iqr() {
        let x = linspace(1e-6, 60.0, 200_001);
        let y: Vec<f64> = x
            .iter()
            .map(|&s| (-(s.ln()).powi(2) / 2.0).exp() / (s * (2.0 * std::f64::consts::PI).sqrt()))
            .collect();
        let d = GridDensity::normalized(x, y).unwrap();
        let z = crate::scalar::quartile_z::<f64>();
        let expected = z.exp() - (-z).exp();
        assert!((expected - 1.4536).abs() < 1e-4);
        assert!((d.iqr().unwrap() - expected).abs() < 1e-4);
    }

    #[test]
    fn triangular_is_symmetric() {
        let x = linspace(-1.0, 1.0, 2001);
        let y: Vec<f64> = x.iter().map(|&s| 1.0 - s.abs()).collect();
        let m = GridDensity::probability(x, y).unwrap().moments().unwrap();
        assert!(m.skew.abs() < 1e-10);
        assert!(m.mean.abs() < 1e-12);
        assert!(m.median.abs() < 1e-12);
    }

    #[test]
    fn normal_kurtosis() {
        let x = linspace(-10.0, 10.0, 20001);
        let y: Vec<f64> = x.iter().map(|&s| crate::scalar::norm_pdf(s)).collect();
        let m = GridDensity::probability(x, y).unwrap().moments().unwrap();
        assert!((m.kurtosis - 3.0).abs() < 1e-3);
        assert!((m.std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_invalid_input() {
        assert!(matches!(
            GridDensity::<f64>::probability(vec![0.0, 1.0], vec![1.0, -1.0]),
            Err(Error::InvalidDensity(_))
        ));
        assert!(matches!(
            GridDensity::<f64>::probability(vec![0.0, 0.0], vec![1.0, 1.0]),
            Err(Error::Structure(_))
        ));
        assert!(matches!(
            GridDensity::<f64>::probability(vec![0.0, 1.0], vec![3.0, 3.0]),
            Err(Error::InvalidDensity(_))
        ));
        assert!(GridDensity::<f64>::spd(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        let zero = GridDensity::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 0.0], DensityKind::Spd);
        assert!(zero.is_err());
    }

    #[test]
    fn quantile_range_errors() {
        let d = uniform();
        assert!(matches!(d.quantile(0.0), Err(Error::Range(_))));
        assert!(matches!(d.quantile(1.0), Err(Error::Range(_))));
        assert!(d.eval(1.5).is_err());
    }

    #[test]
    fn flat_stretch_takes_leftmost_state() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y = vec![1.0, 0.0, 0.0, 1.0];
        let d = GridDensity::normalized(x, y).unwrap();
        assert_eq!(d.quantile(0.5).unwrap(), 1.0);
    }

    #[test]
    fn returns_transform_preserves_mass() {
        let d = uniform();
        let r = d.to_returns(2.0).unwrap();
        assert!((r.mass() - 1.0).abs() < 1e-12);
        assert_eq!(r.lower(), -1.0);
    }

    #[test]
    fn single_precision_moments() {
        let x: Vec<f32> = (0..=400).map(|i| -4.0 + i as f32 * 0.02).collect();
        let y: Vec<f32> = x.iter().map(|&s| crate::scalar::norm_pdf(s)).collect();
        let d = GridDensity::normalized(x, y).unwrap();
        let m = d.moments().unwrap();
        assert!(m.mean.abs() < 1e-5);
        assert!((m.std - 1.0).abs() < 2e-3);
    }
}
