//! Black–Scholes–Merton benchmark: lognormal physical and risk-neutral laws,
//! the discounted state-price density and the closed-form call price.

use serde::{Deserialize, Serialize};

use crate::density::GridDensity;
use crate::error::{Error, Result};
use crate::scalar::{norm_cdf, norm_ppf, norm_sf, quartile_z, Scalar};

/// Tail probability cut off at both ends of the default sampling grid.
pub const DEFAULT_TAIL: f64 = 1e-8;
/// Default number of nodes for sampled benchmark densities.
pub const DEFAULT_GRID_POINTS: usize = 4001;

/// Lognormal law of `X` with `ln X ~ N(log_location, log_scale²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lognormal<T> {
    pub log_location: T,
    pub log_scale: T,
}

impl<T: Scalar> Lognormal<T> {
    pub fn new(log_location: T, log_scale: T) -> Result<Self> {
        if !(log_scale > T::zero() && log_scale.is_finite() && log_location.is_finite()) {
            return Err(Error::Domain(format!(
                "lognormal needs finite location and positive scale, got ({log_location}, {log_scale})"
            )));
        }
        Ok(Self {
            log_location,
            log_scale,
        })
    }

    /// Density; zero for nonpositive states.
    pub fn pdf(&self, x: T) -> T {
        if !(x > T::zero()) {
            return T::zero();
        }
        let z = (x.ln() - self.log_location) / self.log_scale;
        (-T::of(0.5) * z * z).exp() / (x * self.log_scale * T::TAU().sqrt())
    }

    pub fn cdf(&self, x: T) -> T {
        if !(x > T::zero()) {
            return T::zero();
        }
        norm_cdf((x.ln() - self.log_location) / self.log_scale)
    }

    /// Upper tail `P(X > x)`.
    pub fn sf(&self, x: T) -> T {
        if !(x > T::zero()) {
            return T::one();
        }
        norm_sf((x.ln() - self.log_location) / self.log_scale)
    }

    pub fn quantile(&self, p: T) -> Result<T> {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::Range(format!("quantile level {p} outside (0, 1)")));
        }
        Ok((self.log_location + self.log_scale * norm_ppf(p)).exp())
    }

    /// Quantile at upper-tail level `q = 1 - p`, accurate for tiny `q`.
    pub fn upper_quantile(&self, q: T) -> Result<T> {
        if !(q > T::zero() && q < T::one()) {
            return Err(Error::Range(format!("tail level {q} outside (0, 1)")));
        }
        Ok((self.log_location - self.log_scale * norm_ppf(q)).exp())
    }

    pub fn median(&self) -> T {
        self.log_location.exp()
    }

    pub fn iqr(&self) -> T {
        T::of(2.0) * self.median() * (quartile_z::<T>() * self.log_scale).sinh()
    }

    pub fn mean(&self) -> T {
        (self.log_location + T::of(0.5) * self.log_scale.powi(2)).exp()
    }

    pub fn std(&self) -> T {
        let s2 = self.log_scale.powi(2);
        self.mean() * s2.exp_m1().sqrt()
    }

    pub fn skew(&self) -> T {
        let e = self.log_scale.powi(2).exp();
        (e + T::of(2.0)) * (e - T::one()).sqrt()
    }

    /// Raw kurtosis.
    pub fn kurtosis(&self) -> T {
        let s2 = self.log_scale.powi(2);
        (T::of(4.0) * s2).exp() + T::of(2.0) * (T::of(3.0) * s2).exp() + T::of(3.0) * (T::of(2.0) * s2).exp()
            - T::of(3.0)
    }

    /// Uniform grid on `[max(floor, Q(tail)), Q(1 - tail)]`.
    pub fn grid(&self, tail: T, points: usize) -> Result<Vec<T>> {
        if points < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: points,
            });
        }
        let floor = self.median() * T::of(1e-12);
        let lo = self.quantile(tail)?.max(floor);
        let hi = self.upper_quantile(tail)?;
        let step = (hi - lo) / T::of((points - 1) as f64);
        let mut g: Vec<T> = (0..points).map(|i| lo + step * T::of(i as f64)).collect();
        g[points - 1] = hi;
        Ok(g)
    }

    pub fn default_grid(&self) -> Result<Vec<T>> {
        self.grid(T::of(DEFAULT_TAIL), DEFAULT_GRID_POINTS)
    }
}

/// Benchmark parameters: spot, short rate, physical trend, volatility, time to expiry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsmParams<T> {
    pub spot: T,
    pub rate: T,
    pub trend: T,
    pub sigma: T,
    pub expiry: T,
}

impl<T: Scalar> BsmParams<T> {
    pub fn new(spot: T, rate: T, trend: T, sigma: T, expiry: T) -> Result<Self> {
        let p = Self {
            spot,
            rate,
            trend,
            sigma,
            expiry,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.spot, self.rate, self.trend, self.sigma, self.expiry]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("benchmark parameters must be finite".into()));
        }
        if !(self.sigma > T::zero() && self.expiry > T::zero() && self.spot > T::zero()) {
            return Err(Error::Domain(format!(
                "benchmark needs spot, sigma and expiry > 0, got spot={} sigma={} expiry={}",
                self.spot, self.sigma, self.expiry
            )));
        }
        Ok(())
    }

    pub fn with_trend(self, trend: T) -> Self {
        Self { trend, ..self }
    }

    pub fn with_sigma(self, sigma: T) -> Self {
        Self { sigma, ..self }
    }

    /// Zero-coupon bond price `exp(-r T)`.
    pub fn discount(&self) -> T {
        (-self.rate * self.expiry).exp()
    }

    /// `(μ - r) / σ`.
    pub fn market_price_of_risk(&self) -> T {
        (self.trend - self.rate) / self.sigma
    }

    fn law(&self, drift: T) -> Lognormal<T> {
        Lognormal {
            log_location: self.spot.ln() + (drift - T::of(0.5) * self.sigma * self.sigma) * self.expiry,
            log_scale: self.sigma * self.expiry.sqrt(),
        }
    }

    /// Physical law of the terminal price.
    pub fn physical(&self) -> Lognormal<T> {
        self.law(self.trend)
    }

    /// Risk-neutral law of the terminal price.
    pub fn risk_neutral(&self) -> Lognormal<T> {
        self.law(self.rate)
    }

    pub fn physical_density(&self, x: T) -> Result<T> {
        if !(x > T::zero()) {
            return Err(Error::Domain(format!("state {x} must be positive")));
        }
        Ok(self.physical().pdf(x))
    }

    /// Discounted risk-neutral density; integrates to [`discount`](Self::discount).
    pub fn spd(&self, x: T) -> Result<T> {
        if !(x > T::zero()) {
            return Err(Error::Domain(format!("state {x} must be positive")));
        }
        Ok(self.discount() * self.risk_neutral().pdf(x))
    }

    pub fn benchmark_spd(&self) -> LognormalSpd<T> {
        LognormalSpd {
            law: self.risk_neutral(),
            discount: self.discount(),
        }
    }

    /// Closed-form European call price.
    pub fn call_price(&self, strike: T) -> T {
        if !(strike > T::zero()) {
            return self.spot - strike * self.discount();
        }
        let vol = self.sigma * self.expiry.sqrt();
        let d1 = ((self.spot / strike).ln() + (self.rate + T::of(0.5) * self.sigma * self.sigma) * self.expiry)
            / vol;
        let d2 = d1 - vol;
        (self.spot * norm_cdf(d1) - strike * self.discount() * norm_cdf(d2)).max(T::zero())
    }

    /// State-price density sampled on `grid`.
    pub fn sample_spd_on(&self, grid: Vec<T>) -> Result<GridDensity<T>> {
        let values = grid
            .iter()
            .map(|&x| self.spd(x))
            .collect::<Result<Vec<_>>>()?;
        GridDensity::spd(grid, values)
    }

    /// State-price density on the default risk-neutral grid.
    pub fn sample_spd(&self) -> Result<GridDensity<T>> {
        self.sample_spd_on(self.risk_neutral().default_grid()?)
    }

    /// Physical density sampled on `grid`; tagged as a probability density.
    pub fn sample_physical_on(&self, grid: Vec<T>) -> Result<GridDensity<T>> {
        let values = grid
            .iter()
            .map(|&x| self.physical_density(x))
            .collect::<Result<Vec<_>>>()?;
        GridDensity::probability(grid, values)
    }

    pub fn sample_physical(&self) -> Result<GridDensity<T>> {
        self.sample_physical_on(self.physical().default_grid()?)
    }
}

/// Discounted lognormal density `D ψ(x)` used as a smoothing benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalSpd<T> {
    pub law: Lognormal<T>,
    pub discount: T,
}

impl<T: Scalar> LognormalSpd<T> {
    pub fn pdf(&self, x: T) -> T {
        self.discount * self.law.pdf(x)
    }

    /// Integral of the density over `(0, x]`.
    pub fn mass_below(&self, x: T) -> T {
        self.discount * self.law.cdf(x)
    }

    pub fn sample_on(&self, grid: Vec<T>) -> Result<GridDensity<T>> {
        let values = grid.iter().map(|&x| self.pdf(x)).collect();
        GridDensity::spd(grid, values)
    }
}
