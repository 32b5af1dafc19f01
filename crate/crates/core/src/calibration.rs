//! Benchmark parameters from market observables.

use crate::density::GridDensity;
use crate::error::{Error, Result};
use crate::scalar::{quartile_z, Scalar};

/// Bracket searched by [`implied_sigma_by_iqr`].
pub const SIGMA_BRACKET: (f64, f64) = (1e-4, 5.0);
/// Bisection stops once the bracket is narrower than this.
pub const SIGMA_TOL: f64 = 1e-10;

/// Continuously compounded rate `ln(1 + y)` from a simple annual yield.
pub fn short_rate_from_yield<T: Scalar>(annual_yield: T) -> Result<T> {
    if !(annual_yield > -T::one()) {
        return Err(Error::Domain(format!("yield {annual_yield} must exceed -1")));
    }
    Ok(annual_yield.ln_1p())
}

/// Log return `ln(now / then)` over the observation window.
pub fn trend_from_returns<T: Scalar>(spot_now: T, spot_then: T) -> Result<T> {
    if !(spot_now > T::zero() && spot_then > T::zero()) {
        return Err(Error::Domain(format!(
            "prices must be positive, got {spot_now} and {spot_then}"
        )));
    }
    Ok((spot_now / spot_then).ln())
}

/// `ln IQR` of the risk-neutral lognormal at volatility `sigma`.
fn log_rn_iqr(spot: f64, rate: f64, expiry: f64, sigma: f64) -> f64 {
    let v = sigma * expiry.sqrt();
    let median = spot.ln() + (rate - 0.5 * sigma * sigma) * expiry;
    std::f64::consts::LN_2 + median + (quartile_z::<f64>() * v).sinh().ln()
}

/// Volatility at which the risk-neutral IQR peaks; beyond it the IQR shrinks again.
fn iqr_peak_sigma(expiry: f64) -> f64 {
    let z = quartile_z::<f64>();
    let slope = |s: f64| {
        let a = z * s * expiry.sqrt();
        z * expiry.sqrt() / a.tanh() - s * expiry
    };
    let (mut lo, mut hi) = (SIGMA_BRACKET.0, SIGMA_BRACKET.1);
    if slope(hi) > 0.0 {
        return hi;
    }
    while hi - lo > SIGMA_TOL {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Volatility whose risk-neutral lognormal has the IQR of the normalized `q1`.
pub fn implied_sigma_by_iqr<T: Scalar>(q1: &GridDensity<T>, spot: T, rate: T, expiry: T) -> Result<T> {
    if !(spot > T::zero() && expiry > T::zero()) {
        return Err(Error::Domain("spot and expiry must be positive".into()));
    }
    let mass = q1.mass();
    if !(mass > T::zero()) {
        return Err(Error::Calibration("density has zero mass".into()));
    }
    let target = q1
        .iqr()
        .map_err(|e| Error::Calibration(format!("IQR of the density: {e}")))?
        .f64();
    if !(target > 0.0) {
        return Err(Error::Calibration(format!("IQR {target} is not positive")));
    }
    let (s, r, t) = (spot.f64(), rate.f64(), expiry.f64());
    let goal = target.ln();
    let mut lo = SIGMA_BRACKET.0;
    let mut hi = iqr_peak_sigma(t).min(SIGMA_BRACKET.1);
    let f = |sigma: f64| log_rn_iqr(s, r, t, sigma) - goal;
    let (flo, fhi) = (f(lo), f(hi));
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::Calibration(format!(
            "IQR {target} is outside the range reachable for sigma in [{lo}, {hi}]"
        )));
    }
    while hi - lo > SIGMA_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(T::of(0.5 * (lo + hi)))
}
