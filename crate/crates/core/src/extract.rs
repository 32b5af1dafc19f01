//! Raw state-price densities from a call chain.
//!
//! Three routes are provided: the second finite difference of call prices,
//! a linear system built from concatenated butterfly slopes, and a
//! nonnegative least-squares fit of the discretized pricing integral.

use crate::density::{check_grid, trapezoid, trapezoid_weights, GridDensity};
use crate::error::{Error, Result};
use crate::market_data::OptionChain;
use crate::nnls::{nnls, NnlsOptions};
use crate::scalar::Scalar;

/// An SPD estimate that may still contain negative values.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSpd<T> {
    grid: Vec<T>,
    values: Vec<T>,
}

impl<T: Scalar> RawSpd<T> {
    pub fn new(grid: Vec<T>, values: Vec<T>) -> Result<Self> {
        check_grid(&grid, "raw SPD grid")?;
        if grid.len() != values.len() {
            return Err(Error::Structure(format!(
                "raw SPD has {} states but {} values",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structure("raw SPD contains non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Indices with negative estimates.
    pub fn negative_indices(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v < T::zero())
            .map(|(i, _)| i)
            .collect()
    }
}

fn require_strikes<T>(chain: &OptionChain<T>, needed: usize) -> Result<()>
where
    T: Scalar,
{
    if chain.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: chain.len(),
        });
    }
    Ok(())
}

/// Second difference `(C_i − 2 C_{i+1} + C_{i+2}) / ΔK²`, placed at `K_{i+1}`.
pub fn bl_raw_spd<T: Scalar>(chain: &OptionChain<T>) -> Result<RawSpd<T>> {
    require_strikes(chain, 3)?;
    let h2 = chain.strike_step() * chain.strike_step();
    let two = T::of(2.0);
    let values = chain
        .calls()
        .windows(3)
        .map(|c| (c[0] - two * c[1] + c[2]) / h2)
        .collect();
    let k = chain.strikes();
    RawSpd::new(k[1..k.len() - 1].to_vec(), values)
}

/// Butterfly slope equations over the interior strikes plus two anchor states.
///
/// `slopes[k]` estimates `q(grid[k + 2]) − q(grid[k])`, so the equations
/// split into two independent chains (even and odd grid indices). The
/// system is exactly identified when each chain holds one anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeSystem<T> {
    grid: Vec<T>,
    slopes: Vec<T>,
    boundary: (T, T),
}

impl<T: Scalar> SlopeSystem<T> {
    pub fn new(grid: Vec<T>, slopes: Vec<T>, boundary: (T, T)) -> Result<Self> {
        check_grid(&grid, "slope grid")?;
        if slopes.len() + 2 != grid.len() {
            return Err(Error::Structure(format!(
                "{} slopes do not fit a grid of {} states",
                slopes.len(),
                grid.len()
            )));
        }
        let system = Self {
            grid,
            slopes,
            boundary,
        };
        system.boundary_indices()?;
        Ok(system)
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn slopes(&self) -> &[T] {
        &self.slopes
    }

    pub fn boundary(&self) -> (T, T) {
        self.boundary
    }

    /// Replaces the anchor states.
    pub fn with_boundary(self, low: T, high: T) -> Result<Self> {
        Self::new(self.grid, self.slopes, (low, high))
    }

    /// Default anchors: the first interior strike and the last interior strike
    /// on the other parity chain.
    pub fn default_boundary(grid: &[T]) -> (T, T) {
        let last = grid.len() - 1;
        let hi = if last % 2 == 1 { last } else { last - 1 };
        (grid[0], grid[hi])
    }

    fn locate(&self, state: T) -> Result<usize> {
        let step = (self.grid[self.grid.len() - 1] - self.grid[0]) / T::of((self.grid.len() - 1) as f64);
        let tol = step * T::of(1e-9);
        self.grid
            .iter()
            .position(|&g| (g - state).abs() <= tol)
            .ok_or_else(|| Error::Range(format!("boundary state {state} is not a grid state")))
    }

    fn boundary_indices(&self) -> Result<(usize, usize)> {
        Ok((self.locate(self.boundary.0)?, self.locate(self.boundary.1)?))
    }
}

/// Concatenated short/long butterfly prices `(−C_{i−2} + 2C_{i−1} − 2C_{i+1} + C_{i+2}) / ΔK²`.
pub fn butterfly_slopes<T: Scalar>(chain: &OptionChain<T>) -> Result<SlopeSystem<T>> {
    require_strikes(chain, 5)?;
    let h2 = chain.strike_step() * chain.strike_step();
    let two = T::of(2.0);
    let slopes = chain
        .calls()
        .windows(5)
        .map(|c| (-c[0] + two * c[1] - two * c[3] + c[4]) / h2)
        .collect();
    let k = chain.strikes();
    let grid = k[1..k.len() - 1].to_vec();
    let boundary = SlopeSystem::default_boundary(&grid);
    SlopeSystem::new(grid, slopes, boundary)
}

/// Solves the slope equations with `q = 0` at both anchor states.
pub fn solve_slope_spd<T: Scalar>(system: &SlopeSystem<T>) -> Result<RawSpd<T>> {
    let (lo, hi) = system.boundary_indices()?;
    if lo % 2 == hi % 2 {
        return Err(Error::LinearAlgebra(format!(
            "anchors at grid indices {lo} and {hi} sit on the same parity chain; the other chain is undetermined"
        )));
    }
    let m = system.grid.len();
    let s = &system.slopes;
    let mut q = vec![T::zero(); m];
    for anchor in [lo, hi] {
        let mut k = anchor;
        while k + 2 < m {
            q[k + 2] = q[k] + s[k];
            k += 2;
        }
        let mut k = anchor;
        while k >= 2 {
            q[k - 2] = q[k] - s[k - 2];
            k -= 2;
        }
    }
    RawSpd::new(system.grid.clone(), q)
}

/// Sets negative values to zero and rescales to trapezoid mass `discount`.
pub fn clip_rescale<T: Scalar>(raw: &RawSpd<T>, discount: T) -> Result<GridDensity<T>> {
    if !(discount > T::zero() && discount <= T::one()) {
        return Err(Error::Domain(format!("discount factor {discount} outside (0, 1]")));
    }
    let clipped: Vec<T> = raw.values.iter().map(|&v| v.max(T::zero())).collect();
    let mass = trapezoid(&raw.grid, &clipped);
    if !(mass > T::zero()) {
        return Err(Error::Degenerate("raw SPD has no positive mass after clipping".into()));
    }
    let scale = discount / mass;
    GridDensity::spd(raw.grid.clone(), clipped.into_iter().map(|v| v * scale).collect())
}

/// Row-major call payoff matrix `P[i][j] = max(s_j − K_i, 0) w_j` with trapezoid cell weights `w`.
pub fn payoff_matrix<T: Scalar>(strikes: &[T], states: &[T]) -> Vec<T> {
    let w = trapezoid_weights(states);
    strikes
        .iter()
        .flat_map(|&k| states.iter().zip(&w).map(move |(&s, &wj)| (s - k).max(T::zero()) * wj))
        .collect()
}

/// Weighted pricing error `Σ W_i (c_i − (P q)_i)²`.
pub fn pricing_objective<T: Scalar>(strikes: &[T], calls: &[T], states: &[T], weights: &[T], q: &[T]) -> T {
    let p = payoff_matrix(strikes, states);
    let n = states.len();
    (0..strikes.len())
        .map(|i| {
            let model: T = (0..n).map(|j| p[i * n + j] * q[j]).sum();
            weights[i] * (calls[i] - model).powi(2)
        })
        .sum()
}

/// Result of [`nnls_spd`].
#[derive(Debug, Clone, PartialEq)]
pub struct NnlsFit<T> {
    pub density: GridDensity<T>,
    /// `‖c − P q‖₂` (unweighted).
    pub residual_norm: T,
    /// `(c − P q)ᵀ W (c − P q)`.
    pub objective: T,
    pub iterations: usize,
}

/// Nonnegative SPD values on `states` fitted to raw strikes and prices.
pub fn nnls_fit<T: Scalar>(strikes: &[T], calls: &[T], states: &[T], weights: &[T]) -> Result<(Vec<T>, NnlsStats<T>)> {
    if strikes.len() != calls.len() || strikes.len() != weights.len() {
        return Err(Error::Structure(format!(
            "{} strikes, {} prices and {} weights",
            strikes.len(),
            calls.len(),
            weights.len()
        )));
    }
    if strikes.is_empty() || states.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= T::zero())) {
        return Err(Error::Domain("weights must be finite and nonnegative".into()));
    }
    let m = strikes.len();
    let n = states.len();
    let p = if n == 1 {
        // A single state carries unit cell weight.
        strikes.iter().map(|&k| (states[0] - k).max(T::zero())).collect()
    } else {
        payoff_matrix(strikes, states)
    };
    let root_w: Vec<T> = weights.iter().map(|w| w.sqrt()).collect();
    let scaled: Vec<T> = p
        .iter()
        .enumerate()
        .map(|(idx, &v)| v * root_w[idx / n])
        .collect();
    let rhs: Vec<T> = calls.iter().zip(&root_w).map(|(&c, &w)| c * w).collect();
    let sol = nnls(&scaled, m, n, &rhs, NnlsOptions::default())?;
    let residuals: Vec<T> = (0..m)
        .map(|i| calls[i] - (0..n).map(|j| p[i * n + j] * sol.x[j]).sum::<T>())
        .collect();
    let residual_norm = residuals.iter().map(|&r| r * r).sum::<T>().sqrt();
    let objective = residuals.iter().zip(weights).map(|(&r, &w)| w * r * r).sum();
    Ok((
        sol.x,
        NnlsStats {
            residual_norm,
            objective,
            iterations: sol.iterations,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnlsStats<T> {
    pub residual_norm: T,
    pub objective: T,
    pub iterations: usize,
}

/// `argmin_{q ≥ 0} (c − P q)ᵀ W (c − P q)` on `states` with diagonal `W = diag(weights)`.
pub fn nnls_spd<T: Scalar>(chain: &OptionChain<T>, states: &[T], weights: &[T]) -> Result<NnlsFit<T>> {
    check_grid(states, "NNLS state grid")?;
    let k = chain.strikes();
    let tol = chain.strike_step() * T::of(1e-9);
    if states[0] > k[0] + tol || states[states.len() - 1] < k[k.len() - 1] - tol {
        return Err(Error::Range(format!(
            "state grid [{}, {}] does not cover strikes [{}, {}]",
            states[0],
            states[states.len() - 1],
            k[0],
            k[k.len() - 1]
        )));
    }
    if weights.len() != chain.len() {
        return Err(Error::Structure(format!(
            "{} weights for {} options",
            weights.len(),
            chain.len()
        )));
    }
    let (q, stats) = nnls_fit(k, chain.calls(), states, weights)?;
    let density = GridDensity::spd(states.to_vec(), q)?;
    Ok(NnlsFit {
        density,
        residual_norm: stats.residual_norm,
        objective: stats.objective,
        iterations: stats.iterations,
    })
}

/// [`nnls_spd`] on the strike grid with identity weights.
pub fn nnls_spd_default<T: Scalar>(chain: &OptionChain<T>) -> Result<NnlsFit<T>> {
    let weights = vec![T::one(); chain.len()];
    nnls_spd(chain, chain.strikes(), &weights)
}

/// Call prices `∫ max(s − K, 0) q(s) ds` by the trapezoid rule with the kink inserted as a node.
///
/// Strikes below the grid use the linear payoff over the whole support;
/// strikes above it are an extrapolation error.
pub fn reprice_calls<T: Scalar>(spd: &GridDensity<T>, strikes: &[T]) -> Result<Vec<T>> {
    let x = spd.grid();
    let q = spd.values();
    let half = T::of(0.5);
    strikes
        .iter()
        .map(|&k| {
            if k > spd.upper() {
                return Err(Error::Range(format!(
                    "strike {k} above the density grid maximum {}",
                    spd.upper()
                )));
            }
            let payoff = |j: usize| (x[j] - k).max(T::zero()) * q[j];
            let start = x.partition_point(|&s| s <= k);
            let mut total = T::zero();
            if start == 0 {
                for j in 1..x.len() {
                    total = total + half * (x[j] - x[j - 1]) * (payoff(j - 1) + payoff(j));
                }
            } else if start < x.len() {
                // Cell containing the kink: the integrand vanishes at K.
                total = half * (x[start] - k) * payoff(start);
                for j in start + 1..x.len() {
                    total = total + half * (x[j] - x[j - 1]) * (payoff(j - 1) + payoff(j));
                }
            }
            Ok(total)
        })
        .collect()
}

/// Model prices scaled so the price at `reference_strike` matches `observed_reference`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedPrices<T> {
    pub factor: T,
    pub prices: Vec<T>,
}

pub fn reprice_calls_calibrated<T: Scalar>(
    spd: &GridDensity<T>,
    strikes: &[T],
    reference_strike: T,
    observed_reference: T,
) -> Result<CalibratedPrices<T>> {
    let model_ref = reprice_calls(spd, &[reference_strike])?[0];
    if !(model_ref > T::zero()) {
        return Err(Error::Degenerate(format!(
            "model price at reference strike {reference_strike} is {model_ref}"
        )));
    }
    let factor = observed_reference / model_ref;
    let prices = reprice_calls(spd, strikes)?.into_iter().map(|p| p * factor).collect();
    Ok(CalibratedPrices { factor, prices })
}
