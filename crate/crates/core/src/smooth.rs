//! Smoothing an SPD through its state transform onto a lognormal benchmark.
//!
//! The rough density `q̂` is matched to the lognormal `Dψ` with the same
//! median and IQR by the cumulative-mass map `K(x) = Ψ⁻¹(F(x)/D)`. Smoothing
//! acts on `K` instead of on `q̂`: `z ↦ K(eᶻ)` is convolved with a Gaussian of
//! variance `ε/2`, and the smoothed density is read back as
//! `q̃(s) = K̃'(s) D ψ(K̃(s))`. Because `K̃` stays increasing, `q̃` is positive and
//! carries the mass of the benchmark interval it covers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bsm::{Lognormal, LognormalSpd};
use crate::density::{interpolate, GridDensity};
use crate::error::{Error, Result};
use crate::scalar::{quartile_z, Scalar};
use crate::transform::StateTransform;

/// Kernel and resampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// Kernel width `ε` in `exp(-u²/ε)`; the kernel standard deviation is `√(ε/2)`.
    pub epsilon: f64,
    /// Kernel half-width in standard deviations.
    pub truncation: f64,
    /// Nodes of the log-uniform output grid.
    pub resample_points: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            epsilon: 5e-4,
            truncation: 8.0,
            resample_points: 4001,
        }
    }
}

impl SmoothingConfig {
    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Smoothing(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.truncation >= 4.0 && self.truncation.is_finite()) {
            return Err(Error::Smoothing(format!(
                "truncation must be at least 4 standard deviations, got {}",
                self.truncation
            )));
        }
        if self.resample_points < 3 {
            return Err(Error::Smoothing(format!(
                "need at least 3 resample points, got {}",
                self.resample_points
            )));
        }
        Ok(())
    }

    pub fn kernel_std(&self) -> f64 {
        (0.5 * self.epsilon).sqrt()
    }
}

/// Lognormal with the median and IQR of the normalized `spd`, discounted by its mass.
pub fn fit_benchmark_lognormal<T: Scalar>(spd: &GridDensity<T>) -> Result<LognormalSpd<T>> {
    let fit_err = |e: Error| Error::Calibration(format!("benchmark fit: {e}"));
    let mass = spd.mass();
    if !(mass > T::zero()) {
        return Err(Error::Calibration("benchmark fit: density has zero mass".into()));
    }
    let cum = spd.cumulative();
    let q25 = spd.quantile_with(&cum, T::of(0.25)).map_err(fit_err)?;
    let median = spd.quantile_with(&cum, T::of(0.5)).map_err(fit_err)?;
    let q75 = spd.quantile_with(&cum, T::of(0.75)).map_err(fit_err)?;
    let inside = spd.grid().iter().filter(|&&g| g > q25 && g < q75).count();
    if inside < 2 {
        return Err(Error::Calibration(format!(
            "benchmark fit: interquartile range [{q25}, {q75}] is not resolved by the grid"
        )));
    }
    if !(median > T::zero()) {
        return Err(Error::Calibration(format!("benchmark fit: median {median} is not positive")));
    }
    let iqr = q75 - q25;
    let scale = (iqr / (T::of(2.0) * median)).asinh() / quartile_z::<T>();
    let law = Lognormal::new(median.ln(), scale).map_err(fit_err)?;
    Ok(LognormalSpd { law, discount: mass })
}

/// Cumulative-mass map from `spd` onto `benchmark`.
///
/// Nodes where the mass below or above is zero have no finite image and are dropped.
pub fn build_transform<T: Scalar>(spd: &GridDensity<T>, benchmark: &LognormalSpd<T>) -> Result<StateTransform<T>> {
    let mass = spd.mass();
    let d = benchmark.discount;
    if (mass - d).abs() > T::of(1e-6) {
        return Err(Error::Precondition(format!(
            "density mass {mass} differs from benchmark discount {d}"
        )));
    }
    let (x, q) = (spd.grid(), spd.values());
    let n = x.len();
    let cum = spd.cumulative();
    let half = T::of(0.5);
    let mut above = vec![T::zero(); n];
    for i in (0..n - 1).rev() {
        above[i] = above[i + 1] + half * (x[i + 1] - x[i]) * (q[i] + q[i + 1]);
    }
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let below = cum[i] / d;
        let upper = (above[i] + (d - mass)) / d;
        if !(below > T::zero() && upper > T::zero()) {
            continue;
        }
        let y = if below <= half {
            benchmark.law.quantile(below)?
        } else {
            benchmark.law.upper_quantile(upper)?
        };
        xs.push(x[i]);
        ys.push(y);
    }
    if xs.len() < 2 {
        return Err(Error::Degenerate("density has fewer than two nodes with interior mass".into()));
    }
    StateTransform::new(xs, ys)
}

/// Log-space Gaussian convolution of `K`, resampled on a log-uniform grid.
pub fn smooth_transform<T: Scalar>(t: &StateTransform<T>, cfg: &SmoothingConfig) -> Result<StateTransform<T>> {
    cfg.validate()?;
    let (x, y) = (t.x(), t.y());
    if !(x[0] > T::zero()) {
        return Err(Error::Smoothing(format!("log-space smoothing needs positive states, got {}", x[0])));
    }
    let z: Vec<f64> = x.iter().map(|v| v.f64().ln()).collect();
    let yf: Vec<f64> = y.iter().map(|v| v.f64()).collect();
    let n = cfg.resample_points;
    let (z0, z1) = (z[0], z[z.len() - 1]);
    let width = z1 - z0;
    let std = cfg.kernel_std();
    let reach = cfg.truncation * std;
    if width < reach {
        return Err(Error::Smoothing(format!(
            "log-domain width {width} is below the kernel reach {reach}"
        )));
    }
    let dz = width / (n - 1) as f64;
    let zs: Vec<f64> = (0..n).map(|j| z0 + dz * j as f64).collect();
    let g: Vec<f64> = zs
        .iter()
        .map(|&v| interpolate(&z, &yf, v.clamp(z0, z1)).expect("inside domain"))
        .collect();

    let sub = (2.0 * dz / std).ceil().max(1.0) as usize;
    let du = dz / sub as f64;
    let half_nodes = (reach / du).floor() as usize;
    let mut weights: Vec<f64> = (0..=2 * half_nodes)
        .map(|k| {
            let u = (k as f64 - half_nodes as f64) * du;
            (-u * u / cfg.epsilon).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let edge = ((std / dz).round() as usize).clamp(1, n - 1);
    let left_slope = (g[edge] - g[0]) / (edge as f64 * dz);
    let right_slope = (g[n - 1] - g[n - 1 - edge]) / (edge as f64 * dz);
    let last = ((n - 1) * sub) as isize;
    let fine = |l: isize| -> f64 {
        if l < 0 {
            return g[0] + left_slope * l as f64 * du;
        }
        if l > last {
            return g[n - 1] + right_slope * (l - last) as f64 * du;
        }
        let (a, b) = ((l as usize) / sub, (l as usize) % sub);
        if b == 0 {
            g[a]
        } else {
            g[a] + (g[a + 1] - g[a]) * b as f64 / sub as f64
        }
    };
    let smoothed: Vec<f64> = (0..n)
        .map(|j| {
            let centre = (j * sub) as isize;
            weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * fine(centre - (k as isize - half_nodes as isize)))
                .sum()
        })
        .collect();

    let mut xs: Vec<T> = zs.iter().map(|&v| T::of(v.exp())).collect();
    xs[0] = x[0];
    xs[n - 1] = x[x.len() - 1];
    let ys: Vec<T> = smoothed.into_iter().map(T::of).collect();
    StateTransform::new(xs, ys)
        .map_err(|e| Error::Smoothing(format!("smoothed transform is invalid: {e}")))
}

/// `q̃(s) = K'(s) D ψ(K(s))` on the transform's grid.
pub fn transform_to_spd<T: Scalar>(t: &StateTransform<T>, benchmark: &LognormalSpd<T>) -> Result<GridDensity<T>> {
    if !t.is_strictly_increasing() {
        return Err(Error::Precondition("transform is not strictly increasing".into()));
    }
    let values: Vec<T> = t
        .derivative()
        .iter()
        .zip(t.y())
        .map(|(&dk, &k)| dk * benchmark.pdf(k))
        .collect();
    GridDensity::spd(t.x().to_vec(), values)
}

/// Every intermediate of one smoothing pass.
#[derive(Debug, Clone)]
pub struct Smoothed<T> {
    pub epsilon: f64,
    pub benchmark: LognormalSpd<T>,
    pub raw_transform: StateTransform<T>,
    pub transform: StateTransform<T>,
    pub density: GridDensity<T>,
}

/// Runs the full smoothing scheme on `spd`.
pub fn smooth_spd<T: Scalar>(spd: &GridDensity<T>, cfg: &SmoothingConfig) -> Result<Smoothed<T>> {
    let benchmark = fit_benchmark_lognormal(spd)?;
    let raw_transform = build_transform(spd, &benchmark)?;
    smooth_with(benchmark, raw_transform, cfg)
}

fn smooth_with<T: Scalar>(
    benchmark: LognormalSpd<T>,
    raw_transform: StateTransform<T>,
    cfg: &SmoothingConfig,
) -> Result<Smoothed<T>> {
    let transform = smooth_transform(&raw_transform, cfg)?;
    let density = transform_to_spd(&transform, &benchmark)?;
    Ok(Smoothed {
        epsilon: cfg.epsilon,
        benchmark,
        raw_transform,
        transform,
        density,
    })
}

/// Number of local maxima whose prominence exceeds `ripple` times the global peak.
pub fn count_modes<T: Scalar>(values: &[T]) -> usize {
    count_modes_with(values, DEFAULT_RIPPLE)
}

/// Ripple threshold, relative to the peak, below which a local maximum is ignored.
pub const DEFAULT_RIPPLE: f64 = 1e-4;

pub fn count_modes_with<T: Scalar>(values: &[T], ripple: f64) -> usize {
    let v: Vec<f64> = values.iter().map(|x| x.f64()).collect();
    let n = v.len();
    let peak = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if n == 0 || !(peak > 0.0) {
        return 0;
    }
    let threshold = ripple * peak;
    let mut modes = 0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[j + 1] == v[i] {
            j += 1;
        }
        let rises = i == 0 || v[i - 1] < v[i];
        let falls = j == n - 1 || v[j + 1] < v[i];
        if rises && falls {
            let mut left_min = v[i];
            let mut k = i;
            while k > 0 && v[k - 1] <= v[i] {
                k -= 1;
                left_min = left_min.min(v[k]);
            }
            let mut right_min = v[j];
            let mut k = j;
            while k + 1 < n && v[k + 1] <= v[i] {
                k += 1;
                right_min = right_min.min(v[k]);
            }
            let prominence = v[i] - left_min.max(right_min);
            if prominence > threshold || v[i] == peak {
                modes += 1;
            }
        }
        i = j + 1;
    }
    modes
}

/// Candidate widths tried by [`auto_epsilon`], smallest first.
pub fn default_epsilon_ladder() -> Vec<f64> {
    (0..=20).map(|k| 1e-6 * 10f64.powf(k as f64 / 4.0)).collect()
}

/// Smallest `ε` on `ladder` whose smoothed density has a single mode.
pub fn auto_epsilon<T: Scalar>(
    spd: &GridDensity<T>,
    cfg: &SmoothingConfig,
    ladder: &[f64],
    ripple: f64,
) -> Result<Smoothed<T>> {
    let benchmark = fit_benchmark_lognormal(spd)?;
    let raw_transform = build_transform(spd, &benchmark)?;
    let mut ladder = ladder.to_vec();
    ladder.sort_by(f64::total_cmp);
    let results: Vec<Option<Smoothed<T>>> = ladder
        .par_iter()
        .map(|&eps| {
            smooth_with(benchmark, raw_transform.clone(), &cfg.with_epsilon(eps))
                .ok()
                .filter(|s| count_modes_with(s.density.values(), ripple) <= 1)
        })
        .collect();
    results.into_iter().flatten().next().ok_or_else(|| {
        Error::Smoothing(format!(
            "no epsilon in [{:e}, {:e}] gives a unimodal density",
            ladder.first().copied().unwrap_or(f64::NAN),
            ladder.last().copied().unwrap_or(f64::NAN)
        ))
    })
}
