//! Implied physical densities by reverse distribution matching.
//!
//! Given an SPD `q̂₁` and a BSM benchmark, the map `K` that carries the
//! risk-neutral law of `q̂₁` onto the benchmark's risk-neutral law solves
//! `K' = ρ₁(x) / ψ₂(K(x))`, where `ρ₁ = q̂₁ / ∫q̂₁` and `ψ₂` is the benchmark
//! risk-neutral density. Pulling the benchmark physical density back through
//! `K` gives `φ̂₁(x) = ρ₁(x) φ₂(K(x)) / ψ₂(K(x))`. The forward direction builds
//! an SPD from a physical density with the same machinery.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bsm::BsmParams;
use crate::density::{trapezoid, DensityKind, GridDensity, MomentSummary};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::transform::StateTransform;

/// Default Euler step count.
pub const DEFAULT_STEPS: usize = 20_000;
/// Default normalized risk-neutral mass below `x0`.
pub const DEFAULT_X0_LEVEL: f64 = 0.005;
/// Default normalized risk-neutral mass below the end of the Euler window.
pub const DEFAULT_END_LEVEL: f64 = 0.995;

/// Euler grid and initial-condition options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig<T> {
    pub x0: T,
    pub step_h: T,
    pub steps_n: usize,
    /// Replaces the benchmark trend before recovery.
    pub mu_override: Option<T>,
    /// Physical probability `p*` assigned to `K(x0)` instead of quantile matching.
    pub quantile_normalization: Option<T>,
}

impl<T: Scalar> RecoveryConfig<T> {
    pub fn new(x0: T, step_h: T, steps_n: usize) -> Result<Self> {
        let cfg = Self {
            x0,
            step_h,
            steps_n,
            mu_override: None,
            quantile_normalization: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `steps_n` equal steps from `x0` to the top of `q1`'s grid.
    pub fn spanning(q1: &GridDensity<T>, x0: T, steps_n: usize) -> Result<Self> {
        if steps_n == 0 {
            return Err(Error::Domain("step count must be at least 1".into()));
        }
        Self::new(x0, (q1.upper() - x0) / T::of(steps_n as f64), steps_n)
    }

    /// 20000 steps between the 0.5% and 99.5% risk-neutral quantiles of `q1`.
    pub fn default_for(q1: &GridDensity<T>) -> Result<Self> {
        let x0 = q1.quantile(T::of(DEFAULT_X0_LEVEL))?;
        let end = q1.quantile(T::of(DEFAULT_END_LEVEL))?;
        Self::new(x0, (end - x0) / T::of(DEFAULT_STEPS as f64), DEFAULT_STEPS)
    }

    pub fn with_mu(self, mu: T) -> Self {
        Self {
            mu_override: Some(mu),
            ..self
        }
    }

    pub fn with_quantile_normalization(self, p: T) -> Self {
        Self {
            quantile_normalization: Some(p),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x0 > T::zero() && self.x0.is_finite()) {
            return Err(Error::Domain(format!("x0 must be positive, got {}", self.x0)));
        }
        if !(self.step_h > T::zero() && self.step_h.is_finite()) {
            return Err(Error::Domain(format!("step must be positive, got {}", self.step_h)));
        }
        if self.steps_n == 0 {
            return Err(Error::Domain("step count must be at least 1".into()));
        }
        if let Some(p) = self.quantile_normalization {
            if !(p > T::zero() && p < T::one()) {
                return Err(Error::Range(format!("normalization level {p} outside (0, 1)")));
            }
        }
        Ok(())
    }

    /// Euler nodes `x0 + i h`; a last node overshooting `cap` by rounding is pulled back to it.
    pub fn nodes(&self, cap: T) -> Vec<T> {
        let mut xs: Vec<T> = (0..=self.steps_n)
            .map(|i| self.x0 + self.step_h * T::of(i as f64))
            .collect();
        let last = xs.len() - 1;
        if xs[last] > cap && xs[last] - cap <= T::of(1e-9) * self.step_h {
            xs[last] = cap;
        }
        xs
    }

    fn benchmark(&self, base: &BsmParams<T>) -> BsmParams<T> {
        match self.mu_override {
            Some(mu) => base.with_trend(mu),
            None => *base,
        }
    }
}

/// `y0` with the same risk-neutral probability below it as `x0` has under `q1`.
pub fn matched_quantile_init<T: Scalar>(q1: &GridDensity<T>, benchmark: &BsmParams<T>, x0: T) -> Result<T> {
    if !(x0 > q1.lower() && x0 < q1.upper()) {
        return Err(Error::Range(format!(
            "x0 = {x0} must lie strictly inside the density grid [{}, {}]",
            q1.lower(),
            q1.upper()
        )));
    }
    let mass = q1.mass();
    let below = q1.cdf(x0);
    let p = below / mass;
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::Range(format!("risk-neutral level {p} at x0 = {x0} is not inside (0, 1)")));
    }
    let law = benchmark.risk_neutral();
    if p <= T::of(0.5) {
        law.quantile(p)
    } else {
        law.upper_quantile((mass - below) / mass)
    }
}

/// Explicit Euler for `y' = speed(x, y)` on `xs` from `y0`.
fn euler<T: Scalar>(xs: &[T], y0: T, mut speed: impl FnMut(usize, T, T) -> Result<T>) -> Result<Vec<T>> {
    let mut ys = Vec::with_capacity(xs.len());
    let mut y = y0;
    ys.push(y);
    for i in 0..xs.len() - 1 {
        let h = xs[i + 1] - xs[i];
        let next = y + speed(i, xs[i], y)? * h;
        if !next.is_finite() {
            return Err(Error::Divergence {
                step: i,
                message: format!("non-finite state after step from y = {y}"),
            });
        }
        y = next;
        ys.push(y);
    }
    Ok(ys)
}

fn divergence<T: Scalar>(step: usize, y: T, what: &str) -> Error {
    Error::Divergence {
        step,
        message: format!("{what} density vanishes at y = {y}"),
    }
}

/// Solves `K' = ρ₁(x) / ψ₂(K)` from `K(x0) = y0` on the configured Euler grid.
pub fn euler_transform<T: Scalar>(
    q1: &GridDensity<T>,
    benchmark: &BsmParams<T>,
    cfg: &RecoveryConfig<T>,
    y0: T,
) -> Result<StateTransform<T>> {
    cfg.validate()?;
    benchmark.validate()?;
    if !(y0 > T::zero()) {
        return Err(Error::Domain(format!("y0 must be positive, got {y0}")));
    }
    let xs = cfg.nodes(q1.upper());
    let mass = q1.mass();
    if !(mass > T::zero()) {
        return Err(Error::Degenerate("density has zero mass".into()));
    }
    let law = benchmark.risk_neutral();
    let ys = euler(&xs, y0, |i, x, y| {
        let psi = law.pdf(y);
        if !(psi > T::zero()) {
            return Err(divergence(i, y, "benchmark risk-neutral"));
        }
        Ok(q1.eval(x)? / mass / psi)
    })?;
    q1.eval(xs[xs.len() - 1])?;
    StateTransform::new(xs, ys)
}

/// `exp(-Δ / (2σ²T))`, the ratio `φ₂(y) / ψ₂(y)` of the benchmark physical
/// and risk-neutral densities.
pub fn physical_to_risk_neutral<T: Scalar>(benchmark: &BsmParams<T>, y: T) -> T {
    let (s, r, mu, sigma, t) = (
        benchmark.spot,
        benchmark.rate,
        benchmark.trend,
        benchmark.sigma,
        benchmark.expiry,
    );
    let half_var = T::of(0.5) * sigma * sigma;
    let l = (y / s).ln();
    let delta = (l - (mu - half_var) * t).powi(2) - (l - (r - half_var) * t).powi(2);
    (-delta / (T::of(2.0) * sigma * sigma * t)).exp()
}

/// Output of [`recover_ipd`].
#[derive(Debug, Clone)]
pub struct Recovery<T> {
    pub benchmark: BsmParams<T>,
    pub y0: T,
    pub transform: StateTransform<T>,
    /// `φ̂₁` at the Euler nodes before renormalization.
    pub raw: Vec<T>,
    /// `raw` rescaled to unit mass over the Euler window.
    pub density: GridDensity<T>,
}

fn initial_state<T: Scalar>(q1: &GridDensity<T>, benchmark: &BsmParams<T>, cfg: &RecoveryConfig<T>) -> Result<T> {
    match cfg.quantile_normalization {
        Some(p) => benchmark.physical().quantile(p),
        None => matched_quantile_init(q1, benchmark, cfg.x0),
    }
}

/// Recovers the implied physical density of `q1` against `benchmark`.
pub fn recover_ipd<T: Scalar>(q1: &GridDensity<T>, benchmark: &BsmParams<T>, cfg: &RecoveryConfig<T>) -> Result<Recovery<T>> {
    cfg.validate()?;
    let benchmark = cfg.benchmark(benchmark);
    benchmark.validate()?;
    let y0 = initial_state(q1, &benchmark, cfg)?;
    let transform = euler_transform(q1, &benchmark, cfg, y0)?;
    let mass = q1.mass();
    let raw = transform
        .x()
        .iter()
        .zip(transform.y())
        .map(|(&x, &y)| Ok(q1.eval(x)? / mass * physical_to_risk_neutral(&benchmark, y)))
        .collect::<Result<Vec<T>>>()?;
    let density = GridDensity::normalized(transform.x().to_vec(), raw.clone())?;
    Ok(Recovery {
        benchmark,
        y0,
        transform,
        raw,
        density,
    })
}

/// `φ̂₁ = ρ₁(x) φ₂(K(x)) / ψ₂(K(x))` evaluated with the two benchmark densities directly.
pub fn ipd_ratio_form<T: Scalar>(
    q1: &GridDensity<T>,
    benchmark: &BsmParams<T>,
    transform: &StateTransform<T>,
) -> Result<Vec<T>> {
    let mass = q1.mass();
    let (phys, rn) = (benchmark.physical(), benchmark.risk_neutral());
    transform
        .x()
        .iter()
        .zip(transform.y())
        .enumerate()
        .map(|(i, (&x, &y))| {
            let psi = rn.pdf(y);
            if !(psi > T::zero()) {
                return Err(divergence(i, y, "benchmark risk-neutral"));
            }
            Ok(q1.eval(x)? / mass * phys.pdf(y) / psi)
        })
        .collect()
}

/// `y0` with the same physical probability below it as `x0` has under `phi1`.
pub fn matched_physical_init<T: Scalar>(phi1: &GridDensity<T>, benchmark: &BsmParams<T>, x0: T) -> Result<T> {
    if !(x0 > phi1.lower() && x0 < phi1.upper()) {
        return Err(Error::Range(format!(
            "x0 = {x0} must lie strictly inside the density grid [{}, {}]",
            phi1.lower(),
            phi1.upper()
        )));
    }
    let p = phi1.cdf(x0) / phi1.mass();
    benchmark.physical().quantile(p)
}

/// Output of [`dm_forward`].
#[derive(Debug, Clone)]
pub struct Forward<T> {
    pub transform: StateTransform<T>,
    pub spd: GridDensity<T>,
    /// `∫ s q̂(s) ds` over the Euler window.
    pub price: T,
}

/// Forward distribution matching: the SPD and price implied by a physical density.
///
/// `K' = φ₁(x) / φ₂(K)` carries `phi1` onto the benchmark physical law; the SPD is
/// `q̂(x) = φ₁(x) q₂(K(x)) / φ₂(K(x))`.
pub fn dm_forward<T: Scalar>(
    phi1: &GridDensity<T>,
    benchmark: &BsmParams<T>,
    x0: T,
    y0: T,
    h: T,
    n: usize,
) -> Result<Forward<T>> {
    if phi1.kind() != DensityKind::Probability {
        return Err(Error::Precondition("forward matching needs a probability density".into()));
    }
    let cfg = RecoveryConfig::new(x0, h, n)?;
    benchmark.validate()?;
    if !(y0 > T::zero()) {
        return Err(Error::Domain(format!("y0 must be positive, got {y0}")));
    }
    let xs = cfg.nodes(phi1.upper());
    let law = benchmark.physical();
    let ys = euler(&xs, y0, |i, x, y| {
        let phi = law.pdf(y);
        if !(phi > T::zero()) {
            return Err(divergence(i, y, "benchmark physical"));
        }
        Ok(phi1.eval(x)? / phi)
    })?;
    let transform = StateTransform::new(xs, ys)?;
    let discount = benchmark.discount();
    let values = transform
        .x()
        .iter()
        .zip(transform.y())
        .map(|(&x, &y)| Ok(phi1.eval(x)? * discount / physical_to_risk_neutral(benchmark, y)))
        .collect::<Result<Vec<T>>>()?;
    let weighted: Vec<T> = transform.x().iter().zip(&values).map(|(&x, &q)| x * q).collect();
    let price = trapezoid(transform.x(), &weighted);
    let spd = GridDensity::spd(transform.x().to_vec(), values)?;
    Ok(Forward { transform, spd, price })
}

/// How the benchmark varies with the swept trend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SweepFamily<T> {
    /// Only `μ` changes.
    FixedSigma,
    /// `σ = (μ - r) / λ`, holding the market price of risk at `λ`.
    EqualMarketPriceOfRisk { lambda: T },
}

impl<T: Scalar> SweepFamily<T> {
    pub fn benchmark(&self, base: &BsmParams<T>, mu: T) -> Result<BsmParams<T>> {
        let p = match *self {
            SweepFamily::FixedSigma => base.with_trend(mu),
            SweepFamily::EqualMarketPriceOfRisk { lambda } => {
                if lambda == T::zero() {
                    return Err(Error::Domain("market price of risk must be nonzero".into()));
                }
                base.with_trend(mu).with_sigma((mu - base.rate) / lambda)
            }
        };
        p.validate()?;
        Ok(p)
    }
}

/// State variable for reported moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentBasis {
    /// Terminal price level.
    #[default]
    Price,
    /// Simple return `x / S - 1`.
    Returns,
}

/// Moments of a recovered density in the requested state variable.
pub fn ipd_moments<T: Scalar>(density: &GridDensity<T>, spot: T, basis: MomentBasis) -> Result<MomentSummary<T>> {
    match basis {
        MomentBasis::Price => density.moments(),
        MomentBasis::Returns => density.to_returns(spot)?.moments(),
    }
}

/// One trend value of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow<T> {
    pub mu: T,
    pub outcome: Result<(Recovery<T>, MomentSummary<T>)>,
}

/// Independent recoveries of `q1`, one per trend; failures are kept per row.
pub fn mu_sweep<T: Scalar>(
    q1: &GridDensity<T>,
    base: &BsmParams<T>,
    mus: &[T],
    cfg: &RecoveryConfig<T>,
    family: SweepFamily<T>,
    basis: MomentBasis,
) -> Vec<SweepRow<T>> {
    let cfg = RecoveryConfig {
        mu_override: None,
        ..*cfg
    };
    mus.par_iter()
        .map(|&mu| {
            let outcome = family.benchmark(base, mu).and_then(|b| {
                let rec = recover_ipd(q1, &b, &cfg)?;
                let m = ipd_moments(&rec.density, b.spot, basis)?;
                Ok((rec, m))
            });
            SweepRow { mu, outcome }
        })
        .collect()
}

/// [`mu_sweep`] with `K(x0)` placed at physical probability `p` for every trend.
pub fn normalize_quantiles<T: Scalar>(
    q1: &GridDensity<T>,
    base: &BsmParams<T>,
    mus: &[T],
    cfg: &RecoveryConfig<T>,
    family: SweepFamily<T>,
    basis: MomentBasis,
) -> Result<Vec<SweepRow<T>>> {
    let p = cfg
        .quantile_normalization
        .ok_or_else(|| Error::Precondition("quantile normalization needs a target level".into()))?;
    let cfg = cfg.with_quantile_normalization(p);
    cfg.validate()?;
    Ok(mu_sweep(q1, base, mus, &cfg, family, basis))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> BsmParams<f64> {
        BsmParams::new(2503.87, 0.012, 0.094, 0.0982, 178.0 / 365.0).unwrap()
    }

    /// Euler window between two risk-neutral quantiles of `q`.
    fn window(q: &GridDensity<f64>, lo: f64, hi: f64, n: usize) -> RecoveryConfig<f64> {
        let (a, b) = (q.quantile(lo).unwrap(), q.quantile(hi).unwrap());
        RecoveryConfig::new(a, (b - a) / n as f64, n).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(RecoveryConfig::new(0.0, 1.0, 10).is_err());
        assert!(RecoveryConfig::new(1.0, 0.0, 10).is_err());
        assert!(RecoveryConfig::new(1.0, 1.0, 0).is_err());
        let cfg = RecoveryConfig::new(1.0f64, 1.0, 1).unwrap().with_quantile_normalization(1.5);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn self_matching_is_identity() {
        let p = model();
        let q = p.sample_spd().unwrap();
        for x0 in [2000.0, 2500.0, 2900.0] {
            let y0 = matched_quantile_init(&q, &p, x0).unwrap();
            assert!((y0 - x0).abs() < 1.0, "{x0} -> {y0}");
        }
        assert!(matches!(matched_quantile_init(&q, &p, q.lower()), Err(Error::Range(_))));
    }

    #[test]
    fn shifted_density_shifts_quantiles() {
        let p = model();
        let q = p.sample_spd().unwrap();
        let (grid, values, _) = q.into_parts();
        let shifted = GridDensity::spd(grid.iter().map(|g| g + 100.0).collect(), values).unwrap();
        for x0 in [2300.0, 2600.0] {
            let y0 = matched_quantile_init(&shifted, &p, x0).unwrap();
            assert!((y0 - (x0 - 100.0)).abs() < 0.05, "{x0} -> {y0}");
        }
    }

    #[test]
    fn euler_on_own_benchmark_is_identity() {
        let p = model();
        let q = p.sample_spd().unwrap();
        let cfg = window(&q, 0.01, 0.999, 2_000);
        let t = euler_transform(&q, &p, &cfg, cfg.x0).unwrap();
        let err = t.x().iter().zip(t.y()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < cfg.step_h, "{err}");
    }

    #[test]
    fn euler_converges_at_first_order() {
        let p = model();
        let wide = p.with_sigma(2.0 * p.sigma);
        let (from, to) = (wide.risk_neutral(), p.risk_neutral());
        let exact = |x: f64| (to.log_location + to.log_scale / from.log_scale * (x.ln() - from.log_location)).exp();
        let x0 = from.quantile(0.01).unwrap();
        let top = from.quantile(0.99).unwrap();
        let n = 400;
        let h = (top - x0) / n as f64;
        let fine = 0.5 * h;
        let below = ((x0 - from.quantile(1e-8).unwrap()) / fine).floor() as i64;
        let above = ((from.upper_quantile(1e-8).unwrap() - x0) / fine).floor() as i64;
        let grid: Vec<f64> = (-below..=above).map(|i| x0 + fine * i as f64).collect();
        let q = wide.sample_spd_on(grid).unwrap();
        let err = |cfg: RecoveryConfig<f64>| {
            let t = euler_transform(&q, &p, &cfg, exact(x0)).unwrap();
            t.x().iter().zip(t.y()).map(|(&x, y)| (exact(x) - y).abs()).fold(0.0, f64::max)
        };
        let e1 = err(RecoveryConfig::new(x0, h, n).unwrap());
        let e2 = err(RecoveryConfig::new(x0, fine, 2 * n).unwrap());
        assert!(e1 / e2 > 1.8 && e1 / e2 < 2.2, "{e1} {e2}");
    }

    #[test]
    fn wider_risk_neutral_density_follows_quantile_map() {
        let p = model();
        let wide = p.with_sigma(2.0 * p.sigma);
        let q = wide.sample_spd().unwrap();
        let cfg = window(&q, 0.01, 0.999, 20_000);
        let y0 = matched_quantile_init(&q, &p, cfg.x0).unwrap();
        let t = euler_transform(&q, &p, &cfg, y0).unwrap();
        assert!(t.is_strictly_increasing());
        let (from, to) = (wide.risk_neutral(), p.risk_neutral());
        let ratio = to.log_scale / from.log_scale;
        let exact = |x: f64| (to.log_location + ratio * (x.ln() - from.log_location)).exp();
        let d = t.derivative();
        let top = t.cell(q.quantile(0.99).unwrap());
        for i in (0..top).step_by(97) {
            let x = t.x()[i];
            assert!((t.y()[i] - exact(x)).abs() < 0.5, "K({x})");
            let slope = ratio * exact(x) / x;
            assert!((d[i] - slope).abs() < 0.02, "K'({x}) = {} vs {slope}", d[i]);
        }
        assert!(d[t.cell(from.median())] < 1.0);
    }

    #[test]
    fn wrong_initial_quantile_degenerates() {
        let p = model();
        let q = p.sample_spd().unwrap();
        let cfg = window(&q, 0.01, 0.99999, 20_000);
        let y0 = matched_quantile_init(&q, &p, cfg.x0).unwrap();
        let slope_at_top = |y0: f64| {
            let t = euler_transform(&q, &p, &cfg, y0)?;
            Ok::<f64, Error>(*t.derivative().last().unwrap())
        };
        let right = slope_at_top(y0).unwrap();
        assert!((right - 1.0).abs() < 0.05, "{right}");
        let low = slope_at_top(y0 - 20.0).unwrap();
        assert!(low < 0.1, "{low}");
        match slope_at_top(y0 + 20.0) {
            Err(Error::Divergence { .. }) => {}
            Ok(high) => assert!(high > 10.0, "{high}"),
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn explicit_and_ratio_forms_agree() {
        let p = model();
        let q1 = p.with_sigma(0.15).sample_spd().unwrap();
        let cfg = window(&q1, 0.005, 0.999, 20_000);
        let rec = recover_ipd(&q1, &p, &cfg).unwrap();
        let ratio = ipd_ratio_form(&q1, &p, &rec.transform).unwrap();
        for (a, b) in rec.raw.iter().zip(&ratio) {
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300), "{a} vs {b}");
        }
        assert!((rec.density.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_models_recover_physical_density() {
        let p = model();
        let q1 = p.sample_spd().unwrap();
        let cfg = RecoveryConfig::default_for(&q1).unwrap();
        let rec = recover_ipd(&q1, &p, &cfg).unwrap();
        let phys = p.physical();
        let peak = phys.pdf(phys.log_location.exp());
        let err = rec
            .transform
            .x()
            .iter()
            .zip(&rec.raw)
            .map(|(&x, &v)| (v - phys.pdf(x)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3 * peak, "{err}");
    }

    #[test]
    fn forward_on_own_physical_density_gives_benchmark_spd() {
        let p = model();
        let phi = p.sample_physical().unwrap();
        let x0 = phi.quantile(1e-6).unwrap();
        let y0 = matched_physical_init(&phi, &p, x0).unwrap();
        let h = (phi.upper() - x0) / 20_000.0;
        let fwd = dm_forward(&phi, &p, x0, y0, h, 20_000).unwrap();
        let peak = p.spd(p.risk_neutral().median()).unwrap();
        let err = fwd
            .spd
            .grid()
            .iter()
            .zip(fwd.spd.values())
            .map(|(&x, &v)| (v - p.spd(x).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3 * peak, "{err}");
        assert!((fwd.price / p.spot - 1.0).abs() < 1e-3, "{}", fwd.price);
    }

    #[test]
    fn sweep_rows_keep_order_and_errors() {
        let p = model();
        let q1 = p.sample_spd().unwrap();
        let cfg = RecoveryConfig::spanning(&q1, q1.quantile(0.01).unwrap(), 2_000).unwrap();
        let family = SweepFamily::EqualMarketPriceOfRisk { lambda: 0.5 };
        let rows = mu_sweep(&q1, &p, &[0.1, 0.0, 0.05], &cfg, family, MomentBasis::Price);
        assert_eq!(rows.iter().map(|r| r.mu).collect::<Vec<_>>(), vec![0.1, 0.0, 0.05]);
        assert!(rows[0].outcome.is_ok());
        assert!(rows[1].outcome.is_err());
        let single = mu_sweep(&q1, &p, &[0.094], &cfg, SweepFamily::FixedSigma, MomentBasis::Price);
        let direct = recover_ipd(&q1, &p, &cfg.with_mu(0.094)).unwrap();
        assert_eq!(single[0].outcome.as_ref().unwrap().0.density, direct.density);
        assert!(normalize_quantiles(&q1, &p, &[0.05], &cfg, family, MomentBasis::Price).is_err());
    }
}
