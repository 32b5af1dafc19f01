//! Built-in numerical checks of exact recovery and smoothing mass preservation.

use serde::Serialize;

use crate::bsm::BsmParams;
use crate::density::GridDensity;
use crate::error::Result;
use crate::extract::{bl_raw_spd, clip_rescale};
use crate::market_data::OptionChain;
use crate::recovery::{ipd_ratio_form, recover_ipd, RecoveryConfig};
use crate::smooth::{smooth_spd, SmoothingConfig};

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    fn failed(name: &str, err: crate::error::Error) -> Self {
        Self::new(name, false, format!("error: {err}"))
    }
}

/// Models with equal market price of risk `λ = 0.5`.
pub fn equal_lambda_pair() -> (BsmParams<f64>, BsmParams<f64>) {
    let t = 178.0 / 365.0;
    (
        BsmParams { spot: 2500.0, rate: 0.01, trend: 0.06, sigma: 0.10, expiry: t },
        BsmParams { spot: 2500.0, rate: 0.02, trend: 0.12, sigma: 0.20, expiry: t },
    )
}

/// SPD of `model` sampled with spacing `h / 2` aligned on `x0 + i h`, up to its
/// upper `1e-8` quantile, so that Euler nodes at steps `h` and `h / 2` are grid nodes.
pub fn aligned_spd(model: &BsmParams<f64>, x0: f64, steps: usize) -> Result<GridDensity<f64>> {
    let law = model.risk_neutral();
    let (lo, hi) = (law.quantile(1e-8)?, law.upper_quantile(1e-8)?);
    let fine = (hi - x0) / (2 * steps) as f64;
    let below = ((x0 - lo) / fine).floor() as i64;
    let grid: Vec<f64> = (-below..=(2 * steps) as i64)
        .map(|i| x0 + fine * i as f64)
        .collect();
    model.sample_spd_on(grid)
}

/// Sup error of the recovered density against the analytic physical density of `m1`, relative to its peak.
pub fn equal_lambda_error(m1: &BsmParams<f64>, m2: &BsmParams<f64>, steps: usize, grid_steps: usize) -> Result<f64> {
    let x0 = m1.risk_neutral().quantile(0.01)?;
    let q1 = aligned_spd(m1, x0, grid_steps)?;
    let cfg = RecoveryConfig::spanning(&q1, x0, steps)?;
    let rec = recover_ipd(&q1, m2, &cfg)?;
    let phys = m1.physical();
    let peak = phys.pdf((phys.log_location - phys.log_scale * phys.log_scale).exp());
    let err = rec
        .transform
        .x()
        .iter()
        .zip(&rec.raw)
        .map(|(&x, &v)| (v - phys.pdf(x)).abs())
        .fold(0.0, f64::max);
    Ok(err / peak)
}

/// Exact recovery between two models sharing their market price of risk.
pub fn equal_lambda_checks() -> Vec<Check> {
    let (m1, m2) = equal_lambda_pair();
    let mut checks = Vec::new();
    match (equal_lambda_error(&m1, &m2, 20_000, 40_000), equal_lambda_error(&m1, &m2, 40_000, 40_000)) {
        (Ok(e1), Ok(e2)) => {
            checks.push(Check::new(
                "equal market price of risk recovers the physical density",
                e1 < 1e-3,
                format!("sup error {e1:.3e} of peak with 20000 steps"),
            ));
            checks.push(Check::new(
                "recovery error is first order in the step",
                e1 / e2 >= 1.8,
                format!("halving the step reduces the error {:.3}x", e1 / e2),
            ));
        }
        (Err(e), _) | (_, Err(e)) => checks.push(Check::failed("equal market price of risk recovery", e)),
    }
    let dual = (|| -> Result<f64> {
        let x0 = m1.risk_neutral().quantile(0.01)?;
        let q1 = aligned_spd(&m1, x0, 20_000)?;
        let rec = recover_ipd(&q1, &m2, &RecoveryConfig::spanning(&q1, x0, 20_000)?)?;
        let ratio = ipd_ratio_form(&q1, &m2, &rec.transform)?;
        Ok(rec
            .raw
            .iter()
            .zip(&ratio)
            .map(|(a, b)| (a - b).abs() / a.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max))
    })();
    checks.push(match dual {
        Ok(d) => Check::new(
            "explicit and ratio forms agree",
            d < 1e-10,
            format!("max relative difference {d:.3e}"),
        ),
        Err(e) => Check::failed("explicit and ratio forms agree", e),
    });
    checks
}

/// Rough SPD: second differences of a BSM chain with prices rounded to `tick`.
pub fn rough_spd(tick: f64) -> Result<(BsmParams<f64>, GridDensity<f64>)> {
    let p = BsmParams::new(2503.87, 0.012, 0.094, 0.0982, 178.0 / 365.0)?;
    let exact = OptionChain::from_bsm(&p, 800.0, 4000.0, 1.0)?;
    let rounded: Vec<f64> = exact.calls().iter().map(|c| (c / tick).round() * tick).collect();
    let chain = OptionChain::new(p.spot, p.expiry, exact.strikes().to_vec(), rounded)?;
    Ok((p, clip_rescale(&bl_raw_spd(&chain)?, p.discount())?))
}

/// Mass preservation, positivity and digital-price convergence of the smoothed SPD.
pub fn smoothing_checks() -> Vec<Check> {
    let run = || -> Result<Vec<Check>> {
        let (_, raw) = rough_spd(1e-5)?;
        let d = raw.mass();
        let deciles: Vec<f64> = (1..=9).map(|k| raw.quantile(k as f64 / 10.0)).collect::<Result<_>>()?;
        let mut checks = Vec::new();
        let mut previous: Option<Vec<f64>> = None;
        let mut monotone = true;
        for eps in [5e-3, 5e-4, 1e-4] {
            let s = smooth_spd(&raw, &SmoothingConfig::default().with_epsilon(eps))?;
            let mass_gap = (s.density.mass() - d).abs() / d;
            checks.push(Check::new(
                &format!("mass preserved at epsilon {eps:e}"),
                mass_gap < 1e-4,
                format!("relative mass gap {mass_gap:.3e}"),
            ));
            let v = s.density.values();
            let positive = v[1..v.len() - 1].iter().all(|&q| q > 0.0);
            checks.push(Check::new(
                &format!("smoothed density positive at epsilon {eps:e}"),
                positive,
                String::new(),
            ));
            let errors: Vec<f64> = deciles
                .iter()
                .map(|&x| (s.density.cdf(x) - raw.cdf(x)).abs())
                .collect();
            if let Some(prev) = &previous {
                monotone &= errors.iter().zip(prev).all(|(e, p)| *e <= p + 1e-9);
            }
            previous = Some(errors);
        }
        checks.push(Check::new(
            "decile digital prices converge as epsilon decreases",
            monotone,
            String::new(),
        ));
        Ok(checks)
    };
    run().unwrap_or_else(|e| vec![Check::failed("smoothing suite", e)])
}

/// Both suites in order.
pub fn run_all() -> Vec<Check> {
    let mut all = equal_lambda_checks();
    all.extend(smoothing_checks());
    all
}
