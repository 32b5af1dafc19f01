//! Option-chain ingestion and static-arbitrage diagnostics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bsm::BsmParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative spacing tolerance for a uniform strike grid.
pub const STRIKE_SPACING_TOL: f64 = 1e-9;

/// Multiple of machine epsilon (times the magnitude of the prices involved)
/// below which a price difference counts as rounding noise.
const ROUNDING_SLACK: f64 = 16.0;

/// European calls of one maturity on a uniform strike grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionChain<T> {
    spot: T,
    expiry: T,
    strikes: Vec<T>,
    calls: Vec<T>,
    strike_step: T,
}

impl<T: Scalar> OptionChain<T> {
    /// Builds a chain, sorting rows by strike and checking the grid is uniform.
    pub fn new(spot: T, expiry: T, strikes: Vec<T>, calls: Vec<T>) -> Result<Self> {
        if !(spot > T::zero() && spot.is_finite()) {
            return Err(Error::Structure(format!("spot must be positive, got {spot}")));
        }
        if !(expiry > T::zero() && expiry.is_finite()) {
            return Err(Error::Structure(format!("expiry must be positive, got {expiry}")));
        }
        if strikes.len() != calls.len() {
            return Err(Error::Structure(format!(
                "{} strikes but {} call prices",
                strikes.len(),
                calls.len()
            )));
        }
        if strikes.is_empty() {
            return Err(Error::Structure("option chain is empty".into()));
        }
        if strikes.len() < 2 {
            return Err(Error::Structure("option chain needs at least two strikes".into()));
        }
        let mut rows: Vec<(T, T)> = strikes.into_iter().zip(calls).collect();
        if let Some((k, c)) = rows.iter().find(|(k, c)| !(k.is_finite() && c.is_finite())) {
            return Err(Error::Structure(format!("non-finite row ({k}, {c})")));
        }
        if let Some((k, c)) = rows.iter().find(|(_, c)| *c < T::zero()) {
            return Err(Error::Structure(format!("negative call price {c} at strike {k}")));
        }
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite strikes"));
        let (strikes, calls): (Vec<T>, Vec<T>) = rows.into_iter().unzip();
        let n = strikes.len();
        let step = (strikes[n - 1] - strikes[0]) / T::of((n - 1) as f64);
        if !(step > T::zero()) {
            return Err(Error::Structure("strikes are not distinct".into()));
        }
        let tol = T::of(STRIKE_SPACING_TOL) * step;
        if let Some(i) = strikes.windows(2).position(|w| (w[1] - w[0] - step).abs() >= tol) {
            return Err(Error::Structure(format!(
                "non-uniform strike grid: step {} between {} and {} (expected {step})",
                strikes[i + 1] - strikes[i],
                strikes[i],
                strikes[i + 1]
            )));
        }
        Ok(Self {
            spot,
            expiry,
            strikes,
            calls,
            strike_step: step,
        })
    }

    /// Chain priced with the closed-form BSM call on `k_min, k_min + step, ..., k_max`.
    pub fn from_bsm(params: &BsmParams<T>, k_min: T, k_max: T, step: T) -> Result<Self> {
        if !(step > T::zero() && k_max > k_min) {
            return Err(Error::Structure("strike range must be increasing with positive step".into()));
        }
        let n = ((k_max - k_min) / step).round().to_usize().unwrap_or(0) + 1;
        let strikes: Vec<T> = (0..n).map(|i| k_min + step * T::of(i as f64)).collect();
        let calls = strikes.iter().map(|&k| params.call_price(k).max(T::zero())).collect();
        Self::new(params.spot, params.expiry, strikes, calls)
    }

    pub fn spot(&self) -> T {
        self.spot
    }

    pub fn expiry(&self) -> T {
        self.expiry
    }

    pub fn strikes(&self) -> &[T] {
        &self.strikes
    }

    pub fn calls(&self) -> &[T] {
        &self.calls
    }

    pub fn strike_step(&self) -> T {
        self.strike_step
    }

    pub fn len(&self) -> usize {
        self.strikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strikes.is_empty()
    }

    /// Writes the `strike,call` CSV form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strike,call\n");
        for (k, c) in self.strikes.iter().zip(&self.calls) {
            writeln!(out, "{k},{c}").expect("writing to a String");
        }
        out
    }
}

/// Spot and expiry stored next to a chain CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub spot: f64,
    pub expiry_years: f64,
}

/// Parses the `strike,call` CSV format.
pub fn parse_chain<T: Scalar>(text: &str, spot: T, expiry: T) -> Result<OptionChain<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let names: Vec<&str> = headers.iter().collect();
    if names != ["strike", "call"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `strike,call`, found `{}`", names.join(",")),
        });
    }
    let mut strikes = Vec::new();
    let mut calls = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let field = |i: usize, name: &str| -> Result<T> {
            record[i].parse::<f64>().map(T::of).map_err(|e| Error::Parse {
                line,
                message: format!("{name} `{}`: {e}", &record[i]),
            })
        };
        strikes.push(field(0, "strike")?);
        calls.push(field(1, "call")?);
    }
    OptionChain::new(spot, expiry, strikes, calls)
}

/// Strike indices where call prices break monotonicity or convexity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    /// `i` with `C(K_{i+1}) > C(K_i)`.
    pub monotonicity_violations: Vec<usize>,
    /// `i` with `C(K_i) - 2 C(K_{i+1}) + C(K_{i+2}) < 0`.
    pub convexity_violations: Vec<usize>,
}

impl ChainDiagnostics {
    pub fn is_clean(&self) -> bool {
        self.monotonicity_violations.is_empty() && self.convexity_violations.is_empty()
    }
}

/// Lists every monotonicity and convexity violation, ignoring rounding-level noise.
pub fn validate_chain<T: Scalar>(chain: &OptionChain<T>) -> ChainDiagnostics {
    let c = chain.calls();
    let eps = T::epsilon() * T::of(ROUNDING_SLACK);
    let monotonicity_violations = c
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] - w[0] > eps * (w[0].abs() + w[1].abs()))
        .map(|(i, _)| i)
        .collect();
    let convexity_violations = c
        .windows(3)
        .enumerate()
        .filter(|(_, w)| {
            let second = w[0] - T::of(2.0) * w[1] + w[2];
            second < -eps * (w[0].abs() + T::of(2.0) * w[1].abs() + w[2].abs())
        })
        .map(|(i, _)| i)
        .collect();
    ChainDiagnostics {
        monotonicity_violations,
        convexity_violations,
    }
}
