//! Text formats for densities, transforms, moments and sweep tables.
//!
//! Numbers are written with the shortest representation that parses back to
//! the same value, so a write/read cycle is lossless.

use std::fmt::Write as _;

use crate::density::{DensityKind, GridDensity, MomentSummary};
use crate::error::{Error, Result};
use crate::extract::RawSpd;
use crate::recovery::SweepRow;
use crate::scalar::Scalar;
use crate::transform::StateTransform;

fn write_pairs<T: Scalar>(header: &str, a: &[T], b: &[T]) -> String {
    let mut out = String::with_capacity(32 * a.len());
    out.push_str(header);
    out.push('\n');
    for (u, v) in a.iter().zip(b) {
        writeln!(out, "{u},{v}").expect("writing to a String");
    }
    out
}

fn read_pairs<T: Scalar>(text: &str, columns: [&str; 2]) -> Result<(Vec<T>, Vec<T>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let names: Vec<&str> = headers.iter().collect();
    if names != columns {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`, found `{}`", columns.join(","), names.join(",")),
        });
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
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
        for (i, dst) in [&mut a, &mut b].into_iter().enumerate() {
            let v = record[i].parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("{} `{}`: {e}", columns[i], &record[i]),
            })?;
            dst.push(T::of(v));
        }
    }
    Ok((a, b))
}

/// `state,value` CSV.
pub fn density_to_csv<T: Scalar>(d: &GridDensity<T>) -> String {
    write_pairs("state,value", d.grid(), d.values())
}

/// Unclipped estimate in the same `state,value` layout; values may be negative.
pub fn raw_spd_to_csv<T: Scalar>(raw: &RawSpd<T>) -> String {
    write_pairs("state,value", raw.grid(), raw.values())
}

pub fn density_from_csv<T: Scalar>(text: &str, kind: DensityKind) -> Result<GridDensity<T>> {
    let (grid, values) = read_pairs(text, ["state", "value"])?;
    GridDensity::new(grid, values, kind)
}

/// `x,y` CSV.
pub fn transform_to_csv<T: Scalar>(t: &StateTransform<T>) -> String {
    write_pairs("x,y", t.x(), t.y())
}

pub fn transform_from_csv<T: Scalar>(text: &str) -> Result<StateTransform<T>> {
    let (x, y) = read_pairs(text, ["x", "y"])?;
    StateTransform::new(x, y)
}

pub fn moments_to_json<T: Scalar>(m: &MomentSummary<T>) -> String {
    let doc = serde_json::json!({
        "mean": m.mean.f64(),
        "median": m.median.f64(),
        "std": m.std.f64(),
        "skew": m.skew.f64(),
        "kurtosis": m.kurtosis.f64(),
    });
    serde_json::to_string_pretty(&doc).expect("serializing numbers")
}

pub fn moments_from_json(text: &str) -> Result<MomentSummary<f64>> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })
}

type Measure<T> = (&'static str, fn(&MomentSummary<T>) -> T);

/// Moments table with one column per trend; rows that failed are written as `NaN`.
pub fn sweep_to_csv<T: Scalar>(rows: &[SweepRow<T>]) -> String {
    let mut out = String::from("measure");
    for r in rows {
        write!(out, ",{}", r.mu).expect("writing to a String");
    }
    out.push('\n');
    let measures: [Measure<T>; 5] = [
        ("Mean", |m| m.mean),
        ("Median", |m| m.median),
        ("STD", |m| m.std),
        ("Skew", |m| m.skew),
        ("Kurtosis", |m| m.kurtosis),
    ];
    for (name, get) in measures {
        out.push_str(name);
        for r in rows {
            match &r.outcome {
                Ok((_, m)) => write!(out, ",{}", get(m)),
                Err(_) => write!(out, ",NaN"),
            }
            .expect("writing to a String");
        }
        out.push('\n');
    }
    out
}
