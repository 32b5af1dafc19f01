use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ipd_core::io::moments_from_json;
use ipd_core::{BsmParams, OptionChain};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

const T: f64 = 178.0 / 365.0;

fn model() -> BsmParams<f64> {
    BsmParams::new(2503.87, 0.012, 0.094, 0.0982, T).unwrap()
}

fn ipd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipd")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = ipd(args);
    assert!(
        out.status.success(),
        "ipd {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Exact BSM chain written with its metadata sidecar.
fn write_chain(dir: &Path, lo: f64, hi: f64, step: f64) -> PathBuf {
    let p = model();
    let chain = OptionChain::from_bsm(&p, lo, hi, step).unwrap();
    let path = dir.join("chain.csv");
    fs::write(&path, chain.to_csv()).unwrap();
    fs::write(dir.join("chain.json"), format!(r#"{{"spot": {}, "expiry_years": {}}}"#, p.spot, T)).unwrap();
    path
}

#[test]
fn end_to_end_moments_match_the_physical_lognormal() {
    let dir = TempDir::new().unwrap();
    let chain = write_chain(dir.path(), 1000.0, 4500.0, 1.0);
    let rn = model().risk_neutral();
    let x0 = rn.quantile(1e-8).unwrap().to_string();
    let x_end = rn.upper_quantile(1e-8).unwrap().to_string();
    let moments = dir.path().join("moments.json");
    ok(&[
        "recover", "--from-chain", s(&chain), "--auto-sigma", "--x0", &x0, "--x-end", &x_end, "--out-moments", s(&moments),
    ]);
    let m = moments_from_json(&fs::read_to_string(&moments).unwrap()).unwrap();
    let phys = model().physical();
    let expected = [
        ("mean", m.mean, phys.mean()),
        ("median", m.median, phys.median()),
        ("std", m.std, phys.std()),
        ("skew", m.skew, phys.skew()),
        ("kurtosis", m.kurtosis, phys.kurtosis()),
    ];
    for (name, got, want) in expected {
        assert!((got / want - 1.0).abs() < 1e-2, "{name}: {got} vs {want}");
    }
}

#[test]
fn runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let chain = write_chain(dir.path(), 1000.0, 4500.0, 2.0);
    let run = |tag: &str| {
        let d = dir.path().join(format!("ipd_{tag}.csv"));
        let m = dir.path().join(format!("moments_{tag}.json"));
        let manifest = dir.path().join(format!("manifest_{tag}.json"));
        ok(&[
            "recover", "--from-chain", s(&chain), "--out-density", s(&d), "--out-moments", s(&m), "--manifest", s(&manifest),
        ]);
        (fs::read(d).unwrap(), fs::read(m).unwrap(), fs::read_to_string(manifest).unwrap())
    };
    let (d1, m1, f1) = run("a");
    let (d2, m2, f2) = run("b");
    assert_eq!(d1, d2);
    assert_eq!(m1, m2);
    assert_eq!(f1.replace("_a.", "_b."), f2);
}

#[test]
fn single_trend_sweep_equals_recover() {
    let dir = TempDir::new().unwrap();
    let chain = write_chain(dir.path(), 1000.0, 4500.0, 2.0);
    let single = dir.path().join("single.csv");
    ok(&["recover", "--from-chain", s(&chain), "--mu", "0.094", "--out-density", s(&single)]);
    let table = dir.path().join("table.csv");
    let out_dir = dir.path().join("sweep");
    ok(&["sweep", "--from-chain", s(&chain), "--mus", "0.094", "--out", s(&table), "--out-dir", s(&out_dir)]);
    assert_eq!(fs::read(&single).unwrap(), fs::read(out_dir.join("density_mu_0.094.csv")).unwrap());
    let table = fs::read_to_string(&table).unwrap();
    let rows: Vec<&str> = table.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rows, ["measure", "Mean", "Median", "STD", "Skew", "Kurtosis"]);
}

#[test]
fn file_pipeline_equals_one_shot_recovery() {
    let dir = TempDir::new().unwrap();
    let chain = write_chain(dir.path(), 1500.0, 3800.0, 10.0);
    let raw = dir.path().join("spd.csv");
    let smooth = dir.path().join("smooth.csv");
    let piped = dir.path().join("piped.csv");
    let direct = dir.path().join("direct.csv");
    ok(&["extract", "--chain", s(&chain), "--method", "nnls", "--clip", "--out", s(&raw)]);
    ok(&["smooth", "--in", s(&raw), "--out", s(&smooth)]);
    assert!(dir.path().join("smooth.csv.transform.csv").exists());
    let spot = model().spot.to_string();
    let expiry = T.to_string();
    ok(&["recover", "--spd", s(&smooth), "--spot", &spot, "--expiry", &expiry, "--out-density", s(&piped)]);
    ok(&["recover", "--from-chain", s(&chain), "--method", "nnls", "--out-density", s(&direct)]);
    assert_eq!(fs::read(&piped).unwrap(), fs::read(&direct).unwrap());
}

#[test]
fn manifest_records_configuration_and_digests() {
    let dir = TempDir::new().unwrap();
    let chain = write_chain(dir.path(), 1000.0, 4500.0, 5.0);
    let out = dir.path().join("spd.csv");
    ok(&["extract", "--chain", s(&chain), "--clip", "--out", s(&out)]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("spd.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "extract");
    assert_eq!(manifest["config"]["method"], "bl");
    assert_eq!(manifest["config"]["rate"], 0.012);
    let discount = manifest["config"]["discount"].as_f64().unwrap();
    assert_eq!(discount, (-0.012 * T).exp());
    let inputs = manifest["inputs"].as_array().unwrap();
    let entry = inputs.iter().find(|i| i["path"] == s(&chain)).unwrap();
    assert_eq!(entry["sha256"], hex::encode(Sha256::digest(fs::read(&chain).unwrap())));
    assert!(inputs.iter().any(|i| i["path"] == s(&dir.path().join("chain.json"))));
    assert_eq!(manifest["outputs"][0], s(&out));
}

#[test]
fn clipped_extraction_reprices_its_chain() {
    let dir = TempDir::new().unwrap();
    let chain = write_chain(dir.path(), 1000.0, 4500.0, 1.0);
    let spd = dir.path().join("spd.csv");
    ok(&["extract", "--chain", s(&chain), "--clip", "--out", s(&spd)]);
    let quotes_dir = dir.path().join("quotes");
    fs::create_dir(&quotes_dir).unwrap();
    let quotes = write_chain(&quotes_dir, 1100.0, 4400.0, 1.0);
    let prices = dir.path().join("prices.csv");
    let out = ok(&["reprice", "--spd", s(&spd), "--chain", s(&quotes), "--reference-strike", "2000", "--out", s(&prices)]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    let residual: f64 = stderr.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(residual < 1e-3, "{stderr}");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("prices.csv.manifest.json")).unwrap()).unwrap();
    let factor = manifest["config"]["factor"].as_f64().unwrap();
    assert!((factor - 1.0).abs() < 1e-3, "{factor}");
    let text = fs::read_to_string(&prices).unwrap();
    assert!(text.starts_with("strike,call\n"));
    assert_eq!(text.lines().count(), 3302);
}

#[test]
fn calibrate_reports_rates_from_yields_and_returns() {
    let out = ok(&[
        "calibrate", "--spot", "2503.87", "--expiry", "0.4876712328767123", "--yield", "0.0116", "--spot-then", "2279.56",
        "--sigma", "0.0982",
    ]);
    let params: BsmParams<f64> = serde_json::from_slice(&out.stdout).unwrap();
    assert!((params.rate - 1.0116f64.ln()).abs() < 1e-15);
    assert!((params.trend - (2503.87f64 / 2279.56).ln()).abs() < 1e-15);
    assert_eq!(params.sigma, 0.0982);
}

#[test]
fn calibrate_implies_sigma_from_an_spd() {
    let dir = TempDir::new().unwrap();
    let chain = write_chain(dir.path(), 1000.0, 4500.0, 1.0);
    let spd = dir.path().join("spd.csv");
    ok(&["extract", "--chain", s(&chain), "--clip", "--out", s(&spd)]);
    let out = ok(&["calibrate", "--meta", s(&dir.path().join("chain.json")), "--spd", s(&spd)]);
    let params: BsmParams<f64> = serde_json::from_slice(&out.stdout).unwrap();
    assert!((params.sigma - 0.0982).abs() < 1e-4, "{}", params.sigma);
    assert_eq!(params.rate, 0.012);
    assert_eq!(params.trend, 0.094);
}

#[test]
fn selftest_passes() {
    let out = ok(&["selftest"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 8, "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn exit_codes_separate_usage_from_computation() {
    let dir = TempDir::new().unwrap();
    assert_eq!(ipd(&["extract", "--bogus"]).status.code(), Some(2));
    assert_eq!(ipd(&["frobnicate"]).status.code(), Some(2));
    let missing = dir.path().join("absent.csv");
    let out = ipd(&["extract", "--chain", s(&missing), "--spot", "100", "--expiry", "1", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "strike,call\n100,10\n101,oops\n").unwrap();
    let out = ipd(&["extract", "--chain", s(&bad), "--spot", "100", "--expiry", "1", "--out", s(&dir.path().join("o.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("market_data::parse_chain"));

    let chain = write_chain(dir.path(), 1000.0, 4500.0, 5.0);
    let out = ipd(&["recover", "--from-chain", s(&chain), "--sigma", "0.0982", "--x0", "5000"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("recovery::"));
}

#[test]
fn normalized_equal_lambda_sweep_fills_every_column() {
    // p* near the physical mass below the 0.5% risk-neutral quantile of the generating model.
    let dir = TempDir::new().unwrap();
    let chain = write_chain(dir.path(), 1000.0, 4500.0, 2.0);
    let table = dir.path().join("table.csv");
    let out_dir = dir.path().join("sweep");
    ok(&[
        "sweep", "--from-chain", s(&chain), "--equal-lambda", "--mus", "0.05,0.094,0.15,0.2", "--normalize-quantile", "0.0008", "--out", s(&table),
        "--out-dir", s(&out_dir),
    ]);
    let table = fs::read_to_string(&table).unwrap();
    assert_eq!(table.lines().next().unwrap(), "measure,0.05,0.094,0.15,0.2");
    assert!(!table.contains("NaN"), "{table}");
    for mu in ["0.05", "0.094", "0.15", "0.2"] {
        assert!(out_dir.join(format!("density_mu_{mu}.csv")).exists());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sweep/density_mu_0.05.csv.manifest.json")).unwrap())
            .unwrap();
    assert!(manifest["config"]["family"]["EqualMarketPriceOfRisk"]["lambda"].as_f64().unwrap() > 0.0);
    assert_eq!(manifest["config"]["normalize_quantile"], 0.0008);
}

#[test]
fn failed_sweep_rows_are_reported_as_nan() {
    let dir = TempDir::new().unwrap();
    let chain = write_chain(dir.path(), 1000.0, 4500.0, 2.0);
    let table = dir.path().join("table.csv");
    // Below the rate, holding the market price of risk fixed needs a negative volatility.
    let out = ok(&["sweep", "--from-chain", s(&chain), "--equal-lambda", "--mus", "0,0.094", "--out", s(&table)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu 0 failed"));
    let table = fs::read_to_string(&table).unwrap();
    for line in table.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[1], "NaN");
        assert!(cells[2].parse::<f64>().unwrap().is_finite());
    }
}
