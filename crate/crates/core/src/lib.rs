//! State-price density extraction from call chains, smoothing through a
//! measure-preserving transform onto a lognormal benchmark, and recovery of
//! the implied physical density.
//!
//! Every numerical routine is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` aliases below name the double-precision instances.
//!
//! ```
//! use ipd_core::*;
//!
//! let model = BsmParams::<f64>::new(2503.87, 0.012, 0.094, 0.0982, 178.0 / 365.0)?;
//! let chain = OptionChain::from_bsm(&model, 1000.0, 4500.0, 1.0)?;
//! let spd = clip_rescale(&bl_raw_spd(&chain)?, model.discount())?;
//! let smoothed = smooth_spd(&spd, &SmoothingConfig::default())?;
//! let cfg = RecoveryConfig::default_for(&smoothed.density)?;
//! let recovery = recover_ipd(&smoothed.density, &model, &cfg)?;
//! let moments = recovery.density.moments()?;
//!
//! let physical = model.physical();
//! let worst = recovery.density.grid().iter().zip(&recovery.raw)
//!     .map(|(&x, &v)| (v / physical.pdf(x) - 1.0).abs())
//!     .fold(0.0, f64::max);
//! assert!(worst < 1e-2 && moments.std > 0.0);
//! # Ok::<(), ipd_core::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bsm;
pub mod calibration;
pub mod density;
pub mod error;
pub mod extract;
pub mod io;
pub mod market_data;
pub mod nnls;
pub mod recovery;
pub mod scalar;
pub mod selftest;
pub mod smooth;
pub mod transform;

pub use bsm::{BsmParams, Lognormal, LognormalSpd};
pub use calibration::{implied_sigma_by_iqr, short_rate_from_yield, trend_from_returns};
pub use density::{DensityKind, GridDensity, MomentSummary};
pub use error::{Error, Result};
pub use extract::{
    bl_raw_spd, butterfly_slopes, clip_rescale, nnls_spd, reprice_calls, solve_slope_spd, RawSpd, SlopeSystem,
};
pub use market_data::{parse_chain, validate_chain, ChainDiagnostics, ChainMeta, OptionChain};
pub use recovery::{
    dm_forward, euler_transform, matched_quantile_init, mu_sweep, normalize_quantiles, recover_ipd, MomentBasis,
    RecoveryConfig, SweepFamily,
};
pub use scalar::Scalar;
pub use smooth::{build_transform, fit_benchmark_lognormal, smooth_spd, smooth_transform, transform_to_spd, SmoothingConfig};
pub use transform::StateTransform;

pub type OptionChainF64 = OptionChain<f64>;
pub type GridDensityF64 = GridDensity<f64>;
pub type BsmParamsF64 = BsmParams<f64>;
pub type StateTransformF64 = StateTransform<f64>;
pub type MomentSummaryF64 = MomentSummary<f64>;
pub type RecoveryConfigF64 = RecoveryConfig<f64>;
pub type OptionChainF32 = OptionChain<f32>;
pub type GridDensityF32 = GridDensity<f32>;
pub type BsmParamsF32 = BsmParams<f32>;
