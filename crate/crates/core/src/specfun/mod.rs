//! Special functions: Gamma, the two-parameter Mittag-Leffler function and
//! the double- and quad-double arithmetic used when working precision runs out.

pub mod dd;
pub mod gamma;
pub mod mittag_leffler;
pub mod qd;
pub mod real;

pub use dd::Dd;
pub use qd::Qd;
pub use gamma::{gamma, ln_gamma, ln_gamma_signed, rgamma};
pub use mittag_leffler::{
    mittag_leffler, mittag_leffler_dd, ml_series, ml_series_cached, LnFactorials, MlArg, MlCoeffs,
    MlQuery, MlValue, SeriesLimits, SeriesSum,
};
pub use real::{Accumulator, Neumaier, Real, Refine};
