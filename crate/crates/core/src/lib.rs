//! Simulation toolkit for fractional-order linear control loops.
//!
//! * [`specfun`]: Gamma and Mittag-Leffler functions, double-double and
//!   quad-double arithmetic.
//! * [`glops`]: Grünwald-Letnikov weights, short-memory windows, fractional
//!   differentiation of sampled signals.
//! * [`fode`]: fractional LTI models and the explicit step-response recurrence.
//! * [`analytic`]: Mittag-Leffler series step responses used as oracles.
//! * [`fitting`]: least-squares integer second-order surrogates.
//! * [`control`]: PD / PD^δ design, loop closing, response metrics and
//!   stability probing.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod analytic;
pub mod control;
pub mod error;
pub mod fitting;
pub mod fode;
pub mod glops;
pub mod specfun;

pub use error::{Error, Result};
pub use fode::{solve_step, FracTerm, Fode, Grid, InitMode, StepResponse, TimeSeries};
pub use glops::MemoryPolicy;
