//! Time-varying Granger causality testing for a bivariate system of
//! log returns and a search-attention index.
//!
//! The pipeline is: ingest and align the two series ([`dataset`]), pick a
//! VAR lag order by BIC ([`var`]), compute forward, rolling or
//! recursive-evolving Wald statistic sequences ([`wald`], [`procedures`]),
//! calibrate a bootstrap critical value whose size is controlled over a
//! fixed evaluation window ([`bootstrap`]), and date causal episodes
//! ([`dating`]). [`stationarity`] provides the ADF / Phillips-Perron
//! pre-checks and [`simulation`] the Monte Carlo harness used to validate
//! size, power and dating accuracy.

pub mod bootstrap;
pub mod dataset;
pub mod dating;
pub mod error;
pub mod linalg;
pub mod procedures;
pub mod rng;
pub mod simulation;
pub mod stationarity;
pub mod var;
pub mod wald;

pub use error::{Error, Result};

/// Observations per "three months" when converting window language into counts.
pub const THREE_MONTHS: usize = 90;
