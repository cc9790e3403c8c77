//! Shared-EPS virtualization controller: assigns a pool of eNodeBs to
//! competing mobile operators every allocation interval and evaluates the
//! schedulers by Monte-Carlo simulation.
//!
//! Pipeline: [`geometry`] lays out the district and drops UEs, [`channel`]
//! turns them into a per-slot rate matrix, [`schedulers`] decides the
//! assignment, [`metrics`] scores it and [`sim`] drives replications.
//! [`config`], [`io`] and [`cli`] form the file and command-line surface.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod config;
pub mod domain;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod schedulers;
pub mod sim;

pub use error::{Error, Result};
