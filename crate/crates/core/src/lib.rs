//! Design and analysis of experiments applied to simulation studies.
//!
//! A study is a set of factors, a design over them, and a response measured
//! at every run. This crate builds designs (full and fractional factorials,
//! crossed arrays), executes simulations over them reproducibly, and
//! analyzes the resulting response tables (ANOVA, effect screening, robust
//! parameter summaries).

pub mod anova;
pub mod casestudy;
pub mod csvio;
pub mod design;
pub mod effects;
pub mod error;
pub mod harness;
pub mod heredity;
pub mod model;
pub mod plot;
pub mod seed;
pub mod slstudy;
pub mod special;
pub mod study;
pub mod trpd;

pub use error::{Error, Result};
pub use model::{Design, Factor, FactorKind, Level, Observation, Provenance, ResponseTable, Role, Term};
