// `!(x > 0.0)` guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod checks;
pub mod config;
pub mod conformal;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod lab;
pub mod oracle;
pub mod width;

pub use error::{LabError, Result};
