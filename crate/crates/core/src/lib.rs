//! Verification toolkit for a quantum while-language with `observe`
//! statements.

pub mod bundles;
pub mod cli;
pub mod compile;
pub mod denot;
pub mod error;
pub mod lang;
pub mod linalg;
pub mod opsem;
pub mod par;
pub mod propcheck;
pub mod random;
pub mod transformers;

pub use error::{Error, Result};
