//! Dense complex operators and the quantum-specific checks built on them.

pub mod gates;
mod json;
mod layout;
mod local;
mod operator;
mod states;

pub use layout::{Factor, Layout};
pub use local::{Embedding, LocalOp};
pub use operator::{
    check_dim, cylinder_extend, dim_cap, loewner_leq, set_dim_cap, Operator, C64,
    DEFAULT_DIM_CAP, ONE, ZERO,
};
pub use states::{DensityPair, Predicate};

/// Positivity tolerance.
pub const EPS_POS: f64 = 1e-9;
/// Hermiticity tolerance.
pub const EPS_HERM: f64 = 1e-9;
/// Outcomes with probability below this are treated as impossible.
pub const EPS_ZERO: f64 = 1e-12;
