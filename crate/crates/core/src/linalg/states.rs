use serde::{Deserialize, Serialize};

use super::operator::Operator;
use super::{EPS_HERM, EPS_POS};
use crate::error::{Error, Result};

/// A program state `(ρ, p)`: sub-normalized density operator plus the
/// probability mass lost to violated observations, with `tr(ρ) + p ≤ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityPair {
    pub rho: Operator,
    pub p: f64,
}

impl DensityPair {
    pub fn new(rho: Operator, p: f64) -> Result<Self> {
        let pair = DensityPair { rho, p };
        pair.validate()?;
        Ok(pair)
    }

    pub(crate) fn new_unchecked(rho: Operator, p: f64) -> Self {
        DensityPair { rho, p }
    }

    /// `(ρ, 0)`.
    pub fn from_state(rho: Operator) -> Result<Self> {
        Self::new(rho, 0.0)
    }

    /// `|i⟩⟨i|` with no violation mass.
    pub fn basis(index: usize, dim: usize) -> Self {
        DensityPair { rho: Operator::ket_bra(index, index, dim), p: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.p.is_finite() || self.p < -EPS_POS {
            return Err(Error::InvalidDensity(format!("violation mass {} is negative", self.p)));
        }
        let dev = self.rho.hermitian_deviation();
        if dev > EPS_HERM {
            return Err(Error::InvalidDensity(format!("state is not Hermitian (deviation {dev:e})")));
        }
        if !self.rho.psd_within(EPS_POS) {
            let min = self.rho.min_eigenvalue();
            return Err(Error::InvalidDensity(format!("state has negative eigenvalue {min:e}")));
        }
        let total = self.tilde_trace();
        if total > 1.0 + EPS_POS {
            return Err(Error::InvalidDensity(format!("tr(ρ) + p = {total} exceeds 1")));
        }
        Ok(())
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// `tr(ρ) + p`.
    pub fn tilde_trace(&self) -> f64 {
        self.trace() + self.p
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }
}

/// An operator `P` with `0 ⊑ P ⊑ I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Operator", into = "Operator")]
pub struct Predicate(Operator);

impl Predicate {
    pub fn new(op: Operator) -> Result<Self> {
        let dev = op.hermitian_deviation();
        if dev > EPS_HERM {
            return Err(Error::InvalidPredicate(format!("not Hermitian (deviation {dev:e})")));
        }
        let complement = &Operator::identity(op.dim()) - &op;
        if !op.psd_within(EPS_POS) || !complement.psd_within(EPS_POS) {
            let eig = op.hermitian_eigenvalues();
            let (lo, hi) = (eig[0], eig[eig.len() - 1]);
            return Err(Error::InvalidPredicate(format!("spectrum [{lo}, {hi}] leaves [0, 1]")));
        }
        Ok(Predicate(op))
    }

    pub fn identity(dim: usize) -> Self {
        Predicate(Operator::identity(dim))
    }

    pub fn zero(dim: usize) -> Self {
        Predicate(Operator::zeros(dim))
    }

    pub fn op(&self) -> &Operator {
        &self.0
    }

    pub fn into_op(self) -> Operator {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// `tr(P ρ)`.
    pub fn expectation(&self, rho: &Operator) -> f64 {
        self.0.trace_product(rho).re
    }
}

impl TryFrom<Operator> for Predicate {
    type Error = Error;
    fn try_from(op: Operator) -> Result<Self> {
        Predicate::new(op)
    }
}

impl From<Predicate> for Operator {
    fn from(p: Predicate) -> Operator {
        p.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gates;

    #[test]
    fn density_pair_bounds() {
        let rho = Operator::identity(2).scale_real(0.5);
        assert!(DensityPair::new(rho.clone(), 0.0).is_ok());
        assert!(DensityPair::new(rho.clone(), 0.5).is_err());
        assert!(DensityPair::new(rho.scale_real(0.5), 0.5).is_ok());
        assert!(DensityPair::new(gates::pauli_z().scale_real(0.1), 0.0).is_err());
        assert!(DensityPair::new(Operator::ket_bra(0, 1, 2), 0.0).is_err());
    }

    #[test]
    fn predicate_bounds() {
        assert!(Predicate::new(Operator::identity(3)).is_ok());
        assert!(Predicate::new(Operator::identity(3).scale_real(1.5)).is_err());
        assert!(Predicate::new(gates::pauli_z()).is_err());
        let half = gates::hadamard().checked_add(&Operator::identity(2)).unwrap().scale_real(0.5);
        assert!(Predicate::new(half).is_ok());
        assert!(Predicate::new(gates::hadamard().scale_real(0.5)).is_err());
    }

    #[test]
    fn predicate_json_is_validated() {
        let ok = r#"{"dim": 1, "entries": [[[0.5, 0.0]]]}"#;
        let p: Predicate = serde_json::from_str(ok).unwrap();
        assert_eq!(p.dim(), 1);
        let bad = r#"{"dim": 1, "entries": [[[2.0, 0.0]]]}"#;
        assert!(serde_json::from_str::<Predicate>(bad).is_err());
    }
}
