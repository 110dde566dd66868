//! Fixed gate and projector matrices.

use std::f64::consts::FRAC_1_SQRT_2;

use super::operator::{Operator, C64, ONE, ZERO};

fn real(rows: &[&[f64]]) -> Operator {
    Operator::from_real_rows(rows).expect("well-formed gate table")
}

pub fn hadamard() -> Operator {
    let s = FRAC_1_SQRT_2;
    real(&[&[s, s], &[s, -s]])
}

pub fn pauli_x() -> Operator {
    real(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn pauli_y() -> Operator {
    Operator::from_rows(&[vec![ZERO, C64::new(0.0, -1.0)], vec![C64::new(0.0, 1.0), ZERO]])
        .expect("well-formed gate table")
}

pub fn pauli_z() -> Operator {
    real(&[&[1.0, 0.0], &[0.0, -1.0]])
}

pub fn phase_s() -> Operator {
    Operator::from_rows(&[vec![ONE, ZERO], vec![ZERO, C64::new(0.0, 1.0)]])
        .expect("well-formed gate table")
}

pub fn phase_t() -> Operator {
    Operator::from_rows(&[vec![ONE, ZERO], vec![ZERO, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]])
        .expect("well-formed gate table")
}

/// Two-qubit controlled gate; the first qubit is the control.
pub fn controlled(u: &Operator) -> Operator {
    assert_eq!(u.dim(), 2);
    let mut out = Operator::zeros(4);
    out.set(0, 0, ONE);
    out.set(1, 1, ONE);
    for i in 0..2 {
        for j in 0..2 {
            out.set(2 + i, 2 + j, u.get(i, j));
        }
    }
    out
}

pub fn controlled_hadamard() -> Operator {
    controlled(&hadamard())
}

pub fn cnot() -> Operator {
    controlled(&pauli_x())
}

pub fn cz() -> Operator {
    controlled(&pauli_z())
}

pub fn swap() -> Operator {
    let mut out = Operator::zeros(4);
    out.set(0, 0, ONE);
    out.set(1, 2, ONE);
    out.set(2, 1, ONE);
    out.set(3, 3, ONE);
    out
}

/// `(1/√(1+4ᵏ)) [[1, −2ᵏ], [2ᵏ, 1]]`.
pub fn rotation(k: f64) -> Operator {
    let t = 2f64.powf(k);
    let norm = 1.0 / (1.0 + t * t).sqrt();
    real(&[&[norm, -t * norm], &[t * norm, norm]])
}

/// `|b⟩⟨b|` for a computational basis state of `bits.len()` qubits.
pub fn basis_projector(bits: &[bool]) -> Operator {
    let dim = 1usize << bits.len();
    let index = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
    Operator::ket_bra(index, index, dim)
}
