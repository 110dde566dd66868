//! Applying a sub-register operator to a full-register operator without
//! materializing its cylinder extension.
//!
//! For a local operator `A` on factors `t₁..t_k` of the full layout, every
//! basis index splits into a "base" (all target digits zero) plus an offset
//! determined by the target digits. `(A ⊗ I)` then acts independently on each
//! block `{base + offset(l)}`; one product costs `dim · D · dim` instead of
//! `dim³`, where `D` is the local dimension.

use super::layout::Layout;
use super::operator::{Operator, C64, ZERO};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    full_dim: usize,
    bases: Vec<usize>,
    offsets: Vec<usize>,
}

impl Embedding {
    pub fn new(full: &Layout, targets: &[usize]) -> Self {
        let strides = full.strides();
        let dims: Vec<usize> = targets.iter().map(|&t| full.factors()[t].dim).collect();
        let local_dim: usize = dims.iter().product();
        let offsets = (0..local_dim)
            .map(|mut l| {
                let mut off = 0;
                for k in (0..targets.len()).rev() {
                    off += (l % dims[k]) * strides[targets[k]];
                    l /= dims[k];
                }
                off
            })
            .collect();
        let full_dim = full.dim();
        let bases = (0..full_dim)
            .filter(|&i| {
                let d = full.digits(i);
                targets.iter().all(|&t| d[t] == 0)
            })
            .collect();
        Embedding { full_dim, bases, offsets }
    }

    pub fn local_dim(&self) -> usize {
        self.offsets.len()
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim
    }
}

/// A local operator bound to a position inside a full register.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOp {
    op: Operator,
    adj: Operator,
    emb: Embedding,
}

impl LocalOp {
    pub fn new(op: Operator, full: &Layout, targets: &[usize]) -> Result<Self> {
        let emb = Embedding::new(full, targets);
        if emb.local_dim() != op.dim() {
            return Err(Error::DimensionMismatch { expected: emb.local_dim(), found: op.dim() });
        }
        let adj = op.adjoint();
        Ok(LocalOp { op, adj, emb })
    }

    pub fn local(&self) -> &Operator {
        &self.op
    }

    pub fn full_dim(&self) -> usize {
        self.emb.full_dim
    }

    /// `Ã X Ã†`.
    pub fn conjugate(&self, x: &Operator) -> Operator {
        right_mul(&left_mul(&self.op, &self.emb, x), &self.adj, &self.emb)
    }

    /// `Ã† X Ã`.
    pub fn conjugate_adj(&self, x: &Operator) -> Operator {
        right_mul(&left_mul(&self.adj, &self.emb, x), &self.op, &self.emb)
    }

    /// `Ã X`.
    pub fn left(&self, x: &Operator) -> Operator {
        left_mul(&self.op, &self.emb, x)
    }

    /// `X Ã`.
    pub fn right(&self, x: &Operator) -> Operator {
        right_mul(x, &self.op, &self.emb)
    }

    /// `tr(Ã X Ã†)`, computed from the diagonal blocks only.
    pub fn conjugate_trace(&self, x: &Operator) -> f64 {
        let n = x.dim();
        let d = self.emb.local_dim();
        let xe = x.entries();
        let a = self.op.entries();
        let mut total = 0.0;
        for &b in &self.emb.bases {
            for l in 0..d {
                // (A X_block A†)_{ll} = Σ_{m,m'} A_{lm} X_{mm'} conj(A_{lm'})
                let mut acc = ZERO;
                for m in 0..d {
                    let alm = a[l * d + m];
                    if alm == ZERO {
                        continue;
                    }
                    let row = (b + self.emb.offsets[m]) * n;
                    let mut inner = ZERO;
                    for mp in 0..d {
                        let almp = a[l * d + mp];
                        if almp == ZERO {
                            continue;
                        }
                        inner += xe[row + b + self.emb.offsets[mp]] * almp.conj();
                    }
                    acc += alm * inner;
                }
                total += acc.re;
            }
        }
        total
    }
}

fn left_mul(a: &Operator, emb: &Embedding, x: &Operator) -> Operator {
    let n = x.dim();
    let d = emb.local_dim();
    let ae = a.entries();
    let xe = x.entries();
    let mut out = Operator::zeros(n);
    let oe = out.entries_mut();
    for &b in &emb.bases {
        for l in 0..d {
            let orow = (b + emb.offsets[l]) * n;
            for m in 0..d {
                let alm = ae[l * d + m];
                if alm == ZERO {
                    continue;
                }
                let irow = (b + emb.offsets[m]) * n;
                for (o, v) in oe[orow..orow + n].iter_mut().zip(&xe[irow..irow + n]) {
                    *o += alm * v;
                }
            }
        }
    }
    out
}

fn right_mul(x: &Operator, a: &Operator, emb: &Embedding) -> Operator {
    // (X Ã)_{i, b+off_l} = Σ_m X_{i, b+off_m} A_{m l}
    let n = x.dim();
    let d = emb.local_dim();
    let ae = a.entries();
    let xe = x.entries();
    let mut out = Operator::zeros(n);
    let oe = out.entries_mut();
    let mut buf: Vec<C64> = vec![ZERO; d];
    for i in 0..n {
        let row = i * n;
        for &b in &emb.bases {
            for (m, slot) in buf.iter_mut().enumerate() {
                *slot = xe[row + b + emb.offsets[m]];
            }
            for l in 0..d {
                let mut acc = ZERO;
                for m in 0..d {
                    let aml = ae[m * d + l];
                    if aml != ZERO {
                        acc += buf[m] * aml;
                    }
                }
                oe[row + b + emb.offsets[l]] = acc;
            }
        }
    }
    out
}
