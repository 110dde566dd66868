use std::ops::{Add, Mul, Sub};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::layout::{Factor, Layout};
use super::{EPS_HERM, EPS_ZERO};
use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub const DEFAULT_DIM_CAP: usize = 4096;
static DIM_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_DIM_CAP);

/// Current register-dimension cap.
pub fn dim_cap() -> usize {
    DIM_CAP.load(Ordering::Relaxed)
}

/// Override the register-dimension cap. Intended for process start-up
/// (the CLI reads `QCWP_DIM_CAP`).
pub fn set_dim_cap(cap: usize) {
    DIM_CAP.store(cap.max(1), Ordering::Relaxed);
}

pub fn check_dim(dim: usize) -> Result<()> {
    let cap = dim_cap();
    if dim > cap {
        Err(Error::RegisterTooLarge { dim, cap })
    } else {
        Ok(())
    }
}

/// Dense row-major complex square matrix together with the register layout it
/// acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim: usize,
    entries: Vec<C64>,
    layout: Layout,
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Operator { dim, entries: vec![ZERO; dim * dim], layout: Layout::anonymous(dim) }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op.entries[i * dim + i] = ONE;
        }
        op
    }

    /// `|i⟩⟨j|` on a `dim`-dimensional space.
    pub fn ket_bra(i: usize, j: usize, dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        op.entries[i * dim + j] = ONE;
        op
    }

    /// `|v⟩⟨v|` for an (unnormalized) vector.
    pub fn projector(v: &[C64]) -> Self {
        let dim = v.len();
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                op.entries[i * dim + j] = v[i] * v[j].conj();
            }
        }
        op
    }

    pub fn from_entries(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Operator { dim, entries, layout: Layout::anonymous(dim) })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
            }
            entries.extend_from_slice(r);
        }
        Self::from_entries(dim, entries)
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> =
            rows.iter().map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let dim = values.len();
        let mut op = Self::zeros(dim);
        for (i, &v) in values.iter().enumerate() {
            op.entries[i * dim + i] = C64::new(v, 0.0);
        }
        op
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Relabel the tensor factors. The product of factor dimensions must equal
    /// the operator dimension.
    pub fn with_layout(mut self, layout: Layout) -> Result<Self> {
        if layout.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: layout.dim() });
        }
        self.layout = layout;
        Ok(self)
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<C64>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.entries[i * n + j] = self.entries[j * n + i].conj();
            }
        }
        out.layout = self.layout.clone();
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.entries[i * self.dim + i]).sum()
    }

    /// `tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> C64 {
        let n = self.dim;
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.entries[i * n + j] * other.entries[j * n + i];
            }
        }
        acc
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.entries.iter_mut().for_each(|z| *z *= s);
        out
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn add_assign(&mut self, other: &Operator) {
        debug_assert_eq!(self.dim, other.dim);
        self.entries.iter_mut().zip(&other.entries).for_each(|(a, b)| *a += b);
    }

    pub fn add_scaled(&mut self, s: f64, other: &Operator) {
        debug_assert_eq!(self.dim, other.dim);
        self.entries.iter_mut().zip(&other.entries).for_each(|(a, b)| *a += b * s);
    }

    pub fn checked_add(&self, other: &Operator) -> Result<Self> {
        self.same_dim(other)?;
        let mut out = self.clone();
        out.add_assign(other);
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Operator) -> Result<Self> {
        self.same_dim(other)?;
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        Ok(out)
    }

    pub fn checked_mul(&self, other: &Operator) -> Result<Self> {
        self.same_dim(other)?;
        Ok(self.matmul(other))
    }

    fn same_dim(&self, other: &Operator) -> Result<()> {
        if self.dim != other.dim {
            Err(Error::DimensionMismatch { expected: self.dim, found: other.dim })
        } else {
            Ok(())
        }
    }

    fn matmul(&self, other: &Operator) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            let row = &mut out.entries[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.entries[k * n..(k + 1) * n];
                for (o, b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out.layout = self.layout.clone();
        out
    }

    /// Kronecker product; the layout is the concatenation of both layouts.
    pub fn kron(&self, other: &Operator) -> Result<Self> {
        let dim = self
            .dim
            .checked_mul(other.dim)
            .ok_or(Error::RegisterTooLarge { dim: usize::MAX, cap: dim_cap() })?;
        check_dim(dim)?;
        let (n, m) = (self.dim, other.dim);
        let mut entries = vec![ZERO; dim * dim];
        for i1 in 0..n {
            for j1 in 0..n {
                let a = self.entries[i1 * n + j1];
                if a == ZERO {
                    continue;
                }
                for i2 in 0..m {
                    let row = (i1 * m + i2) * dim;
                    for j2 in 0..m {
                        entries[row + j1 * m + j2] = a * other.entries[i2 * m + j2];
                    }
                }
            }
        }
        Ok(Operator { dim, entries, layout: self.layout.concat(&other.layout) })
    }

    /// Entrywise division by a real scalar bounded away from zero.
    pub fn normalize_div(&self, s: f64) -> Result<Self> {
        if !(s > EPS_ZERO) {
            return Err(Error::DivisionByNearZero(s));
        }
        Ok(self.scale_real(1.0 / s))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise distance to `other`, ignoring layouts.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Operator, tol: f64) -> bool {
        self.dim == other.dim && self.max_abs_diff(other) <= tol
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Upper bound on the trace norm that avoids an eigendecomposition.
    pub fn trace_norm_bound(&self) -> f64 {
        (self.dim as f64).sqrt() * self.frobenius_norm()
    }

    /// Largest entrywise deviation from Hermitian symmetry.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim;
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.entries[i * n + j] - self.entries[j * n + i].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        let n = self.dim;
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                out.entries[i * n + j] =
                    (self.entries[i * n + j] + self.entries[j * n + i].conj()) * 0.5;
            }
        }
        out
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.adjoint().matmul(self).approx_eq(&Operator::identity(self.dim), tol)
    }

    pub fn is_projector(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.matmul(self).approx_eq(self, tol)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        let n = m.nrows();
        let mut op = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                op.entries[i * n + j] = m[(i, j)];
            }
        }
        op
    }

    /// Eigenvalues (ascending) of the Hermitian part.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.hermitian_part().to_nalgebra());
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    /// Eigendecomposition of the Hermitian part: eigenvalues and the unitary
    /// whose columns are the matching eigenvectors.
    pub fn hermitian_eigh(&self) -> (Vec<f64>, Operator) {
        let eig = SymmetricEigen::new(self.hermitian_part().to_nalgebra());
        let values = eig.eigenvalues.iter().copied().collect();
        (values, Operator::from_nalgebra(&eig.eigenvectors))
    }

    /// Whether the Hermitian part has every eigenvalue at least `-tol`,
    /// decided by a Cholesky factorization of `H + tol·I`.
    pub fn psd_within(&self, tol: f64) -> bool {
        let mut m = self.hermitian_part().to_nalgebra();
        for i in 0..self.dim {
            m[(i, i)] += tol;
        }
        // Complex square roots never fail, so a negative pivot shows up as a
        // (nearly) imaginary diagonal entry of the factor instead of `None`.
        match Cholesky::new(m) {
            Some(ch) => ch.l_dirty().diagonal().iter().all(|d| d.re > d.im.abs()),
            None => false,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Apply a real function to the spectrum of the Hermitian part.
    pub fn hermitian_map(&self, f: impl Fn(f64) -> f64) -> Operator {
        let (values, vecs) = self.hermitian_eigh();
        let mapped: Vec<f64> = values.into_iter().map(f).collect();
        let d = Operator::diagonal(&mapped);
        let mut out = vecs.matmul(&d).matmul(&vecs.adjoint());
        out.layout = self.layout.clone();
        out
    }

    /// Square root of the positive part of a Hermitian operator.
    pub fn psd_sqrt(&self) -> Operator {
        self.hermitian_map(|x| x.max(0.0).sqrt())
    }

    /// Trace norm of the Hermitian part (sum of absolute eigenvalues).
    pub fn trace_norm_hermitian(&self) -> f64 {
        self.hermitian_eigenvalues().iter().map(|x| x.abs()).sum()
    }

    pub fn op_norm_hermitian(&self) -> f64 {
        self.hermitian_eigenvalues().iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Apply `self` to a column vector.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim;
        (0..n).map(|i| (0..n).map(|j| self.entries[i * n + j] * v[j]).sum()).collect()
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in product");
        self.matmul(rhs)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.checked_add(rhs).expect("dimension mismatch in sum")
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.checked_sub(rhs).expect("dimension mismatch in difference")
    }
}

/// `a ⊑ b` in the Loewner order: the Hermitian part of `b − a` has smallest
/// eigenvalue at least `−tol`.
pub fn loewner_leq(a: &Operator, b: &Operator, tol: f64) -> Result<bool> {
    let diff = b.checked_sub(a)?;
    let deviation = diff.hermitian_deviation();
    if deviation > EPS_HERM {
        return Err(Error::NotComparable { deviation });
    }
    Ok(diff.psd_within(tol))
}

/// Extend `a`, which acts on the variables `on` (in that order), to the full
/// register described by `full`, acting as identity on every other factor.
pub fn cylinder_extend(a: &Operator, on: &[impl AsRef<str>], full: &Layout) -> Result<Operator> {
    let positions = full.positions(on)?;
    let local: Vec<Factor> = positions.iter().map(|&p| full.factors()[p].clone()).collect();
    let local = Layout::new(local);
    if local.dim() != a.dim() {
        return Err(Error::DimensionMismatch { expected: local.dim(), found: a.dim() });
    }
    let dim = full.dim();
    check_dim(dim)?;
    let local_strides = local.strides();
    let mut out = Operator::zeros(dim);
    let rest: Vec<usize> = (0..full.len()).filter(|i| !positions.contains(i)).collect();
    let split = |idx: usize| {
        let d = full.digits(idx);
        let l: usize = positions.iter().zip(&local_strides).map(|(&p, s)| d[p] * s).sum();
        let r: Vec<usize> = rest.iter().map(|&p| d[p]).collect();
        (l, r)
    };
    let parts: Vec<(usize, Vec<usize>)> = (0..dim).map(split).collect();
    for i in 0..dim {
        for j in 0..dim {
            if parts[i].1 == parts[j].1 {
                out.entries[i * dim + j] = a.get(parts[i].0, parts[j].0);
            }
        }
    }
    out.layout = full.clone();
    Ok(out)
}
