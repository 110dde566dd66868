//! Backward predicate transformers and Hoare judgments.
//!
//! `qwp` and `qwlp` follow the inductive rules; loops are computed as limits
//! of the monotone sequences `P₀ = 0` (resp. `I`),
//! `Pₙ₊₁ = M₀†PM₀ + M₁† t(S)(Pₙ) M₁`. The liberal loop runs the same ascending
//! engine on complements, `Rₙ = I − Pₙ`. The conditional transformers pair
//! them up: `qcwp(P, Q) = (qwp P, qwlp Q)` and `qcwlp(P, Q) = (qwlp P, qwlp Q)`.

use serde::{Deserialize, Serialize};

use crate::compile::{compile, Compiled, Node};
use crate::denot::{eval_compiled, EvalConfig, OnNonConvergence, PAR_MIN_DIM};
use crate::error::{Error, Result};
use crate::lang::Program;
use crate::linalg::{loewner_leq, DensityPair, LocalOp, Operator, Predicate, EPS_POS, EPS_ZERO};
use crate::par::{self, Exec};
use crate::random;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformerConfig {
    /// Loops stop once successive iterates differ by less than this in
    /// Frobenius norm, which bounds the operator norm from above.
    pub loop_eps: f64,
    pub max_iters: usize,
    pub exec: Exec,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        TransformerConfig { loop_eps: 1e-10, max_iters: 1_000_000, exec: Exec::default() }
    }
}

/// A pair of predicates `(P, Q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredicatePair {
    pub first: Predicate,
    pub second: Predicate,
}

impl PredicatePair {
    pub fn new(first: Predicate, second: Predicate) -> Result<Self> {
        if first.dim() != second.dim() {
            return Err(Error::DimensionMismatch { expected: first.dim(), found: second.dim() });
        }
        Ok(PredicatePair { first, second })
    }

    /// The least element `(0, I)` of `⊴`.
    pub fn bottom(dim: usize) -> Self {
        PredicatePair { first: Predicate::zero(dim), second: Predicate::identity(dim) }
    }

    /// `(P, Q) ⊴ (P′, Q′)` iff `P ⊑ P′` and `Q′ ⊑ Q`.
    pub fn precedes(&self, other: &PredicatePair, tol: f64) -> Result<bool> {
        Ok(loewner_leq(self.first.op(), other.first.op(), tol)?
            && loewner_leq(other.second.op(), self.second.op(), tol)?)
    }

    /// `(P, Q) ⊴̇ (P′, Q′)` iff `P ⊑ P′` and `Q ⊑ Q′`.
    pub fn precedes_pointwise(&self, other: &PredicatePair, tol: f64) -> Result<bool> {
        Ok(loewner_leq(self.first.op(), other.first.op(), tol)?
            && loewner_leq(self.second.op(), other.second.op(), tol)?)
    }

    /// `tr(Pρ) / tr(Qρ)`; see [`hat_tr`].
    pub fn ratio(&self, rho: &Operator) -> Option<f64> {
        hat_tr(self, rho)
    }
}

/// `tr(Aρ)/tr(Bρ)`, undefined when `tr(Bρ) ≤ εzero`.
pub fn hat_tr(pair: &PredicatePair, rho: &Operator) -> Option<f64> {
    hat_tr_ops(pair.first.op(), pair.second.op(), rho)
}

pub fn hat_tr_ops(a: &Operator, b: &Operator, rho: &Operator) -> Option<f64> {
    let den = b.trace_product(rho).re;
    (den > EPS_ZERO).then(|| a.trace_product(rho).re / den)
}

fn check_post(c: &Compiled, post: &Predicate) -> Result<()> {
    if post.dim() != c.dim() {
        return Err(Error::DimensionMismatch { expected: c.dim(), found: post.dim() });
    }
    Ok(())
}

fn finish(op: Operator) -> Result<Predicate> {
    Predicate::new(op.hermitian_part())
}

pub fn qwp(p: &Program, post: &Predicate, cfg: &TransformerConfig) -> Result<Predicate> {
    qwp_compiled(&compile(p)?, post, cfg)
}

pub fn qwlp(p: &Program, post: &Predicate, cfg: &TransformerConfig) -> Result<Predicate> {
    qwlp_compiled(&compile(p)?, post, cfg)
}

pub fn qwp_compiled(c: &Compiled, post: &Predicate, cfg: &TransformerConfig) -> Result<Predicate> {
    check_post(c, post)?;
    finish(wp(&c.root, post.op(), false, cfg)?)
}

pub fn qwlp_compiled(c: &Compiled, post: &Predicate, cfg: &TransformerConfig) -> Result<Predicate> {
    check_post(c, post)?;
    finish(wp(&c.root, post.op(), true, cfg)?)
}

pub fn qcwp(p: &Program, pair: &PredicatePair, cfg: &TransformerConfig) -> Result<PredicatePair> {
    qcwp_compiled(&compile(p)?, pair, cfg)
}

pub fn qcwlp(p: &Program, pair: &PredicatePair, cfg: &TransformerConfig) -> Result<PredicatePair> {
    qcwlp_compiled(&compile(p)?, pair, cfg)
}

pub fn qcwp_compiled(c: &Compiled, pair: &PredicatePair, cfg: &TransformerConfig) -> Result<PredicatePair> {
    Ok(PredicatePair { first: qwp_compiled(c, &pair.first, cfg)?, second: qwlp_compiled(c, &pair.second, cfg)? })
}

pub fn qcwlp_compiled(c: &Compiled, pair: &PredicatePair, cfg: &TransformerConfig) -> Result<PredicatePair> {
    Ok(PredicatePair { first: qwlp_compiled(c, &pair.first, cfg)?, second: qwlp_compiled(c, &pair.second, cfg)? })
}

/// `qcwp` by direct recursion on pairs: loops start from `(0, I)` and iterate
/// `Xₙ₊₁ = M₀†(P, Q)M₀ + M₁† qcwp(S)(Xₙ) M₁` with both components at once.
pub fn qcwp_paired(p: &Program, pair: &PredicatePair, cfg: &TransformerConfig) -> Result<PredicatePair> {
    qcwp_paired_compiled(&compile(p)?, pair, cfg)
}

pub fn qcwp_paired_compiled(c: &Compiled, pair: &PredicatePair, cfg: &TransformerConfig) -> Result<PredicatePair> {
    check_post(c, &pair.first)?;
    check_post(c, &pair.second)?;
    let (a, b) = cwp_pair(&c.root, (pair.first.op().clone(), pair.second.op().clone()), cfg)?;
    Ok(PredicatePair { first: finish(a)?, second: finish(b)? })
}

fn sum_conj_adj(ops: &[LocalOp], x: &Operator) -> Operator {
    let mut acc = Operator::zeros(x.dim());
    for k in ops {
        acc.add_assign(&k.conjugate_adj(x));
    }
    acc
}

fn branch_exec(cfg: &TransformerConfig, dim: usize) -> Exec {
    if dim >= PAR_MIN_DIM {
        cfg.exec
    } else {
        Exec::Sequential
    }
}

fn wp(node: &Node, post: &Operator, liberal: bool, cfg: &TransformerConfig) -> Result<Operator> {
    let dim = post.dim();
    match node {
        Node::Skip => Ok(post.clone()),
        Node::Diverge => Ok(if liberal { Operator::identity(dim) } else { Operator::zeros(dim) }),
        Node::Reset(kraus) => Ok(sum_conj_adj(kraus, post)),
        Node::Unitary(u) => Ok(u.conjugate_adj(post)),
        Node::Observe(o) => Ok(o.conjugate_adj(post)),
        Node::Seq(parts) => {
            let mut acc = post.clone();
            for s in parts.iter().rev() {
                acc = wp(s, &acc, liberal, cfg)?;
            }
            Ok(acc)
        }
        Node::Measure { ops, branches } => {
            let parts = par::map_range(branch_exec(cfg, dim), ops.len(), |m| {
                wp(&branches[m], post, liberal, cfg).map(|w| ops[m].conjugate_adj(&w))
            });
            let mut acc = Operator::zeros(dim);
            for w in parts {
                acc.add_assign(&w?);
            }
            Ok(acc)
        }
        Node::While { m0, m1, body } => {
            let exit = m0.conjugate_adj(post);
            let step = |x: &Operator| -> Result<Operator> {
                let mut next = m1.conjugate_adj(&wp(body, x, liberal, cfg)?);
                next.add_assign(&exit);
                Ok(next)
            };
            if liberal {
                let id = Operator::identity(dim);
                let r = ascend(dim, cfg, |r| Ok(&id - &step(&(&id - r))?))?;
                Ok(&id - &r)
            } else {
                ascend(dim, cfg, step)
            }
        }
    }
}

/// Iterates `x ↦ f(x)` from `0` until the Frobenius step is below `loop_eps`.
fn ascend(dim: usize, cfg: &TransformerConfig, f: impl Fn(&Operator) -> Result<Operator>) -> Result<Operator> {
    let mut x = Operator::zeros(dim);
    let mut delta = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        let next = f(&x)?;
        delta = (&next - &x).frobenius_norm();
        x = next;
        if delta < cfg.loop_eps {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence { iterations: cfg.max_iters, delta })
}

type Pair = (Operator, Operator);

fn cwp_pair(node: &Node, (a, b): Pair, cfg: &TransformerConfig) -> Result<Pair> {
    let dim = a.dim();
    match node {
        Node::Skip => Ok((a, b)),
        Node::Diverge => Ok((Operator::zeros(dim), Operator::identity(dim))),
        Node::Reset(kraus) => Ok((sum_conj_adj(kraus, &a), sum_conj_adj(kraus, &b))),
        Node::Unitary(u) | Node::Observe(u) => Ok((u.conjugate_adj(&a), u.conjugate_adj(&b))),
        Node::Seq(parts) => {
            let mut acc = (a, b);
            for s in parts.iter().rev() {
                acc = cwp_pair(s, acc, cfg)?;
            }
            Ok(acc)
        }
        Node::Measure { ops, branches } => {
            let parts = par::map_range(branch_exec(cfg, dim), ops.len(), |m| {
                cwp_pair(&branches[m], (a.clone(), b.clone()), cfg)
                    .map(|(x, y)| (ops[m].conjugate_adj(&x), ops[m].conjugate_adj(&y)))
            });
            let mut acc = (Operator::zeros(dim), Operator::zeros(dim));
            for r in parts {
                let (x, y) = r?;
                acc.0.add_assign(&x);
                acc.1.add_assign(&y);
            }
            Ok(acc)
        }
        Node::While { m0, m1, body } => {
            let exit = (m0.conjugate_adj(&a), m0.conjugate_adj(&b));
            let mut x = (Operator::zeros(dim), Operator::identity(dim));
            let mut delta = f64::INFINITY;
            for _ in 0..cfg.max_iters {
                let (p, q) = cwp_pair(body, x.clone(), cfg)?;
                let mut next = (m1.conjugate_adj(&p), m1.conjugate_adj(&q));
                next.0.add_assign(&exit.0);
                next.1.add_assign(&exit.1);
                delta = (&next.0 - &x.0).frobenius_norm().max((&next.1 - &x.1).frobenius_norm());
                x = next;
                if delta < cfg.loop_eps {
                    return Ok(x);
                }
            }
            Err(Error::NonConvergence { iterations: cfg.max_iters, delta })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HoareMode {
    Total,
    Partial,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Holds { checked: usize },
    Refuted { witness: Operator, lhs: f64, rhs: f64 },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds { .. })
    }
}

/// Tolerance added to the right-hand side before a sample counts as a
/// counterexample.
pub const HOARE_TOL: f64 = 1e-9;

/// Tests `{P} S {Q}` on every basis state and then on `samples` random partial
/// density operators.
///
/// Total: `tr(Pρ) ≤ tr(Q ρ′)`. Partial: `tr(Pρ) ≤ tr(Qρ′) + tr(ρ) − tr(ρ′) − p′`,
/// where `(ρ′, p′) = ⟦S⟧(ρ, 0)`. Loop residuals are credited to the side that
/// keeps a refutation sound.
pub fn check_hoare(
    pre: &Predicate,
    p: &Program,
    post: &Predicate,
    mode: HoareMode,
    samples: usize,
    seed: u64,
) -> Result<Verdict> {
    let c = compile(p)?;
    check_post(&c, pre)?;
    check_post(&c, post)?;
    let dim = c.dim();
    let cfg = EvalConfig { on_nonconvergence: OnNonConvergence::ReturnWithResidual, ..EvalConfig::default() };
    let mut rng = random::rng(seed);
    let mut checked = 0;
    for k in 0..dim + samples {
        let rho = if k < dim { Operator::ket_bra(k, k, dim) } else { random::gen_partial_density(dim, &mut rng) };
        let out = eval_compiled(&c, &DensityPair::new_unchecked(rho.clone(), 0.0), &cfg)?;
        let lhs = pre.expectation(&rho);
        let reached = post.expectation(&out.pair.rho);
        let (rhs, slack) = match mode {
            HoareMode::Total => (reached, out.residual),
            HoareMode::Partial => (reached + rho.trace().re - out.pair.trace() - out.pair.p, 0.0),
        };
        if lhs > rhs + slack + HOARE_TOL {
            return Ok(Verdict::Refuted { witness: rho, lhs, rhs });
        }
        checked += 1;
    }
    Ok(Verdict::Holds { checked })
}

/// Exact form of the judgment: `P ⊑ qwp(S, Q)` (total) or `P ⊑ qwlp(S, Q)`
/// (partial).
pub fn check_hoare_exact(
    pre: &Predicate,
    p: &Program,
    post: &Predicate,
    mode: HoareMode,
    cfg: &TransformerConfig,
) -> Result<bool> {
    let bound = match mode {
        HoareMode::Total => qwp(p, post, cfg)?,
        HoareMode::Partial => qwlp(p, post, cfg)?,
    };
    loewner_leq(pre.op(), bound.op(), EPS_POS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    fn cfg() -> TransformerConfig {
        TransformerConfig::default()
    }

    #[test]
    fn skip_returns_postcondition() {
        let p = parse("bool q; skip").unwrap();
        let post = Predicate::new(Operator::diagonal(&[0.25, 1.0])).unwrap();
        assert_eq!(qwp(&p, &post, &cfg()).unwrap(), post);
        let pair = PredicatePair::new(post.clone(), Predicate::identity(2)).unwrap();
        assert_eq!(qcwp(&p, &pair, &cfg()).unwrap(), pair);
        assert_eq!(qcwlp(&p, &pair, &cfg()).unwrap(), pair);
    }

    #[test]
    fn x_flip_loop_reaches_zero_surely() {
        let p = parse("bool q; while {P0, P1}[q] = 1 do { q := X q }").unwrap();
        let post = Predicate::new(Operator::ket_bra(0, 0, 2)).unwrap();
        let w = qwp(&p, &post, &cfg()).unwrap();
        assert!(w.op().approx_eq(&Operator::identity(2), 1e-12));
    }

    #[test]
    fn diverge_transformers() {
        let p = parse("bool q; diverge").unwrap();
        let post = Predicate::zero(2);
        assert_eq!(qwlp(&p, &post, &cfg()).unwrap().op(), &Operator::identity(2));
        assert_eq!(qwp(&p, &Predicate::identity(2), &cfg()).unwrap().op(), &Operator::zeros(2));
        let r = qcwlp(&p, &PredicatePair::bottom(2), &cfg()).unwrap();
        assert_eq!(r.first.op(), &Operator::identity(2));
        assert_eq!(r.second.op(), &Operator::identity(2));
    }

    #[test]
    fn hat_tr_cases() {
        let rho = Operator::ket_bra(0, 0, 2);
        let p = Predicate::new(Operator::diagonal(&[0.3, 1.0])).unwrap();
        let pair = PredicatePair::new(p.clone(), Predicate::identity(2)).unwrap();
        assert!((hat_tr(&pair, &rho).unwrap() - 0.3).abs() < 1e-15);
        let undefined = PredicatePair::new(p, Predicate::zero(2)).unwrap();
        assert_eq!(hat_tr(&undefined, &rho), None);
    }

    #[test]
    fn orderings() {
        let lo = PredicatePair::bottom(2);
        let mid = PredicatePair::new(
            Predicate::new(Operator::identity(2).scale_real(0.5)).unwrap(),
            Predicate::new(Operator::identity(2).scale_real(0.5)).unwrap(),
        )
        .unwrap();
        assert!(lo.precedes(&mid, 1e-12).unwrap());
        assert!(!mid.precedes(&lo, 1e-12).unwrap());
        assert!(!lo.precedes_pointwise(&mid, 1e-12).unwrap());
    }

    #[test]
    fn hoare_examples() {
        let p = parse("bool q; observe(q, P1)").unwrap();
        let id = Predicate::identity(2);
        let v = check_hoare(&id, &p, &id, HoareMode::Partial, 10, 1).unwrap();
        let Verdict::Refuted { witness, .. } = v else { panic!("{v:?}") };
        assert_eq!(witness, Operator::ket_bra(0, 0, 2));
        let zero = Predicate::zero(2);
        assert!(check_hoare(&zero, &p, &id, HoareMode::Total, 20, 1).unwrap().holds());
        assert!(!check_hoare_exact(&id, &p, &id, HoareMode::Partial, &cfg()).unwrap());
    }

    #[test]
    fn paired_recursion_matches_on_loop() {
        let p = parse("bool q, c; while {P0, P1}[c] = 1 do { c := H c; observe(q, P0 + 0 * P1) ; q := H q }").unwrap();
        let post = Predicate::new(Operator::diagonal(&[0.1, 0.9, 0.4, 0.6])).unwrap();
        let pair = PredicatePair::new(post, Predicate::identity(4)).unwrap();
        let a = qcwp(&p, &pair, &cfg()).unwrap();
        let b = qcwp_paired(&p, &pair, &cfg()).unwrap();
        assert!(a.first.op().approx_eq(b.first.op(), 1e-9));
        assert!(a.second.op().approx_eq(b.second.op(), 1e-9));
    }
}
