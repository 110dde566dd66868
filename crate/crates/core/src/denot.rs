//! Forward semantics `⟦S⟧ : (ρ, p) ↦ (ρ′, p′)`.

use serde::{Deserialize, Serialize};

use crate::compile::{compile, Compiled, Node};
use crate::error::{Error, Result};
use crate::lang::{Program, Stmt};
use crate::linalg::{DensityPair, Operator};
use crate::par::{self, Exec};

/// Measurements on registers at least this large evaluate branches in parallel.
pub(crate) const PAR_MIN_DIM: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnNonConvergence {
    #[default]
    Fail,
    ReturnWithResidual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// A loop stops once the mass re-entering its body drops below this.
    pub loop_eps: f64,
    pub max_unfoldings: usize,
    pub on_nonconvergence: OnNonConvergence,
    pub exec: Exec,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            loop_eps: 1e-10,
            max_unfoldings: 1_000_000,
            on_nonconvergence: OnNonConvergence::Fail,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalResult {
    pub pair: DensityPair,
    /// Upper bound on the trace mass the exact fixed point could still add.
    pub residual: f64,
    /// Largest number of guard evaluations performed by any single loop run.
    pub unfoldings_used: usize,
}

pub fn eval(p: &Program, input: &DensityPair, cfg: &EvalConfig) -> Result<EvalResult> {
    let c = compile(p)?;
    eval_compiled(&c, input, cfg)
}

pub fn eval_compiled(c: &Compiled, input: &DensityPair, cfg: &EvalConfig) -> Result<EvalResult> {
    if !(cfg.loop_eps > 0.0) {
        return Err(Error::InvalidInput("loop_eps must be positive".into()));
    }
    if input.dim() != c.dim() {
        return Err(Error::DimensionMismatch { expected: c.dim(), found: input.dim() });
    }
    input.validate().map_err(|e| Error::InvalidInput(e.to_string()))?;
    let out = run(&c.root, input.rho.clone(), cfg)?;
    Ok(EvalResult {
        pair: DensityPair::new_unchecked(out.rho, input.p + out.viol),
        residual: out.residual,
        unfoldings_used: out.unfoldings,
    })
}

/// `⟦(while)ⁿ⟧(ρ, p)` via `(while)⁰ = Ω` and
/// `(while)ⁿ⁺¹ = if M[q̄] = 1 then S; (while)ⁿ else skip`.
pub fn eval_unfolding(p: &Program, while_stmt: &Stmt, n: usize, input: &DensityPair) -> Result<DensityPair> {
    let unfolded = unfold(while_stmt, n)?;
    Ok(eval(&p.with_body(unfolded), input, &EvalConfig::default())?.pair)
}

/// The n-th syntactic unfolding of a loop.
pub fn unfold(while_stmt: &Stmt, n: usize) -> Result<Stmt> {
    let Stmt::While { vars, m0, m1, body, .. } = while_stmt else {
        return Err(Error::InvalidInput("unfolding needs a while statement".into()));
    };
    let mut s = Stmt::Diverge;
    for _ in 0..n {
        let names: Vec<&str> = vars.iter().map(String::as_str).collect();
        s = Stmt::if_then_else(&names, m0.clone(), m1.clone(), Stmt::seq(vec![(**body).clone(), s]), Stmt::Skip);
    }
    Ok(s)
}

struct Out {
    rho: Operator,
    viol: f64,
    residual: f64,
    unfoldings: usize,
}

impl Out {
    fn exact(rho: Operator) -> Self {
        Out { rho, viol: 0.0, residual: 0.0, unfoldings: 0 }
    }
}

fn tr(a: &Operator) -> f64 {
    a.trace().re
}

fn run(node: &Node, rho: Operator, cfg: &EvalConfig) -> Result<Out> {
    match node {
        Node::Skip => Ok(Out::exact(rho)),
        Node::Diverge => Ok(Out::exact(Operator::zeros(rho.dim()))),
        Node::Reset(kraus) => {
            let mut acc = Operator::zeros(rho.dim());
            for k in kraus {
                acc.add_assign(&k.conjugate(&rho));
            }
            Ok(Out::exact(acc))
        }
        Node::Unitary(u) => Ok(Out::exact(u.conjugate(&rho))),
        Node::Observe(o) => {
            let kept = o.conjugate(&rho);
            let viol = (tr(&rho) - tr(&kept)).max(0.0);
            Ok(Out { viol, ..Out::exact(kept) })
        }
        Node::Seq(parts) => {
            let mut out = Out::exact(rho);
            for s in parts {
                let next = run(s, out.rho, cfg)?;
                out = Out {
                    rho: next.rho,
                    viol: out.viol + next.viol,
                    residual: out.residual + next.residual,
                    unfoldings: out.unfoldings.max(next.unfoldings),
                };
            }
            Ok(out)
        }
        Node::Measure { ops, branches } => {
            let exec = if rho.dim() >= PAR_MIN_DIM { cfg.exec } else { Exec::Sequential };
            let results = par::map_range(exec, ops.len(), |m| run(&branches[m], ops[m].conjugate(&rho), cfg));
            let mut total = Out::exact(Operator::zeros(rho.dim()));
            for r in results {
                let r = r?;
                total.rho.add_assign(&r.rho);
                total.viol += r.viol;
                total.residual += r.residual;
                total.unfoldings = total.unfoldings.max(r.unfoldings);
            }
            Ok(total)
        }
        Node::While { m0, m1, body } => run_loop(m0, m1, body, rho, cfg),
    }
}

/// Accumulates `Σₖ M₀ fᵏ(ρ) M₀†` with `f(σ) = ⟦S⟧(M₁σM₁†)`, one body run per
/// guard evaluation.
fn run_loop(
    m0: &crate::linalg::LocalOp,
    m1: &crate::linalg::LocalOp,
    body: &Node,
    rho: Operator,
    cfg: &EvalConfig,
) -> Result<Out> {
    let mut carried = rho;
    let mut out = Out::exact(Operator::zeros(carried.dim()));
    let mut guards = 0usize;
    loop {
        guards += 1;
        let exits = m0.conjugate(&carried);
        let exit_mass = tr(&exits);
        out.rho.add_assign(&exits);
        let next = m1.conjugate(&carried);
        let pending = tr(&next);
        if pending < cfg.loop_eps {
            out.residual += pending.max(0.0);
            break;
        }
        if guards >= cfg.max_unfoldings {
            match cfg.on_nonconvergence {
                OnNonConvergence::Fail => return Err(Error::NonConvergence { iterations: guards, delta: pending }),
                OnNonConvergence::ReturnWithResidual => {
                    out.residual += pending;
                    break;
                }
            }
        }
        let step = run(body, next, cfg)?;
        out.viol += step.viol;
        out.residual += step.residual;
        out.unfoldings = out.unfoldings.max(step.unfoldings);
        // A carried state that maps to itself while nothing leaves the loop
        // diverges exactly: every later unfolding adds nothing.
        let stationary = (&step.rho - &carried).trace_norm_bound() < cfg.loop_eps
            && exit_mass + step.viol < cfg.loop_eps;
        if stationary {
            break;
        }
        carried = step.rho;
    }
    out.unfoldings = out.unfoldings.max(guards);
    Ok(out)
}
