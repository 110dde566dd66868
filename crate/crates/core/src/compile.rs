//! Lowers a typechecked program to operators bound to register positions.

use crate::error::{Error, Result};
use crate::lang::{Program, Stmt, VarType};
use crate::linalg::{check_dim, Layout, LocalOp, Operator};

#[derive(Clone, Debug)]
pub enum Node {
    Skip,
    Diverge,
    /// `q := 0` as the Kraus family `{|0⟩⟨n|}`.
    Reset(Vec<LocalOp>),
    Unitary(LocalOp),
    Observe(LocalOp),
    Seq(Vec<Node>),
    Measure { ops: Vec<LocalOp>, branches: Vec<Node> },
    While { m0: LocalOp, m1: LocalOp, body: Box<Node> },
}

impl Node {
    pub fn is_loop_free(&self) -> bool {
        match self {
            Node::Diverge | Node::While { .. } => false,
            Node::Seq(parts) => parts.iter().all(Node::is_loop_free),
            Node::Measure { branches, .. } => branches.iter().all(Node::is_loop_free),
            _ => true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Compiled {
    pub layout: Layout,
    pub root: Node,
}

impl Compiled {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }
}

pub fn compile(p: &Program) -> Result<Compiled> {
    crate::lang::check(p)?;
    let layout = p.layout();
    check_dim(layout.dim())?;
    let root = lower(p, &layout, &p.body)?;
    Ok(Compiled { layout, root })
}

/// Lowers a single statement in the register of `p`.
pub fn compile_stmt(p: &Program, s: &Stmt) -> Result<Node> {
    let layout = p.layout();
    check_dim(layout.dim())?;
    lower(p, &layout, s)
}

fn bind(layout: &Layout, vars: &[String], op: &Operator) -> Result<LocalOp> {
    let targets = layout.positions(vars)?;
    LocalOp::new(op.clone(), layout, &targets)
}

fn lower(p: &Program, layout: &Layout, s: &Stmt) -> Result<Node> {
    Ok(match s {
        Stmt::Skip => Node::Skip,
        Stmt::Diverge => Node::Diverge,
        Stmt::Init { var, .. } => {
            let decl = p.decl(var).ok_or_else(|| Error::UnknownVariable(var.clone()))?;
            let d = decl.local_dim();
            let zero = match decl.vtype {
                VarType::Bool => 0,
                VarType::Int { window } => window,
            };
            let target = layout.positions(&[var])?;
            let kraus = (0..d)
                .map(|n| LocalOp::new(Operator::ket_bra(zero, n, d), layout, &target))
                .collect::<Result<Vec<_>>>()?;
            Node::Reset(kraus)
        }
        Stmt::Unitary { vars, op, .. } => Node::Unitary(bind(layout, vars, &op.op)?),
        Stmt::Observe { vars, op, .. } => Node::Observe(bind(layout, vars, &op.op)?),
        Stmt::Seq(parts) => Node::Seq(parts.iter().map(|s| lower(p, layout, s)).collect::<Result<_>>()?),
        Stmt::Measure { vars, branches, .. } => Node::Measure {
            ops: branches.iter().map(|(m, _)| bind(layout, vars, &m.op)).collect::<Result<_>>()?,
            branches: branches.iter().map(|(_, b)| lower(p, layout, b)).collect::<Result<_>>()?,
        },
        Stmt::While { vars, m0, m1, body, .. } => Node::While {
            m0: bind(layout, vars, &m0.op)?,
            m1: bind(layout, vars, &m1.op)?,
            body: Box::new(lower(p, layout, body)?),
        },
    })
}
