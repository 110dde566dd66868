use std::fmt;

use crate::linalg::{Factor, Layout, Operator};

/// Default truncation half-width for `int` registers: values `-8..=8`.
pub const DEFAULT_INT_WINDOW: usize = 8;

/// Source position. Positions never take part in AST equality, so a program
/// and its pretty-printed reparse compare equal.
#[derive(Clone, Copy, Debug, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Pos {
    fn eq(&self, _: &Pos) -> bool {
        true
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarType {
    Bool,
    /// Integer register truncated to `[-window, window]`.
    Int { window: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub vtype: VarType,
    pub pos: Pos,
}

impl VarDecl {
    pub fn bool(name: impl Into<String>) -> Self {
        VarDecl { name: name.into(), vtype: VarType::Bool, pos: Pos::default() }
    }

    pub fn int(name: impl Into<String>, window: usize) -> Self {
        VarDecl { name: name.into(), vtype: VarType::Int { window }, pos: Pos::default() }
    }

    pub fn local_dim(&self) -> usize {
        match self.vtype {
            VarType::Bool => 2,
            VarType::Int { window } => 2 * window + 1,
        }
    }

    /// Basis index of the value `0`.
    pub fn zero_index(&self) -> usize {
        match self.vtype {
            VarType::Bool => 0,
            VarType::Int { window } => window,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Kron,
}

impl BinOp {
    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Kron => 3,
        }
    }

    pub(crate) fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Kron => "⊗",
        }
    }
}

/// Operator expression as written in source.
#[derive(Clone, Debug, PartialEq)]
pub enum OpExpr {
    Num(f64),
    /// Gate name or `let`-bound name, with optional scalar arguments.
    Name { name: String, args: Vec<OpExpr> },
    /// Inline matrix as `(re, im)` rows.
    Literal(Vec<Vec<(f64, f64)>>),
    Binary(BinOp, Box<OpExpr>, Box<OpExpr>),
    Neg(Box<OpExpr>),
    Sqrt(Box<OpExpr>),
}

impl OpExpr {
    pub fn name(name: impl Into<String>) -> Self {
        OpExpr::Name { name: name.into(), args: Vec::new() }
    }

    pub fn literal(op: &Operator) -> Self {
        OpExpr::Literal(op.rows().into_iter().map(|r| r.into_iter().map(|z| (z.re, z.im)).collect()).collect())
    }

    pub fn binary(op: BinOp, l: OpExpr, r: OpExpr) -> Self {
        OpExpr::Binary(op, Box::new(l), Box::new(r))
    }
}

/// An operator expression together with its value.
#[derive(Clone, Debug, PartialEq)]
pub struct OpRef {
    pub expr: OpExpr,
    pub op: Operator,
}

impl OpRef {
    /// Wraps a concrete matrix, printed back as a literal.
    pub fn literal(op: Operator) -> Self {
        let op = anonymize(op);
        OpRef { expr: OpExpr::literal(&op), op }
    }

    pub(crate) fn new(expr: OpExpr, op: Operator) -> Self {
        OpRef { expr, op: anonymize(op) }
    }
}

fn anonymize(op: Operator) -> Operator {
    let dim = op.dim();
    op.with_layout(Layout::anonymous(dim)).expect("same dimension")
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Skip,
    /// The everywhere-divergent program.
    Diverge,
    Init { var: String, pos: Pos },
    Unitary { vars: Vec<String>, op: OpRef, pos: Pos },
    Observe { vars: Vec<String>, op: OpRef, pos: Pos },
    Seq(Vec<Stmt>),
    Measure { vars: Vec<String>, branches: Vec<(OpRef, Stmt)>, pos: Pos },
    While {
        vars: Vec<String>,
        m0: OpRef,
        m1: OpRef,
        /// `let`-bound family name, when the source used one.
        family: Option<String>,
        body: Box<Stmt>,
        pos: Pos,
    },
}

impl Stmt {
    pub fn init(var: impl Into<String>) -> Self {
        Stmt::Init { var: var.into(), pos: Pos::default() }
    }

    pub fn unitary(vars: &[&str], op: OpRef) -> Self {
        Stmt::Unitary { vars: owned(vars), op, pos: Pos::default() }
    }

    pub fn observe(vars: &[&str], op: OpRef) -> Self {
        Stmt::Observe { vars: owned(vars), op, pos: Pos::default() }
    }

    pub fn measure(vars: &[&str], branches: Vec<(OpRef, Stmt)>) -> Self {
        Stmt::Measure { vars: owned(vars), branches, pos: Pos::default() }
    }

    pub fn while_loop(vars: &[&str], m0: OpRef, m1: OpRef, body: Stmt) -> Self {
        Stmt::While { vars: owned(vars), m0, m1, family: None, body: Box::new(body), pos: Pos::default() }
    }

    /// `if M[q̄] = 1 then s1 else s0` as a two-branch measurement.
    pub fn if_then_else(vars: &[&str], m0: OpRef, m1: OpRef, s1: Stmt, s0: Stmt) -> Self {
        Stmt::measure(vars, vec![(m0, s0), (m1, s1)])
    }

    /// Sequential composition, flattening nested sequences.
    pub fn seq(parts: Vec<Stmt>) -> Self {
        let mut flat = Vec::new();
        for s in parts {
            match s {
                Stmt::Seq(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Stmt::Skip,
            1 => flat.pop().unwrap(),
            _ => Stmt::Seq(flat),
        }
    }

    pub fn contains_observe(&self) -> bool {
        self.any(&|s| matches!(s, Stmt::Observe { .. }))
    }

    pub fn contains_loop(&self) -> bool {
        self.any(&|s| matches!(s, Stmt::While { .. } | Stmt::Diverge))
    }

    fn any(&self, pred: &dyn Fn(&Stmt) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Stmt::Seq(parts) => parts.iter().any(|s| s.any(pred)),
            Stmt::Measure { branches, .. } => branches.iter().any(|(_, s)| s.any(pred)),
            Stmt::While { body, .. } => body.any(pred),
            _ => false,
        }
    }
}

fn owned(vars: &[&str]) -> Vec<String> {
    vars.iter().map(|v| v.to_string()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum LetValue {
    Expr(OpExpr),
    Family(Vec<OpExpr>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LetDef {
    pub name: String,
    pub value: LetValue,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub decls: Vec<VarDecl>,
    pub lets: Vec<LetDef>,
    pub body: Stmt,
}

impl Program {
    pub fn new(decls: Vec<VarDecl>, body: Stmt) -> Self {
        Program { decls, lets: Vec::new(), body }
    }

    /// Register layout in declaration order; the first declared variable is
    /// the most significant tensor factor.
    pub fn layout(&self) -> Layout {
        Layout::new(self.decls.iter().map(|d| Factor::new(d.name.clone(), d.local_dim())).collect())
    }

    pub fn total_dim(&self) -> usize {
        self.decls.iter().map(VarDecl::local_dim).product()
    }

    pub fn decl(&self, name: &str) -> Option<&VarDecl> {
        self.decls.iter().find(|d| d.name == name)
    }

    /// Copy of this program with a different body.
    pub fn with_body(&self, body: Stmt) -> Program {
        Program { decls: self.decls.clone(), lets: self.lets.clone(), body }
    }
}
