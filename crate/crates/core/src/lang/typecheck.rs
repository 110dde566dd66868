use std::collections::HashSet;

use super::ast::*;
use super::Diagnostic;
use crate::linalg::{dim_cap, Operator};

/// Tolerance for the unitarity, projector and completeness side conditions.
pub const STRUCT_TOL: f64 = 1e-9;

/// Checks every side condition of the language; an empty result means the
/// program is well-typed.
pub fn typecheck(p: &Program) -> Vec<Diagnostic> {
    let mut cx = Checker { prog: p, diags: Vec::new() };
    cx.decls();
    if cx.diags.is_empty() {
        cx.stmt(&p.body);
    }
    cx.diags
}

struct Checker<'a> {
    prog: &'a Program,
    diags: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn report(&mut self, pos: Pos, message: String) {
        self.diags.push(Diagnostic { pos, message });
    }

    fn decls(&mut self) {
        let mut seen = HashSet::new();
        let mut total: Option<usize> = Some(1);
        for d in &self.prog.decls {
            if !seen.insert(d.name.as_str()) {
                self.report(d.pos, format!("variable `{}` declared twice", d.name));
            }
            if let VarType::Int { window } = d.vtype {
                if window == 0 {
                    self.report(d.pos, format!("int `{}` needs a window of at least 1", d.name));
                }
            }
            total = total.and_then(|t| t.checked_mul(d.local_dim()));
        }
        let cap = dim_cap();
        match total {
            Some(t) if t <= cap => {}
            _ => self.report(
                Pos::default(),
                format!("register dimension {} exceeds the configured cap of {cap}", total.map_or("overflow".into(), |t| t.to_string())),
            ),
        }
    }

    /// Checks the register and returns its dimension.
    fn register(&mut self, vars: &[String], pos: Pos) -> Option<usize> {
        let mut dim = 1usize;
        let mut seen = HashSet::new();
        let mut ok = true;
        for v in vars {
            match self.prog.decl(v) {
                Some(d) => dim *= d.local_dim(),
                None => {
                    self.report(pos, format!("unknown variable `{v}`"));
                    ok = false;
                }
            }
            if !seen.insert(v.as_str()) {
                self.report(pos, format!("variable `{v}` appears twice in one register"));
                ok = false;
            }
        }
        if vars.is_empty() {
            self.report(pos, "empty register".into());
            ok = false;
        }
        ok.then_some(dim)
    }

    fn dims_match(&mut self, op: &Operator, dim: usize, what: &str, pos: Pos) -> bool {
        if op.dim() != dim {
            self.report(pos, format!("{what} is {0}×{0} but the register has dimension {dim}", op.dim()));
            return false;
        }
        true
    }

    fn completeness(&mut self, ops: &[&Operator], dim: usize, what: &str, pos: Pos) {
        let mut sum = Operator::zeros(dim);
        for m in ops {
            sum.add_assign(&(&m.adjoint() * m));
        }
        let dev = sum.max_abs_diff(&Operator::identity(dim));
        if dev > STRUCT_TOL {
            self.report(pos, format!("{what} is not complete: Σ M†M deviates from I by {dev:.3e}"));
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Skip | Stmt::Diverge => {}
            Stmt::Init { var, pos } => {
                self.register(std::slice::from_ref(var), *pos);
            }
            Stmt::Unitary { vars, op, pos } => {
                if let Some(dim) = self.register(vars, *pos) {
                    if self.dims_match(&op.op, dim, "unitary", *pos) && !op.op.is_unitary(STRUCT_TOL) {
                        self.report(*pos, "operator is not unitary".into());
                    }
                }
            }
            Stmt::Observe { vars, op, pos } => {
                if let Some(dim) = self.register(vars, *pos) {
                    if self.dims_match(&op.op, dim, "observation", *pos) && !op.op.is_projector(STRUCT_TOL) {
                        self.report(*pos, "observation is not a projector (need O² = O = O†)".into());
                    }
                }
            }
            Stmt::Seq(parts) => parts.iter().for_each(|s| self.stmt(s)),
            Stmt::Measure { vars, branches, pos } => {
                if branches.is_empty() {
                    self.report(*pos, "measurement has no branches".into());
                }
                if let Some(dim) = self.register(vars, *pos) {
                    let mut ok = true;
                    for (m, _) in branches {
                        ok &= self.dims_match(&m.op, dim, "measurement operator", *pos);
                    }
                    if ok && !branches.is_empty() {
                        let ops: Vec<&Operator> = branches.iter().map(|(m, _)| &m.op).collect();
                        self.completeness(&ops, dim, "measurement", *pos);
                    }
                }
                for (_, b) in branches {
                    self.stmt(b);
                }
            }
            Stmt::While { vars, m0, m1, body, pos, .. } => {
                if let Some(dim) = self.register(vars, *pos) {
                    let ok0 = self.dims_match(&m0.op, dim, "loop guard M0", *pos);
                    let ok1 = self.dims_match(&m1.op, dim, "loop guard M1", *pos);
                    if ok0 && ok1 {
                        self.completeness(&[&m0.op, &m1.op], dim, "loop guard", *pos);
                    }
                }
                self.stmt(body);
            }
        }
    }
}
