//! Source rendering. `parse(pretty(p)) == p` for every program.

use std::fmt::Write as _;

use super::ast::*;

pub fn pretty(p: &Program) -> String {
    let mut out = String::new();
    for d in &p.decls {
        match d.vtype {
            VarType::Bool => writeln!(out, "bool {};", d.name),
            VarType::Int { window } => writeln!(out, "int {}[{}];", d.name, window),
        }
        .unwrap();
    }
    for l in &p.lets {
        match &l.value {
            LetValue::Expr(e) => writeln!(out, "let {} = {};", l.name, expr(e)),
            LetValue::Family(es) => writeln!(out, "let {} = {};", l.name, family(es.iter())),
        }
        .unwrap();
    }
    if !p.decls.is_empty() || !p.lets.is_empty() {
        out.push('\n');
    }
    stmt(&mut out, &p.body, 0);
    out.push('\n');
    out
}

pub fn pretty_stmt(s: &Stmt) -> String {
    let mut out = String::new();
    stmt(&mut out, s, 0);
    out
}

fn family<'a>(es: impl Iterator<Item = &'a OpExpr>) -> String {
    let parts: Vec<String> = es.map(expr).collect();
    format!("{{{}}}", parts.join(", "))
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn block(out: &mut String, s: &Stmt, level: usize) {
    out.push_str("{\n");
    stmt(out, s, level + 1);
    out.push('\n');
    indent(out, level);
    out.push('}');
}

fn stmt(out: &mut String, s: &Stmt, level: usize) {
    match s {
        Stmt::Seq(parts) => {
            for (i, part) in parts.iter().enumerate() {
                if i > 0 {
                    out.push_str(";\n");
                }
                stmt(out, part, level);
            }
            return;
        }
        _ => indent(out, level),
    }
    match s {
        Stmt::Skip => out.push_str("skip"),
        Stmt::Diverge => out.push_str("diverge"),
        Stmt::Init { var, .. } => write!(out, "{var} := 0").unwrap(),
        Stmt::Unitary { vars, op, .. } => {
            let r = vars.join(" ");
            write!(out, "{r} := {} {r}", expr(&op.expr)).unwrap();
        }
        Stmt::Observe { vars, op, .. } => {
            write!(out, "observe({}, {})", vars.join(" "), expr(&op.expr)).unwrap();
        }
        Stmt::Measure { vars, branches, .. } => {
            writeln!(out, "measure [{}] {{", vars.join(" ")).unwrap();
            for (op, body) in branches {
                indent(out, level + 1);
                write!(out, "{} => ", expr(&op.expr)).unwrap();
                block(out, body, level + 1);
                out.push('\n');
            }
            indent(out, level);
            out.push('}');
        }
        Stmt::While { vars, m0, m1, family: fam, body, .. } => {
            let guard = match fam {
                Some(name) => name.clone(),
                None => family([&m0.expr, &m1.expr].into_iter()),
            };
            write!(out, "while {guard}[{}] = 1 do ", vars.join(" ")).unwrap();
            block(out, body, level);
        }
        Stmt::Seq(_) => unreachable!(),
    }
}

const PREC_UNARY: u8 = 4;

pub fn expr(e: &OpExpr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

fn prec(e: &OpExpr) -> u8 {
    match e {
        OpExpr::Binary(op, ..) => op.precedence(),
        OpExpr::Num(x) if x.is_sign_negative() => PREC_UNARY,
        _ => u8::MAX,
    }
}

fn write_child(out: &mut String, e: &OpExpr, need_parens: bool) {
    if need_parens {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &OpExpr) {
    match e {
        OpExpr::Num(x) => write!(out, "{x:?}").unwrap(),
        OpExpr::Name { name, args } => {
            out.push_str(name);
            if !args.is_empty() {
                let parts: Vec<String> = args.iter().map(expr).collect();
                write!(out, "({})", parts.join(", ")).unwrap();
            }
        }
        OpExpr::Literal(rows) => {
            let rows: Vec<String> = rows
                .iter()
                .map(|r| {
                    let cells: Vec<String> = r.iter().map(|(re, im)| format!("[{re:?}, {im:?}]")).collect();
                    format!("[{}]", cells.join(", "))
                })
                .collect();
            write!(out, "[{}]", rows.join(", ")).unwrap();
        }
        OpExpr::Neg(inner) => {
            out.push_str("-(");
            write_expr(out, inner);
            out.push(')');
        }
        OpExpr::Sqrt(inner) => {
            out.push_str("sqrt(");
            write_expr(out, inner);
            out.push(')');
        }
        OpExpr::Binary(op, l, r) => {
            let p = op.precedence();
            write_child(out, l, prec(l) < p);
            write!(out, " {} ", op.symbol()).unwrap();
            write_child(out, r, prec(r) <= p);
        }
    }
}
