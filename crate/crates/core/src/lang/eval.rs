//! Evaluation of operator expressions.

use std::collections::HashMap;

use super::ast::{BinOp, OpExpr};
use crate::error::{Error, Result};
use crate::linalg::{gates, Operator, C64};

/// Resolves a gate name to its matrix.
///
/// Known names: `H X Y Z S T CH CNOT CZ SWAP`, `R(k)`, `I` (2×2 identity),
/// `I<n>` (n×n identity) and `P<bits>` (basis projector, e.g. `P11`).
pub fn builtin_gate(name: &str, params: &[f64]) -> Result<Operator> {
    let arity = |n: usize| {
        if params.len() == n {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("gate `{name}` takes {n} argument(s), got {}", params.len())))
        }
    };
    let fixed = match name {
        "H" => Some(gates::hadamard()),
        "X" => Some(gates::pauli_x()),
        "Y" => Some(gates::pauli_y()),
        "Z" => Some(gates::pauli_z()),
        "S" => Some(gates::phase_s()),
        "T" => Some(gates::phase_t()),
        "CH" => Some(gates::controlled_hadamard()),
        "CNOT" | "CX" => Some(gates::cnot()),
        "CZ" => Some(gates::cz()),
        "SWAP" => Some(gates::swap()),
        "I" => Some(Operator::identity(2)),
        _ => None,
    };
    if let Some(op) = fixed {
        arity(0)?;
        return Ok(op);
    }
    if name == "R" {
        arity(1)?;
        return Ok(gates::rotation(params[0]));
    }
    if let Some(n) = name.strip_prefix('I').filter(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())) {
        arity(0)?;
        let dim: usize = n.parse().map_err(|_| Error::InvalidInput(format!("bad identity size in `{name}`")))?;
        if dim == 0 {
            return Err(Error::InvalidInput("identity of dimension 0".into()));
        }
        crate::linalg::check_dim(dim)?;
        return Ok(Operator::identity(dim));
    }
    if let Some(bits) = name.strip_prefix('P').filter(|s| !s.is_empty() && s.bytes().all(|b| b == b'0' || b == b'1')) {
        arity(0)?;
        if bits.len() >= usize::BITS as usize {
            return Err(Error::RegisterTooLarge { dim: usize::MAX, cap: crate::linalg::dim_cap() });
        }
        crate::linalg::check_dim(1usize << bits.len())?;
        let flags: Vec<bool> = bits.bytes().map(|b| b == b'1').collect();
        return Ok(gates::basis_projector(&flags));
    }
    Err(Error::InvalidInput(format!("unknown gate `{name}`")))
}

pub fn is_gate_name(name: &str) -> bool {
    let probe = match name {
        "R" => builtin_gate(name, &[0.0]),
        _ => builtin_gate(name, &[]),
    };
    !matches!(probe, Err(Error::InvalidInput(ref m)) if m.starts_with("unknown gate"))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Scalar(C64),
    Op(Operator),
}

impl Value {
    fn kind(&self) -> &'static str {
        match self {
            Value::Scalar(_) => "scalar",
            Value::Op(_) => "operator",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Binding {
    Value(Value),
    Family(Vec<Operator>),
}

pub type Env = HashMap<String, Binding>;

pub fn eval_expr(expr: &OpExpr, env: &Env) -> Result<Value> {
    let bad = |msg: String| Err(Error::InvalidInput(msg));
    match expr {
        OpExpr::Num(x) => Ok(Value::Scalar(C64::new(*x, 0.0))),
        OpExpr::Name { name, args } => {
            if let Some(b) = env.get(name) {
                if !args.is_empty() {
                    return bad(format!("`{name}` takes no arguments"));
                }
                return match b {
                    Binding::Value(v) => Ok(v.clone()),
                    Binding::Family(_) => bad(format!("`{name}` is a measurement family, not an operator")),
                };
            }
            let mut params = Vec::with_capacity(args.len());
            for a in args {
                match eval_expr(a, env)? {
                    Value::Scalar(z) if z.im == 0.0 => params.push(z.re),
                    v => return bad(format!("gate arguments must be real scalars, found {}", v.kind())),
                }
            }
            builtin_gate(name, &params).map(Value::Op)
        }
        OpExpr::Literal(rows) => {
            let rows: Vec<Vec<C64>> =
                rows.iter().map(|r| r.iter().map(|&(re, im)| C64::new(re, im)).collect()).collect();
            Operator::from_rows(&rows).map(Value::Op)
        }
        OpExpr::Neg(e) => match eval_expr(e, env)? {
            Value::Scalar(z) => Ok(Value::Scalar(-z)),
            Value::Op(a) => Ok(Value::Op(a.scale_real(-1.0))),
        },
        OpExpr::Sqrt(e) => match eval_expr(e, env)? {
            Value::Scalar(z) if z.im == 0.0 && z.re >= 0.0 => Ok(Value::Scalar(C64::new(z.re.sqrt(), 0.0))),
            v => bad(format!("sqrt needs a non-negative real scalar, found {}", v.kind())),
        },
        OpExpr::Binary(op, l, r) => {
            let (l, r) = (eval_expr(l, env)?, eval_expr(r, env)?);
            binary(*op, l, r)
        }
    }
}

fn binary(op: BinOp, l: Value, r: Value) -> Result<Value> {
    use Value::{Op, Scalar};
    let mismatch = |l: &Value, r: &Value| {
        Err(Error::InvalidInput(format!("cannot apply `{}` to {} and {}", op.symbol(), l.kind(), r.kind())))
    };
    match (op, &l, &r) {
        (BinOp::Add, Scalar(a), Scalar(b)) => Ok(Scalar(a + b)),
        (BinOp::Sub, Scalar(a), Scalar(b)) => Ok(Scalar(a - b)),
        (BinOp::Mul, Scalar(a), Scalar(b)) => Ok(Scalar(a * b)),
        (BinOp::Add, Op(a), Op(b)) => a.checked_add(b).map(Op),
        (BinOp::Sub, Op(a), Op(b)) => a.checked_sub(b).map(Op),
        (BinOp::Mul, Op(a), Op(b)) => a.checked_mul(b).map(Op),
        (BinOp::Mul, Scalar(s), Op(a)) | (BinOp::Mul, Op(a), Scalar(s)) => Ok(Op(a.scale(*s))),
        (BinOp::Kron, Op(a), Op(b)) => a.kron(b).map(Op),
        (BinOp::Div, _, Scalar(s)) => {
            if s.norm() <= crate::linalg::EPS_ZERO {
                return Err(Error::DivisionByNearZero(s.norm()));
            }
            match l {
                Scalar(a) => Ok(Scalar(a / s)),
                Op(a) => Ok(Op(a.scale(s.inv()))),
            }
        }
        _ => mismatch(&l, &r),
    }
}
