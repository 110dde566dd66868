//! The quantum while-language: syntax, concrete DSL and static checks.
//!
//! ```text
//! program   := header* stmts?
//! header    := ("bool" | "int") decl ("," decl)* ";" | "let" NAME "=" (expr | family) ";"
//! decl      := NAME ("[" N "]")?                 (int window, default 8)
//! stmts     := stmt (";" stmt)* ";"?
//! stmt      := "skip" | "diverge"
//!            | reg ":=" "0"                       (reset each variable)
//!            | reg ":=" expr reg                  (unitary; both registers equal)
//!            | "observe" "(" reg "," expr ")"
//!            | "measure" "[" reg "]" "{" (expr "=>" block ","?)+ "}"
//!            | "while" guard "do" block
//!            | "if" guard "then" block "else" block
//! guard     := (NAME | family) "[" reg "]" "=" "1"
//! family    := "{" expr ("," expr)* "}"
//! block     := "{" stmts? "}"
//! reg       := NAME (("⊗" | " ") NAME)*
//! expr      := term (("+" | "-") term)*
//! term      := kfactor (("*" | "/") kfactor)*
//! kfactor   := unary ("⊗" unary)*
//! unary     := "-" unary | primary
//! primary   := NUMBER | NAME ("(" expr ("," expr)* ")")? | "(" expr ")"
//!            | "sqrt" "(" expr ")" | "kron" "(" expr "," expr ")" | matrix
//! matrix    := "[" row ("," row)* "]"     row := "[" cell ("," cell)* "]"
//! cell      := NUMBER | "[" NUMBER "," NUMBER "]"
//! ```

mod ast;
mod eval;
mod lexer;
mod parser;
mod pretty;
mod typecheck;

use std::fmt;

pub use ast::*;
pub use eval::{builtin_gate, eval_expr, Binding, Env, Value};
pub use parser::parse_unchecked;
pub use pretty::{expr as pretty_expr, pretty, pretty_stmt};
pub use typecheck::{typecheck, STRUCT_TOL};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("syntax error at line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(pos: Pos, message: impl Into<String>) -> Self {
        ParseError { line: pos.line, col: pos.col, message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pos.line == 0 {
            f.write_str(&self.message)
        } else {
            write!(f, "line {}, column {}: {}", self.pos.line, self.pos.col, self.message)
        }
    }
}

/// Parses and typechecks a program.
pub fn parse(src: &str) -> Result<Program> {
    let prog = parse_unchecked(src)?;
    check(&prog)?;
    Ok(prog)
}

/// Runs [`typecheck`] and turns diagnostics into an error.
pub fn check(prog: &Program) -> Result<()> {
    let diags = typecheck(prog);
    if diags.is_empty() {
        Ok(())
    } else {
        Err(Error::Type(diags))
    }
}
