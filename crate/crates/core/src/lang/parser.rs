use std::collections::HashSet;

use super::ast::*;
use super::eval::{eval_expr, is_gate_name, Binding, Env, Value};
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::linalg::Operator;

const KEYWORDS: &[&str] = &[
    "bool", "int", "let", "skip", "diverge", "observe", "measure", "while", "do", "if", "then", "else",
    "sqrt", "kron",
];

type PResult<T> = Result<T, ParseError>;

/// Parses source into an AST without checking statement invariants.
pub fn parse_unchecked(src: &str) -> PResult<Program> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, i: 0, vars: HashSet::new(), env: Env::new(), families: Default::default() };
    p.program()
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    vars: HashSet<String>,
    env: Env,
    families: std::collections::HashMap<String, Vec<OpExpr>>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(ParseError::new(self.pos(), msg))
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.error(format!("expected {wanted}, found {}", self.peek()))
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if *self.peek() == t {
            self.advance();
            Ok(())
        } else {
            self.unexpected(&t.to_string())
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.at_keyword(kw) {
            self.advance();
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => self.unexpected("an identifier"),
        }
    }

    fn is_var_at(&self, k: usize) -> bool {
        matches!(self.peek_at(k), Tok::Ident(s) if self.vars.contains(s))
    }

    fn program(&mut self) -> PResult<Program> {
        let mut decls = Vec::new();
        let mut lets = Vec::new();
        loop {
            if self.at_keyword("bool") || self.at_keyword("int") {
                decls.extend(self.decl()?);
            } else if self.at_keyword("let") {
                lets.push(self.let_def()?);
            } else {
                break;
            }
        }
        let body = if *self.peek() == Tok::Eof { Stmt::Skip } else { self.stmt_list(&Tok::Eof)? };
        self.expect(Tok::Eof)?;
        Ok(Program { decls, lets, body })
    }

    fn check_new_name(&self, name: &str, pos: Pos) -> PResult<()> {
        if KEYWORDS.contains(&name) {
            return Err(ParseError::new(pos, format!("`{name}` is a keyword")));
        }
        if is_gate_name(name) {
            return Err(ParseError::new(pos, format!("`{name}` is a built-in gate name")));
        }
        if self.vars.contains(name) || self.env.contains_key(name) {
            return Err(ParseError::new(pos, format!("`{name}` is already defined")));
        }
        Ok(())
    }

    fn decl(&mut self) -> PResult<Vec<VarDecl>> {
        let is_int = self.at_keyword("int");
        self.advance();
        let mut out = Vec::new();
        loop {
            let pos = self.pos();
            let name = self.ident()?;
            self.check_new_name(&name, pos)?;
            let vtype = if is_int {
                let mut window = DEFAULT_INT_WINDOW;
                if *self.peek() == Tok::LBracket {
                    self.advance();
                    window = match self.advance() {
                        Tok::Num(x) if x >= 1.0 && x.fract() == 0.0 && x < 1e6 => x as usize,
                        _ => return self.error("int window must be a positive integer"),
                    };
                    self.expect(Tok::RBracket)?;
                }
                VarType::Int { window }
            } else {
                VarType::Bool
            };
            self.vars.insert(name.clone());
            out.push(VarDecl { name, vtype, pos });
            if *self.peek() == Tok::Comma {
                self.advance();
            } else {
                break;
            }
        }
        self.expect(Tok::Semi)?;
        Ok(out)
    }

    fn let_def(&mut self) -> PResult<LetDef> {
        self.advance();
        let pos = self.pos();
        let name = self.ident()?;
        self.check_new_name(&name, pos)?;
        self.expect(Tok::Eq)?;
        let value = if *self.peek() == Tok::LBrace {
            let (exprs, ops) = self.family_literal()?;
            self.env.insert(name.clone(), Binding::Family(ops));
            self.families.insert(name.clone(), exprs.clone());
            LetValue::Family(exprs)
        } else {
            let epos = self.pos();
            let expr = self.expr()?;
            let v = eval_expr(&expr, &self.env).map_err(|e| ParseError::new(epos, e.to_string()))?;
            self.env.insert(name.clone(), Binding::Value(v));
            LetValue::Expr(expr)
        };
        self.expect(Tok::Semi)?;
        Ok(LetDef { name, value })
    }

    fn family_literal(&mut self) -> PResult<(Vec<OpExpr>, Vec<Operator>)> {
        self.expect(Tok::LBrace)?;
        let mut exprs = Vec::new();
        let mut ops = Vec::new();
        loop {
            let r = self.op_ref()?;
            exprs.push(r.expr);
            ops.push(r.op);
            if *self.peek() == Tok::Comma {
                self.advance();
            } else {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        Ok((exprs, ops))
    }

    fn stmt_list(&mut self, end: &Tok) -> PResult<Stmt> {
        let mut parts = vec![self.stmt()?];
        while *self.peek() == Tok::Semi {
            self.advance();
            if self.peek() == end {
                break;
            }
            parts.push(self.stmt()?);
        }
        Ok(Stmt::seq(parts))
    }

    fn block(&mut self) -> PResult<Stmt> {
        self.expect(Tok::LBrace)?;
        if *self.peek() == Tok::RBrace {
            self.advance();
            return Ok(Stmt::Skip);
        }
        let s = self.stmt_list(&Tok::RBrace)?;
        self.expect(Tok::RBrace)?;
        Ok(s)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        let Tok::Ident(word) = self.peek().clone() else {
            return self.unexpected("a statement");
        };
        match word.as_str() {
            "skip" => {
                self.advance();
                Ok(Stmt::Skip)
            }
            "diverge" => {
                self.advance();
                Ok(Stmt::Diverge)
            }
            "observe" => {
                self.advance();
                self.expect(Tok::LParen)?;
                let vars = self.observe_register()?;
                self.expect(Tok::Comma)?;
                let op = self.op_ref()?;
                self.expect(Tok::RParen)?;
                Ok(Stmt::Observe { vars, op, pos })
            }
            "measure" => self.measure(pos),
            "while" => {
                self.advance();
                let (m0, m1, family, vars) = self.guard()?;
                self.expect_keyword("do")?;
                let body = self.block()?;
                Ok(Stmt::While { vars, m0, m1, family, body: Box::new(body), pos })
            }
            "if" => {
                self.advance();
                let (m0, m1, _, vars) = self.guard()?;
                self.expect_keyword("then")?;
                let s1 = self.block()?;
                self.expect_keyword("else")?;
                let s0 = self.block()?;
                Ok(Stmt::Measure { vars, branches: vec![(m0, s0), (m1, s1)], pos })
            }
            _ => self.assignment(pos),
        }
    }

    fn assignment(&mut self, pos: Pos) -> PResult<Stmt> {
        let lhs = self.register(|t| *t == Tok::Assign)?;
        if lhs.is_empty() {
            return self.unexpected("a statement");
        }
        self.expect(Tok::Assign)?;
        if matches!(self.peek(), Tok::Num(x) if *x == 0.0) && self.at_stmt_end(1) {
            self.advance();
            let inits = lhs.into_iter().map(|var| Stmt::Init { var, pos }).collect();
            return Ok(Stmt::seq(inits));
        }
        let op = self.op_ref()?;
        if self.at_stmt_end(0) {
            return Err(ParseError::new(
                pos,
                format!(
                    "unitary assignment needs the register on the right-hand side too: write `{0} := ... {0}`",
                    lhs.join(" ")
                ),
            ));
        }
        let rpos = self.pos();
        let rhs = self.register(|_| false)?;
        if rhs != lhs {
            return Err(ParseError::new(
                rpos,
                format!("right-hand register `{}` must match `{}`", rhs.join(" "), lhs.join(" ")),
            ));
        }
        Ok(Stmt::Unitary { vars: lhs, op, pos })
    }

    fn at_stmt_end(&self, k: usize) -> bool {
        matches!(self.peek_at(k), Tok::Semi | Tok::RBrace | Tok::Eof)
    }

    /// Identifiers separated by whitespace or `⊗`, up to a token accepted by `stop`
    /// or the end of the statement.
    fn register(&mut self, stop: impl Fn(&Tok) -> bool) -> PResult<Vec<String>> {
        let mut vars = Vec::new();
        loop {
            if stop(self.peek()) || self.at_stmt_end(0) {
                break;
            }
            if !vars.is_empty() && *self.peek() == Tok::Kron {
                self.advance();
            }
            vars.push(self.ident()?);
        }
        Ok(vars)
    }

    fn observe_register(&mut self) -> PResult<Vec<String>> {
        let mut vars = vec![self.ident()?];
        loop {
            match self.peek() {
                Tok::Kron => {
                    self.advance();
                    vars.push(self.ident()?);
                }
                Tok::Comma if self.is_var_at(1) => {
                    self.advance();
                    vars.push(self.ident()?);
                }
                Tok::Ident(_) if self.is_var_at(0) => vars.push(self.ident()?),
                _ => break,
            }
        }
        Ok(vars)
    }

    fn bracket_register(&mut self) -> PResult<Vec<String>> {
        self.expect(Tok::LBracket)?;
        let vars = self.register(|t| *t == Tok::RBracket)?;
        if vars.is_empty() {
            return self.unexpected("a variable");
        }
        self.expect(Tok::RBracket)?;
        Ok(vars)
    }

    fn measure(&mut self, pos: Pos) -> PResult<Stmt> {
        self.advance();
        let vars = self.bracket_register()?;
        self.expect(Tok::LBrace)?;
        let mut branches = Vec::new();
        while *self.peek() != Tok::RBrace {
            let op = self.op_ref()?;
            self.expect(Tok::Arrow)?;
            let body = self.block()?;
            branches.push((op, body));
            if *self.peek() == Tok::Comma {
                self.advance();
            }
        }
        self.expect(Tok::RBrace)?;
        if branches.is_empty() {
            return Err(ParseError::new(pos, "measurement needs at least one branch"));
        }
        Ok(Stmt::Measure { vars, branches, pos })
    }

    /// `FAMILY[q̄] = 1` where FAMILY is a `let`-bound pair or `{M0, M1}`.
    fn guard(&mut self) -> PResult<(OpRef, OpRef, Option<String>, Vec<String>)> {
        let pos = self.pos();
        let (exprs, ops, name) = if *self.peek() == Tok::LBrace {
            let (e, o) = self.family_literal()?;
            (e, o, None)
        } else {
            let name = self.ident()?;
            match (self.families.get(&name), self.env.get(&name)) {
                (Some(e), Some(Binding::Family(o))) => (e.clone(), o.clone(), Some(name)),
                _ => return Err(ParseError::new(pos, format!("`{name}` is not a measurement family"))),
            }
        };
        if ops.len() != 2 {
            return Err(ParseError::new(pos, format!("a guard needs exactly two operators, found {}", ops.len())));
        }
        let vars = self.bracket_register()?;
        self.expect(Tok::Eq)?;
        match self.advance() {
            Tok::Num(x) if x == 1.0 => {}
            _ => return Err(ParseError::new(pos, "guard must compare with 1")),
        }
        let mut it = exprs.into_iter().zip(ops).map(|(e, o)| OpRef::new(e, o));
        Ok((it.next().unwrap(), it.next().unwrap(), name, vars))
    }

    fn op_ref(&mut self) -> PResult<OpRef> {
        let pos = self.pos();
        let expr = self.expr()?;
        match eval_expr(&expr, &self.env) {
            Ok(Value::Op(op)) => Ok(OpRef::new(expr, op)),
            Ok(Value::Scalar(_)) => Err(ParseError::new(pos, "expected an operator, found a scalar")),
            Err(e) => Err(ParseError::new(pos, e.to_string())),
        }
    }

    fn expr(&mut self) -> PResult<OpExpr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            lhs = OpExpr::binary(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> PResult<OpExpr> {
        let mut lhs = self.kron_factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            lhs = OpExpr::binary(op, lhs, self.kron_factor()?);
        }
    }

    fn kron_factor(&mut self) -> PResult<OpExpr> {
        let mut lhs = self.unary()?;
        // a `⊗` followed by a variable belongs to the register, not the expression
        while *self.peek() == Tok::Kron && !self.is_var_at(1) {
            self.advance();
            lhs = OpExpr::binary(BinOp::Kron, lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<OpExpr> {
        if *self.peek() == Tok::Minus {
            self.advance();
            if let Tok::Num(x) = *self.peek() {
                self.advance();
                return Ok(OpExpr::Num(-x));
            }
            return Ok(OpExpr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<OpExpr> {
        match self.peek().clone() {
            Tok::Num(x) => {
                self.advance();
                Ok(OpExpr::Num(x))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::LBracket => self.literal(),
            Tok::Ident(name) if name == "sqrt" => {
                self.advance();
                self.expect(Tok::LParen)?;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(OpExpr::Sqrt(Box::new(e)))
            }
            Tok::Ident(name) if name == "kron" => {
                self.advance();
                self.expect(Tok::LParen)?;
                let a = self.expr()?;
                self.expect(Tok::Comma)?;
                let b = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(OpExpr::binary(BinOp::Kron, a, b))
            }
            Tok::Ident(name) => {
                if self.vars.contains(&name) {
                    return self.error(format!("variable `{name}` used where an operator was expected"));
                }
                if KEYWORDS.contains(&name.as_str()) {
                    return self.unexpected("an operator");
                }
                self.advance();
                let mut args = Vec::new();
                if *self.peek() == Tok::LParen {
                    self.advance();
                    loop {
                        args.push(self.expr()?);
                        if *self.peek() == Tok::Comma {
                            self.advance();
                        } else {
                            break;
                        }
                    }
                    self.expect(Tok::RParen)?;
                }
                Ok(OpExpr::Name { name, args })
            }
            _ => self.unexpected("an operator expression"),
        }
    }

    fn signed_number(&mut self) -> PResult<f64> {
        let neg = *self.peek() == Tok::Minus;
        if neg {
            self.advance();
        }
        match *self.peek() {
            Tok::Num(x) => {
                self.advance();
                Ok(if neg { -x } else { x })
            }
            _ => self.unexpected("a number"),
        }
    }

    /// `[[a, b], [c, d]]` with real entries or `[re, im]` pairs.
    fn literal(&mut self) -> PResult<OpExpr> {
        self.expect(Tok::LBracket)?;
        let mut rows = Vec::new();
        loop {
            self.expect(Tok::LBracket)?;
            let mut row = Vec::new();
            loop {
                if *self.peek() == Tok::LBracket {
                    self.advance();
                    let re = self.signed_number()?;
                    self.expect(Tok::Comma)?;
                    let im = self.signed_number()?;
                    self.expect(Tok::RBracket)?;
                    row.push((re, im));
                } else {
                    row.push((self.signed_number()?, 0.0));
                }
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
            self.expect(Tok::RBracket)?;
            rows.push(row);
            if *self.peek() == Tok::Comma {
                self.advance();
            } else {
                break;
            }
        }
        self.expect(Tok::RBracket)?;
        Ok(OpExpr::Literal(rows))
    }
}
