//! Recursive-descent parser with precedence climbing for binary operators.
//!
//! Derived forms are expanded while parsing: `elif` chains and missing `else`
//! branches become nested `If`s, `for` loops become `while` loops, and
//! pattern bindings become value definitions over a fresh scrutinee name.
//! `do … while … od` is kept as a node of its own.

use crate::ast::{annotate_program, BinOp, Definition, Expr, ExprKind, Pattern, Program, SourceLoc, WellFormednessError};
use crate::lexer::{tokenize, LexError, Tok, Token};
use lamina_runtime::{FIX_MAX, FIX_MIN};
use std::collections::HashSet;
use std::sync::Arc;
use thiserror::Error;

/// Names resolved by the compiler itself rather than by definitions.
pub const BUILTINS: [&str; 2] = ["length", "printf"];

/// Prefix of names drawn from [`FreshNames`]. User identifiers cannot start
/// with `_`.
pub const FRESH_PREFIX: &str = "_case_";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("lexical error at {0}")]
    Lex(#[from] LexError),
    #[error("syntax error at {loc}: {message}")]
    Parse { loc: SourceLoc, message: String },
    #[error("{0}")]
    WellFormedness(#[from] WellFormednessError),
}

impl FrontendError {
    pub fn loc(&self) -> SourceLoc {
        match self {
            FrontendError::Lex(e) => e.loc,
            FrontendError::Parse { loc, .. } => *loc,
            FrontendError::WellFormedness(e) => e.loc,
        }
    }
}

type PResult<T> = Result<T, FrontendError>;

fn error<T>(loc: SourceLoc, message: impl Into<String>) -> PResult<T> {
    Err(FrontendError::Parse { loc, message: message.into() })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept identifiers with the reserved `_` prefix, so that printed
    /// desugared programs can be read back.
    pub allow_reserved: bool,
}

#[derive(Debug, Default)]
pub struct FreshNames {
    counter: usize,
}

impl FreshNames {
    pub fn next(&mut self) -> String {
        let name = format!("{FRESH_PREFIX}{}", self.counter);
        self.counter += 1;
        name
    }
}

/// Parses, desugars and kind-annotates a whole program.
pub fn parse_program(src: &str) -> PResult<Program> {
    parse_program_with(src, ParseOptions::default())
}

pub fn parse_program_with(src: &str, opts: ParseOptions) -> PResult<Program> {
    let raw = parse_raw(src, opts)?;
    Ok(annotate_program(&raw)?)
}

/// Parses and desugars without kind annotation.
pub fn parse_raw(src: &str, opts: ParseOptions) -> PResult<Expr> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0, fresh: FreshNames::default(), opts };
    let e = p.scope_expr()?;
    if p.peek() != &Tok::Eof {
        return p.unexpected("end of input");
    }
    Ok(e)
}

/// `if c1 then s1 elif c2 then s2 … else s fi` as nested conditionals.
pub fn desugar_if_chain(cond: Expr, then: Expr, elifs: Vec<(Expr, Expr)>, otherwise: Option<Expr>, loc: SourceLoc) -> Expr {
    let mut tail = otherwise.unwrap_or_else(|| Expr::new(ExprKind::Skip, loc));
    for (c, s) in elifs.into_iter().rev() {
        let l = c.loc;
        tail = Expr::new(ExprKind::If(Box::new(c), Box::new(s), Box::new(tail)), l);
    }
    Expr::new(ExprKind::If(Box::new(cond), Box::new(then), Box::new(tail)), loc)
}

/// `for s1, c, s2 do s3 od` as `s1; while c do s3; s2 od`.
pub fn desugar_for(init: Expr, cond: Expr, step: Expr, body: Expr, loc: SourceLoc) -> Expr {
    let body_loc = body.loc;
    let body = Expr::new(ExprKind::Seq(Box::new(body), Box::new(step)), body_loc);
    let looped = Expr::new(ExprKind::While(Box::new(cond), Box::new(body)), loc);
    Expr::new(ExprKind::Seq(Box::new(init), Box::new(looped)), loc)
}

/// Binds the scrutinee to a fresh value name and replaces every binding in
/// the patterns by a wildcard plus a value definition over an index path.
pub fn desugar_case(
    scrutinee: Expr,
    branches: Vec<(Pattern, Expr, SourceLoc)>,
    fresh: &mut FreshNames,
    loc: SourceLoc,
) -> PResult<Expr> {
    let (name, binder) = match &scrutinee.kind {
        ExprKind::Var(x) if x.starts_with(FRESH_PREFIX) => (x.clone(), None),
        _ => {
            let name = fresh.next();
            let def = Definition::Val { name: name.clone(), init: scrutinee, loc };
            (name, Some(def))
        }
    };
    let mut out = Vec::with_capacity(branches.len());
    for (pattern, body, ploc) in branches {
        let mut binds = Vec::new();
        let pattern = strip_binds(pattern, &mut Vec::new(), &mut binds);
        let mut seen = HashSet::new();
        for (b, _) in &binds {
            if !seen.insert(b.clone()) {
                return error(ploc, format!("`{b}` is bound twice in one pattern"));
            }
        }
        let body = if binds.is_empty() {
            body
        } else {
            let defs = binds
                .into_iter()
                .map(|(b, path)| {
                    let mut access = Expr::new(ExprKind::Var(name.clone()), ploc);
                    for i in path {
                        let index = Expr::boxed(ExprKind::Const(i as i64), ploc);
                        access = Expr::new(ExprKind::Elem(Box::new(access), index), ploc);
                    }
                    Definition::Val { name: b, init: access, loc: ploc }
                })
                .collect();
            let body_loc = body.loc;
            Expr::new(ExprKind::Scope(defs, Box::new(body)), body_loc)
        };
        out.push((pattern, body));
    }
    let case = Expr::new(ExprKind::Case(Expr::boxed(ExprKind::Var(name), loc), out), loc);
    Ok(match binder {
        Some(def) => Expr::new(ExprKind::Scope(vec![def], Box::new(case)), loc),
        None => case,
    })
}

fn strip_binds(p: Pattern, path: &mut Vec<usize>, binds: &mut Vec<(String, Vec<usize>)>) -> Pattern {
    let sub = |ps: Vec<Pattern>, path: &mut Vec<usize>, binds: &mut Vec<(String, Vec<usize>)>| {
        ps.into_iter()
            .enumerate()
            .map(|(i, p)| {
                path.push(i);
                let p = strip_binds(p, path, binds);
                path.pop();
                p
            })
            .collect()
    };
    match p {
        Pattern::Bind(x) => {
            binds.push((x, path.clone()));
            Pattern::Wildcard
        }
        Pattern::Sexp(tag, ps) => Pattern::Sexp(tag, sub(ps, path, binds)),
        Pattern::Array(ps) => Pattern::Array(sub(ps, path, binds)),
        p => p,
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    fresh: FreshNames,
    opts: ParseOptions,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn loc(&self) -> SourceLoc {
        self.toks[self.pos].loc
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, expected: &str) -> PResult<T> {
        error(self.loc(), format!("expected {expected}, found {}", self.peek()))
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(t) if *t == s) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.unexpected(&format!("`{s}`"))
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if matches!(self.peek(), Tok::Keyword(t) if *t == k) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.unexpected(&format!("`{k}`"))
        }
    }

    fn check_name(&self, name: &str, loc: SourceLoc) -> PResult<()> {
        if name == "_" {
            return error(loc, "`_` is only allowed in patterns");
        }
        if name.starts_with('_') && !self.opts.allow_reserved {
            return error(loc, format!("identifier `{name}` uses the reserved `_` prefix"));
        }
        Ok(())
    }

    fn binder(&mut self) -> PResult<(String, SourceLoc)> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Ident(x) => {
                self.check_name(&x, loc)?;
                if BUILTINS.contains(&x.as_str()) {
                    return error(loc, format!("`{x}` is a builtin and cannot be redefined"));
                }
                self.advance();
                Ok((x, loc))
            }
            _ => self.unexpected("a name"),
        }
    }

    fn params(&mut self) -> PResult<Vec<String>> {
        self.expect_sym("(")?;
        let mut params: Vec<String> = Vec::new();
        if !self.eat_sym(")") {
            loop {
                let (name, loc) = self.binder()?;
                if params.contains(&name) {
                    return error(loc, format!("parameter `{name}` is declared twice"));
                }
                params.push(name);
                if self.eat_sym(")") {
                    break;
                }
                self.expect_sym(",")?;
            }
        }
        Ok(params)
    }

    fn function_body(&mut self) -> PResult<Expr> {
        self.expect_sym("{")?;
        let body = self.scope_expr()?;
        self.expect_sym("}")?;
        Ok(body)
    }

    fn starts_expr(&self) -> bool {
        match self.peek() {
            Tok::Int(_) | Tok::Str(_) | Tok::Chr(_) | Tok::Ident(_) | Tok::UIdent(_) => true,
            Tok::Sym(s) => matches!(*s, "(" | "[" | "-"),
            Tok::Keyword(k) => {
                matches!(*k, "skip" | "if" | "while" | "do" | "for" | "case" | "fun" | "read" | "write")
            }
            Tok::Eof => false,
        }
    }

    /// Definitions followed by an expression sequence.
    fn scope_expr(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        let mut defs = Vec::new();
        loop {
            match self.peek() {
                Tok::Keyword(k @ ("var" | "val")) => {
                    let mutable = *k == "var";
                    self.advance();
                    loop {
                        let (name, nloc) = self.binder()?;
                        let init = if self.eat_sym("=") { Some(self.assign()?) } else { None };
                        defs.push(match (mutable, init) {
                            (true, init) => Definition::Var { name, init, loc: nloc },
                            (false, Some(init)) => Definition::Val { name, init, loc: nloc },
                            (false, None) => return self.unexpected("`=`"),
                        });
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                    self.expect_sym(";")?;
                }
                Tok::Keyword("fun") if matches!(self.peek_at(1), Tok::Ident(_)) => {
                    self.advance();
                    let (name, nloc) = self.binder()?;
                    let params = self.params()?;
                    let body = self.function_body()?;
                    defs.push(Definition::Fun { name, params, body: Arc::new(body), loc: nloc });
                }
                _ => break,
            }
        }
        let mut names = HashSet::new();
        for d in &defs {
            if !names.insert(d.name()) {
                return error(d.loc(), format!("`{}` is defined twice in one scope", d.name()));
            }
        }
        if defs.is_empty() {
            return self.seq();
        }
        let body = if self.starts_expr() { self.seq()? } else { Expr::new(ExprKind::Skip, self.loc()) };
        Ok(Expr::new(ExprKind::Scope(defs, Box::new(body)), loc))
    }

    fn seq(&mut self) -> PResult<Expr> {
        let first = self.assign()?;
        if self.eat_sym(";") && self.starts_expr() {
            let loc = first.loc;
            let rest = self.seq()?;
            return Ok(Expr::new(ExprKind::Seq(Box::new(first), Box::new(rest)), loc));
        }
        Ok(first)
    }

    fn assign(&mut self) -> PResult<Expr> {
        let lhs = self.binary(0)?;
        if self.eat_sym(":=") {
            let rhs = self.assign()?;
            let loc = lhs.loc;
            return Ok(Expr::new(ExprKind::Assign(Box::new(lhs), Box::new(rhs)), loc));
        }
        Ok(lhs)
    }

    /// Operators at `level` and tighter. Levels: `!!`, `&&`, comparisons,
    /// additive, multiplicative.
    fn binary(&mut self, level: usize) -> PResult<Expr> {
        const LEVELS: [&[BinOp]; 5] = [
            &[BinOp::Or],
            &[BinOp::And],
            &[BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge],
            &[BinOp::Add, BinOp::Sub],
            &[BinOp::Mul, BinOp::Div, BinOp::Mod],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let op = match self.peek() {
                Tok::Sym(s) => LEVELS[level].iter().copied().find(|op| op.symbol() == *s),
                _ => None,
            };
            let Some(op) = op else { return Ok(lhs) };
            let op_loc = self.loc();
            self.advance();
            let rhs = self.binary(level + 1)?;
            let loc = lhs.loc;
            lhs = Expr::new(ExprKind::Binop(op, Box::new(lhs), Box::new(rhs)), loc);
            if op.is_comparison() {
                if let Tok::Sym(s) = self.peek() {
                    if BinOp::from_symbol(s).is_some_and(BinOp::is_comparison) {
                        return error(op_loc, "comparison operators do not associate; add parentheses");
                    }
                }
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        if self.eat_sym("-") {
            if let Tok::Int(n) = *self.peek() {
                self.advance();
                if n as i128 > -(FIX_MIN as i128) {
                    return error(loc, format!("integer literal -{n} is out of range"));
                }
                let lit = Expr::new(ExprKind::Const((-(n as i128)) as i64), loc);
                return self.postfix(lit);
            }
            let operand = self.unary()?;
            let zero = Expr::boxed(ExprKind::Const(0), loc);
            return Ok(Expr::new(ExprKind::Binop(BinOp::Sub, zero, Box::new(operand)), loc));
        }
        let e = self.primary()?;
        self.postfix(e)
    }

    fn postfix(&mut self, mut e: Expr) -> PResult<Expr> {
        loop {
            let loc = e.loc;
            if self.eat_sym("(") {
                let args = self.list(")")?;
                e = Expr::new(ExprKind::Call(Box::new(e), args), loc);
            } else if self.eat_sym("[") {
                let index = self.assign()?;
                self.expect_sym("]")?;
                e = Expr::new(ExprKind::Elem(Box::new(e), Box::new(index)), loc);
            } else {
                return Ok(e);
            }
        }
    }

    /// Comma-separated expressions up to the closing symbol, which is consumed.
    fn list(&mut self, close: &str) -> PResult<Vec<Expr>> {
        let mut items = Vec::new();
        if self.eat_sym(close) {
            return Ok(items);
        }
        loop {
            items.push(self.assign()?);
            if self.eat_sym(close) {
                return Ok(items);
            }
            self.expect_sym(",")?;
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        let kind = match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                if n > FIX_MAX as u64 {
                    return error(loc, format!("integer literal {n} is out of range"));
                }
                ExprKind::Const(n as i64)
            }
            Tok::Str(s) => {
                self.advance();
                ExprKind::Str(s)
            }
            Tok::Chr(c) => {
                self.advance();
                ExprKind::Chr(c)
            }
            Tok::Ident(x) => {
                self.check_name(&x, loc)?;
                self.advance();
                ExprKind::Var(x)
            }
            Tok::UIdent(tag) => {
                self.advance();
                let args = if self.eat_sym("(") { self.list(")")? } else { Vec::new() };
                ExprKind::Sexp(tag, args)
            }
            Tok::Sym("[") => {
                self.advance();
                ExprKind::ArrayLit(self.list("]")?)
            }
            Tok::Sym("(") => {
                self.advance();
                let e = self.scope_expr()?;
                self.expect_sym(")")?;
                return Ok(e);
            }
            Tok::Keyword("skip") => {
                self.advance();
                ExprKind::Skip
            }
            Tok::Keyword("if") => {
                self.advance();
                return self.conditional(loc);
            }
            Tok::Keyword("while") => {
                self.advance();
                let cond = self.scope_expr()?;
                self.expect_kw("do")?;
                let body = self.scope_expr()?;
                self.expect_kw("od")?;
                ExprKind::While(Box::new(cond), Box::new(body))
            }
            Tok::Keyword("do") => {
                self.advance();
                let body = self.scope_expr()?;
                self.expect_kw("while")?;
                let cond = self.scope_expr()?;
                self.expect_kw("od")?;
                ExprKind::DoWhile(Box::new(body), Box::new(cond))
            }
            Tok::Keyword("for") => {
                self.advance();
                let init = self.assign()?;
                self.expect_sym(",")?;
                let cond = self.assign()?;
                self.expect_sym(",")?;
                let step = self.assign()?;
                self.expect_kw("do")?;
                let body = self.scope_expr()?;
                self.expect_kw("od")?;
                return Ok(desugar_for(init, cond, step, body, loc));
            }
            Tok::Keyword("case") => {
                self.advance();
                return self.case(loc);
            }
            Tok::Keyword("fun") => {
                self.advance();
                let params = self.params()?;
                let body = self.function_body()?;
                ExprKind::Lambda(params, Arc::new(body))
            }
            Tok::Keyword("read") => {
                self.advance();
                self.expect_sym("(")?;
                let name = match self.peek().clone() {
                    Tok::Ident(x) => {
                        self.check_name(&x, self.loc())?;
                        self.advance();
                        x
                    }
                    _ => return self.unexpected("a variable name"),
                };
                self.expect_sym(")")?;
                ExprKind::Read(name)
            }
            Tok::Keyword("write") => {
                self.advance();
                self.expect_sym("(")?;
                let e = self.assign()?;
                self.expect_sym(")")?;
                ExprKind::Write(Box::new(e))
            }
            _ => return self.unexpected("an expression"),
        };
        Ok(Expr::new(kind, loc))
    }

    fn conditional(&mut self, loc: SourceLoc) -> PResult<Expr> {
        let cond = self.scope_expr()?;
        self.expect_kw("then")?;
        let then = self.scope_expr()?;
        let mut elifs = Vec::new();
        while self.eat_kw("elif") {
            let c = self.scope_expr()?;
            self.expect_kw("then")?;
            elifs.push((c, self.scope_expr()?));
        }
        let otherwise = if self.eat_kw("else") { Some(self.scope_expr()?) } else { None };
        self.expect_kw("fi")?;
        Ok(desugar_if_chain(cond, then, elifs, otherwise, loc))
    }

    fn case(&mut self, loc: SourceLoc) -> PResult<Expr> {
        let scrutinee = self.scope_expr()?;
        self.expect_kw("of")?;
        let mut branches = Vec::new();
        loop {
            let ploc = self.loc();
            let pattern = self.pattern()?;
            self.expect_sym("->")?;
            let body = self.scope_expr()?;
            branches.push((pattern, body, ploc));
            if !self.eat_sym("|") {
                break;
            }
        }
        self.expect_kw("esac")?;
        desugar_case(scrutinee, branches, &mut self.fresh, loc)
    }

    fn pattern(&mut self) -> PResult<Pattern> {
        let loc = self.loc();
        let sub = |p: &mut Parser, close: &str| -> PResult<Vec<Pattern>> {
            let mut ps = Vec::new();
            if p.eat_sym(close) {
                return Ok(ps);
            }
            loop {
                ps.push(p.pattern()?);
                if p.eat_sym(close) {
                    return Ok(ps);
                }
                p.expect_sym(",")?;
            }
        };
        match self.peek().clone() {
            Tok::Ident(x) if x == "_" => {
                self.advance();
                Ok(Pattern::Wildcard)
            }
            Tok::Ident(_) => Ok(Pattern::Bind(self.binder()?.0)),
            Tok::Int(n) => {
                self.advance();
                if n > FIX_MAX as u64 {
                    return error(loc, format!("integer literal {n} is out of range"));
                }
                Ok(Pattern::ConstInt(n as i64))
            }
            Tok::Sym("-") => {
                self.advance();
                match *self.peek() {
                    Tok::Int(n) if n as i128 <= -(FIX_MIN as i128) => {
                        self.advance();
                        Ok(Pattern::ConstInt((-(n as i128)) as i64))
                    }
                    _ => self.unexpected("an integer"),
                }
            }
            Tok::UIdent(tag) => {
                self.advance();
                let ps = if self.eat_sym("(") { sub(self, ")")? } else { Vec::new() };
                Ok(Pattern::Sexp(tag, ps))
            }
            Tok::Sym("[") => {
                self.advance();
                Ok(Pattern::Array(sub(self, "]")?))
            }
            _ => self.unexpected("a pattern"),
        }
    }
}
