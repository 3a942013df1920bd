//! Abstract syntax shared by every pass.

mod kinds;
mod print;

pub use kinds::{annotate_kinds, annotate_program, check_kinds, kind_of, WellFormednessError};
pub use print::{dump_ast, pretty, pretty_annotated};

use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceLoc {
    pub line: u32,
    pub col: u32,
}

impl SourceLoc {
    pub const fn new(line: u32, col: u32) -> Self {
        SourceLoc { line, col }
    }
}

impl Default for SourceLoc {
    fn default() -> Self {
        SourceLoc::new(1, 1)
    }
}

impl fmt::Display for SourceLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub const ALL: [BinOp; 13] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Mod,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::And,
        BinOp::Or,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "!!",
        }
    }

    pub fn from_symbol(s: &str) -> Option<BinOp> {
        BinOp::ALL.into_iter().find(|op| op.symbol() == s)
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Ref,
    Val,
    Void,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Ref => "Ref",
            Kind::Val => "Val",
            Kind::Void => "Void",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub loc: SourceLoc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Const(i64),
    Str(String),
    Chr(char),
    Var(String),
    Ref(String),
    Ignore(Box<Expr>),
    Binop(BinOp, Box<Expr>, Box<Expr>),
    Assign(Box<Expr>, Box<Expr>),
    Seq(Box<Expr>, Box<Expr>),
    Skip,
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    While(Box<Expr>, Box<Expr>),
    /// Body first, then condition.
    DoWhile(Box<Expr>, Box<Expr>),
    Read(String),
    Write(Box<Expr>),
    Scope(Vec<Definition>, Box<Expr>),
    Call(Box<Expr>, Vec<Expr>),
    Lambda(Vec<String>, Arc<Expr>),
    ArrayLit(Vec<Expr>),
    Sexp(String, Vec<Expr>),
    Elem(Box<Expr>, Box<Expr>),
    ElemRef(Box<Expr>, Box<Expr>),
    Case(Box<Expr>, Vec<(Pattern, Expr)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Wildcard,
    ConstInt(i64),
    Bind(String),
    Sexp(String, Vec<Pattern>),
    Array(Vec<Pattern>),
}

impl Pattern {
    /// Whether the pattern matches every value.
    pub fn is_irrefutable(&self) -> bool {
        matches!(self, Pattern::Wildcard | Pattern::Bind(_))
    }

    pub fn contains_bind(&self) -> bool {
        match self {
            Pattern::Bind(_) => true,
            Pattern::Wildcard | Pattern::ConstInt(_) => false,
            Pattern::Sexp(_, ps) | Pattern::Array(ps) => ps.iter().any(Pattern::contains_bind),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Definition {
    Var { name: String, init: Option<Expr>, loc: SourceLoc },
    Val { name: String, init: Expr, loc: SourceLoc },
    Fun { name: String, params: Vec<String>, body: Arc<Expr>, loc: SourceLoc },
}

impl Definition {
    pub fn name(&self) -> &str {
        match self {
            Definition::Var { name, .. } | Definition::Val { name, .. } | Definition::Fun { name, .. } => name,
        }
    }

    pub fn loc(&self) -> SourceLoc {
        match self {
            Definition::Var { loc, .. } | Definition::Val { loc, .. } | Definition::Fun { loc, .. } => *loc,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub top: Expr,
}

impl Program {
    /// Definitions of the outermost scope, which become global cells.
    pub fn globals(&self) -> &[Definition] {
        match &self.top.kind {
            ExprKind::Scope(defs, _) => defs,
            _ => &[],
        }
    }
}

impl Expr {
    pub fn new(kind: ExprKind, loc: SourceLoc) -> Self {
        Expr { kind, loc }
    }

    pub fn boxed(kind: ExprKind, loc: SourceLoc) -> Box<Self> {
        Box::new(Expr { kind, loc })
    }

    /// Visits the direct subexpressions, including definition initializers
    /// and function bodies.
    pub fn for_each_child<'a>(&'a self, mut f: impl FnMut(&'a Expr)) {
        use ExprKind::*;
        match &self.kind {
            Const(_) | Str(_) | Chr(_) | Var(_) | Ref(_) | Skip | Read(_) => {}
            Ignore(e) | Write(e) => f(e),
            Binop(_, a, b) | Assign(a, b) | Seq(a, b) | While(a, b) | DoWhile(a, b) | Elem(a, b) | ElemRef(a, b) => {
                f(a);
                f(b)
            }
            If(c, a, b) => {
                f(c);
                f(a);
                f(b)
            }
            Scope(defs, body) => {
                for d in defs {
                    match d {
                        Definition::Var { init: Some(e), .. } | Definition::Val { init: e, .. } => f(e),
                        Definition::Var { init: None, .. } => {}
                        Definition::Fun { body, .. } => f(body),
                    }
                }
                f(body)
            }
            Call(callee, args) => {
                f(callee);
                args.iter().for_each(f)
            }
            Lambda(_, body) => f(body),
            ArrayLit(es) | Sexp(_, es) => es.iter().for_each(f),
            Case(s, branches) => {
                f(s);
                for (_, body) in branches {
                    f(body)
                }
            }
        }
    }
}

/// Total number of expression nodes in the tree.
pub fn node_count(e: &Expr) -> usize {
    let mut n = 1;
    e.for_each_child(|c| n += node_count(c));
    n
}

/// Removes every `Ignore` and `Ref` node introduced by kind annotation,
/// turning `ElemRef` back into `Elem`.
pub fn strip(e: &Expr) -> Expr {
    use ExprKind::*;
    let b = |e: &Expr| Box::new(strip(e));
    let kind = match &e.kind {
        Ignore(inner) => return strip(inner),
        Ref(x) => Var(x.clone()),
        ElemRef(a, i) => Elem(b(a), b(i)),
        Const(_) | Str(_) | Chr(_) | Var(_) | Skip | Read(_) => e.kind.clone(),
        Write(x) => Write(b(x)),
        Binop(op, x, y) => Binop(*op, b(x), b(y)),
        Assign(x, y) => Assign(b(x), b(y)),
        Seq(x, y) => Seq(b(x), b(y)),
        While(x, y) => While(b(x), b(y)),
        DoWhile(x, y) => DoWhile(b(x), b(y)),
        Elem(x, y) => Elem(b(x), b(y)),
        If(c, x, y) => If(b(c), b(x), b(y)),
        Scope(defs, body) => Scope(defs.iter().map(strip_def).collect(), b(body)),
        Call(f, args) => Call(b(f), args.iter().map(strip).collect()),
        Lambda(ps, body) => Lambda(ps.clone(), Arc::new(strip(body))),
        ArrayLit(es) => ArrayLit(es.iter().map(strip).collect()),
        Sexp(t, es) => Sexp(t.clone(), es.iter().map(strip).collect()),
        Case(s, branches) => Case(b(s), branches.iter().map(|(p, body)| (p.clone(), strip(body))).collect()),
    };
    Expr::new(kind, e.loc)
}

fn strip_def(d: &Definition) -> Definition {
    match d {
        Definition::Var { name, init, loc } => {
            Definition::Var { name: name.clone(), init: init.as_ref().map(strip), loc: *loc }
        }
        Definition::Val { name, init, loc } => Definition::Val { name: name.clone(), init: strip(init), loc: *loc },
        Definition::Fun { name, params, body, loc } => {
            Definition::Fun { name: name.clone(), params: params.clone(), body: Arc::new(strip(body)), loc: *loc }
        }
    }
}

/// Structural equality that ignores source locations.
pub fn same_shape(a: &Expr, b: &Expr) -> bool {
    let mut a = a.clone();
    let mut b = b.clone();
    clear_locs(&mut a);
    clear_locs(&mut b);
    a == b
}

fn clear_locs(e: &mut Expr) {
    use ExprKind::*;
    e.loc = SourceLoc::default();
    match &mut e.kind {
        Const(_) | Str(_) | Chr(_) | Var(_) | Ref(_) | Skip | Read(_) => {}
        Ignore(x) | Write(x) => clear_locs(x),
        Binop(_, x, y) | Assign(x, y) | Seq(x, y) | While(x, y) | DoWhile(x, y) | Elem(x, y) | ElemRef(x, y) => {
            clear_locs(x);
            clear_locs(y)
        }
        If(c, x, y) => {
            clear_locs(c);
            clear_locs(x);
            clear_locs(y)
        }
        Scope(defs, body) => {
            for d in defs {
                match d {
                    Definition::Var { init, loc, .. } => {
                        *loc = SourceLoc::default();
                        if let Some(e) = init {
                            clear_locs(e)
                        }
                    }
                    Definition::Val { init, loc, .. } => {
                        *loc = SourceLoc::default();
                        clear_locs(init)
                    }
                    Definition::Fun { body, loc, .. } => {
                        *loc = SourceLoc::default();
                        clear_locs(Arc::make_mut(body))
                    }
                }
            }
            clear_locs(body)
        }
        Call(f, args) => {
            clear_locs(f);
            args.iter_mut().for_each(clear_locs)
        }
        Lambda(_, body) => clear_locs(Arc::make_mut(body)),
        ArrayLit(es) | Sexp(_, es) => es.iter_mut().for_each(clear_locs),
        Case(s, branches) => {
            clear_locs(s);
            branches.iter_mut().for_each(|(_, body)| clear_locs(body))
        }
    }
}
