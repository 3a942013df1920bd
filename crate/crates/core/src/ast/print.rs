//! Source-level pretty printing and the `-dast` tree dump.

use super::{BinOp, Definition, Expr, ExprKind, Pattern};
use std::fmt::Write;

// Precedence contexts, loosest first.
const SCOPE: u8 = 0;
const SEQ: u8 = 1;
const ASSIGN: u8 = 2;
const POSTFIX: u8 = 8;
const PRIMARY: u8 = 9;

fn binop_level(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 3,
        BinOp::And => 4,
        op if op.is_comparison() => 5,
        BinOp::Add | BinOp::Sub => 6,
        _ => 7,
    }
}

/// Renders an expression as re-parseable source text. Kind annotations are
/// dropped.
pub fn pretty(e: &Expr) -> String {
    let mut p = Printer { out: String::new(), annotated: false };
    p.scope_body(e);
    p.out
}

/// Renders an expression with its kind annotations visible, as in
/// `ignore (if x then (ref y) else (ref z) fi := 2)`.
pub fn pretty_annotated(e: &Expr) -> String {
    let mut p = Printer { out: String::new(), annotated: true };
    p.scope_body(e);
    p.out
}

struct Printer {
    out: String,
    annotated: bool,
}

impl Printer {
    fn s(&mut self, s: &str) {
        self.out.push_str(s);
    }

    /// An expression in a position that accepts definitions.
    fn scope_body(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Scope(defs, body) => {
                for d in defs {
                    self.definition(d);
                    self.s(" ");
                }
                self.expr(body, SEQ);
            }
            _ => self.expr(e, SEQ),
        }
    }

    fn definition(&mut self, d: &Definition) {
        match d {
            Definition::Var { name, init, .. } => {
                write!(self.out, "var {name}").unwrap();
                if let Some(init) = init {
                    self.s(" = ");
                    self.expr(init, ASSIGN);
                }
                self.s(";");
            }
            Definition::Val { name, init, .. } => {
                write!(self.out, "val {name} = ").unwrap();
                self.expr(init, ASSIGN);
                self.s(";");
            }
            Definition::Fun { name, params, body, .. } => {
                write!(self.out, "fun {name} ({}) {{ ", params.join(", ")).unwrap();
                self.scope_body(body);
                self.s(" }");
            }
        }
    }

    fn list(&mut self, es: &[Expr]) {
        for (i, e) in es.iter().enumerate() {
            if i > 0 {
                self.s(", ");
            }
            self.expr(e, ASSIGN);
        }
    }

    fn level(&self, e: &Expr) -> u8 {
        match &e.kind {
            ExprKind::Scope(..) => SCOPE,
            ExprKind::Seq(..) => SEQ,
            ExprKind::Assign(..) => ASSIGN,
            ExprKind::Binop(op, ..) => binop_level(*op),
            ExprKind::Call(..) | ExprKind::Elem(..) => POSTFIX,
            ExprKind::ElemRef(..) if !self.annotated => POSTFIX,
            ExprKind::Ignore(inner) if !self.annotated => self.level(inner),
            _ => PRIMARY,
        }
    }

    fn expr(&mut self, e: &Expr, ctx: u8) {
        if self.level(e) < ctx {
            self.s("(");
            self.scope_body(e);
            self.s(")");
            return;
        }
        use ExprKind::*;
        match &e.kind {
            Const(n) => write!(self.out, "{n}").unwrap(),
            Str(s) => {
                self.s("\"");
                for c in s.chars() {
                    match c {
                        '\n' => self.s("\\n"),
                        '\t' => self.s("\\t"),
                        '"' => self.s("\\\""),
                        '\\' => self.s("\\\\"),
                        c => self.out.push(c),
                    }
                }
                self.s("\"");
            }
            Chr(c) => {
                self.s("'");
                match c {
                    '\n' => self.s("\\n"),
                    '\t' => self.s("\\t"),
                    '\'' => self.s("\\'"),
                    '\\' => self.s("\\\\"),
                    c => self.out.push(*c),
                }
                self.s("'");
            }
            Var(x) => self.s(x),
            Ref(x) => {
                if self.annotated {
                    write!(self.out, "(ref {x})").unwrap()
                } else {
                    self.s(x)
                }
            }
            Ignore(inner) => {
                if self.annotated {
                    self.s("ignore (");
                    self.scope_body(inner);
                    self.s(")");
                } else {
                    self.expr(inner, ctx)
                }
            }
            Binop(op, a, b) => {
                let level = binop_level(*op);
                let (left, right) = if op.is_comparison() { (level + 1, level + 1) } else { (level, level + 1) };
                self.expr(a, left);
                write!(self.out, " {} ", op.symbol()).unwrap();
                self.expr(b, right);
            }
            Assign(l, r) => {
                self.expr(l, ASSIGN + 1);
                self.s(" := ");
                self.expr(r, ASSIGN);
            }
            Seq(a, b) => {
                self.expr(a, ASSIGN);
                self.s("; ");
                self.expr(b, SEQ);
            }
            Skip => self.s("skip"),
            If(c, a, b) => {
                self.s("if ");
                self.scope_body(c);
                self.s(" then ");
                self.scope_body(a);
                self.s(" else ");
                self.scope_body(b);
                self.s(" fi");
            }
            While(c, body) => {
                self.s("while ");
                self.scope_body(c);
                self.s(" do ");
                self.scope_body(body);
                self.s(" od");
            }
            DoWhile(body, c) => {
                self.s("do ");
                self.scope_body(body);
                self.s(" while ");
                self.scope_body(c);
                self.s(" od");
            }
            Read(x) => write!(self.out, "read ({x})").unwrap(),
            Write(x) => {
                self.s("write (");
                self.expr(x, ASSIGN);
                self.s(")");
            }
            Scope(..) => {
                self.s("(");
                self.scope_body(e);
                self.s(")");
            }
            Call(f, args) => {
                self.expr(f, POSTFIX);
                self.s(" (");
                self.list(args);
                self.s(")");
            }
            Lambda(params, body) => {
                write!(self.out, "fun ({}) {{ ", params.join(", ")).unwrap();
                self.scope_body(body);
                self.s(" }");
            }
            ArrayLit(es) => {
                self.s("[");
                self.list(es);
                self.s("]");
            }
            Sexp(tag, es) => {
                self.s(tag);
                if !es.is_empty() {
                    self.s(" (");
                    self.list(es);
                    self.s(")");
                }
            }
            Elem(a, i) => {
                self.expr(a, POSTFIX);
                self.s(" [");
                self.expr(i, ASSIGN);
                self.s("]");
            }
            ElemRef(a, i) => {
                if self.annotated {
                    self.s("(ref ");
                }
                self.expr(a, POSTFIX);
                self.s(" [");
                self.expr(i, ASSIGN);
                self.s("]");
                if self.annotated {
                    self.s(")");
                }
            }
            Case(s, branches) => {
                self.s("case ");
                self.scope_body(s);
                self.s(" of ");
                for (i, (p, body)) in branches.iter().enumerate() {
                    if i > 0 {
                        self.s(" | ");
                    }
                    pattern(&mut self.out, p);
                    self.s(" -> ");
                    self.scope_body(body);
                }
                self.s(" esac");
            }
        }
    }
}

fn pattern(out: &mut String, p: &Pattern) {
    let list = |out: &mut String, ps: &[Pattern]| {
        for (i, p) in ps.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            pattern(out, p);
        }
    };
    match p {
        Pattern::Wildcard => out.push('_'),
        Pattern::ConstInt(n) => write!(out, "{n}").unwrap(),
        Pattern::Bind(x) => out.push_str(x),
        Pattern::Sexp(tag, ps) => {
            out.push_str(tag);
            if !ps.is_empty() {
                out.push_str(" (");
                list(out, ps);
                out.push(')');
            }
        }
        Pattern::Array(ps) => {
            out.push('[');
            list(out, ps);
            out.push(']');
        }
    }
}

/// One constructor per node, nested in parentheses.
pub fn dump_ast(e: &Expr) -> String {
    let mut out = String::new();
    dump(&mut out, e, 0);
    out.push('\n');
    out
}

fn dump(out: &mut String, e: &Expr, indent: usize) {
    use ExprKind::*;
    let pad = |out: &mut String, n: usize| {
        out.push('\n');
        out.extend(std::iter::repeat(' ').take(n));
    };
    let head = match &e.kind {
        Const(n) => format!("Const {n}"),
        Str(s) => format!("Str {s:?}"),
        Chr(c) => format!("Chr {c:?}"),
        Var(x) => format!("Var {x}"),
        Ref(x) => format!("Ref {x}"),
        Ignore(_) => "Ignore".into(),
        Binop(op, ..) => format!("Binop {}", op.symbol()),
        Assign(..) => "Assign".into(),
        Seq(..) => "Seq".into(),
        Skip => "Skip".into(),
        If(..) => "If".into(),
        While(..) => "While".into(),
        DoWhile(..) => "DoWhile".into(),
        Read(x) => format!("Read {x}"),
        Write(_) => "Write".into(),
        Scope(..) => "Scope".into(),
        Call(..) => "Call".into(),
        Lambda(ps, _) => format!("Lambda [{}]", ps.join(", ")),
        ArrayLit(_) => "Array".into(),
        Sexp(t, _) => format!("Sexp {t}"),
        Elem(..) => "Elem".into(),
        ElemRef(..) => "ElemRef".into(),
        Case(..) => "Case".into(),
    };
    write!(out, "({head}").unwrap();
    match &e.kind {
        Scope(defs, body) => {
            for d in defs {
                pad(out, indent + 2);
                match d {
                    Definition::Var { name, init, .. } => {
                        write!(out, "(VarDef {name}").unwrap();
                        if let Some(init) = init {
                            pad(out, indent + 4);
                            dump(out, init, indent + 4);
                        }
                    }
                    Definition::Val { name, init, .. } => {
                        write!(out, "(ValDef {name}").unwrap();
                        pad(out, indent + 4);
                        dump(out, init, indent + 4);
                    }
                    Definition::Fun { name, params, body, .. } => {
                        write!(out, "(FunDef {name} [{}]", params.join(", ")).unwrap();
                        pad(out, indent + 4);
                        dump(out, body, indent + 4);
                    }
                }
                out.push(')');
            }
            pad(out, indent + 2);
            dump(out, body, indent + 2);
        }
        Case(s, branches) => {
            pad(out, indent + 2);
            dump(out, s, indent + 2);
            for (p, body) in branches {
                pad(out, indent + 2);
                out.push_str("(Branch ");
                pattern(out, p);
                pad(out, indent + 4);
                dump(out, body, indent + 4);
                out.push(')');
            }
        }
        _ => e.for_each_child(|c| {
            pad(out, indent + 2);
            dump(out, c, indent + 2);
        }),
    }
    out.push(')');
}
