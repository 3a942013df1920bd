//! Kind inference: decides for every node whether it denotes a reference, a
//! value or nothing, inserting `Ignore` and `Ref` nodes where needed.

use super::{Definition, Expr, ExprKind, Kind, Program, SourceLoc};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{loc}: ill-formed expression: {message}")]
pub struct WellFormednessError {
    pub loc: SourceLoc,
    pub message: String,
}

fn ill_formed<T>(loc: SourceLoc, what: &str, kind: Kind) -> Result<T, WellFormednessError> {
    let message = match kind {
        Kind::Ref => format!("{what} cannot be assigned to"),
        Kind::Val => format!("{what} does not produce a value"),
        Kind::Void => format!("{what} cannot be used as a statement"),
    };
    Err(WellFormednessError { loc, message })
}

type Annotated = Result<Expr, WellFormednessError>;

/// Annotates the whole program at kind `Void`.
pub fn annotate_program(top: &Expr) -> Result<Program, WellFormednessError> {
    Ok(Program { top: annotate_kinds(top, Kind::Void)? })
}

/// Annotates a raw expression so that it is well formed at `expected`.
pub fn annotate_kinds(e: &Expr, expected: Kind) -> Annotated {
    use ExprKind::*;
    let loc = e.loc;
    let at = |e: &Expr, k: Kind| annotate_kinds(e, k).map(Box::new);
    // Wraps a value-producing node according to the context.
    let value = |kind: ExprKind| -> Annotated {
        let node = Expr::new(kind, loc);
        match expected {
            Kind::Val => Ok(node),
            Kind::Void => Ok(Expr::new(Ignore(Box::new(node)), loc)),
            Kind::Ref => unreachable!("reference context handled by the caller"),
        }
    };
    let void_only = |kind: ExprKind, what: &str| -> Annotated {
        if expected == Kind::Void {
            Ok(Expr::new(kind, loc))
        } else {
            ill_formed(loc, what, expected)
        }
    };
    let describe = |what: &str| -> Result<(), WellFormednessError> {
        if expected == Kind::Ref {
            ill_formed(loc, what, Kind::Ref)
        } else {
            Ok(())
        }
    };

    match &e.kind {
        Ignore(_) | Ref(_) | ElemRef(..) => panic!("annotate_kinds expects a raw expression"),
        Var(x) => match expected {
            Kind::Ref => Ok(Expr::new(Ref(x.clone()), loc)),
            _ => value(Var(x.clone())),
        },
        Elem(a, i) => {
            let (a, i) = (at(a, Kind::Val)?, at(i, Kind::Val)?);
            match expected {
                Kind::Ref => Ok(Expr::new(ElemRef(a, i), loc)),
                _ => value(Elem(a, i)),
            }
        }
        Const(n) => describe("a constant").and_then(|_| value(Const(*n))),
        Str(s) => describe("a string literal").and_then(|_| value(Str(s.clone()))),
        Chr(c) => describe("a character literal").and_then(|_| value(Chr(*c))),
        Binop(op, a, b) => {
            describe("an arithmetic expression")?;
            let (a, b) = (at(a, Kind::Val)?, at(b, Kind::Val)?);
            value(Binop(*op, a, b))
        }
        Assign(l, r) => {
            describe("an assignment")?;
            let (l, r) = (at(l, Kind::Ref)?, at(r, Kind::Val)?);
            value(Assign(l, r))
        }
        Call(f, args) => {
            describe("a call")?;
            let f = at(f, Kind::Val)?;
            let args = args.iter().map(|a| annotate_kinds(a, Kind::Val)).collect::<Result<_, _>>()?;
            value(Call(f, args))
        }
        Lambda(params, body) => {
            describe("a function")?;
            value(Lambda(params.clone(), Arc::new(function_body(body)?)))
        }
        ArrayLit(es) => {
            describe("an array")?;
            value(ArrayLit(es.iter().map(|a| annotate_kinds(a, Kind::Val)).collect::<Result<_, _>>()?))
        }
        Sexp(tag, es) => {
            describe("an S-expression")?;
            value(Sexp(tag.clone(), es.iter().map(|a| annotate_kinds(a, Kind::Val)).collect::<Result<_, _>>()?))
        }
        Seq(a, b) => Ok(Expr::new(Seq(at(a, Kind::Void)?, at(b, expected)?), loc)),
        If(c, a, b) => Ok(Expr::new(If(at(c, Kind::Val)?, at(a, expected)?, at(b, expected)?), loc)),
        Scope(defs, body) => {
            let defs = defs.iter().map(annotate_definition).collect::<Result<_, _>>()?;
            Ok(Expr::new(Scope(defs, at(body, expected)?), loc))
        }
        Case(s, branches) => {
            let s = at(s, Kind::Val)?;
            let branches = branches
                .iter()
                .map(|(p, body)| Ok((p.clone(), annotate_kinds(body, expected)?)))
                .collect::<Result<_, WellFormednessError>>()?;
            Ok(Expr::new(Case(s, branches), loc))
        }
        Skip => void_only(Skip, "skip"),
        Read(x) => void_only(Read(x.clone()), "read"),
        Write(x) => {
            let x = at(x, Kind::Val)?;
            void_only(Write(x), "write")
        }
        While(c, body) => {
            if expected != Kind::Void {
                return ill_formed(loc, "a loop", expected);
            }
            Ok(Expr::new(While(at(c, Kind::Val)?, at(body, Kind::Void)?), loc))
        }
        DoWhile(body, c) => {
            if expected != Kind::Void {
                return ill_formed(loc, "a loop", expected);
            }
            Ok(Expr::new(DoWhile(at(body, Kind::Void)?, at(c, Kind::Val)?), loc))
        }
    }
}

/// Function bodies return their value when they have one and 0 otherwise.
fn function_body(body: &Expr) -> Annotated {
    annotate_kinds(body, Kind::Val).or_else(|val_err| annotate_kinds(body, Kind::Void).map_err(|_| val_err))
}

fn annotate_definition(d: &Definition) -> Result<Definition, WellFormednessError> {
    Ok(match d {
        Definition::Var { name, init, loc } => Definition::Var {
            name: name.clone(),
            init: init.as_ref().map(|e| annotate_kinds(e, Kind::Val)).transpose()?,
            loc: *loc,
        },
        Definition::Val { name, init, loc } => {
            Definition::Val { name: name.clone(), init: annotate_kinds(init, Kind::Val)?, loc: *loc }
        }
        Definition::Fun { name, params, body, loc } => Definition::Fun {
            name: name.clone(),
            params: params.clone(),
            body: Arc::new(function_body(body)?),
            loc: *loc,
        },
    })
}

/// Kind of an annotated expression, computed bottom-up. `None` when the
/// children disagree or a node sits in a position it cannot occupy.
pub fn kind_of(e: &Expr) -> Option<Kind> {
    use ExprKind::*;
    let is = |e: &Expr, k: Kind| kind_of(e) == Some(k);
    let all_val = |es: &[Expr]| es.iter().all(|e| is(e, Kind::Val));
    let val_if = |ok: bool| if ok { Some(Kind::Val) } else { None };
    let void_if = |ok: bool| if ok { Some(Kind::Void) } else { None };
    match &e.kind {
        Const(_) | Str(_) | Chr(_) | Var(_) => Some(Kind::Val),
        Ref(_) => Some(Kind::Ref),
        Ignore(inner) => void_if(is(inner, Kind::Val)),
        Binop(_, a, b) | Elem(a, b) => val_if(is(a, Kind::Val) && is(b, Kind::Val)),
        ElemRef(a, b) => {
            if is(a, Kind::Val) && is(b, Kind::Val) {
                Some(Kind::Ref)
            } else {
                None
            }
        }
        Assign(l, r) => val_if(is(l, Kind::Ref) && is(r, Kind::Val)),
        Seq(a, b) => {
            if is(a, Kind::Void) {
                kind_of(b)
            } else {
                None
            }
        }
        Skip | Read(_) => Some(Kind::Void),
        Write(x) => void_if(is(x, Kind::Val)),
        If(c, a, b) => {
            let k = kind_of(a)?;
            if is(c, Kind::Val) && is(b, k) {
                Some(k)
            } else {
                None
            }
        }
        While(c, body) | DoWhile(body, c) => void_if(is(c, Kind::Val) && is(body, Kind::Void)),
        Scope(defs, body) => {
            if defs.iter().all(definition_ok) {
                kind_of(body)
            } else {
                None
            }
        }
        Call(f, args) => val_if(is(f, Kind::Val) && all_val(args)),
        Lambda(_, body) => val_if(body_ok(body)),
        ArrayLit(es) | Sexp(_, es) => val_if(all_val(es)),
        Case(s, branches) => {
            let k = kind_of(&branches.first()?.1)?;
            if is(s, Kind::Val) && branches.iter().all(|(_, b)| is(b, k)) {
                Some(k)
            } else {
                None
            }
        }
    }
}

fn body_ok(body: &Expr) -> bool {
    matches!(kind_of(body), Some(Kind::Val | Kind::Void))
}

fn definition_ok(d: &Definition) -> bool {
    match d {
        Definition::Var { init: None, .. } => true,
        Definition::Var { init: Some(e), .. } | Definition::Val { init: e, .. } => kind_of(e) == Some(Kind::Val),
        Definition::Fun { body, .. } => body_ok(body),
    }
}

/// Independently re-verifies an annotated tree at the given kind.
pub fn check_kinds(e: &Expr, expected: Kind) -> bool {
    kind_of(e) == Some(expected)
}
