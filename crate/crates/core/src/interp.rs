//! Reference interpreter over kind-annotated syntax trees.

use crate::ast::{Definition, Expr, ExprKind, Pattern, Program, SourceLoc};
use crate::value::{self, RunOutcome, RuntimeFailure, Value, World};
use lamina_runtime::Failure;
use std::cell::RefCell;
use std::rc::Rc;
use std::sync::Arc;

/// Stack size of the evaluation thread; recursion in the interpreted
/// program becomes recursion here.
const EVAL_STACK_BYTES: usize = 1 << 30;

pub struct Closure {
    params: Vec<String>,
    body: Arc<Expr>,
    env: Env,
}

type Val = Value<Closure>;
type Env = Rc<Frame>;
type Eval<T> = Result<T, RuntimeFailure>;

enum Binding {
    Var(RefCell<Val>),
    Val(RefCell<Val>),
    Fun { params: Vec<String>, body: Arc<Expr> },
}

struct Frame {
    names: RefCell<Vec<(String, Rc<Binding>)>>,
    parent: Option<Env>,
}

impl Frame {
    fn new(parent: Option<Env>) -> Env {
        Rc::new(Frame { names: RefCell::new(Vec::new()), parent })
    }

    fn bind(&self, name: &str, b: Binding) {
        self.names.borrow_mut().push((name.to_string(), Rc::new(b)));
    }

    /// The binding of `name` and the frame that holds it.
    fn lookup(self: &Env, name: &str) -> (Rc<Binding>, Env) {
        let mut frame = self.clone();
        loop {
            if let Some((_, b)) = frame.names.borrow().iter().rev().find(|(n, _)| n == name) {
                return (b.clone(), frame.clone());
            }
            frame = match &frame.parent {
                Some(p) => p.clone(),
                None => panic!("unbound name `{name}` reached the interpreter"),
            };
        }
    }
}

enum Place {
    Binding(Rc<Binding>),
    Elem(Val, Val),
}

/// Runs a program on the given standard input.
pub fn eval_program(p: &Program, input: &[u8]) -> RunOutcome {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(EVAL_STACK_BYTES)
            .spawn_scoped(s, || {
                let mut world = World::new(input);
                let env = Frame::new(None);
                let failure = eval(&p.top, &env, &mut world).err();
                RunOutcome { output: world.output, failure }
            })
            .expect("spawning the evaluation thread")
            .join()
            .unwrap_or_else(|e| std::panic::resume_unwind(e))
    })
}

fn enter_scope(defs: &[Definition], env: &Env, w: &mut World) -> Eval<Env> {
    let inner = Frame::new(Some(env.clone()));
    for d in defs {
        inner.bind(
            d.name(),
            match d {
                Definition::Var { .. } => Binding::Var(RefCell::new(Value::Int(0))),
                Definition::Val { .. } => Binding::Val(RefCell::new(Value::Int(0))),
                Definition::Fun { params, body, .. } => Binding::Fun { params: params.clone(), body: body.clone() },
            },
        );
    }
    for d in defs {
        let init = match d {
            Definition::Var { init: Some(e), .. } | Definition::Val { init: e, .. } => e,
            _ => continue,
        };
        let v = eval(init, &inner, w)?;
        match &*inner.lookup(d.name()).0 {
            Binding::Var(cell) | Binding::Val(cell) => *cell.borrow_mut() = v,
            Binding::Fun { .. } => unreachable!(),
        }
    }
    Ok(inner)
}

fn call(params: &[String], body: &Expr, env: &Env, args: Vec<Val>, w: &mut World) -> Eval<Val> {
    let frame = Frame::new(Some(env.clone()));
    for (p, a) in params.iter().zip(args) {
        frame.bind(p, Binding::Var(RefCell::new(a)));
    }
    eval(body, &frame, w)
}

fn eval_all(es: &[Expr], env: &Env, w: &mut World) -> Eval<Vec<Val>> {
    es.iter().map(|e| eval(e, env, w)).collect()
}

/// Evaluates an expression. Expressions of kind `Void` yield the integer 0.
fn eval(e: &Expr, env: &Env, w: &mut World) -> Eval<Val> {
    use ExprKind::*;
    Ok(match &e.kind {
        Const(n) => Value::Int(*n),
        Chr(c) => Value::Int(*c as i64),
        Str(s) => Value::string(s.as_bytes()),
        Var(x) => {
            let (b, frame) = env.lookup(x);
            match &*b {
                Binding::Var(cell) | Binding::Val(cell) => cell.borrow().clone(),
                Binding::Fun { params, body } => {
                    Value::Closure(Rc::new(Closure { params: params.clone(), body: body.clone(), env: frame }))
                }
            }
        }
        Ref(_) | ElemRef(..) => unreachable!("reference outside an assignment"),
        Ignore(inner) => {
            eval(inner, env, w)?;
            Value::Int(0)
        }
        Binop(op, a, b) => {
            let a = eval(a, env, w)?;
            let b = eval(b, env, w)?;
            value::binop(*op, &a, &b)?
        }
        Assign(lhs, rhs) => {
            let place = eval_place(lhs, env, w)?;
            let v = eval(rhs, env, w)?;
            store(place, v)?
        }
        Seq(a, b) => {
            eval(a, env, w)?;
            eval(b, env, w)?
        }
        Skip => Value::Int(0),
        If(c, a, b) => {
            if eval(c, env, w)?.truthy() {
                eval(a, env, w)?
            } else {
                eval(b, env, w)?
            }
        }
        While(c, body) => {
            while eval(c, env, w)?.truthy() {
                eval(body, env, w)?;
            }
            Value::Int(0)
        }
        DoWhile(body, c) => {
            loop {
                eval(body, env, w)?;
                if !eval(c, env, w)?.truthy() {
                    break;
                }
            }
            Value::Int(0)
        }
        Read(x) => {
            let n = w.read_int()?;
            store(Place::Binding(env.lookup(x).0), Value::Int(n))?;
            Value::Int(0)
        }
        Write(x) => {
            let n = eval(x, env, w)?.as_int()?;
            w.write_int(n);
            Value::Int(0)
        }
        Scope(defs, body) => {
            let inner = enter_scope(defs, env, w)?;
            eval(body, &inner, w)?
        }
        Call(callee, args) => return eval_call(callee, args, env, w),
        Lambda(params, body) => {
            Value::Closure(Rc::new(Closure { params: params.clone(), body: body.clone(), env: env.clone() }))
        }
        ArrayLit(es) => Value::array(eval_all(es, env, w)?),
        Sexp(tag, es) => Value::sexp(tag, eval_all(es, env, w)?),
        Elem(a, i) => {
            let a = eval(a, env, w)?;
            let i = eval(i, env, w)?;
            value::elem(&a, &i)?
        }
        Case(s, branches) => {
            let body = select_branch(s, branches, e.loc, env, w)?;
            eval(body, env, w)?
        }
    })
}

fn eval_call(callee: &Expr, args: &[Expr], env: &Env, w: &mut World) -> Eval<Val> {
    if let ExprKind::Var(f) = &callee.kind {
        match f.as_str() {
            "length" => {
                let args = eval_all(args, env, w)?;
                return Ok(value::length(&args[0])?);
            }
            "printf" => {
                let args = eval_all(args, env, w)?;
                value::printf(&args[0], &args[1..], &mut w.output)?;
                return Ok(Value::Int(0));
            }
            _ => {}
        }
        let (b, frame) = env.lookup(f);
        if let Binding::Fun { params, body } = &*b {
            let args = eval_all(args, env, w)?;
            return call(params, body, &frame, args, w);
        }
    }
    let f = eval(callee, env, w)?;
    let args = eval_all(args, env, w)?;
    match f {
        Value::Closure(c) if c.params.len() == args.len() => call(&c.params, &c.body, &c.env, args, w),
        Value::Closure(_) => Err(Failure::ArityMismatch.into()),
        _ => Err(Failure::NotClosure.into()),
    }
}

fn eval_place(e: &Expr, env: &Env, w: &mut World) -> Eval<Place> {
    use ExprKind::*;
    Ok(match &e.kind {
        Ref(x) => Place::Binding(env.lookup(x).0),
        ElemRef(a, i) => {
            let a = eval(a, env, w)?;
            let i = eval(i, env, w)?;
            Place::Elem(a, i)
        }
        If(c, a, b) => {
            if eval(c, env, w)?.truthy() {
                eval_place(a, env, w)?
            } else {
                eval_place(b, env, w)?
            }
        }
        Seq(a, b) => {
            eval(a, env, w)?;
            eval_place(b, env, w)?
        }
        Scope(defs, body) => {
            let inner = enter_scope(defs, env, w)?;
            eval_place(body, &inner, w)?
        }
        Case(s, branches) => {
            let body = select_branch(s, branches, e.loc, env, w)?;
            eval_place(body, env, w)?
        }
        _ => unreachable!("not a reference: {e:?}"),
    })
}

fn store(place: Place, v: Val) -> Eval<Val> {
    match place {
        Place::Binding(b) => match &*b {
            Binding::Var(cell) => {
                *cell.borrow_mut() = v.clone();
                Ok(v)
            }
            Binding::Val(_) | Binding::Fun { .. } => Err(Failure::ImmutableAssignment.into()),
        },
        Place::Elem(a, i) => Ok(value::sta(&a, &i, v)?),
    }
}

fn select_branch<'e>(
    s: &Expr,
    branches: &'e [(Pattern, Expr)],
    loc: SourceLoc,
    env: &Env,
    w: &mut World,
) -> Eval<&'e Expr> {
    let v = eval(s, env, w)?;
    for (p, body) in branches {
        if matches(p, &v) {
            return Ok(body);
        }
    }
    Err(RuntimeFailure { failure: Failure::MatchFailure, loc: Some(loc) })
}

fn matches(p: &Pattern, v: &Val) -> bool {
    match p {
        Pattern::Wildcard | Pattern::Bind(_) => true,
        Pattern::ConstInt(n) => matches!(v, Value::Int(m) if m == n),
        Pattern::Sexp(tag, ps) => {
            value::tag_matches(v, tag, ps.len()) && {
                let Value::Sexp(s) = v else { unreachable!() };
                let elems = s.elems.borrow().clone();
                ps.iter().zip(&elems).all(|(p, v)| matches(p, v))
            }
        }
        Pattern::Array(ps) => {
            value::array_matches(v, ps.len()) && {
                let Value::Array(a) = v else { unreachable!() };
                let elems = a.borrow().clone();
                ps.iter().zip(&elems).all(|(p, v)| matches(p, v))
            }
        }
    }
}
