//! Compilation of annotated syntax trees to stack machine code.
//!
//! The first pass emits draft code per function, leaving placeholders for
//! every variable access and function reference, and records the nesting
//! tree, the immediate closure elements and the reference graph. The second
//! pass propagates closure elements to a fixpoint and expands the
//! placeholders. Captured variables live in one-element arrays so that every
//! closure sharing a variable sees its updates.

use super::{Designation, Instr, JumpCond, PattKind, SmProgram, BUILTIN_IMMUTABLE, BUILTIN_LENGTH, BUILTIN_PRINTF};
use crate::ast::{kind_of, Definition, Expr, ExprKind, Kind, Pattern, Program, SourceLoc};
use std::collections::HashSet;
use std::rc::Rc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{loc}: {message}")]
pub struct CompileError {
    pub loc: SourceLoc,
    pub message: String,
}

type CResult<T> = Result<T, CompileError>;

fn error<T>(loc: SourceLoc, message: impl Into<String>) -> CResult<T> {
    Err(CompileError { loc, message: message.into() })
}

/// Closure-conversion facts about one function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunInfo {
    pub label: String,
    /// Label of the enclosing function; `None` for the entry function.
    pub parent: Option<String>,
    pub params: Vec<String>,
    /// Outer variables mentioned directly in the body.
    pub immediate: Vec<String>,
    /// Functions mentioned directly in the body.
    pub references: Vec<String>,
    /// Final capture list, in the order of the closure layout.
    pub captures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SmCompilation {
    pub program: SmProgram,
    /// Functions in output order, entry function first.
    pub functions: Vec<FunInfo>,
}

type VarId = usize;
type FunId = usize;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Place {
    Global,
    Local(usize),
    Arg(usize),
}

struct VarInfo {
    name: String,
    owner: FunId,
    place: Place,
    mutable: bool,
}

#[derive(Clone, Copy)]
enum Entity {
    Var(VarId),
    Fun(FunId),
    Builtin(&'static str),
}

struct EnvNode {
    name: String,
    entity: Entity,
    parent: Env,
}

type Env = Option<Rc<EnvNode>>;

fn bind(env: &Env, name: &str, entity: Entity) -> Env {
    Some(Rc::new(EnvNode { name: name.to_string(), entity, parent: env.clone() }))
}

fn lookup(env: &Env, name: &str) -> Option<Entity> {
    let mut cur = env.as_ref();
    while let Some(node) = cur {
        if node.name == name {
            return Some(node.entity);
        }
        cur = node.parent.as_ref();
    }
    None
}

enum Draft {
    Final(Instr),
    /// Pushes the variable's value.
    Load(VarId),
    /// Pushes what a store into a boxed variable needs below the value.
    StorePrefix(VarId),
    /// Pops the value and stores it; `keep` leaves the value on the stack.
    Store { var: VarId, keep: bool },
    /// Resets a local on scope entry.
    ScopeInit(VarId),
    /// Boxes the captured parameters on function entry.
    BoxArgs,
    /// Pushes the closure a non-direct call needs below its arguments.
    Callee(FunId),
    Call(FunId, usize),
    FunValue(FunId),
    Begin,
}

struct Function {
    label: String,
    parent: Option<FunId>,
    arity: usize,
    params: Vec<VarId>,
    nlocals: usize,
    code: Vec<Draft>,
    immediate: Vec<VarId>,
    references: Vec<FunId>,
    captures: Vec<VarId>,
}

struct Compiler {
    vars: Vec<VarInfo>,
    funs: Vec<Function>,
    cur: FunId,
    next_label: usize,
    next_lambda: usize,
    used_labels: HashSet<String>,
}

type BranchFn<'a> = &'a mut dyn FnMut(&mut Compiler, &Expr, &Env) -> CResult<()>;

/// Symbols of the runtime that a function label must not shadow.
const RUNTIME_SYMBOLS: [&str; 9] = [
    BUILTIN_LENGTH,
    BUILTIN_PRINTF,
    BUILTIN_IMMUTABLE,
    "Lread",
    "Lwrite",
    "Lama_error",
    "Lama_match_failure",
    "Lama_finish",
    "Lama_stack_bottom",
];

fn is_reserved_label(l: &str) -> bool {
    let lambda = l.strip_prefix("Llambda_").is_some_and(|n| n.bytes().all(|b| b.is_ascii_digit()));
    lambda || RUNTIME_SYMBOLS.contains(&l)
}

impl Compiler {
    fn emit(&mut self, d: Draft) {
        self.funs[self.cur].code.push(d);
    }

    fn instr(&mut self, i: Instr) {
        self.emit(Draft::Final(i));
    }

    fn label(&mut self) -> String {
        self.next_label += 1;
        format!("L{}", self.next_label)
    }

    fn function_label(&mut self, name: &str) -> String {
        let base = format!("L{name}");
        let mut label = base.clone();
        let mut n = 0;
        while is_reserved_label(&label) || self.used_labels.contains(&label) {
            n += 1;
            label = format!("{base}_{n}");
        }
        self.used_labels.insert(label.clone());
        label
    }

    fn mention_var(&mut self, v: VarId) {
        let info = &self.vars[v];
        if info.place != Place::Global && info.owner != self.cur {
            let f = &mut self.funs[self.cur];
            if !f.immediate.contains(&v) {
                f.immediate.push(v);
            }
        }
    }

    fn mention_fun(&mut self, g: FunId) {
        let f = &mut self.funs[self.cur];
        if !f.references.contains(&g) {
            f.references.push(g);
        }
    }

    fn new_var(&mut self, name: &str, place: Place, mutable: bool) -> VarId {
        self.vars.push(VarInfo { name: name.to_string(), owner: self.cur, place, mutable });
        self.vars.len() - 1
    }

    fn new_function(&mut self, label: String, arity: usize) -> FunId {
        self.funs.push(Function {
            label,
            parent: Some(self.cur),
            arity,
            params: Vec::new(),
            nlocals: 0,
            code: Vec::new(),
            immediate: Vec::new(),
            references: Vec::new(),
            captures: Vec::new(),
        });
        self.funs.len() - 1
    }

    fn resolve(&self, env: &Env, name: &str, loc: SourceLoc) -> CResult<Entity> {
        match lookup(env, name) {
            Some(e) => Ok(e),
            None => error(loc, format!("unbound name `{name}`")),
        }
    }

    /// Compiles the body of `g` in its own code buffer.
    fn function_body(&mut self, g: FunId, params: &[String], body: &Expr, env: &Env) -> CResult<()> {
        let saved = std::mem::replace(&mut self.cur, g);
        let mut env = env.clone();
        for (i, p) in params.iter().enumerate() {
            let v = self.new_var(p, Place::Arg(i), true);
            self.funs[g].params.push(v);
            env = bind(&env, p, Entity::Var(v));
        }
        let label = self.funs[g].label.clone();
        self.instr(Instr::Label(label));
        self.emit(Draft::Begin);
        self.emit(Draft::BoxArgs);
        self.expr(body, &env)?;
        if kind_of(body) == Some(Kind::Void) {
            self.instr(Instr::Const(0));
        }
        self.instr(Instr::End);
        self.cur = saved;
        Ok(())
    }

    /// Binds the definitions of a scope and emits their initialization.
    fn scope(&mut self, defs: &[Definition], env: &Env, global: bool) -> CResult<Env> {
        let mut inner = env.clone();
        let mut vars = Vec::new();
        let mut funs = Vec::new();
        for d in defs {
            match d {
                Definition::Var { name, .. } | Definition::Val { name, .. } => {
                    let place = if global {
                        Place::Global
                    } else {
                        let f = &mut self.funs[self.cur];
                        f.nlocals += 1;
                        Place::Local(f.nlocals - 1)
                    };
                    let v = self.new_var(name, place, matches!(d, Definition::Var { .. }));
                    inner = bind(&inner, name, Entity::Var(v));
                    vars.push(v);
                }
                Definition::Fun { name, params, .. } => {
                    let label = self.function_label(name);
                    let g = self.new_function(label, params.len());
                    inner = bind(&inner, name, Entity::Fun(g));
                    funs.push(g);
                }
            }
        }
        if !global {
            for &v in &vars {
                self.emit(Draft::ScopeInit(v));
            }
        }
        let mut funs = funs.into_iter();
        let mut vars = vars.into_iter();
        for d in defs {
            match d {
                Definition::Fun { params, body, .. } => {
                    let g = funs.next().unwrap();
                    self.function_body(g, params, body, &inner)?;
                }
                Definition::Var { init, .. } => {
                    let v = vars.next().unwrap();
                    if let Some(init) = init {
                        self.initialize(v, init, &inner)?;
                    }
                }
                Definition::Val { init, .. } => {
                    let v = vars.next().unwrap();
                    self.initialize(v, init, &inner)?;
                }
            }
        }
        Ok(inner)
    }

    fn initialize(&mut self, v: VarId, init: &Expr, env: &Env) -> CResult<()> {
        self.mention_var(v);
        self.emit(Draft::StorePrefix(v));
        self.expr(init, env)?;
        self.emit(Draft::Store { var: v, keep: false });
        Ok(())
    }

    fn exprs(&mut self, es: &[Expr], env: &Env) -> CResult<()> {
        es.iter().try_for_each(|e| self.expr(e, env))
    }

    fn expr(&mut self, e: &Expr, env: &Env) -> CResult<()> {
        use ExprKind::*;
        match &e.kind {
            Const(n) => self.instr(Instr::Const(*n)),
            Chr(c) => self.instr(Instr::Const(*c as i64)),
            Str(s) => self.instr(Instr::String(s.clone())),
            Var(x) => match self.resolve(env, x, e.loc)? {
                Entity::Var(v) => {
                    self.mention_var(v);
                    self.emit(Draft::Load(v));
                }
                Entity::Fun(g) => {
                    self.mention_fun(g);
                    self.emit(Draft::FunValue(g));
                }
                Entity::Builtin(_) => return error(e.loc, format!("builtin `{x}` can only be called")),
            },
            Ref(_) | ElemRef(..) => unreachable!("reference outside an assignment"),
            Ignore(inner) => match &inner.kind {
                Assign(l, r) => self.assign(l, r, false, env, env)?,
                _ => {
                    self.expr(inner, env)?;
                    self.instr(Instr::Drop);
                }
            },
            Binop(op, a, b) => {
                self.expr(a, env)?;
                self.expr(b, env)?;
                self.instr(Instr::Binop(*op));
            }
            Assign(l, r) => self.assign(l, r, true, env, env)?,
            Seq(a, b) => {
                self.expr(a, env)?;
                self.expr(b, env)?;
            }
            Skip => {}
            If(c, a, b) => self.if_chain(c, a, b, env, None)?,
            While(c, body) => {
                let (loop_, cond) = (self.label(), self.label());
                self.instr(Instr::Jmp(cond.clone()));
                self.instr(Instr::Label(loop_.clone()));
                self.expr(body, env)?;
                self.instr(Instr::Label(cond));
                self.expr(c, env)?;
                self.instr(Instr::CJmp(JumpCond::NonZero, loop_));
            }
            DoWhile(body, c) => {
                let loop_ = self.label();
                self.instr(Instr::Label(loop_.clone()));
                self.expr(body, env)?;
                self.expr(c, env)?;
                self.instr(Instr::CJmp(JumpCond::NonZero, loop_));
            }
            Read(x) => {
                let target = self.store_target(env, x, e.loc)?;
                if let Some(v) = target {
                    self.emit(Draft::StorePrefix(v));
                }
                self.instr(Instr::Read);
                self.finish_store(target, false);
            }
            Write(x) => {
                self.expr(x, env)?;
                self.instr(Instr::Write);
            }
            Scope(defs, body) => {
                let inner = self.scope(defs, env, false)?;
                self.expr(body, &inner)?;
            }
            Call(callee, args) => self.call(callee, args, env)?,
            Lambda(params, body) => {
                self.next_lambda += 1;
                let label = format!("Llambda_{}", self.next_lambda);
                let g = self.new_function(label, params.len());
                self.function_body(g, params, body, env)?;
                self.mention_fun(g);
                self.emit(Draft::FunValue(g));
            }
            ArrayLit(es) => {
                self.exprs(es, env)?;
                self.instr(Instr::Array(es.len()));
            }
            Sexp(tag, es) => {
                self.exprs(es, env)?;
                self.instr(Instr::Sexp(tag.clone(), es.len()));
            }
            Elem(a, i) => {
                self.expr(a, env)?;
                self.expr(i, env)?;
                self.instr(Instr::Elem);
            }
            Case(s, branches) => {
                self.case(s, branches, e.loc, env, &mut |c: &mut Compiler, body: &Expr, env: &Env| c.expr(body, env))?
            }
        }
        Ok(())
    }

    /// Compiles an `if` whose exit may be shared with an enclosing one, so
    /// that `elif` chains jump straight to the final exit.
    fn if_chain(&mut self, c: &Expr, a: &Expr, b: &Expr, env: &Env, exit: Option<&str>) -> CResult<()> {
        self.expr(c, env)?;
        if matches!(b.kind, ExprKind::Skip) {
            let end = self.label();
            self.instr(Instr::CJmp(JumpCond::Zero, end.clone()));
            self.expr(a, env)?;
            self.instr(Instr::Label(end));
            return Ok(());
        }
        let otherwise = self.label();
        let (end, owned) = match exit {
            Some(l) => (l.to_string(), false),
            None => (self.label(), true),
        };
        self.instr(Instr::CJmp(JumpCond::Zero, otherwise.clone()));
        self.expr(a, env)?;
        self.instr(Instr::Jmp(end.clone()));
        self.instr(Instr::Label(otherwise));
        match &b.kind {
            ExprKind::If(c2, a2, b2) => self.if_chain(c2, a2, b2, env, Some(&end))?,
            _ => self.expr(b, env)?,
        }
        if owned {
            self.instr(Instr::Label(end));
        }
        Ok(())
    }

    /// Resolves an assignment target; `None` means the binding is immutable.
    fn store_target(&mut self, env: &Env, x: &str, loc: SourceLoc) -> CResult<Option<VarId>> {
        match self.resolve(env, x, loc)? {
            Entity::Var(v) if self.vars[v].mutable => {
                self.mention_var(v);
                Ok(Some(v))
            }
            Entity::Var(_) | Entity::Fun(_) => Ok(None),
            Entity::Builtin(_) => error(loc, format!("cannot assign to builtin `{x}`")),
        }
    }

    fn finish_store(&mut self, target: Option<VarId>, keep: bool) {
        match target {
            Some(v) => self.emit(Draft::Store { var: v, keep }),
            None => {
                self.instr(Instr::Call { name: BUILTIN_IMMUTABLE.into(), nargs: 1 });
                if !keep {
                    self.instr(Instr::Drop);
                }
            }
        }
    }

    /// Compiles `lhs := rhs`. The target is resolved in `lenv`, the right
    /// side is evaluated afterwards in `renv`.
    fn assign(&mut self, lhs: &Expr, rhs: &Expr, keep: bool, lenv: &Env, renv: &Env) -> CResult<()> {
        use ExprKind::*;
        match &lhs.kind {
            Ref(x) => {
                let target = self.store_target(lenv, x, lhs.loc)?;
                if let Some(v) = target {
                    self.emit(Draft::StorePrefix(v));
                }
                self.expr(rhs, renv)?;
                self.finish_store(target, keep);
            }
            ElemRef(a, i) => {
                self.expr(a, lenv)?;
                self.expr(i, lenv)?;
                self.expr(rhs, renv)?;
                self.instr(Instr::Sta);
                if !keep {
                    self.instr(Instr::Drop);
                }
            }
            If(c, a, b) => {
                let (otherwise, end) = (self.label(), self.label());
                self.expr(c, lenv)?;
                self.instr(Instr::CJmp(JumpCond::Zero, otherwise.clone()));
                self.assign(a, rhs, keep, lenv, renv)?;
                self.instr(Instr::Jmp(end.clone()));
                self.instr(Instr::Label(otherwise));
                self.assign(b, rhs, keep, lenv, renv)?;
                self.instr(Instr::Label(end));
            }
            Seq(a, b) => {
                self.expr(a, lenv)?;
                self.assign(b, rhs, keep, lenv, renv)?;
            }
            Scope(defs, body) => {
                let inner = self.scope(defs, lenv, false)?;
                self.assign(body, rhs, keep, &inner, renv)?;
            }
            Case(s, branches) => {
                let mut branch =
                    |c: &mut Compiler, body: &Expr, env: &Env| c.assign(body, rhs, keep, env, renv);
                self.case(s, branches, lhs.loc, lenv, &mut branch)?;
            }
            _ => unreachable!("not a reference: {lhs:?}"),
        }
        Ok(())
    }

    fn call(&mut self, callee: &Expr, args: &[Expr], env: &Env) -> CResult<()> {
        if let ExprKind::Var(f) = &callee.kind {
            match self.resolve(env, f, callee.loc)? {
                Entity::Builtin(name) => {
                    let ok = if name == BUILTIN_LENGTH { args.len() == 1 } else { !args.is_empty() };
                    if !ok {
                        return error(callee.loc, format!("wrong number of arguments to `{f}`"));
                    }
                    self.exprs(args, env)?;
                    self.instr(Instr::Call { name: name.into(), nargs: args.len() });
                    return Ok(());
                }
                Entity::Fun(g) => {
                    let expected = self.funs[g].arity;
                    if expected != args.len() {
                        return error(
                            callee.loc,
                            format!("`{f}` expects {expected} arguments but is given {}", args.len()),
                        );
                    }
                    self.mention_fun(g);
                    self.emit(Draft::Callee(g));
                    self.exprs(args, env)?;
                    self.emit(Draft::Call(g, args.len()));
                    return Ok(());
                }
                Entity::Var(_) => {}
            }
        }
        self.expr(callee, env)?;
        self.exprs(args, env)?;
        self.instr(Instr::CallC(args.len()));
        Ok(())
    }

    /// Top-down branch-by-branch matching. The scrutinee stays on the stack
    /// while a branch is tested and is dropped when one matches.
    fn case(
        &mut self,
        s: &Expr,
        branches: &[(Pattern, Expr)],
        loc: SourceLoc,
        env: &Env,
        body: BranchFn<'_>,
    ) -> CResult<()> {
        self.expr(s, env)?;
        let end = self.label();
        let mut end_used = false;
        for (idx, (p, branch)) in branches.iter().enumerate() {
            if p.is_irrefutable() {
                self.instr(Instr::Drop);
                body(self, branch, env)?;
                break;
            }
            let next = self.label();
            self.pattern_tests(p, &mut Vec::new(), &next);
            self.instr(Instr::Drop);
            body(self, branch, env)?;
            self.instr(Instr::Jmp(end.clone()));
            end_used = true;
            self.instr(Instr::Label(next));
            if idx + 1 == branches.len() {
                self.instr(Instr::Fail(loc));
            }
        }
        if end_used {
            self.instr(Instr::Label(end));
        }
        Ok(())
    }

    fn pattern_tests(&mut self, p: &Pattern, path: &mut Vec<usize>, fail: &str) {
        let test = match p {
            Pattern::Wildcard | Pattern::Bind(_) => return,
            Pattern::ConstInt(n) => Instr::Patt(PattKind::Const(*n)),
            Pattern::Sexp(tag, ps) => Instr::Tag(tag.clone(), ps.len()),
            Pattern::Array(ps) => Instr::Patt(PattKind::Array(ps.len())),
        };
        self.instr(Instr::Dup);
        for &i in path.iter() {
            self.instr(Instr::Const(i as i64));
            self.instr(Instr::Elem);
        }
        self.instr(test);
        self.instr(Instr::CJmp(JumpCond::Zero, fail.to_string()));
        if let Pattern::Sexp(_, ps) | Pattern::Array(ps) = p {
            for (i, sub) in ps.iter().enumerate() {
                path.push(i);
                self.pattern_tests(sub, path, fail);
                path.pop();
            }
        }
    }

    /// Main's result is the value of a trailing ignored expression, so that
    /// a program ending in a call returns what the call returned.
    fn main_tail(&mut self, e: &Expr, env: &Env, global: bool) -> CResult<()> {
        match &e.kind {
            ExprKind::Scope(defs, body) => {
                let inner = self.scope(defs, env, global)?;
                self.main_tail(body, &inner, false)
            }
            ExprKind::Seq(a, b) => {
                self.expr(a, env)?;
                self.main_tail(b, env, false)
            }
            ExprKind::Ignore(inner) => match &inner.kind {
                ExprKind::Assign(l, r) => self.assign(l, r, true, env, env),
                _ => self.expr(inner, env),
            },
            _ => {
                self.expr(e, env)?;
                self.instr(Instr::Const(0));
                Ok(())
            }
        }
    }

    fn propagate_captures(&mut self) {
        for f in &mut self.funs {
            f.captures = f.immediate.clone();
        }
        loop {
            let mut changed = false;
            for f in 0..self.funs.len() {
                for gi in 0..self.funs[f].references.len() {
                    let g = self.funs[f].references[gi];
                    for vi in 0..self.funs[g].captures.len() {
                        let v = self.funs[g].captures[vi];
                        if self.vars[v].owner != f && !self.funs[f].captures.contains(&v) {
                            self.funs[f].captures.push(v);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn expand(&self, f: FunId, boxed: &[bool], out: &mut Vec<Instr>) {
        let fun = &self.funs[f];
        let slot = |v: VarId| match self.vars[v].place {
            Place::Global => Designation::Global(self.vars[v].name.clone()),
            Place::Local(i) => Designation::Local(i),
            Place::Arg(i) => Designation::Arg(i),
        };
        // Where the box of an outer variable is found.
        let box_of = |v: VarId| -> Designation {
            if self.vars[v].owner == f {
                slot(v)
            } else {
                Designation::Captured(fun.captures.iter().position(|&c| c == v).expect("uncaptured outer variable"))
            }
        };
        let direct = |v: VarId| self.vars[v].place == Place::Global || (self.vars[v].owner == f && !boxed[v]);
        let closure = |g: FunId| Instr::Closure {
            name: self.funs[g].label.clone(),
            captures: self.funs[g].captures.iter().map(|&v| box_of(v)).collect(),
        };
        for d in &fun.code {
            match d {
                Draft::Final(i) => out.push(i.clone()),
                Draft::Begin => out.push(Instr::Begin {
                    name: fun.label.clone(),
                    nargs: fun.arity,
                    nlocals: fun.nlocals,
                    captured: fun.captures.iter().map(|&v| self.vars[v].name.clone()).collect(),
                }),
                Draft::Load(v) if direct(*v) => out.push(Instr::Ld(slot(*v))),
                Draft::Load(v) => out.extend([Instr::Ld(box_of(*v)), Instr::Const(0), Instr::Elem]),
                Draft::StorePrefix(v) if direct(*v) => {}
                Draft::StorePrefix(v) => out.extend([Instr::Ld(box_of(*v)), Instr::Const(0)]),
                Draft::Store { var, keep } if direct(*var) => {
                    if *keep {
                        out.push(Instr::Dup);
                    }
                    out.push(Instr::St(slot(*var)));
                }
                Draft::Store { keep, .. } => {
                    out.push(Instr::Sta);
                    if !keep {
                        out.push(Instr::Drop);
                    }
                }
                Draft::ScopeInit(v) => {
                    out.push(Instr::Const(0));
                    if boxed[*v] {
                        out.push(Instr::Array(1));
                    }
                    out.push(Instr::St(slot(*v)));
                }
                Draft::BoxArgs => {
                    for &v in fun.params.iter().filter(|&&v| boxed[v]) {
                        out.extend([Instr::Ld(slot(v)), Instr::Array(1), Instr::St(slot(v))]);
                    }
                }
                Draft::Callee(g) if self.funs[*g].captures.is_empty() => {}
                Draft::Callee(g) => out.push(closure(*g)),
                Draft::Call(g, n) if self.funs[*g].captures.is_empty() => {
                    out.push(Instr::Call { name: self.funs[*g].label.clone(), nargs: *n })
                }
                Draft::Call(_, n) => out.push(Instr::CallC(*n)),
                Draft::FunValue(g) => out.push(closure(*g)),
            }
        }
    }

    fn preorder(&self) -> Vec<FunId> {
        let mut children = vec![Vec::new(); self.funs.len()];
        for (g, f) in self.funs.iter().enumerate() {
            if let Some(p) = f.parent {
                children[p].push(g);
            }
        }
        let mut order = Vec::new();
        let mut stack = vec![0];
        while let Some(f) = stack.pop() {
            order.push(f);
            stack.extend(children[f].iter().rev());
        }
        order
    }
}

/// Compiles a program, returning the code together with closure-conversion
/// facts about every function.
pub fn compile_sm_detailed(p: &Program) -> CResult<SmCompilation> {
    let mut c = Compiler {
        vars: Vec::new(),
        funs: Vec::new(),
        cur: 0,
        next_label: 0,
        next_lambda: 0,
        used_labels: HashSet::new(),
    };
    c.funs.push(Function {
        label: SmProgram::ENTRY.into(),
        parent: None,
        arity: 0,
        params: Vec::new(),
        nlocals: 0,
        code: Vec::new(),
        immediate: Vec::new(),
        references: Vec::new(),
        captures: Vec::new(),
    });
    let mut env: Env = None;
    env = bind(&env, "length", Entity::Builtin(BUILTIN_LENGTH));
    env = bind(&env, "printf", Entity::Builtin(BUILTIN_PRINTF));
    c.instr(Instr::Label(SmProgram::ENTRY.into()));
    c.emit(Draft::Begin);
    c.main_tail(&p.top, &env, true)?;
    c.instr(Instr::End);

    c.propagate_captures();
    let mut boxed = vec![false; c.vars.len()];
    for f in &c.funs {
        for &v in &f.captures {
            boxed[v] = true;
        }
    }
    let order = c.preorder();
    let mut code = Vec::new();
    for &f in &order {
        c.expand(f, &boxed, &mut code);
    }
    let names = |vs: &[VarId]| vs.iter().map(|&v| c.vars[v].name.clone()).collect::<Vec<_>>();
    let functions = order
        .iter()
        .map(|&f| {
            let fun = &c.funs[f];
            FunInfo {
                label: fun.label.clone(),
                parent: fun.parent.map(|p| c.funs[p].label.clone()),
                params: names(&fun.params),
                immediate: names(&fun.immediate),
                references: fun.references.iter().map(|&g| c.funs[g].label.clone()).collect(),
                captures: names(&fun.captures),
            }
        })
        .collect();
    Ok(SmCompilation { program: SmProgram { code }, functions })
}

pub fn compile_sm(p: &Program) -> CResult<SmProgram> {
    compile_sm_detailed(p).map(|c| c.program)
}
