//! Helpers shared by the integration tests: random program generators and
//! oracles written independently of the compiler.

#![allow(dead_code)]

use lamina::ast::{Definition, Expr, ExprKind, Pattern, Program};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::PathBuf;

pub const FIX_MAX: i64 = (1 << 62) - 1;
pub const FIX_MIN: i64 = -(1 << 62);

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

/// Reduces an exact integer into the 63-bit two's complement range.
pub fn wrap(x: i128) -> i64 {
    let m = x.rem_euclid(1 << 63);
    if m > FIX_MAX as i128 {
        (m - (1 << 63)) as i64
    } else {
        m as i64
    }
}

pub const OPERATORS: [&str; 13] = ["+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "&&", "!!"];

/// Reference semantics of a binary operator on fixnums, computed exactly on
/// 128-bit integers and then wrapped. `None` for division by zero.
pub fn oracle_binop(op: &str, a: i64, b: i64) -> Option<i64> {
    let (x, y) = (a as i128, b as i128);
    Some(match op {
        "+" => wrap(x + y),
        "-" => wrap(x - y),
        "*" => wrap(x * y),
        "/" | "%" if y == 0 => return None,
        "/" => wrap(x / y),
        "%" => wrap(x % y),
        "==" => (x == y) as i64,
        "!=" => (x != y) as i64,
        "<" => (x < y) as i64,
        "<=" => (x <= y) as i64,
        ">" => (x > y) as i64,
        ">=" => (x >= y) as i64,
        "&&" => (x != 0 && y != 0) as i64,
        "!!" => (x != 0 || y != 0) as i64,
        _ => panic!("unknown operator {op}"),
    })
}

/// Source text of an integer literal that is safe in any operand position.
pub fn literal(n: i64) -> String {
    if n < 0 {
        format!("({n})")
    } else {
        n.to_string()
    }
}

/// Random fixnum biased towards small values and the ends of the range.
pub fn random_fixnum(rng: &mut impl Rng) -> i64 {
    match rng.gen_range(0..6) {
        0 => rng.gen_range(-10..=10),
        1 => FIX_MAX - rng.gen_range(0..1000),
        2 => FIX_MIN + rng.gen_range(0..1000),
        3 => rng.gen_range(-(1i64 << 32)..=(1i64 << 32)),
        _ => rng.gen_range(FIX_MIN..=FIX_MAX),
    }
}

#[derive(Debug, Clone)]
pub struct GenProgram {
    pub source: String,
    pub input: Vec<u8>,
}

struct Gen {
    rng: StdRng,
    counter: usize,
    /// Integer variables in scope.
    vars: Vec<String>,
    /// Global arrays with their lengths.
    arrays: Vec<(String, usize)>,
    /// Callable functions with their arities.
    funs: Vec<(String, usize)>,
    /// Loop counters and other names declared at the top.
    declared: Vec<String>,
    input: Vec<i64>,
}

impl Gen {
    fn fresh(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}{}", self.counter)
    }

    fn small(&mut self) -> i64 {
        self.rng.gen_range(-20..=20)
    }

    fn lit(&mut self) -> String {
        let n = if self.rng.gen_bool(0.1) { random_fixnum(&mut self.rng) } else { self.small() };
        literal(n)
    }

    fn var(&mut self) -> String {
        if self.vars.is_empty() {
            return self.lit();
        }
        let i = self.rng.gen_range(0..self.vars.len());
        self.vars[i].clone()
    }

    fn expr(&mut self, depth: usize) -> String {
        if depth == 0 {
            return if self.rng.gen_bool(0.5) { self.lit() } else { self.var() };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..20) {
            0..=2 => self.lit(),
            3..=5 => self.var(),
            6..=10 => {
                let op = ["+", "-", "*", "==", "!=", "<", "<=", ">", ">=", "&&", "!!"][self.rng.gen_range(0..11)];
                format!("({} {op} {})", self.expr(d), self.expr(d))
            }
            11 => {
                let op = if self.rng.gen_bool(0.5) { "/" } else { "%" };
                let divisor = if self.rng.gen_bool(0.05) {
                    self.var()
                } else {
                    let k = self.rng.gen_range(1..9) * if self.rng.gen_bool(0.5) { 1 } else { -1 };
                    literal(k)
                };
                format!("({} {op} {divisor})", self.expr(d))
            }
            12 if !self.arrays.is_empty() => {
                let (a, n) = self.arrays[self.rng.gen_range(0..self.arrays.len())].clone();
                if self.rng.gen_bool(0.3) {
                    format!("length ({a})")
                } else {
                    format!("{a}[{}]", self.rng.gen_range(0..n))
                }
            }
            13 if !self.funs.is_empty() => {
                let (f, n) = self.funs[self.rng.gen_range(0..self.funs.len())].clone();
                let args: Vec<String> = (0..n).map(|_| self.expr(d.min(1))).collect();
                format!("{f} ({})", args.join(", "))
            }
            14 => format!("if {} then {} else {} fi", self.expr(d), self.expr(d), self.expr(d)),
            15 => {
                let x = self.fresh("x");
                self.vars.push(x.clone());
                let body = self.expr(d);
                self.vars.pop();
                format!("(fun ({x}) {{ {body} }}) ({})", self.expr(d))
            }
            16 => {
                let tag = ["A", "Pair", "Node"][self.rng.gen_range(0..3)];
                let k = self.rng.gen_range(1..4);
                let elems: Vec<String> = (0..k).map(|_| self.expr(d)).collect();
                format!("{tag} ({})[{}]", elems.join(", "), self.rng.gen_range(0..k))
            }
            17 => {
                let a = self.lit();
                let b = self.expr(d);
                format!("case {} of 0 -> {a} | 1 -> {b} | _ -> {} esac", self.expr(d), self.expr(d))
            }
            _ => {
                let v = self.var();
                if v.starts_with(['g', 'p']) && self.rng.gen_bool(0.5) {
                    format!("({v} := {})", self.expr(d))
                } else {
                    format!("[{}, {}][{}]", self.expr(d), v, self.rng.gen_range(0..2))
                }
            }
        }
    }

    fn stmt(&mut self, depth: usize) -> String {
        let d = depth.saturating_sub(1);
        let assignable: Vec<String> = self.vars.iter().filter(|v| v.starts_with('g')).cloned().collect();
        match self.rng.gen_range(0..14) {
            0..=3 => format!("write ({})", self.expr(3)),
            4 | 5 if !assignable.is_empty() => {
                let v = assignable[self.rng.gen_range(0..assignable.len())].clone();
                format!("{v} := {}", self.expr(3))
            }
            6 if !self.arrays.is_empty() => {
                let (a, n) = self.arrays[self.rng.gen_range(0..self.arrays.len())].clone();
                format!("{a}[{}] := {}", self.rng.gen_range(0..n), self.expr(2))
            }
            7 if depth > 0 => format!("if {} then {} else {} fi", self.expr(2), self.block(d), self.block(d)),
            8 if depth > 0 => {
                let i = self.fresh("i");
                self.declared.push(i.clone());
                let k = self.rng.gen_range(0..5);
                self.vars.push(i.clone());
                let body = self.block(d);
                self.vars.pop();
                format!("for {i} := 0, {i} < {k}, {i} := {i} + 1 do {body} od")
            }
            9 if depth > 0 => {
                let c = self.fresh("c");
                self.declared.push(c.clone());
                let k = self.rng.gen_range(1..4);
                let body = self.block(d);
                format!("{c} := 0; do {body}; {c} := {c} + 1 while {c} < {k} od")
            }
            10 if depth > 0 => {
                let (a, b) = (self.fresh("a"), self.fresh("b"));
                let tag = ["A", "B"][self.rng.gen_range(0..2)];
                format!(
                    "case {tag} ({}, {}) of A ({a}, {b}) -> write ({a} - {b}) | B ({a}, _) -> write ({a}) esac",
                    self.expr(2),
                    self.expr(2)
                )
            }
            11 if !assignable.is_empty() => {
                let v = assignable[self.rng.gen_range(0..assignable.len())].clone();
                for _ in 0..20 {
                    let n = self.small();
                    self.input.push(n);
                }
                format!("read ({v})")
            }
            12 => format!("printf (\"%d %d\\n\", {}, {})", self.expr(2), self.expr(2)),
            _ => {
                let c = self.fresh("p");
                let step = self.expr(1);
                format!("(var {c} = 0; val inc = fun () {{ {c} := {c} + {step} }}; inc (); inc (); write ({c}))")
            }
        }
    }

    fn block(&mut self, depth: usize) -> String {
        let n = self.rng.gen_range(1..3);
        let stmts: Vec<String> = (0..n).map(|_| self.stmt(depth)).collect();
        stmts.join("; ")
    }
}

/// A terminating program mixing arithmetic, control flow, arrays,
/// S-expressions, pattern matching, closures and input.
pub fn random_program(seed: u64) -> GenProgram {
    let mut g = Gen {
        rng: StdRng::seed_from_u64(seed),
        counter: 0,
        vars: Vec::new(),
        arrays: Vec::new(),
        funs: Vec::new(),
        declared: Vec::new(),
        input: Vec::new(),
    };
    let mut header = String::new();
    let nglobals = g.rng.gen_range(2..5);
    let mut inits = Vec::new();
    for _ in 0..nglobals {
        let v = g.fresh("g");
        inits.push(format!("{v} = {}", g.lit()));
        g.vars.push(v);
    }
    header.push_str(&format!("var {};\n", inits.join(", ")));
    for _ in 0..g.rng.gen_range(0..3) {
        let a = g.fresh("arr");
        let n = g.rng.gen_range(1..5);
        let elems: Vec<String> = (0..n).map(|_| g.lit()).collect();
        header.push_str(&format!("var {a} = [{}];\n", elems.join(", ")));
        g.arrays.push((a, n));
    }
    for _ in 0..g.rng.gen_range(0..4) {
        let f = g.fresh("f");
        let params: Vec<String> = (0..g.rng.gen_range(0..3)).map(|_| g.fresh("q")).collect();
        let saved = g.vars.len();
        g.vars.extend(params.iter().cloned());
        let body = if g.rng.gen_bool(0.4) {
            let h = g.fresh("h");
            let x = g.fresh("x");
            g.vars.push(x.clone());
            let inner = g.expr(2);
            g.vars.pop();
            format!("fun {h} ({x}) {{ {inner} }} {h} ({})", g.expr(2))
        } else {
            g.expr(3)
        };
        g.vars.truncate(saved);
        header.push_str(&format!("fun {f} ({}) {{ {body} }}\n", params.join(", ")));
        g.funs.push((f, params.len()));
    }
    let nstmts = g.rng.gen_range(3..9);
    let body: Vec<String> = (0..nstmts).map(|_| g.stmt(2)).collect();
    if !g.declared.is_empty() {
        header.push_str(&format!("var {};\n", g.declared.join(", ")));
    }
    let source = format!("{header}{}\n", body.join(";\n"));
    let input = g.input.iter().map(|n| format!("{n}\n")).collect::<String>().into_bytes();
    GenProgram { source, input }
}

struct FunShape {
    name: String,
    params: Vec<String>,
    locals: Vec<String>,
    children: Vec<FunShape>,
    /// Position in postorder; a function only calls functions that come
    /// earlier, so every program terminates.
    order: usize,
}

struct NestGen {
    rng: StdRng,
    counter: usize,
    order: usize,
}

impl NestGen {
    fn fresh(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}{}", self.counter)
    }

    fn shape(&mut self, depth: usize) -> FunShape {
        let name = self.fresh("f");
        let params = (0..self.rng.gen_range(0..3)).map(|_| self.fresh("v")).collect();
        let locals = (0..self.rng.gen_range(0..3)).map(|_| self.fresh("v")).collect();
        let nchildren = if depth < 3 { self.rng.gen_range(0..3) } else { 0 };
        let children = (0..nchildren).map(|_| self.shape(depth + 1)).collect();
        let order = self.order;
        self.order += 1;
        FunShape { name, params, locals, children, order }
    }

    fn atom(&mut self, vars: &[String]) -> String {
        if vars.is_empty() || self.rng.gen_bool(0.3) {
            self.rng.gen_range(0..10).to_string()
        } else {
            vars[self.rng.gen_range(0..vars.len())].clone()
        }
    }

    fn sum(&mut self, vars: &[String]) -> String {
        let n = self.rng.gen_range(1..4);
        let terms: Vec<String> = (0..n).map(|_| self.atom(vars)).collect();
        terms.join(" + ")
    }

    fn render(&mut self, f: &FunShape, outer: &[String], visible: &[(String, usize, usize)]) -> String {
        let mut vars: Vec<String> = outer.iter().chain(&f.params).cloned().collect();
        let mut out = format!("fun {} ({}) {{\n", f.name, f.params.join(", "));
        if !f.locals.is_empty() {
            let mut inits = Vec::new();
            for l in &f.locals {
                inits.push(format!("{l} = {}", self.sum(&vars)));
                vars.push(l.clone());
            }
            out.push_str(&format!("var {};\n", inits.join(", ")));
        }
        let mut inner_visible = visible.to_vec();
        inner_visible.extend(f.children.iter().map(|c| (c.name.clone(), c.params.len(), c.order)));
        for c in &f.children {
            out.push_str(&self.render(c, &vars, &inner_visible));
        }
        let callable: Vec<_> = inner_visible.iter().filter(|(_, _, o)| *o < f.order).cloned().collect();
        let mut terms = vec![self.sum(&vars)];
        for _ in 0..self.rng.gen_range(0..3) {
            if callable.is_empty() {
                break;
            }
            let (g, n, _) = callable[self.rng.gen_range(0..callable.len())].clone();
            let args: Vec<String> = (0..n).map(|_| self.atom(&vars)).collect();
            terms.push(format!("{g} ({})", args.join(", ")));
        }
        let outer_vars: Vec<&String> = outer.iter().filter(|v| v.starts_with('v') || v.starts_with('m')).collect();
        if !outer_vars.is_empty() && self.rng.gen_bool(0.3) {
            let v = outer_vars[self.rng.gen_range(0..outer_vars.len())].clone();
            out.push_str(&format!("{v} := {v} + 1;\n"));
        }
        out.push_str(&terms.join(" + "));
        out.push_str("\n}\n");
        out
    }
}

/// A terminating program of nested named functions. All names are distinct,
/// so free variables can be computed by name.
pub fn random_nested_program(seed: u64) -> String {
    let mut g = NestGen { rng: StdRng::seed_from_u64(seed), counter: 0, order: 0 };
    let globals: Vec<String> = (0..2).map(|_| g.fresh("g")).collect();
    let outer_roots: Vec<FunShape> = (0..g.rng.gen_range(1..3)).map(|_| g.shape(0)).collect();
    let locals: Vec<String> = (0..2).map(|_| g.fresh("m")).collect();
    let inner_roots: Vec<FunShape> = (0..g.rng.gen_range(1..3)).map(|_| g.shape(0)).collect();

    let mut src = format!("var {} = 1, {} = 2;\n", globals[0], globals[1]);
    let outer_visible: Vec<_> = outer_roots.iter().map(|f| (f.name.clone(), f.params.len(), f.order)).collect();
    for f in &outer_roots {
        src.push_str(&g.render(f, &globals, &outer_visible));
    }
    let mut inner_visible = outer_visible.clone();
    inner_visible.extend(inner_roots.iter().map(|f| (f.name.clone(), f.params.len(), f.order)));
    src.push_str(&format!("(var {} = 3, {} = 4;\n", locals[0], locals[1]));
    let scope_vars: Vec<String> = globals.iter().chain(&locals).cloned().collect();
    for f in &inner_roots {
        src.push_str(&g.render(f, &scope_vars, &inner_visible));
    }
    let calls: Vec<String> = inner_roots
        .iter()
        .chain(&outer_roots)
        .map(|f| format!("write ({} ({}))", f.name, vec!["5"; f.params.len()].join(", ")))
        .collect();
    src.push_str(&calls.join(";\n"));
    src.push_str(")\n");
    src
}

#[derive(Default)]
struct FunFacts {
    declared: HashSet<String>,
    uses: HashSet<String>,
    refs: HashSet<String>,
}

struct FreeVars {
    fun_names: HashSet<String>,
    facts: HashMap<String, FunFacts>,
    lambdas: usize,
}

impl FreeVars {
    fn declare(&mut self, f: &str, name: &str) {
        self.facts.get_mut(f).unwrap().declared.insert(name.to_string());
    }

    fn mention(&mut self, f: &str, name: &str) {
        let facts = self.facts.get_mut(f).unwrap();
        if self.fun_names.contains(name) {
            facts.refs.insert(name.to_string());
        } else {
            facts.uses.insert(name.to_string());
        }
    }

    fn function(&mut self, id: String, params: &[String], body: &Expr) {
        let facts = FunFacts { declared: params.iter().cloned().collect(), ..FunFacts::default() };
        self.facts.insert(id.clone(), facts);
        self.expr(&id, body);
    }

    fn pattern(&mut self, f: &str, p: &Pattern) {
        match p {
            Pattern::Bind(n) => self.declare(f, n),
            Pattern::Sexp(_, ps) | Pattern::Array(ps) => ps.iter().for_each(|p| self.pattern(f, p)),
            Pattern::Wildcard | Pattern::ConstInt(_) => {}
        }
    }

    fn expr(&mut self, f: &str, e: &Expr) {
        match &e.kind {
            ExprKind::Const(_) | ExprKind::Str(_) | ExprKind::Chr(_) | ExprKind::Skip => {}
            ExprKind::Var(n) | ExprKind::Ref(n) | ExprKind::Read(n) => self.mention(f, n),
            ExprKind::Ignore(a) | ExprKind::Write(a) => self.expr(f, a),
            ExprKind::Binop(_, a, b)
            | ExprKind::Assign(a, b)
            | ExprKind::Seq(a, b)
            | ExprKind::While(a, b)
            | ExprKind::DoWhile(a, b)
            | ExprKind::Elem(a, b)
            | ExprKind::ElemRef(a, b) => {
                self.expr(f, a);
                self.expr(f, b);
            }
            ExprKind::If(c, a, b) => {
                self.expr(f, c);
                self.expr(f, a);
                self.expr(f, b);
            }
            ExprKind::Scope(defs, body) => {
                for d in defs {
                    match d {
                        Definition::Var { name, init, .. } => {
                            self.declare(f, name);
                            if let Some(init) = init {
                                self.expr(f, init);
                            }
                        }
                        Definition::Val { name, init, .. } => {
                            self.declare(f, name);
                            self.expr(f, init);
                        }
                        Definition::Fun { name, params, body, .. } => self.function(name.clone(), params, body),
                    }
                }
                self.expr(f, body);
            }
            ExprKind::Call(callee, args) => {
                self.expr(f, callee);
                args.iter().for_each(|a| self.expr(f, a));
            }
            ExprKind::Lambda(params, body) => {
                self.lambdas += 1;
                let id = format!("lambda#{}", self.lambdas);
                self.fun_names.insert(id.clone());
                self.facts.get_mut(f).unwrap().refs.insert(id.clone());
                self.function(id, params, body);
            }
            ExprKind::ArrayLit(es) | ExprKind::Sexp(_, es) => es.iter().for_each(|x| self.expr(f, x)),
            ExprKind::Case(s, branches) => {
                self.expr(f, s);
                for (p, body) in branches {
                    self.pattern(f, p);
                    self.expr(f, body);
                }
            }
        }
    }
}

fn collect_fun_names(e: &Expr, out: &mut HashSet<String>) {
    let mut walk = |x: &Expr| collect_fun_names(x, out);
    match &e.kind {
        ExprKind::Scope(defs, body) => {
            for d in defs {
                match d {
                    Definition::Fun { name, body, .. } => {
                        out.insert(name.clone());
                        collect_fun_names(body, out);
                    }
                    Definition::Var { init: Some(i), .. } | Definition::Val { init: i, .. } => collect_fun_names(i, out),
                    Definition::Var { init: None, .. } => {}
                }
            }
            collect_fun_names(body, out);
        }
        ExprKind::Ignore(a) | ExprKind::Write(a) => walk(a),
        ExprKind::Binop(_, a, b)
        | ExprKind::Assign(a, b)
        | ExprKind::Seq(a, b)
        | ExprKind::While(a, b)
        | ExprKind::DoWhile(a, b)
        | ExprKind::Elem(a, b)
        | ExprKind::ElemRef(a, b) => {
            collect_fun_names(a, out);
            collect_fun_names(b, out);
        }
        ExprKind::If(c, a, b) => {
            collect_fun_names(c, out);
            collect_fun_names(a, out);
            collect_fun_names(b, out);
        }
        ExprKind::Call(c, args) => {
            collect_fun_names(c, out);
            args.iter().for_each(|a| collect_fun_names(a, out));
        }
        ExprKind::Lambda(_, body) => collect_fun_names(body, out),
        ExprKind::ArrayLit(es) | ExprKind::Sexp(_, es) => es.iter().for_each(|x| collect_fun_names(x, out)),
        ExprKind::Case(s, bs) => {
            collect_fun_names(s, out);
            bs.iter().for_each(|(_, b)| collect_fun_names(b, out));
        }
        _ => {}
    }
}

/// Variables each named function must carry in its closure: the non-global
/// variables it mentions but does not declare, together with those needed by
/// the functions it mentions, to a fixpoint. Assumes all names are distinct.
pub fn oracle_captures(p: &Program) -> HashMap<String, BTreeSet<String>> {
    let mut fun_names = HashSet::new();
    collect_fun_names(&p.top, &mut fun_names);
    let globals: HashSet<String> = p.globals().iter().map(|d| d.name().to_string()).collect();
    let mut fv = FreeVars { fun_names, facts: HashMap::new(), lambdas: 0 };
    fv.function("main".into(), &[], &p.top);

    let mut caps: HashMap<String, BTreeSet<String>> = fv
        .facts
        .iter()
        .map(|(f, facts)| {
            let direct = facts
                .uses
                .iter()
                .filter(|v| !facts.declared.contains(*v) && !globals.contains(*v))
                .cloned()
                .collect();
            (f.clone(), direct)
        })
        .collect();
    loop {
        let mut changed = false;
        for (f, facts) in &fv.facts {
            let mut extra = BTreeSet::new();
            for g in &facts.refs {
                for v in &caps[g] {
                    if !facts.declared.contains(v) && !caps[f].contains(v) {
                        extra.insert(v.clone());
                    }
                }
            }
            if !extra.is_empty() {
                changed = true;
                caps.get_mut(f).unwrap().extend(extra);
            }
        }
        if !changed {
            break;
        }
    }
    caps.retain(|f, _| f != "main" && !f.starts_with("lambda#"));
    caps
}
