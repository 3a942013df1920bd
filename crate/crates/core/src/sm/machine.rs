//! Stack machine interpreter.

use super::{Designation, Instr, JumpCond, PattKind, SmProgram, BUILTIN_IMMUTABLE, BUILTIN_LENGTH, BUILTIN_PRINTF};
use crate::value::{self, RunOutcome, RuntimeFailure, Value, World};
use lamina_runtime::Failure;
use std::collections::HashMap;
use std::rc::Rc;

pub struct SmClosure {
    entry: usize,
    arity: usize,
    captures: Vec<Val>,
}

type Val = Value<SmClosure>;

/// Counters of an instrumented run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SmStats {
    pub instructions: u64,
    pub jmps: u64,
    pub cjmps: u64,
    pub calls: u64,
}

struct Frame {
    args: Vec<Val>,
    locals: Vec<Val>,
    captures: Rc<SmClosure>,
    ret: usize,
}

struct Machine<'p> {
    code: &'p [Instr],
    labels: HashMap<&'p str, usize>,
    stack: Vec<Val>,
    frames: Vec<Frame>,
    world: World,
    stats: SmStats,
}

impl<'p> Machine<'p> {
    fn pop(&mut self) -> Val {
        self.stack.pop().expect("stack machine underflow")
    }

    fn pop_n(&mut self, n: usize) -> Vec<Val> {
        let at = self.stack.len().checked_sub(n).expect("stack machine underflow");
        self.stack.split_off(at)
    }

    fn target(&self, label: &str) -> usize {
        *self.labels.get(label).unwrap_or_else(|| panic!("undefined label `{label}`"))
    }

    fn arity_at(&self, entry: usize) -> usize {
        match &self.code[entry + 1] {
            Instr::Begin { nargs, .. } => *nargs,
            i => panic!("function entry is followed by {i}"),
        }
    }

    fn frame(&mut self) -> &mut Frame {
        self.frames.last_mut().expect("no active frame")
    }

    fn cell(&mut self, d: &Designation) -> &mut Val {
        match d {
            Designation::Local(i) => &mut self.frame().locals[*i],
            Designation::Arg(i) => &mut self.frame().args[*i],
            d => unreachable!("{d} is not a frame cell"),
        }
    }

    fn captured(&self, i: usize) -> Val {
        self.frames.last().expect("no active frame").captures.captures[i].clone()
    }

    fn enter(&mut self, args: Vec<Val>, captures: Rc<SmClosure>, ret: usize) {
        self.frames.push(Frame { args, locals: Vec::new(), captures, ret });
        self.stats.calls += 1;
    }

    fn run(&mut self, globals: &mut HashMap<String, Val>) -> Result<(), RuntimeFailure> {
        let mut pc = self.target(SmProgram::ENTRY);
        let no_captures = Rc::new(SmClosure { entry: pc, arity: 0, captures: Vec::new() });
        self.enter(Vec::new(), no_captures.clone(), usize::MAX);
        loop {
            let instr = &self.code[pc];
            self.stats.instructions += 1;
            pc += 1;
            match instr {
                Instr::Label(_) => {}
                Instr::Jmp(l) => {
                    self.stats.jmps += 1;
                    pc = self.target(l);
                }
                Instr::CJmp(cond, l) => {
                    self.stats.cjmps += 1;
                    let taken = self.pop().truthy() == (*cond == JumpCond::NonZero);
                    if taken {
                        pc = self.target(l);
                    }
                }
                Instr::Const(n) => self.stack.push(Value::Int(*n)),
                Instr::String(s) => self.stack.push(Value::string(s.as_bytes())),
                Instr::Ld(Designation::Global(g)) => {
                    let v = globals.get(g).cloned().unwrap_or(Value::Int(0));
                    self.stack.push(v);
                }
                Instr::Ld(Designation::Captured(i)) => {
                    let v = self.captured(*i);
                    self.stack.push(v);
                }
                Instr::Ld(d) => {
                    let v = self.cell(d).clone();
                    self.stack.push(v);
                }
                Instr::St(Designation::Global(g)) => {
                    let v = self.pop();
                    globals.insert(g.clone(), v);
                }
                Instr::St(d) => {
                    let v = self.pop();
                    *self.cell(d) = v;
                }
                Instr::Drop => {
                    self.pop();
                }
                Instr::Dup => {
                    let v = self.stack.last().expect("stack machine underflow").clone();
                    self.stack.push(v);
                }
                Instr::Binop(op) => {
                    let b = self.pop();
                    let a = self.pop();
                    self.stack.push(value::binop(*op, &a, &b)?);
                }
                Instr::Read => {
                    let n = self.world.read_int()?;
                    self.stack.push(Value::Int(n));
                }
                Instr::Write => {
                    let n = self.pop().as_int()?;
                    self.world.write_int(n);
                }
                Instr::Sexp(tag, n) => {
                    let elems = self.pop_n(*n);
                    self.stack.push(Value::sexp(tag, elems));
                }
                Instr::Array(n) => {
                    let elems = self.pop_n(*n);
                    self.stack.push(Value::array(elems));
                }
                Instr::Elem => {
                    let i = self.pop();
                    let a = self.pop();
                    self.stack.push(value::elem(&a, &i)?);
                }
                Instr::Sta => {
                    let x = self.pop();
                    let i = self.pop();
                    let a = self.pop();
                    self.stack.push(value::sta(&a, &i, x)?);
                }
                Instr::Begin { nlocals, .. } => {
                    self.frame().locals = vec![Value::Int(0); *nlocals];
                }
                Instr::End => {
                    let v = self.pop();
                    let frame = self.frames.pop().expect("no active frame");
                    if self.frames.is_empty() {
                        return Ok(());
                    }
                    pc = frame.ret;
                    self.stack.push(v);
                }
                Instr::Call { name, nargs } => {
                    let args = self.pop_n(*nargs);
                    match name.as_str() {
                        BUILTIN_LENGTH => self.stack.push(value::length(&args[0])?),
                        BUILTIN_PRINTF => {
                            value::printf(&args[0], &args[1..], &mut self.world.output)?;
                            self.stack.push(Value::Int(0));
                        }
                        BUILTIN_IMMUTABLE => return Err(Failure::ImmutableAssignment.into()),
                        _ => {
                            let entry = self.target(name);
                            self.enter(args, no_captures.clone(), pc);
                            pc = entry;
                        }
                    }
                }
                Instr::CallC(n) => {
                    let args = self.pop_n(*n);
                    let Value::Closure(c) = self.pop() else {
                        return Err(Failure::NotClosure.into());
                    };
                    if c.arity != *n {
                        return Err(Failure::ArityMismatch.into());
                    }
                    let entry = c.entry;
                    self.enter(args, c, pc);
                    pc = entry;
                }
                Instr::Closure { name, captures } => {
                    let entry = self.target(name);
                    let arity = self.arity_at(entry);
                    let mut values = Vec::with_capacity(captures.len());
                    for d in captures {
                        let v = match d {
                            Designation::Captured(i) => self.captured(*i),
                            Designation::Global(g) => globals.get(g).cloned().unwrap_or(Value::Int(0)),
                            d => self.cell(d).clone(),
                        };
                        values.push(v);
                    }
                    self.stack.push(Value::Closure(Rc::new(SmClosure { entry, arity, captures: values })));
                }
                Instr::Tag(tag, n) => {
                    let v = self.pop();
                    self.stack.push(Value::Int(value::tag_matches(&v, tag, *n) as i64));
                }
                Instr::Patt(PattKind::Array(n)) => {
                    let v = self.pop();
                    self.stack.push(Value::Int(value::array_matches(&v, *n) as i64));
                }
                Instr::Patt(PattKind::Const(n)) => {
                    let v = self.pop();
                    self.stack.push(Value::Int(matches!(v, Value::Int(m) if m == *n) as i64));
                }
                Instr::Fail(loc) => {
                    return Err(RuntimeFailure { failure: Failure::MatchFailure, loc: Some(*loc) });
                }
            }
        }
    }
}

/// Runs a program and also reports instruction counters.
pub fn run_sm_with_stats(p: &SmProgram, input: &[u8]) -> (RunOutcome, SmStats) {
    let labels = p
        .code
        .iter()
        .enumerate()
        .filter_map(|(i, instr)| match instr {
            Instr::Label(l) => Some((l.as_str(), i)),
            _ => None,
        })
        .collect();
    let mut m = Machine {
        code: &p.code,
        labels,
        stack: Vec::new(),
        frames: Vec::new(),
        world: World::new(input),
        stats: SmStats::default(),
    };
    let mut globals = HashMap::new();
    let failure = m.run(&mut globals).err();
    (RunOutcome { output: m.world.output, failure }, m.stats)
}

pub fn run_sm(p: &SmProgram, input: &[u8]) -> RunOutcome {
    run_sm_with_stats(p, input).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::BinOp;
    use crate::parser::parse_program;
    use crate::sm::compile_sm;

    fn run(src: &str, input: &str) -> String {
        let p = compile_sm(&parse_program(src).unwrap()).unwrap();
        let out = run_sm(&p, input.as_bytes());
        assert_eq!(out.failure, None);
        String::from_utf8(out.output).unwrap()
    }

    #[test]
    fn truncating_division_on_the_stack() {
        let p = SmProgram {
            code: vec![
                Instr::Label("main".into()),
                Instr::Begin { name: "main".into(), nargs: 0, nlocals: 0, captured: vec![] },
                Instr::Const(-7),
                Instr::Const(2),
                Instr::Binop(BinOp::Div),
                Instr::Write,
                Instr::Const(0),
                Instr::End,
            ],
        };
        assert_eq!(run_sm(&p, b"").output, b"-3\n");
    }

    #[test]
    fn hello() {
        assert_eq!(run(r#"printf ("Hello, world!\n")"#, ""), "Hello, world!\n");
    }

    #[test]
    fn recursion_and_closures() {
        let src = "fun fact (n) { if n < 2 then 1 else n * fact (n - 1) fi }
                   fun adder (k) { fun (x) { x + k } }
                   var add3 = adder (3);
                   write (fact (10)); write (add3 (4))";
        assert_eq!(run(src, ""), "3628800\n7\n");
    }

    #[test]
    fn shared_captured_variable() {
        let src = "fun counter () { var n = 0; [fun () { n := n + 1 }, fun () { n }] }
                   var c = counter ();
                   c[0] (); c[0] ();
                   write (c[1] ())";
        assert_eq!(run(src, ""), "2\n");
    }

    #[test]
    fn match_failure_location() {
        let p = compile_sm(&parse_program("case 1 of 2 -> skip esac").unwrap()).unwrap();
        let out = run_sm(&p, b"");
        assert_eq!(out.failure.unwrap().to_string(), "runtime error: match failure at 1:1");
    }

    #[test]
    fn loop_counts() {
        let p = compile_sm(&parse_program("var i = 0; while i < 10 do i := i + 1 od").unwrap()).unwrap();
        let (_, stats) = run_sm_with_stats(&p, b"");
        assert_eq!(stats.cjmps, 11);
        assert_eq!(stats.jmps, 1);
    }
}
