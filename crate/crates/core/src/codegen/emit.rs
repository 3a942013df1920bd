//! Instruction selection for each stack machine instruction.
//!
//! Frame layout of a function, in words below `%rbp`: the locals, the
//! closure pointer, one save slot per operand register, then the frame
//! slots of the symbolic stack. `main` first pushes the callee-saved
//! registers it uses, so its frame starts six words lower. Arguments are
//! pushed right to left by the caller, which also removes them. Every word
//! of a frame holds a language value, so the collector can scan the stack.

use super::{Loc, SymState, K, OPERAND_REGISTERS};
use crate::ast::BinOp;
use crate::sm::{Designation, Instr, JumpCond, PattKind, SmProgram, BUILTIN_IMMUTABLE, BUILTIN_LENGTH, BUILTIN_PRINTF};
use lamina_runtime::layout::{make_header, ObjTag};
use lamina_runtime::{fix_encode, pack_tag, Failure};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("instruction {index}: {message}")]
pub struct CodegenError {
    pub index: usize,
    pub message: String,
}

/// Generated assembly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsmUnit {
    pub data: String,
    pub text: String,
    pub entry: String,
    /// Frame slots used by each function.
    pub frame_slots: BTreeMap<String, usize>,
}

impl AsmUnit {
    pub fn render(&self) -> String {
        format!("{}{}\t.section .note.GNU-stack,\"\",@progbits\n", self.data, self.text)
    }

    /// Number of machine instructions in the text section.
    pub fn instruction_count(&self) -> usize {
        self.text
            .lines()
            .filter(|l| l.starts_with('\t') && !l.trim_start().starts_with(['.', '#']))
            .count()
    }
}

/// One step of a symbolic run: the instruction, the symbolic stack after
/// it and the code it produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub instr: Instr,
    pub stack: Vec<Loc>,
    pub asm: Vec<String>,
}

/// Main saves five registers and a padding word before its frame.
const MAIN_FRAME_BASE: usize = 6;
const ERR_BOXED: &str = ".Lerr_boxed";
const ERR_DIVZERO: &str = ".Lerr_divzero";
/// Scratch registers; the operand registers are never used as scratch.
const SCRATCH: &str = "%rax";
const BASE: &str = "%rcx";

fn fits_imm32(n: i64) -> bool {
    i32::try_from(n).is_ok()
}

fn enc(n: i64) -> i64 {
    fix_encode(n) as i64
}

enum Src {
    Loc(Loc),
    Imm(i64),
    Address(String),
    Var(Designation),
}

enum Callee {
    Runtime(&'static str),
    User(String),
    Closure(Loc),
}

/// Program-wide tables.
struct Shared {
    arities: HashMap<String, usize>,
    strings: Vec<String>,
    globals: Vec<String>,
}

impl Shared {
    fn string_label(&mut self, s: &str) -> String {
        let i = match self.strings.iter().position(|t| t == s) {
            Some(i) => i,
            None => {
                self.strings.push(s.to_string());
                self.strings.len() - 1
            }
        };
        format!("string_{i}")
    }

    fn global(&mut self, g: &str) {
        if !self.globals.iter().any(|x| x == g) {
            self.globals.push(g.to_string());
        }
    }
}

struct FunGen<'s> {
    shared: &'s mut Shared,
    name: String,
    is_main: bool,
    nlocals: usize,
    state: SymState,
    label_depths: HashMap<String, usize>,
    out: Vec<String>,
}

impl<'s> FunGen<'s> {
    fn new(shared: &'s mut Shared, name: &str, nlocals: usize) -> Self {
        FunGen {
            shared,
            name: name.to_string(),
            is_main: name == SmProgram::ENTRY,
            nlocals,
            state: SymState::new(),
            label_depths: HashMap::new(),
            out: Vec::new(),
        }
    }

    fn ins(&mut self, s: impl Into<String>) {
        self.out.push(format!("\t{}", s.into()));
    }

    fn word(&self, w: usize) -> String {
        let base = if self.is_main { MAIN_FRAME_BASE } else { 0 };
        format!("-{}(%rbp)", 8 * (base + 1 + w))
    }

    fn closure_slot(&self) -> String {
        self.word(self.nlocals)
    }

    fn save_slot(&self, reg: usize) -> String {
        self.word(self.nlocals + 1 + reg)
    }

    fn frame_words(&self) -> usize {
        self.nlocals + 1 + K + self.state.high_water()
    }

    fn operand(&mut self, loc: &Loc) -> String {
        match loc {
            Loc::OperandReg(i) => OPERAND_REGISTERS[*i].to_string(),
            Loc::FrameSlot(j) => self.word(self.nlocals + 1 + K + j),
            Loc::GlobalCell(g) => {
                self.shared.global(g);
                format!("global_{g}(%rip)")
            }
            Loc::Immediate(n) => format!("${n}"),
        }
    }

    fn is_memory(loc: &Loc) -> bool {
        matches!(loc, Loc::FrameSlot(_) | Loc::GlobalCell(_))
    }

    /// Operand text for a variable; captured variables go through the
    /// closure pointer, which is loaded into the base register.
    fn var_operand(&mut self, d: &Designation) -> String {
        match d {
            Designation::Global(g) => self.operand(&Loc::GlobalCell(g.clone())),
            Designation::Local(i) => self.word(*i),
            Designation::Arg(i) => format!("{}(%rbp)", 16 + 8 * i),
            Designation::Captured(i) => {
                let slot = self.closure_slot();
                self.ins(format!("movq {slot}, {BASE}"));
                format!("{}({BASE})", 8 * (2 + i))
            }
        }
    }

    fn mov(&mut self, src: &str, src_in_memory: bool, dst: &Loc) {
        let d = self.operand(dst);
        if src_in_memory && Self::is_memory(dst) {
            self.ins(format!("movq {src}, {SCRATCH}"));
            self.ins(format!("movq {SCRATCH}, {d}"));
        } else {
            self.ins(format!("movq {src}, {d}"));
        }
    }

    fn load_const(&mut self, value: i64, dst: &Loc) {
        let d = self.operand(dst);
        if fits_imm32(value) {
            self.ins(format!("movq ${value}, {d}"));
        } else {
            self.ins(format!("movabsq ${value}, {SCRATCH}"));
            self.ins(format!("movq {SCRATCH}, {d}"));
        }
    }

    fn pop(&mut self, index: usize) -> Result<Loc, CodegenError> {
        self.state.pop().ok_or(CodegenError { index, message: "symbolic stack underflow".into() })
    }

    fn pop_n(&mut self, n: usize, index: usize) -> Result<Vec<Loc>, CodegenError> {
        let mut locs = (0..n).map(|_| self.pop(index)).collect::<Result<Vec<_>, _>>()?;
        locs.reverse();
        Ok(locs)
    }

    fn push_src(&mut self, src: &Src) {
        match src {
            Src::Loc(l) => {
                let o = self.operand(l);
                self.ins(format!("pushq {o}"));
            }
            Src::Imm(n) if fits_imm32(*n) => self.ins(format!("pushq ${n}")),
            Src::Imm(n) => {
                self.ins(format!("movabsq ${n}, {SCRATCH}"));
                self.ins(format!("pushq {SCRATCH}"));
            }
            Src::Address(label) => {
                self.ins(format!("leaq {label}(%rip), {SCRATCH}"));
                self.ins(format!("pushq {SCRATCH}"));
            }
            Src::Var(d) => {
                let o = self.var_operand(d);
                self.ins(format!("pushq {o}"));
            }
        }
    }

    /// Saves the live operand registers, pushes the arguments right to left
    /// keeping the stack 16-byte aligned, calls, and restores. The result,
    /// if any, becomes the new top of the symbolic stack.
    fn call(&mut self, callee: Callee, args: &[Src], result: bool) {
        let live: Vec<usize> = self
            .state
            .stack()
            .iter()
            .filter_map(|l| if let Loc::OperandReg(i) = l { Some(*i) } else { None })
            .collect();
        for &r in &live {
            let slot = self.save_slot(r);
            self.ins(format!("movq {}, {slot}", OPERAND_REGISTERS[r]));
        }
        let pad = args.len() % 2;
        if pad == 1 {
            self.ins("pushq $1");
        }
        for a in args.iter().rev() {
            self.push_src(a);
        }
        let n = args.len();
        match callee {
            Callee::Runtime(f) => {
                self.ins("movq %rsp, %rdi");
                self.ins(format!("movq ${n}, %rsi"));
                self.ins(format!("call {f}"));
            }
            Callee::User(f) => self.ins(format!("call {f}")),
            Callee::Closure(c) => {
                let c = self.operand(&c);
                self.ins(format!("movq {c}, %rdi"));
                self.ins(format!("movq ${n}, %rsi"));
                self.ins("call Bclosure_check");
                self.ins(format!("movq {c}, %r10"));
                self.ins("call *%rax");
            }
        }
        if n + pad > 0 {
            self.ins(format!("addq ${}, %rsp", 8 * (n + pad)));
        }
        for &r in &live {
            let slot = self.save_slot(r);
            self.ins(format!("movq {slot}, {}", OPERAND_REGISTERS[r]));
        }
        if result {
            let r = self.state.allocate();
            let o = self.operand(&r);
            self.ins(format!("movq %rax, {o}"));
        }
    }

    fn record(&mut self, label: &str, depth: usize, index: usize) -> Result<(), CodegenError> {
        match self.label_depths.get(label) {
            Some(&d) if d != depth => Err(CodegenError {
                index,
                message: format!("label {label} reached at depths {d} and {depth}"),
            }),
            Some(_) => Ok(()),
            None => {
                self.label_depths.insert(label.to_string(), depth);
                Ok(())
            }
        }
    }

    fn binop(&mut self, op: BinOp, index: usize) -> Result<(), CodegenError> {
        let b = self.pop(index)?;
        let a = self.pop(index)?;
        let r = self.state.allocate();
        let (a, b, r) = (self.operand(&a), self.operand(&b), self.operand(&r));
        if !matches!(op, BinOp::Eq | BinOp::Ne) {
            self.ins(format!("movq {a}, %rax"));
            self.ins(format!("andq {b}, %rax"));
            self.ins("testb $1, %al");
            self.ins(format!("jz {ERR_BOXED}"));
        }
        let setcc = |op: BinOp| match op {
            BinOp::Eq => "sete",
            BinOp::Ne => "setne",
            BinOp::Lt => "setl",
            BinOp::Le => "setle",
            BinOp::Gt => "setg",
            BinOp::Ge => "setge",
            _ => unreachable!(),
        };
        match op {
            BinOp::Add => {
                self.ins(format!("movq {a}, %rax"));
                self.ins(format!("addq {b}, %rax"));
                self.ins("subq $1, %rax");
            }
            BinOp::Sub => {
                self.ins(format!("movq {a}, %rax"));
                self.ins(format!("subq {b}, %rax"));
                self.ins("addq $1, %rax");
            }
            BinOp::Mul => {
                self.ins(format!("movq {a}, %rax"));
                self.ins("sarq $1, %rax");
                self.ins(format!("movq {b}, %rdx"));
                self.ins("subq $1, %rdx");
                self.ins("imulq %rdx, %rax");
                self.ins("orq $1, %rax");
            }
            BinOp::Div | BinOp::Mod => {
                self.ins(format!("movq {b}, %rcx"));
                self.ins("sarq $1, %rcx");
                self.ins(format!("jz {ERR_DIVZERO}"));
                self.ins(format!("movq {a}, %rax"));
                self.ins("sarq $1, %rax");
                self.ins("cqto");
                self.ins("idivq %rcx");
                let q = if op == BinOp::Div { "%rax" } else { "%rdx" };
                self.ins(format!("leaq 1({q},{q}), %rax"));
            }
            BinOp::And | BinOp::Or => {
                self.ins("xorl %ecx, %ecx");
                self.ins(format!("cmpq $1, {a}"));
                self.ins("setne %cl");
                self.ins("xorl %edx, %edx");
                self.ins(format!("cmpq $1, {b}"));
                self.ins("setne %dl");
                self.ins(if op == BinOp::And { "andl %edx, %ecx" } else { "orl %edx, %ecx" });
                self.ins("leaq 1(%rcx,%rcx), %rax");
            }
            _ => {
                self.ins(format!("movq {a}, %rax"));
                self.ins(format!("cmpq {b}, %rax"));
                self.ins(format!("{} %al", setcc(op)));
                self.ins("movzbl %al, %eax");
                self.ins("leaq 1(%rax,%rax), %rax");
            }
        }
        self.ins(format!("movq %rax, {r}"));
        Ok(())
    }

    fn epilogue(&mut self) {
        if self.is_main {
            self.ins("call Lama_finish");
            self.ins("xorl %eax, %eax");
            self.ins("leaq -40(%rbp), %rsp");
            for r in OPERAND_REGISTERS.iter().rev() {
                self.ins(format!("popq {r}"));
            }
        } else {
            self.ins("movq %rbp, %rsp");
        }
        self.ins("popq %rbp");
        self.ins("ret");
    }

    /// Symbolically executes one instruction.
    fn step(&mut self, instr: &Instr, index: usize) -> Result<(), CodegenError> {
        if self.state.barrier() && !matches!(instr, Instr::Label(_)) {
            return Err(CodegenError { index, message: format!("{instr} follows an unconditional jump") });
        }
        self.out.push(format!("# {instr} /"));
        match instr {
            Instr::Label(l) => {
                if self.state.barrier() {
                    if let Some(&d) = self.label_depths.get(l) {
                        self.state.reset_to(d);
                    }
                    self.state.set_barrier(false);
                }
                let depth = self.state.depth();
                self.record(l, depth, index)?;
                self.out.push(format!("{l}:"));
            }
            Instr::Jmp(l) => {
                let depth = self.state.depth();
                self.record(l, depth, index)?;
                self.ins(format!("jmp {l}"));
                self.state.set_barrier(true);
            }
            Instr::CJmp(c, l) => {
                let x = self.pop(index)?;
                let x = self.operand(&x);
                let depth = self.state.depth();
                self.record(l, depth, index)?;
                self.ins(format!("cmpq $1, {x}"));
                let j = if *c == JumpCond::Zero { "je" } else { "jne" };
                self.ins(format!("{j} {l}"));
            }
            Instr::Const(n) => {
                let r = self.state.allocate();
                self.load_const(enc(*n), &r);
            }
            Instr::String(s) => {
                let label = self.shared.string_label(s);
                self.call(Callee::Runtime("Bstring"), &[Src::Address(label)], true);
            }
            Instr::Ld(d) => {
                let src = self.var_operand(d);
                let r = self.state.allocate();
                self.mov(&src, true, &r);
            }
            Instr::St(d) => {
                let x = self.pop(index)?;
                let dst = self.var_operand(d);
                let src = self.operand(&x);
                if Self::is_memory(&x) {
                    self.ins(format!("movq {src}, {SCRATCH}"));
                    self.ins(format!("movq {SCRATCH}, {dst}"));
                } else {
                    self.ins(format!("movq {src}, {dst}"));
                }
            }
            Instr::Drop => {
                self.pop(index)?;
            }
            Instr::Dup => {
                let x = self.state.top().cloned().ok_or(CodegenError { index, message: "DUP on empty stack".into() })?;
                let src = self.operand(&x);
                let r = self.state.allocate();
                self.mov(&src, Self::is_memory(&x), &r);
            }
            Instr::Binop(op) => self.binop(*op, index)?,
            Instr::Read => self.call(Callee::Runtime("Lread"), &[], true),
            Instr::Write => {
                let x = self.pop(index)?;
                self.call(Callee::Runtime("Lwrite"), &[Src::Loc(x)], false);
            }
            Instr::Sexp(tag, n) => {
                let mut args: Vec<Src> = self.pop_n(*n, index)?.into_iter().map(Src::Loc).collect();
                args.push(Src::Imm(enc(pack_tag(tag))));
                self.call(Callee::Runtime("Bsexp"), &args, true);
            }
            Instr::Array(n) => {
                let args: Vec<Src> = self.pop_n(*n, index)?.into_iter().map(Src::Loc).collect();
                self.call(Callee::Runtime("Barray"), &args, true);
            }
            Instr::Elem => {
                let args: Vec<Src> = self.pop_n(2, index)?.into_iter().map(Src::Loc).collect();
                self.call(Callee::Runtime("Belem"), &args, true);
            }
            Instr::Sta => {
                let args: Vec<Src> = self.pop_n(3, index)?.into_iter().map(Src::Loc).collect();
                self.call(Callee::Runtime("Bsta"), &args, true);
            }
            Instr::Begin { .. } => {}
            Instr::End => {
                let x = self.pop(index)?;
                let x = self.operand(&x);
                if !self.is_main {
                    self.ins(format!("movq {x}, %rax"));
                }
                self.epilogue();
                self.state.set_barrier(true);
            }
            Instr::Call { name, nargs } => {
                let args: Vec<Src> = self.pop_n(*nargs, index)?.into_iter().map(Src::Loc).collect();
                let callee = match name.as_str() {
                    BUILTIN_LENGTH => Callee::Runtime(BUILTIN_LENGTH),
                    BUILTIN_PRINTF => Callee::Runtime(BUILTIN_PRINTF),
                    BUILTIN_IMMUTABLE => Callee::Runtime(BUILTIN_IMMUTABLE),
                    _ => Callee::User(name.clone()),
                };
                self.call(callee, &args, true);
            }
            Instr::CallC(n) => {
                let args: Vec<Src> = self.pop_n(*n, index)?.into_iter().map(Src::Loc).collect();
                let closure = self.pop(index)?;
                self.call(Callee::Closure(closure), &args, true);
            }
            Instr::Closure { name, captures } => {
                let arity = *self.shared.arities.get(name).ok_or(CodegenError {
                    index,
                    message: format!("closure of unknown function {name}"),
                })?;
                let mut args = vec![Src::Address(name.clone()), Src::Imm(enc(arity as i64))];
                args.extend(captures.iter().cloned().map(Src::Var));
                self.call(Callee::Runtime("Bclosure"), &args, true);
            }
            Instr::Tag(tag, n) => {
                let x = self.pop(index)?;
                let args = [Src::Loc(x), Src::Imm(enc(pack_tag(tag))), Src::Imm(enc(*n as i64))];
                self.call(Callee::Runtime("Btag"), &args, true);
            }
            Instr::Patt(PattKind::Array(n)) => {
                let x = self.pop(index)?;
                self.call(Callee::Runtime("Barray_patt"), &[Src::Loc(x), Src::Imm(enc(*n as i64))], true);
            }
            Instr::Patt(PattKind::Const(n)) => {
                let x = self.pop(index)?;
                let r = self.state.allocate();
                let (x, r) = (self.operand(&x), self.operand(&r));
                let value = enc(*n);
                self.ins("xorl %eax, %eax");
                if fits_imm32(value) {
                    self.ins(format!("cmpq ${value}, {x}"));
                } else {
                    self.ins(format!("movabsq ${value}, %rdx"));
                    self.ins(format!("cmpq %rdx, {x}"));
                }
                self.ins("sete %al");
                self.ins("leaq 1(%rax,%rax), %rax");
                self.ins(format!("movq %rax, {r}"));
            }
            Instr::Fail(loc) => {
                self.ins(format!("movq ${}, %rdi", loc.line));
                self.ins(format!("movq ${}, %rsi", loc.col));
                self.ins("call Lama_match_failure");
                self.state.set_barrier(true);
            }
        }
        Ok(())
    }

    /// Prologue followed by the generated body.
    fn finish(self, has_captures: bool) -> String {
        let mut text = String::new();
        let words = self.frame_words();
        let words = words + words % 2;
        let _ = writeln!(text, "\t.p2align 4");
        if self.is_main {
            let _ = writeln!(text, "\t.globl {}", self.name);
        }
        let _ = writeln!(text, "{}:", self.name);
        let _ = writeln!(text, "\tpushq %rbp");
        let _ = writeln!(text, "\tmovq %rsp, %rbp");
        if self.is_main {
            for r in OPERAND_REGISTERS {
                let _ = writeln!(text, "\tpushq {r}");
            }
            let _ = writeln!(text, "\tpushq $1");
            let _ = writeln!(text, "\tmovq %rsp, Lama_stack_bottom(%rip)");
        }
        let _ = writeln!(text, "\tsubq ${}, %rsp", 8 * words);
        let _ = writeln!(text, "\tmovq %rsp, %rdi");
        let _ = writeln!(text, "\tmovq ${words}, %rcx");
        let _ = writeln!(text, "\tmovl $1, %eax");
        let _ = writeln!(text, "\trep stosq");
        if has_captures {
            let _ = writeln!(text, "\tmovq %r10, {}", self.closure_slot());
        }
        for line in &self.out {
            text.push_str(line);
            text.push('\n');
        }
        text
    }
}

fn function_entries(p: &SmProgram) -> Vec<usize> {
    (0..p.code.len())
        .filter(|&i| matches!(p.code[i], Instr::Label(_)) && matches!(p.code.get(i + 1), Some(Instr::Begin { .. })))
        .collect()
}

/// Generates assembly for a whole program.
pub fn gen_program(p: &SmProgram) -> Result<AsmUnit, CodegenError> {
    let entries = function_entries(p);
    let mut shared = Shared { arities: HashMap::new(), strings: Vec::new(), globals: Vec::new() };
    for &e in &entries {
        if let Instr::Begin { name, nargs, .. } = &p.code[e + 1] {
            shared.arities.insert(name.clone(), *nargs);
        }
    }
    if entries.first() != Some(&0) {
        return Err(CodegenError { index: 0, message: "code does not start with a function".into() });
    }
    let mut text = String::from("\t.text\n");
    let mut frame_slots = BTreeMap::new();
    let mut seen_labels = HashSet::new();
    for (k, &start) in entries.iter().enumerate() {
        let end = entries.get(k + 1).copied().unwrap_or(p.code.len());
        let Instr::Begin { name, nlocals, captured, .. } = &p.code[start + 1] else { unreachable!() };
        let mut f = FunGen::new(&mut shared, name, *nlocals);
        f.out.push(format!("# {} /", p.code[start]));
        for i in start + 1..end {
            if let Instr::Label(l) = &p.code[i] {
                if !seen_labels.insert(l.clone()) {
                    return Err(CodegenError { index: i, message: format!("duplicate label {l}") });
                }
            }
            f.step(&p.code[i], i)?;
        }
        if !f.state.barrier() {
            return Err(CodegenError { index: end - 1, message: format!("function {name} does not end in END") });
        }
        frame_slots.insert(name.clone(), f.state.high_water());
        text.push_str(&f.finish(!captured.is_empty()));
    }
    for (label, failure) in [(ERR_BOXED, Failure::BoxedOperand), (ERR_DIVZERO, Failure::DivisionByZero)] {
        let _ = writeln!(text, "{label}:\n\tmovq ${}, %rdi\n\tcall Lama_error", failure as u8);
    }

    let mut data = String::from("\t.data\n\t.balign 8\n\t.globl lama_globals_start\n\t.globl lama_globals_end\n");
    data.push_str("lama_globals_start:\n");
    for g in &shared.globals {
        let _ = writeln!(data, "global_{g}:\t.quad 1");
    }
    data.push_str("lama_globals_end:\n\t.section .rodata\n");
    for (i, s) in shared.strings.iter().enumerate() {
        let bytes: Vec<String> = s.bytes().chain([0]).map(|b| b.to_string()).collect();
        let header = make_header(ObjTag::String, s.len());
        let _ = writeln!(data, "\t.balign 8\n\t.quad {header}\nstring_{i}:\t.byte {}", bytes.join(","));
    }
    Ok(AsmUnit { data, text, entry: SmProgram::ENTRY.into(), frame_slots })
}

/// Symbolically executes a code fragment as if it were the body of `main`
/// and reports the stack after each instruction.
pub fn trace(code: &[Instr]) -> Result<Vec<TraceStep>, CodegenError> {
    let mut shared = Shared { arities: HashMap::new(), strings: Vec::new(), globals: Vec::new() };
    let mut f = FunGen::new(&mut shared, SmProgram::ENTRY, 0);
    let mut steps = Vec::new();
    for (i, instr) in code.iter().enumerate() {
        let before = f.out.len();
        f.step(instr, i)?;
        let asm = f.out[before + 1..].iter().map(|l| l.trim().to_string()).collect();
        steps.push(TraceStep { instr: instr.clone(), stack: f.state.stack().to_vec(), asm });
    }
    Ok(steps)
}
