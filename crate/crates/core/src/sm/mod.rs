//! Stack machine code: instruction set, textual dump and its reader.

mod check;
mod compile;
mod machine;

pub use check::{check_invariants, InvariantReport, Violation, ViolationKind};
pub use compile::{compile_sm, compile_sm_detailed, CompileError, FunInfo, SmCompilation};
pub use machine::{run_sm, run_sm_with_stats, SmStats};

use crate::ast::{BinOp, SourceLoc};
use std::fmt;

/// Where a variable lives, as seen from the function that accesses it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Designation {
    Global(String),
    Local(usize),
    Arg(usize),
    Captured(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpCond {
    /// Jump when the popped value is zero.
    Zero,
    /// Jump when the popped value is nonzero.
    NonZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PattKind {
    /// An array of exactly this length.
    Array(usize),
    /// The integer constant.
    Const(i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Label(String),
    Jmp(String),
    CJmp(JumpCond, String),
    Const(i64),
    String(String),
    Ld(Designation),
    /// Pops the top and stores it.
    St(Designation),
    Drop,
    Dup,
    Binop(BinOp),
    Read,
    Write,
    Sexp(String, usize),
    Array(usize),
    Elem,
    /// Pops value, index and container; stores and pushes the value.
    Sta,
    Begin { name: String, nargs: usize, nlocals: usize, captured: Vec<String> },
    /// Pops the return value and returns it.
    End,
    Call { name: String, nargs: usize },
    /// Pops the arguments and then the closure below them.
    CallC(usize),
    Closure { name: String, captures: Vec<Designation> },
    Tag(String, usize),
    Patt(PattKind),
    Fail(SourceLoc),
}

/// Runtime entry points reachable through `CALL`.
pub const BUILTIN_LENGTH: &str = "Llength";
pub const BUILTIN_PRINTF: &str = "Lprintf";
/// Fails with an immutable-assignment error; takes the value being stored.
pub const BUILTIN_IMMUTABLE: &str = "Lama_immutable";

impl Instr {
    /// Number of values popped and pushed.
    pub fn stack_effect(&self) -> (usize, usize) {
        use Instr::*;
        match self {
            Label(_) | Jmp(_) | Begin { .. } | Fail(_) => (0, 0),
            CJmp(..) | St(_) | Drop | Write | End => (1, 0),
            Const(_) | String(_) | Ld(_) | Read | Closure { .. } => (0, 1),
            Dup => (1, 2),
            Binop(_) | Elem => (2, 1),
            Sta => (3, 1),
            Sexp(_, n) | Array(n) | Call { nargs: n, .. } => (*n, 1),
            CallC(n) => (n + 1, 1),
            Tag(..) | Patt(_) => (1, 1),
        }
    }

    /// Instructions after which control never falls through.
    pub fn is_barrier(&self) -> bool {
        matches!(self, Instr::Jmp(_) | Instr::End | Instr::Fail(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SmProgram {
    pub code: Vec<Instr>,
}

impl SmProgram {
    pub const ENTRY: &'static str = "main";

    /// Index of the label instruction, if present.
    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.code.iter().position(|i| matches!(i, Instr::Label(l) if l == name))
    }

    /// Names of all globals mentioned by the program, in first-use order.
    pub fn globals(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for i in &self.code {
            if let Instr::Ld(Designation::Global(g)) | Instr::St(Designation::Global(g)) = i {
                if !out.contains(g) {
                    out.push(g.clone());
                }
            }
        }
        out
    }
}

fn quoted(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl fmt::Display for Designation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Designation::Global(x) => write!(f, "Global ({})", quoted(x)),
            Designation::Local(i) => write!(f, "Local ({i})"),
            Designation::Arg(i) => write!(f, "Arg ({i})"),
            Designation::Captured(i) => write!(f, "Captured ({i})"),
        }
    }
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Instr::*;
        match self {
            Label(l) => write!(f, "LABEL ({})", quoted(l)),
            Jmp(l) => write!(f, "JMP ({})", quoted(l)),
            CJmp(c, l) => {
                let c = if *c == JumpCond::Zero { "z" } else { "nz" };
                write!(f, "CJMP (\"{c}\", {})", quoted(l))
            }
            Const(n) => write!(f, "CONST ({n})"),
            String(s) => write!(f, "STRING ({})", quoted(s)),
            Ld(d) => write!(f, "LD ({d})"),
            St(d) => write!(f, "ST ({d})"),
            Drop => f.write_str("DROP"),
            Dup => f.write_str("DUP"),
            Binop(op) => write!(f, "BINOP (\"{}\")", op.symbol()),
            Read => f.write_str("READ"),
            Write => f.write_str("WRITE"),
            Sexp(t, n) => write!(f, "SEXP ({}, {n})", quoted(t)),
            Array(n) => write!(f, "ARRAY ({n})"),
            Elem => f.write_str("ELEM"),
            Sta => f.write_str("STA"),
            Begin { name, nargs, nlocals, captured } => {
                let names: Vec<_> = captured.iter().map(|c| quoted(c)).collect();
                write!(f, "BEGIN ({}, {nargs}, {nlocals}, [{}], [], [])", quoted(name), names.join(", "))
            }
            End => f.write_str("END"),
            Call { name, nargs } => write!(f, "CALL ({}, {nargs}, false)", quoted(name)),
            CallC(n) => write!(f, "CALLC ({n}, false)"),
            Closure { name, captures } => {
                let caps: Vec<_> = captures.iter().map(|c| c.to_string()).collect();
                write!(f, "CLOSURE ({}, [{}])", quoted(name), caps.join(", "))
            }
            Tag(t, n) => write!(f, "TAG ({}, {n})", quoted(t)),
            Patt(PattKind::Array(n)) => write!(f, "PATT (Array ({n}))"),
            Patt(PattKind::Const(n)) => write!(f, "PATT (Const ({n}))"),
            Fail(loc) => write!(f, "FAIL (({}, {}))", loc.line, loc.col),
        }
    }
}

/// One instruction per line.
pub fn dump_sm(p: &SmProgram) -> String {
    let mut out = String::new();
    for i in &p.code {
        out.push_str(&i.to_string());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct DumpError {
    pub line: usize,
    pub message: String,
}

/// Token stream of one dump line.
struct Reader<'a> {
    rest: &'a str,
}

impl<'a> Reader<'a> {
    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start();
    }

    fn eat(&mut self, s: &str) -> Result<(), String> {
        self.skip_ws();
        match self.rest.strip_prefix(s) {
            Some(r) => {
                self.rest = r;
                Ok(())
            }
            None => Err(format!("expected `{s}` at `{}`", self.rest)),
        }
    }

    fn try_eat(&mut self, s: &str) -> bool {
        self.eat(s).is_ok()
    }

    fn word(&mut self) -> &'a str {
        self.skip_ws();
        let end = self.rest.find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(self.rest.len());
        let (w, r) = self.rest.split_at(end);
        self.rest = r;
        w
    }

    fn int(&mut self) -> Result<i64, String> {
        self.skip_ws();
        let end = self
            .rest
            .char_indices()
            .find(|&(i, c)| !(c.is_ascii_digit() || (i == 0 && c == '-')))
            .map_or(self.rest.len(), |(i, _)| i);
        let (w, r) = self.rest.split_at(end);
        self.rest = r;
        w.parse().map_err(|_| format!("bad integer `{w}`"))
    }

    fn uint(&mut self) -> Result<usize, String> {
        let n = self.int()?;
        usize::try_from(n).map_err(|_| format!("negative count {n}"))
    }

    fn string(&mut self) -> Result<String, String> {
        self.eat("\"")?;
        let mut out = String::new();
        let mut chars = self.rest.char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.rest = &self.rest[i + 1..];
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, 'n')) => out.push('\n'),
                    Some((_, 't')) => out.push('\t'),
                    Some((_, c @ ('"' | '\\'))) => out.push(c),
                    _ => return Err("bad escape".into()),
                },
                c => out.push(c),
            }
        }
        Err("unterminated string".into())
    }

    fn designation(&mut self) -> Result<Designation, String> {
        let w = self.word();
        self.eat("(")?;
        let d = match w {
            "Global" => Designation::Global(self.string()?),
            "Local" => Designation::Local(self.uint()?),
            "Arg" => Designation::Arg(self.uint()?),
            "Captured" => Designation::Captured(self.uint()?),
            _ => return Err(format!("unknown designation `{w}`")),
        };
        self.eat(")")?;
        Ok(d)
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, String>) -> Result<Vec<T>, String> {
        self.eat("[")?;
        let mut out = Vec::new();
        if self.try_eat("]") {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.try_eat("]") {
                return Ok(out);
            }
            self.eat(",")?;
        }
    }

    fn instr(&mut self) -> Result<Instr, String> {
        use Instr::*;
        let name = self.word();
        let args = !matches!(name, "DROP" | "DUP" | "READ" | "WRITE" | "ELEM" | "STA" | "END");
        if args {
            self.eat("(")?;
        }
        let i = match name {
            "LABEL" => Label(self.string()?),
            "JMP" => Jmp(self.string()?),
            "CJMP" => {
                let c = match self.string()?.as_str() {
                    "z" => JumpCond::Zero,
                    "nz" => JumpCond::NonZero,
                    c => return Err(format!("bad condition `{c}`")),
                };
                self.eat(",")?;
                CJmp(c, self.string()?)
            }
            "CONST" => Const(self.int()?),
            "STRING" => String(self.string()?),
            "LD" => Ld(self.designation()?),
            "ST" => St(self.designation()?),
            "DROP" => Drop,
            "DUP" => Dup,
            "BINOP" => {
                let s = self.string()?;
                Binop(BinOp::from_symbol(&s).ok_or(format!("unknown operator `{s}`"))?)
            }
            "READ" => Read,
            "WRITE" => Write,
            "SEXP" => {
                let t = self.string()?;
                self.eat(",")?;
                Sexp(t, self.uint()?)
            }
            "ARRAY" => Array(self.uint()?),
            "ELEM" => Elem,
            "STA" => Sta,
            "BEGIN" => {
                let name = self.string()?;
                self.eat(",")?;
                let nargs = self.uint()?;
                self.eat(",")?;
                let nlocals = self.uint()?;
                self.eat(",")?;
                let captured = self.list(|r| r.string())?;
                self.eat(", [], []")?;
                Begin { name, nargs, nlocals, captured }
            }
            "END" => End,
            "CALL" => {
                let name = self.string()?;
                self.eat(",")?;
                let nargs = self.uint()?;
                self.eat(", false")?;
                Call { name, nargs }
            }
            "CALLC" => {
                let n = self.uint()?;
                self.eat(", false")?;
                CallC(n)
            }
            "CLOSURE" => {
                let name = self.string()?;
                self.eat(",")?;
                Closure { name, captures: self.list(|r| r.designation())? }
            }
            "TAG" => {
                let t = self.string()?;
                self.eat(",")?;
                Tag(t, self.uint()?)
            }
            "PATT" => {
                let k = self.word();
                self.eat("(")?;
                let p = match k {
                    "Array" => PattKind::Array(self.uint()?),
                    "Const" => PattKind::Const(self.int()?),
                    _ => return Err(format!("unknown pattern kind `{k}`")),
                };
                self.eat(")")?;
                Patt(p)
            }
            "FAIL" => {
                self.eat("(")?;
                let line = self.uint()? as u32;
                self.eat(",")?;
                let col = self.uint()? as u32;
                self.eat(")")?;
                Fail(SourceLoc::new(line, col))
            }
            _ => return Err(format!("unknown instruction `{name}`")),
        };
        if args {
            self.eat(")")?;
        }
        self.skip_ws();
        if !self.rest.is_empty() {
            return Err(format!("trailing text `{}`", self.rest));
        }
        Ok(i)
    }
}

/// Parses the output of [`dump_sm`] back into a program.
pub fn read_sm(text: &str) -> Result<SmProgram, DumpError> {
    let mut code = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let i = Reader { rest: line }.instr().map_err(|message| DumpError { line: n + 1, message })?;
        code.push(i);
    }
    Ok(SmProgram { code })
}
