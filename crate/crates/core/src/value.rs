//! Values, builtins and the input/output world shared by the reference
//! interpreter and the stack machine interpreter.

use crate::ast::{BinOp, SourceLoc};
use lamina_runtime::failure::parse_int_token;
use lamina_runtime::ops::format_int;
use lamina_runtime::{pack_tag, wrap63, Failure};
use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

/// A language value. `C` is the closure representation of the evaluator.
pub enum Value<C> {
    Int(i64),
    Str(Rc<RefCell<Vec<u8>>>),
    Array(Rc<RefCell<Vec<Value<C>>>>),
    Sexp(Rc<Sexp<C>>),
    Closure(Rc<C>),
}

pub struct Sexp<C> {
    pub tag: String,
    pub elems: RefCell<Vec<Value<C>>>,
}

impl<C> Clone for Value<C> {
    fn clone(&self) -> Self {
        match self {
            Value::Int(n) => Value::Int(*n),
            Value::Str(s) => Value::Str(s.clone()),
            Value::Array(a) => Value::Array(a.clone()),
            Value::Sexp(s) => Value::Sexp(s.clone()),
            Value::Closure(c) => Value::Closure(c.clone()),
        }
    }
}

impl<C> fmt::Debug for Value<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Str(s) => write!(f, "{:?}", String::from_utf8_lossy(&s.borrow())),
            Value::Array(a) => f.debug_list().entries(a.borrow().iter()).finish(),
            Value::Sexp(s) => {
                write!(f, "{} ", s.tag)?;
                f.debug_list().entries(s.elems.borrow().iter()).finish()
            }
            Value::Closure(_) => f.write_str("<closure>"),
        }
    }
}

impl<C> Value<C> {
    pub fn string(bytes: &[u8]) -> Self {
        Value::Str(Rc::new(RefCell::new(bytes.to_vec())))
    }

    pub fn array(elems: Vec<Value<C>>) -> Self {
        Value::Array(Rc::new(RefCell::new(elems)))
    }

    pub fn sexp(tag: &str, elems: Vec<Value<C>>) -> Self {
        Value::Sexp(Rc::new(Sexp { tag: tag.to_string(), elems: RefCell::new(elems) }))
    }

    pub fn as_int(&self) -> Result<i64, Failure> {
        match self {
            Value::Int(n) => Ok(*n),
            _ => Err(Failure::BoxedOperand),
        }
    }

    /// Condition semantics: only the integer zero is false.
    pub fn truthy(&self) -> bool {
        !matches!(self, Value::Int(0))
    }

    /// Reference equality for boxed values, numeric equality for integers.
    pub fn identical(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => Rc::ptr_eq(a, b),
            (Value::Array(a), Value::Array(b)) => Rc::ptr_eq(a, b),
            (Value::Sexp(a), Value::Sexp(b)) => Rc::ptr_eq(a, b),
            (Value::Closure(a), Value::Closure(b)) => Rc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// Applies a binary operator with 63-bit wrapping arithmetic and truncating
/// division.
pub fn binop<C>(op: BinOp, a: &Value<C>, b: &Value<C>) -> Result<Value<C>, Failure> {
    match op {
        BinOp::Eq => return Ok(Value::Int(a.identical(b) as i64)),
        BinOp::Ne => return Ok(Value::Int(!a.identical(b) as i64)),
        _ => {}
    }
    let (x, y) = (a.as_int()?, b.as_int()?);
    Ok(Value::Int(int_binop(op, x, y)?))
}

pub fn int_binop(op: BinOp, x: i64, y: i64) -> Result<i64, Failure> {
    Ok(match op {
        BinOp::Add => wrap63(x.wrapping_add(y)),
        BinOp::Sub => wrap63(x.wrapping_sub(y)),
        BinOp::Mul => wrap63(x.wrapping_mul(y)),
        BinOp::Div | BinOp::Mod if y == 0 => return Err(Failure::DivisionByZero),
        BinOp::Div => wrap63(x.wrapping_div(y)),
        BinOp::Mod => wrap63(x.wrapping_rem(y)),
        BinOp::Eq => (x == y) as i64,
        BinOp::Ne => (x != y) as i64,
        BinOp::Lt => (x < y) as i64,
        BinOp::Le => (x <= y) as i64,
        BinOp::Gt => (x > y) as i64,
        BinOp::Ge => (x >= y) as i64,
        BinOp::And => (x != 0 && y != 0) as i64,
        BinOp::Or => (x != 0 || y != 0) as i64,
    })
}

fn index(i: &Value<impl Sized>, len: usize) -> Result<usize, Failure> {
    let i = i.as_int()?;
    if i < 0 || i as usize >= len {
        return Err(Failure::IndexOutOfBounds);
    }
    Ok(i as usize)
}

pub fn elem<C>(v: &Value<C>, i: &Value<C>) -> Result<Value<C>, Failure> {
    match v {
        Value::Str(s) => {
            let s = s.borrow();
            Ok(Value::Int(s[index(i, s.len())?] as i64))
        }
        Value::Array(a) => {
            let a = a.borrow();
            Ok(a[index(i, a.len())?].clone())
        }
        Value::Sexp(s) => {
            let elems = s.elems.borrow();
            Ok(elems[index(i, elems.len())?].clone())
        }
        _ => Err(Failure::NotAggregate),
    }
}

/// Stores `x` at position `i` of `v`. Strings keep the low byte of an integer.
pub fn sta<C>(v: &Value<C>, i: &Value<C>, x: Value<C>) -> Result<Value<C>, Failure> {
    match v {
        Value::Str(s) => {
            let mut s = s.borrow_mut();
            let i = index(i, s.len())?;
            s[i] = x.as_int()? as u8;
        }
        Value::Array(a) => {
            let mut a = a.borrow_mut();
            let i = index(i, a.len())?;
            a[i] = x.clone();
        }
        Value::Sexp(sx) => {
            let mut elems = sx.elems.borrow_mut();
            let i = index(i, elems.len())?;
            elems[i] = x.clone();
        }
        _ => return Err(Failure::NotAggregate),
    }
    Ok(x)
}

pub fn length<C>(v: &Value<C>) -> Result<Value<C>, Failure> {
    let n = match v {
        Value::Str(s) => s.borrow().len(),
        Value::Array(a) => a.borrow().len(),
        Value::Sexp(s) => s.elems.borrow().len(),
        _ => return Err(Failure::NotAggregate),
    };
    Ok(Value::Int(n as i64))
}

/// Whether `v` is an S-expression whose tag agrees with `tag` on the
/// compared prefix and whose arity is `arity`.
pub fn tag_matches<C>(v: &Value<C>, tag: &str, arity: usize) -> bool {
    match v {
        Value::Sexp(s) => pack_tag(&s.tag) == pack_tag(tag) && s.elems.borrow().len() == arity,
        _ => false,
    }
}

pub fn array_matches<C>(v: &Value<C>, len: usize) -> bool {
    matches!(v, Value::Array(a) if a.borrow().len() == len)
}

/// Same directive set and error behaviour as the native runtime; output
/// produced before a failing directive is kept.
pub fn printf<C>(fmt: &Value<C>, args: &[Value<C>], out: &mut Vec<u8>) -> Result<(), Failure> {
    let Value::Str(fmt) = fmt else { return Err(Failure::Printf) };
    let fmt = fmt.borrow().clone();
    let mut next = args.iter();
    let (mut i, mut lit_start) = (0, 0);
    while i < fmt.len() {
        if fmt[i] != b'%' {
            i += 1;
            continue;
        }
        out.extend_from_slice(&fmt[lit_start..i]);
        match *fmt.get(i + 1).ok_or(Failure::Printf)? {
            b'%' => out.push(b'%'),
            d @ (b'd' | b'c') => {
                let Some(Value::Int(v)) = next.next() else { return Err(Failure::Printf) };
                if d == b'd' {
                    out.extend_from_slice(format_int(*v, &mut [0; 24]));
                } else {
                    out.push(*v as u8);
                }
            }
            b's' => {
                let Some(Value::Str(s)) = next.next() else { return Err(Failure::Printf) };
                out.extend_from_slice(&s.borrow());
            }
            _ => return Err(Failure::Printf),
        }
        i += 2;
        lit_start = i;
    }
    out.extend_from_slice(&fmt[lit_start..]);
    if next.next().is_some() {
        return Err(Failure::Printf);
    }
    Ok(())
}

/// Standard input and output of a program run.
#[derive(Debug, Default)]
pub struct World {
    input: Vec<u8>,
    pos: usize,
    pub output: Vec<u8>,
}

/// Longest input token the native runtime accepts.
const MAX_TOKEN: usize = 32;

impl World {
    pub fn new(input: &[u8]) -> Self {
        World { input: input.to_vec(), pos: 0, output: Vec::new() }
    }

    /// Reads one whitespace-delimited integer.
    pub fn read_int(&mut self) -> Result<i64, Failure> {
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos == self.input.len() {
            return Err(Failure::EndOfInput);
        }
        let start = self.pos;
        while self.pos < self.input.len() && !self.input[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let token = &self.input[start..self.pos];
        if token.len() > MAX_TOKEN {
            return Err(Failure::MalformedInput);
        }
        parse_int_token(token)
    }

    pub fn write_int(&mut self, n: i64) {
        self.output.extend_from_slice(format_int(n, &mut [0; 24]));
        self.output.push(b'\n');
    }
}

/// A run-time failure with the source position of a failing pattern match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuntimeFailure {
    pub failure: Failure,
    pub loc: Option<SourceLoc>,
}

impl From<Failure> for RuntimeFailure {
    fn from(failure: Failure) -> Self {
        RuntimeFailure { failure, loc: None }
    }
}

impl fmt::Display for RuntimeFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.loc {
            Some(loc) if self.failure == Failure::MatchFailure => {
                write!(f, "runtime error: match failure at {}:{}", loc.line, loc.col)
            }
            _ => write!(f, "runtime error: {}", self.failure),
        }
    }
}

impl std::error::Error for RuntimeFailure {}

/// Output of a program run together with how it ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub output: Vec<u8>,
    pub failure: Option<RuntimeFailure>,
}

#[cfg(test)]
mod tests {
    use super::*;

    type V = Value<()>;

    #[test]
    fn truncating_division() {
        assert_eq!(int_binop(BinOp::Div, 7, 2), Ok(3));
        assert_eq!(int_binop(BinOp::Div, -7, 2), Ok(-3));
        assert_eq!(int_binop(BinOp::Mod, -7, 2), Ok(-1));
        assert_eq!(int_binop(BinOp::Mod, 7, 0), Err(Failure::DivisionByZero));
    }

    #[test]
    fn wrapping_at_the_fixnum_boundary() {
        let max = lamina_runtime::FIX_MAX;
        let min = lamina_runtime::FIX_MIN;
        assert_eq!(int_binop(BinOp::Add, max, 1), Ok(min));
        assert_eq!(int_binop(BinOp::Sub, min, 1), Ok(max));
        assert_eq!(int_binop(BinOp::Div, min, -1), Ok(min));
        assert_eq!(int_binop(BinOp::Mul, max, 2), Ok(-2));
    }

    #[test]
    fn sexp_indexing() {
        let v: V = Value::sexp("A", vec![Value::Int(1), Value::Int(2)]);
        assert_eq!(elem(&v, &Value::Int(1)).unwrap().as_int(), Ok(2));
        assert_eq!(length(&v).unwrap().as_int(), Ok(2));
        assert!(tag_matches(&v, "A", 2));
        assert!(!tag_matches(&v, "A", 3));
    }

    #[test]
    fn equality_is_by_reference() {
        let a: V = Value::string(b"x");
        let b: V = Value::string(b"x");
        assert!(a.identical(&a.clone()));
        assert!(!a.identical(&b));
        assert!(!a.identical(&Value::Int(0)));
        assert!(matches!(binop(BinOp::Add, &a, &Value::Int(1)), Err(Failure::BoxedOperand)));
    }

    #[test]
    fn printf_keeps_prefix_on_failure() {
        let fmt: V = Value::string(b"ab%d");
        let mut out = Vec::new();
        assert_eq!(printf(&fmt, &[], &mut out), Err(Failure::Printf));
        assert_eq!(out, b"ab");
    }

    #[test]
    fn world_reads_tokens() {
        let mut w = World::new(b" 3\n-4 x");
        assert_eq!(w.read_int(), Ok(3));
        assert_eq!(w.read_int(), Ok(-4));
        assert_eq!(w.read_int(), Err(Failure::MalformedInput));
        assert_eq!(w.read_int(), Err(Failure::EndOfInput));
    }
}
