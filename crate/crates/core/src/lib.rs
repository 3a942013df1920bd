//! A compiler for a small Algol-family language with first-class functions,
//! S-expressions and pattern matching. Programs run in three modes that are
//! expected to agree: a reference interpreter, a stack machine, and native
//! x86-64 code produced by symbolically interpreting stack machine code.

pub mod ast;
pub mod codegen;
pub mod corpus;
pub mod driver;
pub mod lexer;
pub mod parser;
pub mod sm;
pub mod interp;
pub mod value;
