//! x86-64 code generation by symbolic interpretation of stack machine code.
//!
//! The generator walks the instructions keeping a stack of locations instead
//! of values. Locations are handed out in a fixed order, operand registers
//! first and frame slots after them, so the symbolic stack is determined by
//! its depth alone and every join point agrees on where values live.

mod emit;

pub use emit::{gen_program, trace, AsmUnit, CodegenError, TraceStep};

use std::fmt;

/// Operand registers in allocation order. They are callee-saved in the C
/// ABI, so runtime entry points preserve them.
pub const OPERAND_REGISTERS: [&str; 5] = ["%rbx", "%r12", "%r13", "%r14", "%r15"];

/// Number of operand registers.
pub const K: usize = OPERAND_REGISTERS.len();

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Loc {
    OperandReg(usize),
    FrameSlot(usize),
    GlobalCell(String),
    Immediate(i64),
}

impl Loc {
    /// The location of the stack entry at `depth` (0 is the bottom).
    pub fn at_depth(depth: usize) -> Loc {
        if depth < K {
            Loc::OperandReg(depth)
        } else {
            Loc::FrameSlot(depth - K)
        }
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loc::OperandReg(i) => f.write_str(OPERAND_REGISTERS[*i]),
            Loc::FrameSlot(i) => write!(f, "S({i})"),
            Loc::GlobalCell(g) => write!(f, "global_{g}"),
            Loc::Immediate(n) => write!(f, "${n}"),
        }
    }
}

/// Symbolic stack of one function under generation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymState {
    stack: Vec<Loc>,
    high_water: usize,
    barrier: bool,
}

impl SymState {
    pub fn new() -> Self {
        Self::default()
    }

    /// The state reached from the empty one by `depth` allocations.
    pub fn with_depth(depth: usize) -> Self {
        let mut s = Self::new();
        s.reset_to(depth);
        s
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    pub fn stack(&self) -> &[Loc] {
        &self.stack
    }

    /// Number of frame slots used so far.
    pub fn high_water(&self) -> usize {
        self.high_water
    }

    /// Set after an unconditional transfer, cleared by the next label.
    pub fn barrier(&self) -> bool {
        self.barrier
    }

    pub fn allocate(&mut self) -> Loc {
        let loc = Loc::at_depth(self.stack.len());
        if let Loc::FrameSlot(i) = loc {
            self.high_water = self.high_water.max(i + 1);
        }
        self.stack.push(loc.clone());
        loc
    }

    pub fn pop(&mut self) -> Option<Loc> {
        self.stack.pop()
    }

    pub fn top(&self) -> Option<&Loc> {
        self.stack.last()
    }

    /// Rebuilds the stack for a given depth.
    pub fn reset_to(&mut self, depth: usize) {
        self.stack.clear();
        for _ in 0..depth {
            self.allocate();
        }
    }

    fn set_barrier(&mut self, on: bool) {
        self.barrier = on;
    }
}
