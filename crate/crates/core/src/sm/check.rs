//! Static verification of compiled stack machine code.
//!
//! A: every instruction is reachable.
//! B: every instruction is reached at a single stack depth, without
//!    underflow, and functions return with exactly one value on the stack.
//! C: a label that follows an unconditional transfer is the target of an
//!    earlier jump, so its depth is known when it is reached in order. A
//!    label right after a `JMP` that no earlier jump targets continues at
//!    that jump's depth, which is how loop heads are laid out.

use super::{Instr, SmProgram};
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    Unreachable,
    DepthConflict { first: usize, second: usize },
    Underflow { depth: usize, pops: usize },
    EndDepth(usize),
    FallsOffEnd,
    UndefinedLabel(String),
    UntargetedLabel(String),
}

impl ViolationKind {
    /// The invariant, `'A'`, `'B'` or `'C'`, this violation breaks.
    pub fn invariant(&self) -> char {
        match self {
            ViolationKind::Unreachable => 'A',
            ViolationKind::DepthConflict { .. }
            | ViolationKind::Underflow { .. }
            | ViolationKind::EndDepth(_)
            | ViolationKind::FallsOffEnd => 'B',
            ViolationKind::UndefinedLabel(_) | ViolationKind::UntargetedLabel(_) => 'C',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantReport {
    /// Stack depth before each instruction, if reached.
    pub depths: Vec<Option<usize>>,
    pub violations: Vec<Violation>,
}

impl InvariantReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, invariant: char) -> bool {
        self.violations.iter().any(|v| v.kind.invariant() == invariant)
    }
}

struct Walker<'p> {
    code: &'p [Instr],
    depths: Vec<Option<usize>>,
    work: Vec<usize>,
    violations: Vec<Violation>,
}

impl Walker<'_> {
    fn reach(&mut self, i: usize, d: usize) {
        if i >= self.code.len() {
            self.violations.push(Violation { index: i.saturating_sub(1), kind: ViolationKind::FallsOffEnd });
            return;
        }
        match self.depths[i] {
            None => {
                self.depths[i] = Some(d);
                self.work.push(i);
            }
            Some(first) if first != d => {
                let kind = ViolationKind::DepthConflict { first, second: d };
                if !self.violations.iter().any(|v| v.index == i && v.kind == kind) {
                    self.violations.push(Violation { index: i, kind });
                }
            }
            Some(_) => {}
        }
    }
}

fn is_entry(code: &[Instr], i: usize) -> bool {
    matches!(code[i], Instr::Label(_)) && matches!(code.get(i + 1), Some(Instr::Begin { .. }))
}

pub fn check_invariants(p: &SmProgram) -> InvariantReport {
    let code = &p.code[..];
    let mut labels = HashMap::new();
    for (i, instr) in code.iter().enumerate() {
        if let Instr::Label(l) = instr {
            labels.insert(l.as_str(), i);
        }
    }
    // Labels that some jump earlier in the code targets.
    let mut targeted_before = vec![false; code.len()];
    {
        let mut seen = std::collections::HashSet::new();
        for (i, instr) in code.iter().enumerate() {
            if let Instr::Label(l) = instr {
                targeted_before[i] = seen.contains(l.as_str());
            }
            if let Instr::Jmp(t) | Instr::CJmp(_, t) = instr {
                seen.insert(t.as_str());
            }
        }
    }
    let loop_head = |i: usize| {
        matches!(code.get(i), Some(Instr::Label(_))) && !is_entry(code, i) && !targeted_before[i]
    };
    let mut w = Walker { code, depths: vec![None; code.len()], work: Vec::new(), violations: Vec::new() };

    for i in 0..code.len() {
        if is_entry(code, i) {
            w.reach(i, 0);
        }
    }
    while let Some(i) = w.work.pop() {
        let d = w.depths[i].unwrap();
        let (pops, pushes) = code[i].stack_effect();
        if pops > d {
            w.violations.push(Violation { index: i, kind: ViolationKind::Underflow { depth: d, pops } });
            continue;
        }
        let after = d - pops + pushes;
        let jump = |w: &mut Walker, l: &str| match labels.get(l) {
            Some(&t) => w.reach(t, after),
            None => w.violations.push(Violation { index: i, kind: ViolationKind::UndefinedLabel(l.to_string()) }),
        };
        match &code[i] {
            Instr::Jmp(l) => {
                jump(&mut w, l);
                if loop_head(i + 1) {
                    w.reach(i + 1, after);
                }
            }
            Instr::CJmp(_, l) => {
                jump(&mut w, l);
                w.reach(i + 1, after);
            }
            Instr::End => {
                if d != 1 {
                    w.violations.push(Violation { index: i, kind: ViolationKind::EndDepth(d) });
                }
            }
            Instr::Fail(_) => {}
            _ => w.reach(i + 1, after),
        }
    }

    for (i, instr) in code.iter().enumerate() {
        if w.depths[i].is_none() {
            w.violations.push(Violation { index: i, kind: ViolationKind::Unreachable });
        }
        if !matches!(instr, Instr::Label(_)) || i == 0 || !code[i - 1].is_barrier() || is_entry(code, i) {
            continue;
        }
        if !targeted_before[i] && !matches!(code[i - 1], Instr::Jmp(_)) {
            let Instr::Label(l) = instr else { unreachable!() };
            w.violations.push(Violation { index: i, kind: ViolationKind::UntargetedLabel(l.clone()) });
        }
    }
    w.violations.sort_by_key(|v| v.index);
    InvariantReport { depths: w.depths, violations: w.violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;
    use crate::sm::{compile_sm, read_sm};

    fn program(body: &str) -> SmProgram {
        read_sm(&format!("LABEL (\"main\")\nBEGIN (\"main\", 0, 0, [], [], [])\n{body}")).unwrap()
    }

    #[test]
    fn compiled_code_is_ok() {
        let src = "var x = 3; fun f (n) { case n of 0 -> 1 | _ -> n * f (n - 1) esac }
                   while x > 0 do write (f (x)); x := x - 1 od;
                   if x then write (1) elif x + 1 then write (2) else write (3) fi";
        let report = check_invariants(&compile_sm(&parse_program(src).unwrap()).unwrap());
        assert!(report.is_ok(), "{:?}", report.violations);
    }

    #[test]
    fn unreachable_code() {
        let r = check_invariants(&program("JMP (\"L1\")\nCONST (1)\nLABEL (\"L1\")\nCONST (0)\nEND"));
        assert!(r.violates('A'));
        assert_eq!(r.violations[0], Violation { index: 3, kind: ViolationKind::Unreachable });
    }

    #[test]
    fn diamond_with_unequal_depths() {
        let body = "CONST (1)\nCJMP (\"z\", \"L1\")\nCONST (2)\nCONST (3)\nJMP (\"L2\")\nLABEL (\"L1\")\nCONST (4)\n\
                    LABEL (\"L2\")\nEND";
        let r = check_invariants(&program(body));
        assert!(r.violates('B'));
        let conflict = r.violations.iter().find(|v| matches!(v.kind, ViolationKind::DepthConflict { .. })).unwrap();
        assert_eq!(conflict.index, 9);
        let ViolationKind::DepthConflict { first, second } = conflict.kind else { unreachable!() };
        assert_eq!([first.min(second), first.max(second)], [1, 2]);
    }

    #[test]
    fn label_reached_only_backwards() {
        let body = "CONST (0)\nCJMP (\"z\", \"L2\")\nFAIL ((1, 1))\nLABEL (\"L1\")\nCONST (7)\nEND\nLABEL (\"L2\")\nJMP (\"L1\")";
        let r = check_invariants(&program(body));
        assert!(r.violates('C'));
        assert!(!r.violates('A'));
        assert!(!r.violates('B'));
    }
}
