mod common;

use common::{literal, oracle_binop, random_nested_program, random_program, FIX_MAX, FIX_MIN, OPERATORS};
use lamina::ast::{annotate_kinds, check_kinds, node_count, pretty, same_shape, strip, Expr, ExprKind, Kind, Pattern};
use lamina::codegen::{gen_program, trace, Loc, SymState, K, OPERAND_REGISTERS};
use lamina::driver::{frontend, run_source, Mode, Observed};
use lamina::lexer::tokenize;
use lamina::parser::{parse_program, parse_program_with, parse_raw, ParseOptions};
use lamina::sm::{check_invariants, compile_sm, dump_sm, read_sm, run_sm_with_stats, Instr, SmProgram};
use proptest::prelude::*;

fn any_source() -> impl Strategy<Value = String> {
    prop_oneof![
        any::<u64>().prop_map(|s| random_program(s).source),
        any::<u64>().prop_map(random_nested_program),
    ]
}

fn interp(src: &str, input: &[u8]) -> Observed {
    run_source(src, Mode::Interpreter, input).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

// Straight-line fragment with its own evaluator.

#[derive(Debug, Clone)]
enum Sl {
    Const(i64),
    Var(usize),
    Bin(&'static str, Box<Sl>, Box<Sl>),
}

#[derive(Debug, Clone)]
enum Stmt {
    Assign(usize, Sl),
    Write(Sl),
    Read(usize),
}

const VARS: usize = 5;

fn fixnum() -> impl Strategy<Value = i64> {
    prop_oneof![3 => -20i64..20, 1 => FIX_MIN..=FIX_MAX]
}

fn sl_expr() -> impl Strategy<Value = Sl> {
    let leaf = prop_oneof![fixnum().prop_map(Sl::Const), (0..VARS).prop_map(Sl::Var)];
    leaf.prop_recursive(4, 24, 2, |inner| {
        (0..OPERATORS.len(), inner.clone(), inner).prop_map(|(op, a, b)| Sl::Bin(OPERATORS[op], Box::new(a), Box::new(b)))
    })
}

fn stmt(assignable: usize, reads: bool) -> BoxedStrategy<Stmt> {
    let assign = (0..assignable, sl_expr()).prop_map(|(x, e)| Stmt::Assign(x, e));
    let write = sl_expr().prop_map(Stmt::Write);
    if reads {
        prop_oneof![3 => assign, 2 => write, 1 => (0..assignable).prop_map(Stmt::Read)].boxed()
    } else {
        prop_oneof![assign, write].boxed()
    }
}

fn render_expr(e: &Sl) -> String {
    match e {
        Sl::Const(n) => literal(*n),
        Sl::Var(x) => format!("x{x}"),
        Sl::Bin(op, a, b) => format!("({} {op} {})", render_expr(a), render_expr(b)),
    }
}

fn render_stmts(stmts: &[Stmt]) -> String {
    let lines: Vec<String> = stmts
        .iter()
        .map(|s| match s {
            Stmt::Assign(x, e) => format!("x{x} := {}", render_expr(e)),
            Stmt::Write(e) => format!("write ({})", render_expr(e)),
            Stmt::Read(x) => format!("read (x{x})"),
        })
        .collect();
    lines.join(";\n")
}

fn declarations(init: &[i64; VARS]) -> String {
    let cells: Vec<String> = init.iter().enumerate().map(|(i, v)| format!("x{i} = {}", literal(*v))).collect();
    format!("var {};\n", cells.join(", "))
}

struct NaiveRun {
    output: String,
    divided_by_zero: bool,
}

fn naive_eval(e: &Sl, env: &std::collections::HashMap<String, i64>) -> Option<i64> {
    match e {
        Sl::Const(n) => Some(*n),
        Sl::Var(x) => Some(env[&format!("x{x}")]),
        Sl::Bin(op, a, b) => {
            let a = naive_eval(a, env)?;
            let b = naive_eval(b, env)?;
            oracle_binop(op, a, b)
        }
    }
}

fn naive_run(init: &[i64; VARS], stmts: &[Stmt], input: &[i64]) -> NaiveRun {
    let mut env: std::collections::HashMap<String, i64> =
        init.iter().enumerate().map(|(i, v)| (format!("x{i}"), *v)).collect();
    let mut input = input.iter();
    let mut output = String::new();
    for s in stmts {
        match s {
            Stmt::Assign(x, e) => match naive_eval(e, &env) {
                Some(v) => {
                    env.insert(format!("x{x}"), v);
                }
                None => return NaiveRun { output, divided_by_zero: true },
            },
            Stmt::Write(e) => match naive_eval(e, &env) {
                Some(v) => output.push_str(&format!("{v}\n")),
                None => return NaiveRun { output, divided_by_zero: true },
            },
            Stmt::Read(x) => {
                env.insert(format!("x{x}"), *input.next().expect("enough input"));
            }
        }
    }
    NaiveRun { output, divided_by_zero: false }
}

// Patterns with a value they match.

#[derive(Debug, Clone)]
enum Pat {
    Wild,
    Int(i64),
    Bind,
    Sexp(usize, Vec<Pat>),
    Array(Vec<Pat>),
}

fn pattern() -> impl Strategy<Value = Pat> {
    let leaf = prop_oneof![Just(Pat::Wild), (0i64..9).prop_map(Pat::Int), Just(Pat::Bind)];
    leaf.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            (0usize..3, prop::collection::vec(inner.clone(), 0..3)).prop_map(|(t, ps)| Pat::Sexp(t, ps)),
            prop::collection::vec(inner, 0..3).prop_map(Pat::Array),
        ]
    })
}

const TAGS: [&str; 3] = ["A", "B", "Cons"];

/// Renders a pattern, the value it matches and the sum of its bound values.
fn render_pattern(p: &Pat, next: &mut i64, names: &mut Vec<String>) -> (String, String, i64) {
    let list = |ps: &[Pat], next: &mut i64, names: &mut Vec<String>| {
        let mut sum = 0;
        let (pats, vals): (Vec<_>, Vec<_>) = ps
            .iter()
            .map(|p| {
                let (pat, val, s) = render_pattern(p, next, names);
                sum += s;
                (pat, val)
            })
            .unzip();
        (pats.join(", "), vals.join(", "), sum)
    };
    match p {
        Pat::Wild => ("_".into(), "7".into(), 0),
        Pat::Int(n) => (n.to_string(), n.to_string(), 0),
        Pat::Bind => {
            let name = format!("b{}", names.len());
            names.push(name.clone());
            *next += 1;
            (name, next.to_string(), *next)
        }
        Pat::Sexp(t, ps) if ps.is_empty() => (TAGS[*t].into(), TAGS[*t].into(), 0),
        Pat::Sexp(t, ps) => {
            let (pats, vals, sum) = list(ps, next, names);
            (format!("{} ({pats})", TAGS[*t]), format!("{} ({vals})", TAGS[*t]), sum)
        }
        Pat::Array(ps) => {
            let (pats, vals, sum) = list(ps, next, names);
            (format!("[{pats}]"), format!("[{vals}]"), sum)
        }
    }
}

fn visit(e: &Expr, f: &mut impl FnMut(&Expr)) {
    f(e);
    e.for_each_child(|c| visit(c, f));
}

fn case_patterns(e: &Expr) -> Vec<Pattern> {
    let mut out = Vec::new();
    visit(e, &mut |n| {
        if let ExprKind::Case(_, branches) = &n.kind {
            out.extend(branches.iter().map(|(p, _)| p.clone()));
        }
    });
    out
}

/// Largest stack depth reached by each function, keyed by its BEGIN name.
fn max_depths(p: &SmProgram) -> Vec<(String, usize)> {
    let report = check_invariants(p);
    let mut out: Vec<(String, usize)> = Vec::new();
    for (i, instr) in p.code.iter().enumerate() {
        if let Instr::Begin { name, .. } = instr {
            out.push((name.clone(), 0));
        }
        let Some(d) = report.depths[i] else { continue };
        let (pops, pushes) = instr.stack_effect();
        let peak = d.max(d - pops + pushes);
        if let Some(last) = out.last_mut() {
            last.1 = last.1.max(peak);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pretty_printing_round_trips(src in any_source()) {
        let p = parse_program(&src).unwrap();
        let again = parse_program_with(&pretty(&p.top), ParseOptions { allow_reserved: true }).unwrap();
        prop_assert!(same_shape(&again.top, &p.top), "{}", src);
    }

    #[test]
    fn node_count_is_linear_in_tokens(src in any_source()) {
        let tokens = tokenize(&src).unwrap().len();
        let nodes = node_count(&parse_raw(&src, ParseOptions::default()).unwrap());
        prop_assert!(nodes <= 4 * tokens, "{nodes} nodes for {tokens} tokens");
    }

    #[test]
    fn annotation_is_stable(src in any_source()) {
        let raw = parse_raw(&src, ParseOptions::default()).unwrap();
        let annotated = annotate_kinds(&raw, Kind::Void).unwrap();
        prop_assert!(check_kinds(&annotated, Kind::Void));
        prop_assert!(same_shape(&strip(&annotated), &raw));
        let again = annotate_kinds(&strip(&annotated), Kind::Void).unwrap();
        prop_assert!(same_shape(&again, &annotated));
    }

    #[test]
    fn desugared_patterns_bind_nothing(p in pattern(), scrutinee_matches in any::<bool>()) {
        let mut names = Vec::new();
        let (pat, value, sum) = render_pattern(&p, &mut 0, &mut names);
        let body = if names.is_empty() { "0".to_string() } else { names.join(" + ") };
        let scrutinee = if scrutinee_matches { value } else { "Other (1)".to_string() };
        let src = format!("case {scrutinee} of {pat} -> write ({body}) | _ -> write ((-1)) esac");
        let parsed = parse_program(&src).unwrap();
        let patterns = case_patterns(&parsed.top);
        prop_assert!(!patterns.is_empty());
        prop_assert!(patterns.iter().all(|p| !p.contains_bind()), "{}", src);
        if !scrutinee_matches && matches!(p, Pat::Wild | Pat::Bind) {
            return Ok(());
        }
        let expected = if scrutinee_matches { sum } else { -1 };
        prop_assert_eq!(interp(&src, b"").stdout, format!("{expected}\n").into_bytes(), "{}", src);
    }

    #[test]
    fn straight_line_matches_naive_oracle(
        init in prop::array::uniform5(fixnum()),
        stmts in prop::collection::vec(stmt(VARS, true), 1..12),
        input in prop::collection::vec(fixnum(), 12),
    ) {
        let src = format!("{}{}", declarations(&init), render_stmts(&stmts));
        let text: Vec<String> = input.iter().map(|n| n.to_string()).collect();
        let observed = interp(&src, text.join(" ").as_bytes());
        let expected = naive_run(&init, &stmts, &input);
        prop_assert_eq!(String::from_utf8_lossy(&observed.stdout), expected.output.as_str(), "{}", src);
        prop_assert_eq!(observed.exit_code == 3, expected.divided_by_zero, "{}", src);
        if expected.divided_by_zero {
            prop_assert!(observed.stderr.contains("division by zero"));
        }
    }

    #[test]
    fn do_while_unrolls_once(
        init in prop::array::uniform4(fixnum()),
        count in 0i64..6,
        body in prop::collection::vec(stmt(VARS - 1, false), 1..4),
        cond in sl_expr(),
    ) {
        let mut cells = [0; VARS];
        cells[..VARS - 1].copy_from_slice(&init);
        cells[VARS - 1] = count;
        let counter = format!("x{}", VARS - 1);
        let s = format!("{};\n{counter} := {counter} - 1", render_stmts(&body));
        let c = format!("{counter} > 0 && {}", render_expr(&cond));
        let looped = format!("{}do {s} while {c} od", declarations(&cells));
        let unrolled = format!("{}{s};\nwhile {c} do {s} od", declarations(&cells));
        for mode in [Mode::Interpreter, Mode::StackMachine] {
            let a = run_source(&looped, mode, b"").unwrap();
            let b = run_source(&unrolled, mode, b"").unwrap();
            prop_assert!(a == b, "{}: {}", mode.name(), looped);
        }
    }

    #[test]
    fn closures_see_later_mutations(before in fixnum(), after in fixnum()) {
        let src = format!(
            "var x = {};\nfun get () {{ x }}\nvar g = fun () {{ x }};\nx := {};\nwrite (get ()); write (g ())",
            literal(before),
            literal(after)
        );
        prop_assert_eq!(interp(&src, b"").stdout, format!("{after}\n{after}\n").into_bytes());
    }

    #[test]
    fn compiled_code_has_one_depth_everywhere(src in any_source()) {
        let (_, sm) = frontend(&src).unwrap();
        let report = check_invariants(&sm);
        prop_assert!(report.is_ok(), "{:?}", report.violations);
        prop_assert!(report.depths.iter().all(Option::is_some));
    }

    #[test]
    fn sm_dump_round_trips(src in any_source()) {
        let (_, sm) = frontend(&src).unwrap();
        prop_assert_eq!(read_sm(&dump_sm(&sm)).unwrap(), sm);
    }

    #[test]
    fn while_executes_one_cjmp_per_iteration(n in 0i64..300) {
        let src = format!("var i = 0, s = 0;\nwhile i < {n} do s := s + i; i := i + 1 od;\nwrite (s)");
        let sm = compile_sm(&parse_program(&src).unwrap()).unwrap();
        let (outcome, stats) = run_sm_with_stats(&sm, b"");
        prop_assert!(outcome.failure.is_none());
        prop_assert_eq!(stats.cjmps, n as u64 + 1);
        prop_assert_eq!(stats.jmps, 1);
    }

    #[test]
    fn emitted_code_is_no_shorter_than_sm_code(src in any_source()) {
        let (_, sm) = frontend(&src).unwrap();
        let unit = gen_program(&sm).unwrap();
        let non_labels = sm.code.iter().filter(|i| !matches!(i, Instr::Label(_))).count();
        prop_assert!(unit.instruction_count() >= non_labels);
    }

    #[test]
    fn frame_slots_follow_max_depth(src in any_source()) {
        let (_, sm) = frontend(&src).unwrap();
        let unit = gen_program(&sm).unwrap();
        for (name, depth) in max_depths(&sm) {
            prop_assert_eq!(unit.frame_slots[&name], depth.saturating_sub(K), "{}", name);
        }
    }
}

proptest! {
    #[test]
    fn stack_is_recoverable_from_depth(d in 0usize..64) {
        let mut grown = SymState::new();
        for _ in 0..d {
            grown.allocate();
        }
        let rebuilt = SymState::with_depth(d);
        prop_assert_eq!(rebuilt.stack(), grown.stack());
        let expected: Vec<Loc> = (0..d).map(Loc::at_depth).collect();
        prop_assert_eq!(grown.stack(), &expected[..]);
    }

    #[test]
    fn live_registers_survive_calls(live in 0usize..9) {
        let mut text = String::new();
        for v in 0..live {
            text.push_str(&format!("CONST ({v})\n"));
        }
        text.push_str("CONST (1)\nCONST (2)\nARRAY (2)\n");
        let code = read_sm(&format!("LABEL (\"main\")\nBEGIN (\"main\", 0, 0, [], [], [])\n{text}"))
            .unwrap()
            .code;
        let steps = trace(&code[2..]).unwrap();
        let call = &steps.last().unwrap().asm;
        let at = call.iter().position(|l| l.trim_start().starts_with("call")).unwrap();
        for reg in OPERAND_REGISTERS.iter().take(live.min(K)) {
            let saved = call[..at].iter().any(|l| l.contains(&format!("movq {reg}, ")) && l.contains("(%rbp)"));
            let restored = call[at..].iter().any(|l| l.contains("(%rbp), ") && l.trim_end().ends_with(reg));
            prop_assert!(saved && restored, "{} around call:\n{}", reg, call.join("\n"));
        }
    }
}
