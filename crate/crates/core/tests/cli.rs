mod common;

use common::corpus_dir;
use lamina::ast::dump_ast;
use lamina::corpus::load_corpus;
use lamina::driver::{frontend, Mode};
use lamina::sm::dump_sm;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn lamina(args: &[&str], input: &[u8], env: &[(&str, &str)]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_lamina"))
        .args(args)
        .envs(env.iter().copied())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn source_file(dir: &Path, name: &str, src: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, src).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn dump_flags_leave_results_alone() {
    for case in load_corpus(&corpus_dir()).unwrap().iter().step_by(4) {
        let path = corpus_dir().join(format!("{}.lama", case.name));
        let path = path.to_str().unwrap();
        let (program, sm) = frontend(&case.source).unwrap();
        for mode in ["-i", "-s"] {
            let plain = lamina(&[mode, path], &case.input, &[]);
            for (flag, dump) in [("-dast", dump_ast(&program.top)), ("-ds", dump_sm(&sm))] {
                let dumped = lamina(&[mode, flag, path], &case.input, &[]);
                let mut expected = dump.into_bytes();
                expected.extend_from_slice(&plain.stdout);
                assert_eq!(dumped.stdout, expected, "{} {mode} {flag}", case.name);
                assert_eq!(dumped.status.code(), plain.status.code(), "{} {mode} {flag}", case.name);
                assert_eq!(dumped.stderr, plain.stderr, "{} {mode} {flag}", case.name);
            }
        }
    }
}

#[test]
fn native_build_writes_executable_and_assembly() {
    if !Mode::Native.supported() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = "var x = 2;\nprintf (\"Hello, world!\\n\"); write (x)\n";
    let path = source_file(dir.path(), "hello.lama", src);
    let exe = dir.path().join("hello");
    let built = lamina(&[&path], b"", &[]);
    assert!(built.status.success(), "{}", String::from_utf8_lossy(&built.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert_eq!(run.stdout, b"Hello, world!\n2\n");
    let asm = std::fs::read_to_string(exe.with_extension("s")).unwrap();
    let (_, sm) = frontend(src).unwrap();
    let comments = asm.lines().filter(|l| l.starts_with("# ") && l.ends_with(" /")).count();
    assert_eq!(comments, sm.code.len());

    let out = dir.path().join("renamed");
    let built = lamina(&["-o", out.to_str().unwrap(), &path], b"", &[]);
    assert!(built.status.success());
    assert_eq!(Command::new(&out).output().unwrap().stdout, b"Hello, world!\n2\n");
}

#[test]
fn exit_codes_separate_failure_classes() {
    let dir = tempfile::tempdir().unwrap();
    let syntax = source_file(dir.path(), "syntax.lama", "write (1");
    let ill_formed = source_file(dir.path(), "ill.lama", "skip + 3");
    let divide = source_file(dir.path(), "divide.lama", "var z = 0;\nwrite (1 / z)");
    for mode in ["-i", "-s"] {
        assert_eq!(lamina(&[mode, &syntax], b"", &[]).status.code(), Some(2));
        assert_eq!(lamina(&[mode, &ill_formed], b"", &[]).status.code(), Some(2));
        let failed = lamina(&[mode, &divide], b"", &[]);
        assert_eq!(failed.status.code(), Some(3));
        assert!(String::from_utf8_lossy(&failed.stderr).contains("division by zero"));
    }
    let missing = lamina(&["-i", dir.path().join("absent.lama").to_str().unwrap()], b"", &[]);
    assert_eq!(missing.status.code(), Some(4));
    assert!(!missing.stderr.is_empty());

    if !Mode::Native.supported() {
        return;
    }
    assert!(lamina(&[&divide], b"", &[]).status.success());
    let failed = Command::new(dir.path().join("divide")).output().unwrap();
    assert_eq!(failed.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&failed.stderr).contains("division by zero"));
    let no_cc = lamina(&[&divide], b"", &[("LAMINA_CC", "/nonexistent/cc")]);
    assert_eq!(no_cc.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&no_cc.stderr).contains("/nonexistent/cc"));
}
