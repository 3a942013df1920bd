//! Running programs in each mode and building native executables.

use crate::ast::Program;
use crate::codegen::{gen_program, AsmUnit, CodegenError};
use crate::interp::eval_program;
use crate::parser::{parse_program, FrontendError};
use crate::sm::{compile_sm, run_sm, CompileError, SmProgram};
use crate::value::RunOutcome;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use thiserror::Error;

/// Exit status of a program that stopped with a run-time failure.
pub const FAILURE_EXIT_CODE: i32 = lamina_runtime::FAILURE_EXIT_CODE;

/// The front end recurses on the tree, so deep nesting needs a large stack.
const FRONTEND_STACK_BYTES: usize = 256 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Interpreter,
    StackMachine,
    Native,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Interpreter, Mode::StackMachine, Mode::Native];

    /// Whether this host can run the mode; native code targets x86-64 Linux.
    pub fn supported(self) -> bool {
        self != Mode::Native || cfg!(all(target_arch = "x86_64", target_os = "linux"))
    }

    /// The modes this host can run.
    pub fn available() -> Vec<Mode> {
        Mode::ALL.into_iter().filter(|m| m.supported()).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Interpreter => "interp",
            Mode::StackMachine => "sm",
            Mode::Native => "native",
        }
    }
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("{0}")]
    Frontend(#[from] FrontendError),
    #[error("compile error at {}: {}", .0.loc, .0.message)]
    Compile(#[from] CompileError),
    #[error("code generation error: {0}")]
    Codegen(#[from] CodegenError),
    #[error("toolchain error: {0}")]
    Toolchain(String),
}

impl DriverError {
    /// Process exit code reported by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::Toolchain(_) => 4,
            _ => 2,
        }
    }
}

/// What a run of a program looks like from the outside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observed {
    pub stdout: Vec<u8>,
    pub stderr: String,
    pub exit_code: i32,
}

impl From<RunOutcome> for Observed {
    fn from(r: RunOutcome) -> Self {
        match r.failure {
            None => Observed { stdout: r.output, stderr: String::new(), exit_code: 0 },
            Some(f) => Observed { stdout: r.output, stderr: format!("{f}\n"), exit_code: FAILURE_EXIT_CODE },
        }
    }
}

/// Front end plus the stack machine compiler, which also serves as the
/// static check for every mode.
pub fn frontend(src: &str) -> Result<(Program, SmProgram), DriverError> {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(FRONTEND_STACK_BYTES)
            .spawn_scoped(s, || {
                let program = parse_program(src)?;
                let sm = compile_sm(&program)?;
                Ok((program, sm))
            })
            .expect("spawning the front end thread")
            .join()
            .unwrap_or_else(|panic| std::panic::resume_unwind(panic))
    })
}

pub fn compile_asm(src: &str) -> Result<AsmUnit, DriverError> {
    let (_, sm) = frontend(src)?;
    Ok(gen_program(&sm)?)
}

/// Path of the native runtime archive.
pub fn runtime_archive() -> PathBuf {
    std::env::var_os("LAMINA_RUNTIME")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("LAMINA_RT_ARCHIVE")))
}

/// Assembles and links generated code into an executable.
pub fn link(unit: &AsmUnit, exe: &Path) -> Result<(), DriverError> {
    let dir = tempfile::tempdir().map_err(|e| DriverError::Toolchain(e.to_string()))?;
    let asm = dir.path().join("program.s");
    std::fs::write(&asm, unit.render()).map_err(|e| DriverError::Toolchain(e.to_string()))?;
    let cc = std::env::var("LAMINA_CC").unwrap_or_else(|_| "cc".into());
    let out = Command::new(&cc)
        .arg("-o")
        .arg(exe)
        .arg(&asm)
        .arg(runtime_archive())
        .output()
        .map_err(|e| DriverError::Toolchain(format!("cannot run {cc}: {e}")))?;
    if !out.status.success() {
        return Err(DriverError::Toolchain(String::from_utf8_lossy(&out.stderr).into_owned()));
    }
    Ok(())
}

pub fn build_native(src: &str, exe: &Path) -> Result<(), DriverError> {
    link(&compile_asm(src)?, exe)
}

/// Runs an executable with the given standard input and extra environment.
pub fn run_executable(exe: &Path, input: &[u8], env: &[(&str, &str)]) -> Result<Observed, DriverError> {
    let mut child = Command::new(exe)
        .envs(env.iter().copied())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| DriverError::Toolchain(e.to_string()))?;
    let mut stdin = child.stdin.take().unwrap();
    let input = input.to_vec();
    let feeder = std::thread::spawn(move || {
        let _ = stdin.write_all(&input);
    });
    let out = child.wait_with_output().map_err(|e| DriverError::Toolchain(e.to_string()))?;
    let _ = feeder.join();
    let exit_code = out.status.code().unwrap_or(-1);
    Ok(Observed { stdout: out.stdout, stderr: String::from_utf8_lossy(&out.stderr).into_owned(), exit_code })
}

/// Runs a program in the given mode.
pub fn run_source(src: &str, mode: Mode, input: &[u8]) -> Result<Observed, DriverError> {
    let (program, sm) = frontend(src)?;
    match mode {
        Mode::Interpreter => Ok(eval_program(&program, input).into()),
        Mode::StackMachine => Ok(run_sm(&sm, input).into()),
        Mode::Native => {
            let dir = tempfile::tempdir().map_err(|e| DriverError::Toolchain(e.to_string()))?;
            let exe = dir.path().join("program");
            link(&gen_program(&sm)?, &exe)?;
            run_executable(&exe, input, &[])
        }
    }
}
