use clap::Parser;
use lamina::ast::dump_ast;
use lamina::codegen::gen_program;
use lamina::driver::{frontend, link, DriverError, Observed};
use lamina::interp::eval_program;
use lamina::sm::{dump_sm, run_sm};
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lamina", about = "Compile and run programs")]
struct Cli {
    /// Run with the reference interpreter.
    #[arg(short = 'i', conflicts_with = "stack_machine")]
    interpret: bool,
    /// Run on the stack machine.
    #[arg(short = 's')]
    stack_machine: bool,
    /// Print the desugared program.
    #[arg(long = "dast")]
    dump_ast: bool,
    /// Print the stack machine code.
    #[arg(long = "ds")]
    dump_sm: bool,
    /// Output executable; defaults to the source name without extension.
    #[arg(short = 'o')]
    output: Option<PathBuf>,
    source: PathBuf,
}

fn report(e: &DriverError) -> ExitCode {
    eprintln!("{e}");
    ExitCode::from(e.exit_code() as u8)
}

fn finish(obs: Observed) -> ExitCode {
    std::io::stdout().write_all(&obs.stdout).ok();
    eprint!("{}", obs.stderr);
    ExitCode::from(obs.exit_code as u8)
}

/// Accepts the single-dash spellings `-dast` and `-ds`.
fn normalized_args() -> Vec<String> {
    std::env::args()
        .map(|a| match a.as_str() {
            "-dast" => "--dast".to_string(),
            "-ds" => "--ds".to_string(),
            _ => a,
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse_from(normalized_args());
    let src = match std::fs::read_to_string(&cli.source) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("cannot read {}: {e}", cli.source.display());
            return ExitCode::from(4);
        }
    };
    let (program, sm) = match frontend(&src) {
        Ok(r) => r,
        Err(e) => return report(&e),
    };
    if cli.dump_ast {
        print!("{}", dump_ast(&program.top));
    }
    if cli.dump_sm {
        print!("{}", dump_sm(&sm));
    }
    if cli.interpret || cli.stack_machine {
        let mut input = Vec::new();
        std::io::stdin().read_to_end(&mut input).ok();
        let outcome = if cli.interpret { eval_program(&program, &input) } else { run_sm(&sm, &input) };
        return finish(outcome.into());
    }
    if cli.dump_ast || cli.dump_sm {
        return ExitCode::SUCCESS;
    }
    let exe = cli.output.unwrap_or_else(|| cli.source.with_extension(""));
    let built = gen_program(&sm).map_err(DriverError::from).and_then(|unit| {
        let asm = exe.with_extension("s");
        std::fs::write(&asm, unit.render())
            .map_err(|e| DriverError::Toolchain(format!("cannot write {}: {e}", asm.display())))?;
        link(&unit, &exe)
    });
    match built {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
