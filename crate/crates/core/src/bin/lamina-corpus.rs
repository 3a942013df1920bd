use clap::Parser;
use lamina::corpus::{load_corpus, run_case, Status};
use lamina::driver::Mode;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lamina-corpus", about = "Run a test corpus in every mode")]
struct Cli {
    /// Directory holding `<name>.lama`, `<name>.expected` and `<name>.input`.
    dir: PathBuf,
    /// Machine-readable summary, one `name mode status` line per run.
    #[arg(long, default_value = "corpus-summary.txt")]
    summary: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cases = match load_corpus(&cli.dir) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("cannot load corpus: {e}");
            return ExitCode::from(4);
        }
    };
    let mut summary = String::new();
    let mut failures = 0;
    println!("{:<32} {:<8} {:<8} {:<8}", "case", "interp", "sm", "native");
    for case in &cases {
        let mut row = format!("{:<32}", case.name);
        for mode in Mode::ALL {
            let (status, _) = run_case(case, mode);
            let _ = write!(row, " {:<8}", status.to_string());
            let _ = writeln!(summary, "{} {} {}", case.name, mode.name(), status);
            if let Status::Fail(reason) = status {
                failures += 1;
                eprintln!("{} [{}]: {reason}", case.name, mode.name());
            }
        }
        println!("{row}");
    }
    println!("{} cases, {failures} failed runs", cases.len());
    if let Err(e) = std::fs::write(&cli.summary, summary) {
        eprintln!("cannot write summary: {e}");
        return ExitCode::from(4);
    }
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
