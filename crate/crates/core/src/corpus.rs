//! Test corpus: `<name>.lama` with `<name>.expected` standard output, and
//! optionally `<name>.input` and the expected standard error `<name>.stderr`.

use crate::driver::{run_source, Mode, Observed, FAILURE_EXIT_CODE};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusCase {
    pub name: String,
    pub source: String,
    pub input: Vec<u8>,
    pub expected_stdout: Vec<u8>,
    pub expected_stderr: Option<String>,
}

impl CorpusCase {
    pub fn expected(&self) -> Observed {
        Observed {
            stdout: self.expected_stdout.clone(),
            stderr: self.expected_stderr.clone().unwrap_or_default(),
            exit_code: if self.expected_stderr.is_some() { FAILURE_EXIT_CODE } else { 0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail(String),
    /// The host cannot run the mode.
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Pass => f.write_str("pass"),
            Status::Fail(_) => f.write_str("fail"),
            Status::Skip => f.write_str("SKIP"),
        }
    }
}

pub fn load_corpus(dir: &Path) -> std::io::Result<Vec<CorpusCase>> {
    let mut cases = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("lama") {
            continue;
        }
        let read = |ext: &str| std::fs::read(path.with_extension(ext));
        cases.push(CorpusCase {
            name: path.file_stem().unwrap().to_string_lossy().into_owned(),
            source: std::fs::read_to_string(&path)?,
            input: read("input").unwrap_or_default(),
            expected_stdout: read("expected")?,
            expected_stderr: read("stderr").ok().map(|b| String::from_utf8_lossy(&b).into_owned()),
        });
    }
    cases.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(cases)
}

/// Runs a case in one mode and compares against its expectation.
pub fn run_case(case: &CorpusCase, mode: Mode) -> (Status, Option<Observed>) {
    if !mode.supported() {
        return (Status::Skip, None);
    }
    match run_source(&case.source, mode, &case.input) {
        Err(e) => (Status::Fail(e.to_string()), None),
        Ok(obs) if obs == case.expected() => (Status::Pass, Some(obs)),
        Ok(obs) => (Status::Fail(describe_mismatch(&case.expected(), &obs)), Some(obs)),
    }
}

pub fn describe_mismatch(expected: &Observed, got: &Observed) -> String {
    format!(
        "expected stdout {:?}, stderr {:?}, exit {}; got stdout {:?}, stderr {:?}, exit {}",
        String::from_utf8_lossy(&expected.stdout),
        expected.stderr,
        expected.exit_code,
        String::from_utf8_lossy(&got.stdout),
        got.stderr,
        got.exit_code
    )
}
