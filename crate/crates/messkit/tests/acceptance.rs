//! Acceptance criteria: one PASS/FAIL line each, nonzero exit on any failure.
//! CSV output of the emitting criteria goes to a temporary directory, which
//! the reproducibility criterion reruns into and compares byte for byte.

use messkit_core::suite::{run_suite, SuiteOptions};
use std::process::ExitCode;

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let opts = SuiteOptions {
        out_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let mut failed = 0;
    for id in 1..=12 {
        let report = run_suite(&[id], &opts).remove(0);
        println!("{}", report.line());
        for note in &report.notes {
            println!("    {note}");
        }
        failed += usize::from(!report.pass);
    }
    println!("acceptance: {} of 12 criteria pass", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
