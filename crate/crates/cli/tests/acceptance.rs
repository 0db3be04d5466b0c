//! Release gate at full resolution: one line per criterion, nonzero exit on any failure.

use std::process::ExitCode;

use dnls_lab::acceptance::{self, Resolution};

fn main() -> ExitCode {
    // `cargo test -- --list` and filtered runs should not trigger the full suite
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let results = acceptance::run(Resolution::full(), None, &[]);
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
