//! One PASS/FAIL line per acceptance criterion.
//!
//! `DISKLAB_SCALE=smoke` shrinks the sample sizes, `DISKLAB_ONLY=3,7` restricts the run.

use disklab::validation::{run_criterion, Scale, CRITERIA};
use std::process::ExitCode;

fn main() -> ExitCode {
    let scale = match std::env::var("DISKLAB_SCALE").as_deref() {
        Ok("smoke") => Scale::Smoke,
        _ => Scale::Full,
    };
    let only: Option<Vec<u8>> = std::env::var("DISKLAB_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = 0;
    for &(id, name, _) in CRITERIA.iter() {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        match run_criterion(id, scale, 2024) {
            Ok(r) => {
                if !r.passed {
                    failed += 1;
                }
                println!(
                    "{} criterion {:>2} ({}) [{:.1}s]: {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    id,
                    r.name,
                    r.seconds,
                    r.detail
                );
            }
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {id:>2} ({name}): error {e}");
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
