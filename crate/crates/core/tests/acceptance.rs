//! Acceptance suite: one pass/fail line per criterion, plus negative controls
//! that tamper with conservation-law fluxes and must be caught.
//!
//! Extra arguments select criteria by name (`cargo test --test acceptance -- A3 A6`).

use std::process::ExitCode;

use liedrag::acceptance::{check, check_with, Mutation, CRITERIA};

fn main() -> ExitCode {
    let wanted: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .filter(|a| CRITERIA.iter().any(|(c, _)| c.eq_ignore_ascii_case(a)))
        .collect();
    let selected: Vec<&str> = CRITERIA
        .iter()
        .map(|(c, _)| *c)
        .filter(|c| wanted.is_empty() || wanted.iter().any(|w| w.eq_ignore_ascii_case(c)))
        .collect();

    let mut failures = 0;
    let mut details = String::new();
    for c in &selected {
        let report = check(c).expect("criterion names come from the table").remove(0);
        println!("{}", report.summary());
        if !report.passed() {
            failures += 1;
        }
        details.push_str(&report.to_string());
    }

    for c in ["A6", "A8"].into_iter().filter(|c| selected.contains(c)) {
        let tampered = check_with(c, Mutation::FlipFlux).unwrap().remove(0);
        let caught = !tampered.passed();
        println!(
            "{c}   {} negative control: reversed flux is {}",
            if caught { "PASS" } else { "FAIL" },
            if caught { "rejected" } else { "accepted" }
        );
        if !caught {
            failures += 1;
        }
        details.push_str(&format!("negative control for {c}, flux reversed (expected to fail):\n"));
        details.push_str(&tampered.to_string());
    }

    println!("\n{details}");
    if failures == 0 {
        println!("acceptance: all {} criteria passed", selected.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} failure(s)");
        ExitCode::FAILURE
    }
}
