//! One pass/fail line per acceptance criterion on the default grid
//! (d = 3, sphere 64x128, radial 48).

use std::process::ExitCode;
use std::time::Instant;

use hwy_lab::suite::{criterion, Sizes};
use hwy_lab::{Lab, LabConfig};

fn main() -> ExitCode {
    let start = Instant::now();
    let config = LabConfig::default();
    let lab = match Lab::build(&config) {
        Ok(l) => l,
        Err(e) => {
            println!("acceptance: cannot build the default lab: {e}");
            return ExitCode::FAILURE;
        }
    };
    let sizes = Sizes::default();
    let mut failed = Vec::new();
    for id in 1..=11u8 {
        let t = Instant::now();
        let c = criterion(&lab, id, &sizes);
        let status = if c.passed() { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {status} {} ({:.1} s)",
            c.title,
            t.elapsed().as_secs_f64()
        );
        for ch in &c.checks {
            let target = ch.target.map(|t| format!(" target {t:.6e}")).unwrap_or_default();
            println!(
                "    [{}] {} = {:.6e} ({} {:.3e}{target})",
                if ch.pass { "ok" } else { "FAIL" },
                ch.name,
                ch.value,
                ch.compare,
                ch.tolerance
            );
        }
        for n in &c.notes {
            println!("    note: {n}");
        }
        if !c.passed() {
            failed.push(id);
        }
    }
    println!(
        "acceptance: {} of 11 criteria passed in {:.1} s",
        11 - failed.len(),
        start.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
