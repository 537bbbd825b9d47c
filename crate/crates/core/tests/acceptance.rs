//! Acceptance suite: every numbered criterion at full size, one summary line
//! each, with its wall-clock budget enforced. Exits non-zero on any failure.

use hyperconvex::verify::{criteria, Level};

fn main() {
    let mut failed = vec![];
    for c in criteria() {
        let o = c.run(Level::Full);
        let in_time = o.seconds < o.budget;
        let pass = o.pass && in_time;
        println!(
            "criterion {:>2} {:<16} {} ({:.1} s of {:.0} s)",
            o.id,
            o.name,
            if pass { "PASS" } else { "FAIL" },
            o.seconds,
            o.budget
        );
        for ch in &o.checks {
            let mark = if ch.pass { "ok" } else { "FAILED" };
            println!("    {mark:<6} {:<58} {:>11.3e}  limit {:.1e}", ch.name, ch.value, ch.tolerance);
        }
        if let Some(e) = &o.error {
            println!("    FAILED error: {e}");
        }
        if !in_time {
            println!("    FAILED runtime over budget");
        }
        if !pass {
            failed.push(o.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
