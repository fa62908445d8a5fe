//! `quantrelax verify`: run the fast property-check subset for CI.

use quantrelax::verify::{run_checks, Faults};

use crate::{EXIT_OK, EXIT_PROPERTY, EXIT_VALIDATION};

pub fn execute(filter: Option<&str>) -> u8 {
    let outcomes = run_checks(filter, &Faults::default());
    if outcomes.is_empty() {
        eprintln!("error: no checks match filter {:?}", filter.unwrap_or(""));
        return EXIT_VALIDATION;
    }
    let mut failed = 0usize;
    for o in &outcomes {
        if o.passed {
            println!("PASS {} ({})", o.name, o.detail);
        } else {
            failed += 1;
            println!("FAIL {} ({})", o.name, o.detail);
        }
    }
    println!(
        "{}/{} checks passed",
        outcomes.len() - failed,
        outcomes.len()
    );
    if failed > 0 {
        EXIT_PROPERTY
    } else {
        EXIT_OK
    }
}
