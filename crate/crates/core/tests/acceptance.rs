//! Acceptance suite: runs every verification suite at its stated tolerance
//! and prints one pass/fail line per criterion.

use std::sync::Mutex;

use rectikernel_core::verify::{run_suite, SuiteReport};

// The criteria are internally data-parallel and several carry wall-clock
// budgets, so they must not compete with each other for cores.
static EXCLUSIVE: Mutex<()> = Mutex::new(());

fn run(name: &str) -> SuiteReport {
    let _guard = EXCLUSIVE.lock().unwrap_or_else(|e| e.into_inner());
    let report = run_suite(name).expect("known suite");
    let status = if report.passed() { "PASS" } else { "FAIL" };
    println!(
        "[{status}] {:<16} {:>7.2}s  {} assertions",
        report.suite,
        report.elapsed_secs,
        report.assertions.len()
    );
    for a in &report.assertions {
        if !a.pass {
            println!("       FAILED: {} ({})", a.label, a.detail);
        }
    }
    report
}

macro_rules! criterion {
    ($fn_name:ident, $suite:expr) => {
        #[test]
        fn $fn_name() {
            let report = run($suite);
            assert!(
                report.passed(),
                "criterion '{}' failed: {:?}",
                $suite,
                report.first_failure()
            );
        }
    };
}

criterion!(criterion_01_positivity, "positivity");
criterion!(criterion_02_factored_equals_direct, "factored");
criterion!(criterion_03_melnikov_identity, "melnikov");
criterion!(criterion_04_huovinen_boundary, "huovinen");
criterion!(criterion_05_comparability, "comparability");
criterion!(criterion_06_scaling_covariance, "scaling");
criterion!(criterion_07_montecarlo_soundness, "montecarlo");
criterion!(criterion_08_mv_residual, "mv-residual");
criterion!(criterion_09_noise_flatness, "noise-flatness");
criterion!(criterion_10_discrimination, "discrimination");
criterion!(criterion_11_structural_invariants, "structural");
