//! One test per acceptance group. Each prints a PASS/FAIL line per check.

use vmm_core::acceptance::{run_group, run_suite, SuiteOptions, GROUPS};

fn check(group: &str) {
    let rows = run_group(group, false).unwrap();
    for r in &rows {
        println!("{}", r.line());
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    assert!(!rows.is_empty(), "{group} produced no checks");
    assert!(failed.is_empty(), "failed: {failed:?}");
}

#[test]
fn mountain_pass_exactness() {
    check("mountain_pass");
}

#[test]
fn index_bound_enforcement() {
    check("index_bound");
}

#[test]
fn deformation_properties() {
    check("deformation");
}

#[test]
fn degenerate_case_by_perturbation() {
    check("perturbation");
}

#[test]
fn entropy_machinery() {
    check("entropy");
}

#[test]
fn near_critical_certificates() {
    check("near_critical");
}

#[test]
fn geodesic_demo() {
    check("geodesic");
}

#[test]
fn numerical_hygiene() {
    check("hygiene");
}

#[test]
fn injected_tolerance_fails_its_group() {
    let rows = run_group("entropy", true).unwrap();
    assert!(rows.iter().any(|r| !r.pass));
    for r in rows.iter().filter(|r| !r.pass) {
        println!("{}", r.line());
    }
}

#[test]
fn filter_and_inject_validation() {
    let opts = SuiteOptions {
        filter: Some("nothing".into()),
        inject: None,
    };
    assert!(run_suite(&opts).unwrap_err().to_string().contains("entropy"));
    let opts = SuiteOptions {
        filter: Some("entropy".into()),
        inject: Some("bogus".into()),
    };
    assert!(run_suite(&opts).is_err());
    let opts = SuiteOptions {
        filter: Some("entropy".into()),
        inject: None,
    };
    let rows = run_suite(&opts).unwrap();
    assert!(rows.iter().all(|r| r.name.starts_with("entropy: ")));
    assert_eq!(GROUPS.len(), 8);
}
