//! Gradient-check suite: every registered primitive and composed block must
//! match central differences, the corrupted fixture must fail loudly, and
//! the whole run must stay fast.

use std::time::Instant;

use lyrnet_core::diagnostics::{run_gradcheck_suite, DEFAULT_TOLERANCE};

#[test]
fn all_real_entries_pass_at_default_tolerance() {
    let results = run_gradcheck_suite(DEFAULT_TOLERANCE, false).unwrap();
    for r in &results {
        assert!(
            r.passed,
            "{} failed gradient check: max rel err {:.3e}",
            r.name, r.max_rel_err
        );
    }
}

#[test]
fn suite_covers_all_primitives_and_composed_blocks() {
    let results = run_gradcheck_suite(DEFAULT_TOLERANCE, false).unwrap();
    let names: Vec<&str> = results.iter().map(|r| r.name).collect();
    let primitives = [
        "add",
        "mul",
        "matmul",
        "transpose",
        "reshape",
        "concat_rows",
        "softmax",
        "gelu",
        "tanh",
        "layer_norm",
        "dropout",
        "embedding_lookup",
        "cross_entropy",
        "gather_rel",
    ];
    assert!(primitives.len() >= 10);
    for p in primitives {
        assert!(names.contains(&p), "missing primitive entry {p}");
    }
    for block in ["attention_block", "head_stack", "full_loss"] {
        assert!(names.contains(&block), "missing composed entry {block}");
    }
}

#[test]
fn corrupted_backward_fixture_is_caught_and_named() {
    let results = run_gradcheck_suite(DEFAULT_TOLERANCE, true).unwrap();
    let bad = results
        .iter()
        .find(|r| r.name == "corrupted_backward_fixture")
        .expect("fixture entry present");
    assert!(!bad.passed);
    assert!(bad.max_rel_err > 1e-2);
    // corruption must not leak into the genuine entries
    assert!(results.iter().filter(|r| !r.passed).count() == 1);
}

#[test]
fn suite_finishes_well_under_a_minute() {
    let start = Instant::now();
    run_gradcheck_suite(DEFAULT_TOLERANCE, true).unwrap();
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "suite took {:.1}s",
        elapsed.as_secs_f64()
    );
}

#[test]
fn suite_is_deterministic() {
    let a = run_gradcheck_suite(DEFAULT_TOLERANCE, false).unwrap();
    let b = run_gradcheck_suite(DEFAULT_TOLERANCE, false).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.name, y.name);
        assert_eq!(x.max_rel_err.to_bits(), y.max_rel_err.to_bits());
    }
}
