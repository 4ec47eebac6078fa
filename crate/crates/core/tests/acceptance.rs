//! The acceptance matrix, one test per criterion. Each test prints a
//! `PASS`/`FAIL` line with the measured value and runtime before asserting.

use linpot::acceptance::{self, CriterionResult, DEFAULT_SEED};
use linpot::verify::LikelihoodMode;

fn report(r: &CriterionResult) {
    println!("{}", r.line());
    assert!(r.pass, "criterion {} failed: {}", r.id, r.detail);
}

#[test]
fn criterion_01_classical_potential() {
    report(&acceptance::criterion_1(DEFAULT_SEED));
}

#[test]
fn criterion_02_logdet_fuzz() {
    report(&acceptance::criterion_2(DEFAULT_SEED));
}

#[test]
fn criterion_02_logdet_fuzz_narrowed_tolerance() {
    report(&acceptance::criterion_2_with(DEFAULT_SEED, 1e-11));
}

#[test]
fn criterion_03_variance_reduction_exact() {
    report(&acceptance::criterion_3(DEFAULT_SEED));
}

#[test]
fn criterion_03_mutation_is_caught() {
    let r = acceptance::criterion_3_with(DEFAULT_SEED, LikelihoodMode::Complemented);
    println!("{} (mutation, expected FAIL)", r.line());
    assert!(!r.pass, "a corrupted posterior update went unnoticed");
}

#[test]
fn criterion_04_counterexample() {
    report(&acceptance::criterion_4(DEFAULT_SEED));
}

#[test]
fn criterion_05_potential_exact_tree() {
    report(&acceptance::criterion_5(DEFAULT_SEED));
}

#[test]
fn criterion_06_potential_monte_carlo() {
    report(&acceptance::criterion_6(DEFAULT_SEED));
}

#[test]
fn criterion_07_trace_cauchy_schwarz() {
    report(&acceptance::criterion_7(DEFAULT_SEED));
}

#[test]
fn criterion_08a_regret_gaussian() {
    let cfg = acceptance::gaussian_regret_config(acceptance_seed_8());
    report(&acceptance::criterion_8_config("gaussian", &cfg));
}

#[test]
fn criterion_08b_regret_bernoulli() {
    let cfg = acceptance::bernoulli_regret_config(acceptance_seed_8());
    report(&acceptance::criterion_8_config("bernoulli", &cfg));
}

#[test]
fn criterion_08c_regret_student_t() {
    let cfg = acceptance::student_t_regret_config(acceptance_seed_8());
    report(&acceptance::criterion_8_config("student_t", &cfg));
}

#[test]
fn criterion_09_trivial_logdet_bound() {
    report(&acceptance::criterion_9(DEFAULT_SEED));
}

#[test]
fn criterion_10_engine_cross_validation() {
    report(&acceptance::criterion_10(DEFAULT_SEED));
}

#[test]
fn criterion_11_determinism() {
    report(&acceptance::criterion_11(DEFAULT_SEED));
}

fn acceptance_seed_8() -> u64 {
    linpot::acceptance::seed_for(DEFAULT_SEED, 8)
}
