#[allow(dead_code)]
mod invariants;

use invariants::CASES;

#[test]
fn bias_filter_keeps_exactly_admitted_examples() {
    invariants::bias_filter(CASES).unwrap();
}

#[test]
fn frozen_methods_leave_the_language_model_bit_identical() {
    invariants::frozen_identity(CASES).unwrap();
}

#[test]
fn probabilities_are_normalized() {
    invariants::softmax_normalization(CASES).unwrap();
}

#[test]
fn planted_block_is_the_identity() {
    invariants::identity_at_init(CASES).unwrap();
}

#[test]
fn score_sum_is_k_times_mean_and_symmetric() {
    invariants::score_identities(CASES).unwrap();
}

#[test]
fn delta_is_robust_minus_biased() {
    invariants::delta_arithmetic(CASES).unwrap();
}
