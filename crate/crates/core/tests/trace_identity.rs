use mfgs_core::oracle::{verify_trace_identity, BathDiscretization};
use mfgs_core::spectral::Mode;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn displaced_bath_overlap(
        g in 0.1..0.6f64,
        omega in 0.6..2.0f64,
        beta in 1.0..2.0f64,
        frac in 0.0..=1.0f64,
        lambda in 0.2..2.5f64,
        a_l in -1.5..1.5f64,
        a_l2 in -1.5..1.5f64,
    ) {
        let bd = BathDiscretization::new(vec![Mode { g, omega }], 60).unwrap();
        let r = verify_trace_identity(&bd, a_l, a_l2, lambda, beta, frac * beta).unwrap();
        prop_assert!(!r.truncation_flag);
        prop_assert!(r.relative_error() < 1e-8, "{r:?}");
        prop_assert!(r.rhs <= r.z_b * (1.0 + 1e-15));
    }
}

#[test]
fn identity_is_symmetric_in_the_exchange() {
    // Swapping (a_l, u) with (a_l', β − u) permutes the trace.
    let bd = BathDiscretization::new(vec![Mode { g: 0.4, omega: 1.0 }], 60).unwrap();
    let x = verify_trace_identity(&bd, 0.8, -0.3, 1.7, 1.0, 0.3).unwrap();
    let y = verify_trace_identity(&bd, -0.3, 0.8, 1.7, 1.0, 0.7).unwrap();
    assert!((x.lhs / y.lhs - 1.0).abs() < 1e-12);
    assert!((x.rhs / y.rhs - 1.0).abs() < 1e-12);
}
