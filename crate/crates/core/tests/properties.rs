//! Property-based invariants.

use proptest::prelude::*;
use refocus_core::model::SignedAxis;
use refocus_core::pulse::{pulse_params, PulseShape};
use refocus_core::sequence::{format_sequence, parse_sequence};

fn axis_strategy() -> impl Strategy<Value = SignedAxis> {
    prop_oneof![
        Just(SignedAxis::PlusX),
        Just(SignedAxis::MinusX),
        Just(SignedAxis::PlusY),
        Just(SignedAxis::MinusY),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sequence_notation_round_trips(pulses in prop::collection::vec(axis_strategy(), 1..16)) {
        let text = format_sequence(&pulses);
        let parsed = parse_sequence(&text).unwrap();
        prop_assert_eq!(parsed, pulses);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn defect_parameters_are_scale_invariant(
        tau in 0.05f64..20.0,
        width in 0.05f64..0.3,
        c1 in -0.9f64..0.9,
    ) {
        let base = PulseShape::hermite(1.0, width, vec![1.0, c1, 0.05]);
        prop_assume!(base.is_ok());
        let base = base.unwrap();
        let scaled = base.rescaled(tau).unwrap();
        let p0 = pulse_params(&base, 1024).unwrap();
        let p1 = pulse_params(&scaled, 1024).unwrap();
        prop_assert!((p0.s - p1.s).abs() < 1e-10);
        prop_assert!((p0.alpha - p1.alpha).abs() < 1e-10);
        prop_assert!((p0.zeta - p1.zeta).abs() < 1e-10);
    }
}
