//! Sequence-catalog validation against exact propagators: leading-term
//! convergence, first-order coefficient fits, s-defect handling, the
//! one-dimensional no-go limit, and the α sign rule.

use ndarray::linalg::kron;
use refocus_core::linalg::{expi_hermitian, ident, spectral_norm, CMat};
use refocus_core::model::{cavity_couplings, lift_aux, sigma_x, CavityModel, CouplingSet};
use refocus_core::propagator::hermitian_log_unitary;
use refocus_core::pulse::{pulse_params, PulseParams, PulseShape};
use refocus_core::sequence::{
    compose, one_d_no_go_check, order_scan, predicted_heff, ComposeMode, SequenceSpec, CATALOG,
};

fn cavity(g: f64) -> CouplingSet {
    cavity_couplings(&CavityModel {
        n_fock: 6,
        g,
        delta: 0.2,
    })
    .unwrap()
}

fn x_reference(c: &CouplingSet) -> CMat {
    lift_aux(&c.a0) + kron(&sigma_x(), &ident(c.dim)).dot(&lift_aux(&c.ax))
}

/// Synthesized first-order pulse used across the shaped-pulse checks
/// (s ~ 1e-7, alpha ~ 0.03, from the even-Hermite family).
fn first_order_shape(tau: f64) -> PulseShape {
    PulseShape::hermite(tau, 0.15, vec![1.0, -0.799_231, 0.0]).unwrap()
}

#[test]
fn xbarx_with_first_order_pulse_converges_at_second_order() {
    let c = cavity(0.1);
    let reference = x_reference(&c);
    let seq = SequenceSpec::parse("X-X", first_order_shape(0.1)).unwrap();
    let taus: Vec<f64> = (0..6).map(|k| 0.1 / 2.0_f64.powi(k)).collect();
    let scan = order_scan(&seq, &c, &reference, &taus, 1024).unwrap();
    assert!((scan.slope - 2.0).abs() <= 0.3, "slope = {}", scan.slope);
}

#[test]
fn xbarx_gaussian_s_defect_matches_prediction() {
    // the wide Gaussian has s = 0.149: the effective Hamiltonian picks up the
    // predicted leading correction, matched here to 5% at the smallest tau
    let c = cavity(0.1);
    let shape = PulseShape::gaussian(0.01, 0.1).unwrap();
    let params = pulse_params(&shape, 2048).unwrap();
    let seq = SequenceSpec::parse("X-X", shape).unwrap();
    let pred = predicted_heff("X-X", &params, &c).unwrap();
    let ideal = x_reference(&c);
    let s_term = &pred.order0 - &ideal;
    assert!(spectral_norm(&s_term) > 0.01);

    let prop = compose(&seq, &c, ComposeMode::exact(2048)).unwrap();
    let h_eff = hermitian_log_unitary(&prop.unitary, seq.period(), Some(&ideal)).unwrap();
    let resid = &h_eff - &ideal;
    let rel = spectral_norm(&(&resid - &s_term)) / spectral_norm(&s_term);
    assert!(rel <= 0.05, "s-term relative mismatch {rel}");
}

#[test]
fn xbarxxxbar_cancels_the_s_defect() {
    let c = cavity(0.1);
    let shape = PulseShape::gaussian(0.01, 0.1).unwrap();
    let params = pulse_params(&shape, 2048).unwrap();
    let two = SequenceSpec::parse("X-X", shape.clone()).unwrap();
    let four = SequenceSpec::parse("X-XXX-", shape).unwrap();
    let ideal = x_reference(&c);
    let s_norm = {
        let pred = predicted_heff("X-X", &params, &c).unwrap();
        spectral_norm(&(&pred.order0 - &ideal))
    };
    let dev = |seq: &SequenceSpec| {
        let prop = compose(seq, &c, ComposeMode::exact(2048)).unwrap();
        let h = hermitian_log_unitary(&prop.unitary, seq.period(), Some(&ideal)).unwrap();
        spectral_norm(&(&h - &ideal))
    };
    let dev2 = dev(&two);
    let dev4 = dev(&four);
    assert!(
        (dev2 - s_norm).abs() / s_norm < 0.05,
        "two-pulse dev {dev2} vs s-term {s_norm}"
    );
    assert!(
        dev4 < 0.05 * s_norm,
        "four-pulse dev {dev4} should bury the s-term {s_norm}"
    );
}

/// Richardson fit of the first-order coefficient: M = lim (H_eff − order0)/τ,
/// three-point extrapolation.
fn fitted_order1(
    seq: &SequenceSpec,
    c: &CouplingSet,
    order0: &CMat,
    tau0: f64,
    steps: usize,
) -> CMat {
    let mut ms: Vec<CMat> = Vec::new();
    for k in 0..3 {
        let tau = tau0 / 2.0_f64.powi(k);
        let seq_t = seq.with_duration(tau).unwrap();
        let prop = compose(
            &seq_t,
            c,
            ComposeMode::Exact {
                steps,
                tol: f64::INFINITY,
            },
        )
        .unwrap();
        let h = hermitian_log_unitary(&prop.unitary, seq_t.period(), Some(order0)).unwrap();
        ms.push((&h - order0).mapv(|z| z / tau));
    }
    // kills the linear and quadratic corrections of M(tau)
    (ms[2].mapv(|z| z * 8.0) - ms[1].mapv(|z| z * 6.0) + ms[0].clone()).mapv(|z| z / 3.0)
}

#[test]
fn four_pulse_order1_matches_prediction_for_delta_and_shaped() {
    let c = cavity(0.2);
    for (label, shape, params) in [
        ("delta", PulseShape::delta(1.0).unwrap(), PulseParams::DELTA),
        (
            "shaped",
            first_order_shape(1.0),
            pulse_params(&first_order_shape(1.0), 2048).unwrap(),
        ),
    ] {
        let seq = SequenceSpec::parse("XY-XY", shape).unwrap();
        let pred = predicted_heff("XY-XY", &params, &c).unwrap();
        let steps = if label == "delta" { 256 } else { 3072 };
        let fitted = fitted_order1(&seq, &c, &pred.order0, 0.02, steps);
        let rel = spectral_norm(&(&fitted - &pred.order1)) / spectral_norm(&pred.order1);
        assert!(rel <= 0.05, "{label}: order1 mismatch {rel}");
    }
}

#[test]
fn alpha_sign_rule_on_the_palindromic_sequence() {
    // exchanging every pulse for its sign-flipped partner sends alpha to
    // -alpha in the predicted first-order term
    let c = cavity(0.2);
    let shape = first_order_shape(1.0);
    let params = pulse_params(&shape, 2048).unwrap();
    let seq = SequenceSpec::parse("YXY-XXY-XY", shape).unwrap();
    let flipped = seq.sign_flipped();
    let pred = predicted_heff("YXY-XXY-XY", &params, &c).unwrap();
    let mut flipped_params = params;
    flipped_params.alpha = -params.alpha;
    let pred_flipped = predicted_heff("YXY-XXY-XY", &flipped_params, &c).unwrap();

    let fitted = fitted_order1(&flipped, &c, &pred.order0, 0.02, 3072);
    let match_flip =
        spectral_norm(&(&fitted - &pred_flipped.order1)) / spectral_norm(&pred_flipped.order1);
    let match_plain = spectral_norm(&(&fitted - &pred.order1)) / spectral_norm(&pred.order1);
    assert!(
        match_flip <= 0.08,
        "alpha-flipped prediction off by {match_flip}"
    );
    assert!(
        match_plain > 1.0,
        "unflipped prediction should not match, got {match_plain}"
    );
}

#[test]
fn exact_matches_expansion_prediction_at_claimed_order() {
    // ‖U_exact − exp(−i·period·(order0 + τ·order1))‖ falls at least as fast
    // as τ^{claimed_order+1} for every catalog entry
    let c = cavity(0.1);
    let taus: Vec<f64> = (0..5).map(|k| 0.04 / 2.0_f64.powi(k)).collect();
    for name in CATALOG {
        let params = PulseParams::DELTA;
        let pred = predicted_heff(name, &params, &c).unwrap();
        let mut devs = Vec::new();
        for &tau in &taus {
            let seq = SequenceSpec::parse(name, PulseShape::delta(tau).unwrap()).unwrap();
            let prop = compose(&seq, &c, ComposeMode::exact(64)).unwrap();
            let period = seq.period();
            let h_pred = &pred.order0 + &pred.order1.mapv(|z| z * tau);
            let u_pred = expi_hermitian(&h_pred, period).unwrap();
            devs.push(spectral_norm(&(&prop.unitary - &u_pred)));
        }
        let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = devs.iter().map(|d| d.max(1e-300).ln()).collect();
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let want = pred.claimed_order as f64 + 1.0;
        assert!(slope >= want - 0.3, "{name}: slope {slope} < {want} - 0.3");
    }
}

#[test]
fn gaussian_on_x_only_entries_keeps_claimed_order() {
    // s != 0 drops the claimed order to 1 for the X-only entries; the
    // expansion prediction still holds at that order
    let c = cavity(0.1);
    let shape01 = PulseShape::gaussian(1.0, 0.1).unwrap();
    let params = pulse_params(&shape01, 2048).unwrap();
    let taus: Vec<f64> = (0..5).map(|k| 0.04 / 2.0_f64.powi(k)).collect();
    for name in ["X-X", "X-XXX-"] {
        let pred = predicted_heff(name, &params, &c).unwrap();
        assert_eq!(pred.claimed_order, 1);
        let mut devs = Vec::new();
        for &tau in &taus {
            let seq = SequenceSpec::parse(name, shape01.rescaled(tau).unwrap()).unwrap();
            let prop = compose(
                &seq,
                &c,
                ComposeMode::Exact {
                    steps: 1024,
                    tol: f64::INFINITY,
                },
            )
            .unwrap();
            let h_pred = &pred.order0 + &pred.order1.mapv(|z| z * tau);
            let u_pred = expi_hermitian(&h_pred, seq.period()).unwrap();
            devs.push(spectral_norm(&(&prop.unitary - &u_pred)));
        }
        // require at least second-order decay of the unitary deviation
        let ratio_a = devs[2] / devs[0];
        assert!(
            ratio_a < 1.3 * (taus[2] / taus[0]).powi(2),
            "{name}: devs {devs:?}"
        );
    }
}

#[test]
fn eight_pulse_expansion_product_tracks_exact_composition() {
    // ordered product of per-pulse second-order expansions vs the exact
    // propagator: O(τ³) agreement per factor
    let c = cavity(0.1);
    let mut devs = Vec::new();
    let taus = [0.04, 0.02, 0.01];
    for &tau in &taus {
        let seq = SequenceSpec::parse("Y-X-YX-XY-XY", PulseShape::delta(tau).unwrap()).unwrap();
        let exact = compose(&seq, &c, ComposeMode::exact(64)).unwrap();
        let expanded = compose(
            &seq,
            &c,
            ComposeMode::Expansion {
                params: &PulseParams::DELTA,
            },
        )
        .unwrap();
        devs.push(spectral_norm(&(&exact.unitary - &expanded.unitary)));
    }
    assert!(devs[1] / devs[0] < 0.20, "devs: {devs:?}");
    assert!(devs[2] / devs[1] < 0.20, "devs: {devs:?}");
}

#[test]
fn one_dimensional_sequences_cannot_refocus_the_cavity() {
    let c = cavity(0.1);
    let ax_norm = spectral_norm(&c.ax);
    let taus = [0.1, 0.05, 0.025];
    let delta = PulseShape::delta(0.1).unwrap();

    let xbarx = SequenceSpec::parse("X-X", delta.clone()).unwrap();
    let limit = one_d_no_go_check(&xbarx, &c, &taus, 64).unwrap();
    assert!(
        limit >= 0.9 * ax_norm,
        "X-X off-diagonal limit {limit} vs ‖Ax‖ {ax_norm}"
    );
    assert!(limit >= 0.5 * 0.1, "contract: at least g/2");

    let xxxx = SequenceSpec::parse("XXXX", delta.clone()).unwrap();
    let limit = one_d_no_go_check(&xxxx, &c, &taus, 64).unwrap();
    assert!(limit >= 0.5 * 0.1, "XXXX off-diagonal limit {limit}");

    // the two-dimensional eight-pulse sequence kills the same block
    let eq8 = SequenceSpec::parse("Y-X-YX-XY-XY", delta).unwrap();
    let limit = one_d_no_go_check(&eq8, &c, &taus, 64).unwrap();
    assert!(limit < 1e-3 * ax_norm, "eq8 off-diagonal limit {limit}");
}
