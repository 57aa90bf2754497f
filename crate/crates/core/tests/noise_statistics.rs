//! Statistical oracles for the noise module: OU autocovariance, decorrelation
//! at coarse sampling, the closed-form free-dephasing law, and the
//! 1/√realizations shrinkage of the reported standard errors.

use refocus_core::model::{cavity_couplings, CavityModel};
use refocus_core::noise::{
    run_ensemble, run_free_ensemble, sample_ou_path, InitialState, NoiseChannel, NoiseConfig,
};
use refocus_core::pulse::PulseShape;
use refocus_core::sequence::SequenceSpec;

fn base_config() -> NoiseConfig {
    NoiseConfig {
        cutoff: 0.5,
        amplitude: 0.7,
        channel: NoiseChannel::QubitDephasing,
        realizations: 100,
        seed: 0xD1CE,
        time_step: 0.15,
    }
}

#[test]
fn autocovariance_at_one_correlation_time() {
    // one product sample per path keeps the estimates independent
    let cfg = base_config();
    let n_paths = 10_000;
    let lag_steps = (1.0 / (cfg.cutoff * cfg.time_step)).round() as usize;
    let lag = lag_steps as f64 * cfg.time_step;
    let t0_index = 40;
    let duration = (t0_index + lag_steps + 1) as f64 * cfg.time_step;
    let mut products = Vec::with_capacity(n_paths);
    for k in 0..n_paths {
        let path = sample_ou_path(&cfg, duration, 1000 + k as u64).unwrap();
        products.push(path[t0_index] * path[t0_index + lag_steps]);
    }
    let n = products.len() as f64;
    let mean: f64 = products.iter().sum::<f64>() / n;
    let var: f64 = products.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let stderr = (var / n).sqrt();
    let expected = cfg.amplitude.powi(2) * (-cfg.cutoff * lag).exp();
    assert!(
        (mean - expected).abs() <= 3.0 * stderr,
        "autocovariance {mean:.5} vs {expected:.5} ± {:.5}",
        3.0 * stderr
    );
}

#[test]
fn coarse_sampling_decorrelates() {
    // ω_c · h = 5: successive samples nearly independent
    let cfg = NoiseConfig {
        cutoff: 25.0,
        time_step: 0.2,
        ..base_config()
    };
    let n_paths = 10_000;
    let mut xy = 0.0;
    let mut xx = 0.0;
    for k in 0..n_paths {
        let path = sample_ou_path(&cfg, 0.45, 7000 + k as u64).unwrap();
        xy += path[1] * path[2];
        xx += path[1] * path[1];
    }
    let corr = xy / xx;
    assert!(corr.abs() < 0.05, "lag-1 correlation {corr}");
}

#[test]
fn free_dephasing_matches_the_discrete_gaussian_law() {
    // qubit alone (all couplings zero), σ_z field, |+⟩: the coherence decays
    // as exp(−2 Var θ) with θ the discrete accumulated phase; the variance of
    // the piecewise-constant model is an exact geometric double sum
    let c = cavity_couplings(&CavityModel {
        n_fock: 2,
        g: 0.0,
        delta: 0.0,
    })
    .unwrap();
    let cfg = NoiseConfig {
        cutoff: 0.4,
        amplitude: 0.12,
        channel: NoiseChannel::QubitDephasing,
        realizations: 4000,
        seed: 99,
        time_step: 0.25,
    };
    let total_time = 40.0;
    let n_records = 8;
    let r = run_free_ensemble(&c, &cfg, total_time, n_records, &InitialState::default()).unwrap();

    // steps per record interval as built by the planner
    let interval = total_time / n_records as f64;
    let per_interval = (interval / cfg.time_step).ceil() as usize;
    let h = interval / per_interval as f64;
    let decay = (-cfg.cutoff * h).exp();
    for (k, (&t, &fid)) in r.times.iter().zip(&r.mean_fidelity).enumerate() {
        let n = (k + 1) * per_interval;
        let mut var = 0.0;
        for i in 0..n {
            for j in 0..n {
                var += decay.powi((i as i32 - j as i32).abs());
            }
        }
        var *= (cfg.amplitude * h).powi(2);
        let predicted = 0.5 * (1.0 + (-2.0 * var).exp());
        let tol = 4.0 * r.fidelity_stderr[k] + 2e-4;
        assert!(
            (fid - predicted).abs() <= tol,
            "t = {t}: fidelity {fid:.6} vs predicted {predicted:.6} (tol {tol:.2e})"
        );
    }
}

#[test]
fn stderr_shrinks_with_realizations() {
    let c = cavity_couplings(&CavityModel {
        n_fock: 2,
        g: 0.05,
        delta: 0.2,
    })
    .unwrap();
    let seq = SequenceSpec::parse("X-X", PulseShape::delta(1.0).unwrap()).unwrap();
    let mk = |realizations| NoiseConfig {
        cutoff: 0.2,
        amplitude: 0.15,
        channel: NoiseChannel::QubitDephasing,
        realizations,
        seed: 5,
        time_step: 0.1,
    };
    let small = run_ensemble(&seq, &c, &mk(100), 10, &InitialState::default()).unwrap();
    let large = run_ensemble(&seq, &c, &mk(400), 10, &InitialState::default()).unwrap();
    // average the per-time ratios to tame the fluctuation of any single
    // sample-variance estimate
    let ratio: f64 = small
        .fidelity_stderr
        .iter()
        .zip(&large.fidelity_stderr)
        .map(|(s, l)| s / l)
        .sum::<f64>()
        / small.fidelity_stderr.len() as f64;
    assert!((ratio - 2.0).abs() <= 0.3, "stderr ratio {ratio}");
}

#[test]
fn fidelity_stays_in_bounds_pointwise() {
    let c = cavity_couplings(&CavityModel {
        n_fock: 3,
        g: 0.1,
        delta: 0.3,
    })
    .unwrap();
    let seq = SequenceSpec::parse("XY-XY", PulseShape::delta(0.8).unwrap()).unwrap();
    let cfg = NoiseConfig {
        cutoff: 0.3,
        amplitude: 0.4,
        channel: NoiseChannel::QubitDephasing,
        realizations: 50,
        seed: 31,
        time_step: 0.08,
    };
    let r = run_ensemble(&seq, &c, &cfg, 12, &InitialState::default()).unwrap();
    for &f in &r.mean_fidelity {
        assert!((0.0..=1.0 + 1e-12).contains(&f), "fidelity {f}");
    }
    assert_eq!(r.realization_seeds.len(), 50);
}
