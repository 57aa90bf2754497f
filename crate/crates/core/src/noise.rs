//! Open-system Monte Carlo: a classical correlated random field (stationary
//! Ornstein-Uhlenbeck process with cutoff ω_c) coupled to the qubit, with
//! ensemble coherence statistics under any pulse sequence.
//!
//! The field is piecewise-constant over integrator steps, sampled at step
//! midpoints through the exact OU transition, so realizations are exact
//! trajectories of the discretized model. Per-realization generators derive
//! from (master seed, realization index); parallel and serial runs agree
//! bit for bit.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_unit_norm, expi_apply, CMat, C64};
use crate::model::{
    assemble_hamiltonian, lift_aux, lift_qubit, lowering_operator, sigma_x, sigma_y, sigma_z,
    CouplingSet, SignedAxis,
};
use crate::pulse::phase_profile;
use crate::sequence::SequenceSpec;

/// Which operator the random field multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseChannel {
    /// field · σ_z ⊗ I (pure dephasing of the qubit); the default.
    QubitDephasing,
    /// field · I ⊗ b†b (modulation of the cavity bias Δ).
    CavityDetuning,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Bath cutoff frequency ω_c (inverse correlation time).
    pub cutoff: f64,
    /// RMS coupling strength of the field.
    pub amplitude: f64,
    pub channel: NoiseChannel,
    pub realizations: usize,
    pub seed: u64,
    /// Upper bound on the integrator step.
    pub time_step: f64,
}

impl NoiseConfig {
    fn validate_basic(&self) -> Result<()> {
        if !(self.cutoff > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cutoff must be positive, got {}",
                self.cutoff
            )));
        }
        if !(self.time_step > 0.0) {
            return Err(Error::InvalidArgument("time step must be positive".into()));
        }
        Ok(())
    }

    /// Propagation accuracy bounds; path sampling alone is exact at any
    /// spacing and does not need them.
    fn validate(&self, tau_p: Option<f64>) -> Result<()> {
        self.validate_basic()?;
        if self.time_step > 0.1 / self.cutoff + 1e-15 {
            return Err(Error::InvalidArgument(format!(
                "time step {} exceeds 0.1/cutoff = {}",
                self.time_step,
                0.1 / self.cutoff
            )));
        }
        if let Some(tau) = tau_p {
            if self.time_step > 0.1 * tau + 1e-15 {
                return Err(Error::InvalidArgument(format!(
                    "time step {} exceeds 0.1·τ_p = {}",
                    self.time_step,
                    0.1 * tau
                )));
            }
        }
        Ok(())
    }

    fn channel_operator(&self, couplings: &CouplingSet) -> CMat {
        match self.channel {
            NoiseChannel::QubitDephasing => lift_qubit(&sigma_z(), couplings.dim),
            NoiseChannel::CavityDetuning => {
                let b = lowering_operator(couplings.dim);
                let n_op = crate::linalg::dagger(&b).dot(&b);
                lift_aux(&n_op)
            }
        }
    }
}

/// Initial state of qubit ⊗ oscillator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InitialState {
    /// Qubit Bloch vector (pure states only; |r| = 1).
    pub bloch: [f64; 3],
    pub oscillator: OscillatorState,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OscillatorState {
    Ground,
    /// Fock-diagonal thermal mixture with mean occupation n̄, sampled per
    /// realization.
    Thermal {
        nbar: f64,
    },
}

impl Default for InitialState {
    fn default() -> Self {
        Self {
            bloch: [1.0, 0.0, 0.0],
            oscillator: OscillatorState::Ground,
        }
    }
}

/// Per-time coherence statistics over the ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean_fidelity: Vec<f64>,
    pub fidelity_stderr: Vec<f64>,
    pub realization_seeds: Vec<u64>,
}

// ---------------------------------------------------------------------------
// OU path sampling
// ---------------------------------------------------------------------------

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn realization_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(index as u64 + 1))
}

struct OuSampler {
    rng: ChaCha12Rng,
    cutoff: f64,
    amplitude: f64,
    value: f64,
    last_time: Option<f64>,
}

impl OuSampler {
    fn new(config: &NoiseConfig, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let xi: f64 = rng.sample(StandardNormal);
        OuSampler {
            rng,
            cutoff: config.cutoff,
            amplitude: config.amplitude,
            value: config.amplitude * xi,
            last_time: None,
        }
    }

    /// Exact stationary transition to time `t` (must not decrease).
    fn at(&mut self, t: f64) -> f64 {
        let dt = match self.last_time {
            None => t,
            Some(prev) => t - prev,
        };
        if dt > 0.0 {
            let decay = (-self.cutoff * dt).exp();
            let xi: f64 = self.rng.sample(StandardNormal);
            self.value = self.value * decay + self.amplitude * (1.0 - decay * decay).sqrt() * xi;
        }
        self.last_time = Some(t);
        self.value
    }
}

/// Stationary Gauss-Markov path sampled at spacing `time_step` over
/// [0, duration], autocovariance amplitude²·exp(−ω_c|Δt|).
pub fn sample_ou_path(config: &NoiseConfig, duration: f64, seed: u64) -> Result<Vec<f64>> {
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument("duration must be positive".into()));
    }
    config.validate_basic()?;
    let n = (duration / config.time_step).floor() as usize + 1;
    let mut sampler = OuSampler::new(config, seed);
    Ok((0..n)
        .map(|k| sampler.at(k as f64 * config.time_step))
        .collect())
}

// ---------------------------------------------------------------------------
// propagation plans
// ---------------------------------------------------------------------------

enum PlanItem {
    /// Integrator step: duration, drive contribution (axis, phase increment).
    Step {
        h: f64,
        drive: Option<(SignedAxis, f64)>,
    },
    Kick {
        axis: SignedAxis,
    },
}

/// One period of a sequence broken into integrator steps and delta kicks.
fn period_plan(seq: &SequenceSpec, max_step: f64) -> Result<Vec<PlanItem>> {
    let tau = seq.shape.duration();
    let mut items = Vec::new();
    if seq.shape.is_delta() {
        let half = 0.5 * tau;
        let n = (half / max_step).ceil().max(1.0) as usize;
        let h = half / n as f64;
        for &axis in &seq.pulses {
            for _ in 0..n {
                items.push(PlanItem::Step { h, drive: None });
            }
            items.push(PlanItem::Kick { axis });
            for _ in 0..n {
                items.push(PlanItem::Step { h, drive: None });
            }
        }
    } else {
        let n = (tau / max_step).ceil().max(10.0) as usize;
        let h = tau / n as f64;
        let profile = phase_profile(&seq.shape, (4 * n).clamp(256, 4096))?;
        let mut dphis = Vec::with_capacity(n);
        let mut prev = 0.0;
        for k in 1..=n {
            let next = if k == n {
                seq.shape.target_angle()
            } else {
                profile.phi(k as f64 * h)
            };
            dphis.push(next - prev);
            prev = next;
        }
        for &axis in &seq.pulses {
            for &dphi in &dphis {
                items.push(PlanItem::Step {
                    h,
                    drive: Some((axis, dphi)),
                });
            }
        }
    }
    Ok(items)
}

/// Free evolution for `interval`, split into steps of at most `max_step`.
fn free_plan(interval: f64, max_step: f64) -> Vec<PlanItem> {
    let n = (interval / max_step).ceil().max(1.0) as usize;
    let h = interval / n as f64;
    (0..n).map(|_| PlanItem::Step { h, drive: None }).collect()
}

struct Engine {
    h_s: CMat,
    noise_op: CMat,
    drive_x: CMat,
    drive_y: CMat,
    kicks: [CMat; 4],
}

impl Engine {
    fn new(couplings: &CouplingSet, config: &NoiseConfig) -> Result<Self> {
        let dim = couplings.dim;
        let kick = |axis: SignedAxis| -> Result<CMat> {
            let pauli = if axis.is_x() { sigma_x() } else { sigma_y() };
            crate::linalg::expi_hermitian(
                &lift_qubit(&pauli, dim),
                axis.sign() * std::f64::consts::PI / 2.0,
            )
        };
        Ok(Engine {
            h_s: assemble_hamiltonian(couplings),
            noise_op: config.channel_operator(couplings),
            drive_x: lift_qubit(&sigma_x(), dim).mapv(|z| z * 0.5),
            drive_y: lift_qubit(&sigma_y(), dim).mapv(|z| z * 0.5),
            kicks: [
                kick(SignedAxis::PlusX)?,
                kick(SignedAxis::MinusX)?,
                kick(SignedAxis::PlusY)?,
                kick(SignedAxis::MinusY)?,
            ],
        })
    }

    fn kick(&self, axis: SignedAxis) -> &CMat {
        match axis {
            SignedAxis::PlusX => &self.kicks[0],
            SignedAxis::MinusX => &self.kicks[1],
            SignedAxis::PlusY => &self.kicks[2],
            SignedAxis::MinusY => &self.kicks[3],
        }
    }

    /// Run one plan segment, advancing the state, the wall time, and the
    /// noise sampler (None = noiseless).
    fn run_plan(
        &self,
        plan: &[PlanItem],
        psi: &mut Array1<C64>,
        t: &mut f64,
        sampler: &mut Option<&mut OuSampler>,
    ) -> Result<()> {
        for item in plan {
            match item {
                PlanItem::Kick { axis } => {
                    *psi = self.kick(*axis).dot(psi);
                }
                PlanItem::Step { h, drive } => {
                    let x = match sampler {
                        Some(s) => s.at(*t + 0.5 * h),
                        None => 0.0,
                    };
                    let mut h_step = self.h_s.clone();
                    if x != 0.0 {
                        h_step = h_step + self.noise_op.mapv(|z| z * x);
                    }
                    if let Some((axis, dphi)) = drive {
                        let op = if axis.is_x() {
                            &self.drive_x
                        } else {
                            &self.drive_y
                        };
                        h_step = h_step + op.mapv(|z| z * axis.sign() * (dphi / h));
                    }
                    *psi = expi_apply(&h_step, *h, psi)?;
                    *t += h;
                }
            }
        }
        Ok(())
    }
}

fn initial_vector(initial: &InitialState, dim: usize, fock: usize) -> Result<Array1<C64>> {
    let [bx, by, bz] = initial.bloch;
    let norm = (bx * bx + by * by + bz * bz).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "Bloch vector must be unit length for a pure initial state, |r| = {norm}"
        )));
    }
    // |ψ⟩ = cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩
    let theta = bz.clamp(-1.0, 1.0).acos();
    let phi = by.atan2(bx);
    let a = C64::new((theta / 2.0).cos(), 0.0);
    let b = C64::new(0.0, phi).exp() * (theta / 2.0).sin();
    let mut psi = Array1::zeros(2 * dim);
    psi[fock] = a;
    psi[dim + fock] = b;
    Ok(psi)
}

fn sample_fock(initial: &InitialState, dim: usize, rng_seed: u64) -> usize {
    match initial.oscillator {
        OscillatorState::Ground => 0,
        OscillatorState::Thermal { nbar } => {
            if nbar <= 0.0 {
                return 0;
            }
            let mut rng = ChaCha12Rng::seed_from_u64(splitmix64(rng_seed ^ 0xF0CC));
            let q = nbar / (1.0 + nbar);
            let u: f64 = rng.gen_range(0.0..1.0);
            let n = (u.ln() / q.ln()).floor().max(0.0) as usize;
            n.min(dim - 1)
        }
    }
}

/// Combined population of the top two Fock levels.
fn top_fock_population(psi: &Array1<C64>, dim: usize) -> f64 {
    if dim < 3 {
        return 0.0;
    }
    let mut pop = 0.0;
    for q in 0..2 {
        pop += psi[q * dim + dim - 1].norm_sqr() + psi[q * dim + dim - 2].norm_sqr();
    }
    pop
}

/// Reduced qubit density matrix of a pure full-space state.
fn reduced_qubit(psi: &Array1<C64>, dim: usize) -> [[C64; 2]; 2] {
    let mut rho = [[C64::new(0.0, 0.0); 2]; 2];
    for q1 in 0..2 {
        for q2 in 0..2 {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..dim {
                acc += psi[q1 * dim + a] * psi[q2 * dim + a].conj();
            }
            rho[q1][q2] = acc;
        }
    }
    rho
}

/// Uhlmann fidelity of two qubit density matrices:
/// F = tr(ρσ) + 2√(det ρ · det σ).
fn qubit_fidelity(rho: &[[C64; 2]; 2], sigma: &[[C64; 2]; 2]) -> f64 {
    let tr = (rho[0][0] * sigma[0][0]
        + rho[0][1] * sigma[1][0]
        + rho[1][0] * sigma[0][1]
        + rho[1][1] * sigma[1][1])
        .re;
    let det_r = (rho[0][0] * rho[1][1] - rho[0][1] * rho[1][0]).re.max(0.0);
    let det_s = (sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[1][0])
        .re
        .max(0.0);
    (tr + 2.0 * (det_r * det_s).sqrt()).clamp(0.0, 1.0 + 1e-12)
}

// ---------------------------------------------------------------------------
// ensembles
// ---------------------------------------------------------------------------

/// Coherence decay of a driven qubit over `n_periods` refocusing periods.
///
/// Fidelity at each period boundary is the Uhlmann overlap between the
/// realization's reduced qubit state and the noiseless reduced state at the
/// same time.
pub fn run_ensemble(
    seq: &SequenceSpec,
    couplings: &CouplingSet,
    config: &NoiseConfig,
    n_periods: usize,
    initial: &InitialState,
) -> Result<EnsembleResult> {
    config.validate(Some(seq.shape.duration()))?;
    if config.realizations < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 realizations".into(),
        ));
    }
    if n_periods == 0 {
        return Err(Error::InvalidArgument("need at least one period".into()));
    }
    let plan = period_plan(seq, config.time_step)?;
    let times: Vec<f64> = (1..=n_periods).map(|p| p as f64 * seq.period()).collect();
    run_with_plan(&plan, couplings, config, &times, initial)
}

/// Undriven evolution sampled at `n_records` uniform times up to `total_time`.
pub fn run_free_ensemble(
    couplings: &CouplingSet,
    config: &NoiseConfig,
    total_time: f64,
    n_records: usize,
    initial: &InitialState,
) -> Result<EnsembleResult> {
    config.validate(None)?;
    if config.realizations < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 realizations".into(),
        ));
    }
    if !(total_time > 0.0) || n_records == 0 {
        return Err(Error::InvalidArgument(
            "need positive total time and records".into(),
        ));
    }
    let interval = total_time / n_records as f64;
    let plan = free_plan(interval, config.time_step);
    let times: Vec<f64> = (1..=n_records).map(|p| p as f64 * interval).collect();
    run_with_plan(&plan, couplings, config, &times, initial)
}

fn run_with_plan(
    plan: &[PlanItem],
    couplings: &CouplingSet,
    config: &NoiseConfig,
    times: &[f64],
    initial: &InitialState,
) -> Result<EnsembleResult> {
    let engine = Engine::new(couplings, config)?;
    let dim = couplings.dim;
    let n_rec = times.len();

    // noiseless reference per initial Fock level, computed on demand
    let reference = |fock: usize| -> Result<Vec<[[C64; 2]; 2]>> {
        let mut psi = initial_vector(initial, dim, fock)?;
        let mut t = 0.0;
        let mut out = Vec::with_capacity(n_rec);
        let mut top_population: f64 = 0.0;
        for _ in 0..n_rec {
            engine.run_plan(plan, &mut psi, &mut t, &mut None)?;
            check_unit_norm(&psi)?;
            top_population = top_population.max(top_fock_population(&psi, dim));
            out.push(reduced_qubit(&psi, dim));
        }
        if top_population > 1e-8 {
            eprintln!(
                "warning: population {top_population:.2e} in the top two Fock states; \
                 truncation artifacts possible, increase n_fock"
            );
        }
        Ok(out)
    };
    let max_fock = match initial.oscillator {
        OscillatorState::Ground => 0,
        OscillatorState::Thermal { .. } => dim - 1,
    };
    let mut refs: Vec<Option<Vec<[[C64; 2]; 2]>>> = vec![None; max_fock + 1];
    let seeds: Vec<u64> = (0..config.realizations)
        .map(|r| realization_seed(config.seed, r))
        .collect();
    let focks: Vec<usize> = seeds
        .iter()
        .map(|&s| sample_fock(initial, dim, s))
        .collect();
    for &f in &focks {
        if refs[f].is_none() {
            refs[f] = Some(reference(f)?);
        }
    }

    let traces: Result<Vec<Vec<f64>>> = seeds
        .par_iter()
        .zip(focks.par_iter())
        .map(|(&seed, &fock)| {
            let reference = refs[fock].as_ref().expect("reference precomputed");
            let mut sampler = OuSampler::new(config, seed);
            let mut psi = initial_vector(initial, dim, fock)?;
            let mut t = 0.0;
            let mut fid = Vec::with_capacity(n_rec);
            for rec in reference.iter().take(n_rec) {
                engine.run_plan(plan, &mut psi, &mut t, &mut Some(&mut sampler))?;
                let rho = reduced_qubit(&psi, dim);
                fid.push(qubit_fidelity(&rho, rec));
            }
            Ok(fid)
        })
        .collect();
    let traces = traces?;

    let r = config.realizations as f64;
    let mut mean = vec![0.0; n_rec];
    let mut stderr = vec![0.0; n_rec];
    for k in 0..n_rec {
        let m: f64 = traces.iter().map(|tr| tr[k]).sum::<f64>() / r;
        let var: f64 = traces.iter().map(|tr| (tr[k] - m).powi(2)).sum::<f64>() / (r - 1.0);
        mean[k] = m;
        stderr[k] = (var / r).sqrt();
    }
    Ok(EnsembleResult {
        times: times.to_vec(),
        mean_fidelity: mean,
        fidelity_stderr: stderr,
        realization_seeds: seeds,
    })
}

/// One point of a [`rate_scan`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RatePoint {
    /// Ω/ω_c.
    pub ratio: f64,
    pub infidelity: f64,
    pub stderr: f64,
}

/// Final infidelity versus the adiabaticity ratio Ω/ω_c at fixed total time.
///
/// Ω is varied through τ_p at fixed cutoff; the integrator step is tightened
/// automatically where 0.1·τ_p falls below the configured step.
pub fn rate_scan(
    seq: &SequenceSpec,
    couplings: &CouplingSet,
    config: &NoiseConfig,
    omega_ratios: &[f64],
    total_time: f64,
) -> Result<Vec<RatePoint>> {
    if omega_ratios.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one Ω/ω_c value".into(),
        ));
    }
    let mut out = Vec::with_capacity(omega_ratios.len());
    for &ratio in omega_ratios {
        if !(ratio > 0.0) {
            return Err(Error::InvalidArgument(
                "Ω/ω_c values must be positive".into(),
            ));
        }
        let omega = ratio * config.cutoff;
        let period = 2.0 * std::f64::consts::PI / omega;
        let tau_p = period / seq.len() as f64;
        let n_periods = (total_time / period).round().max(1.0) as usize;
        let seq_t = seq.with_duration(tau_p)?;
        let mut cfg = *config;
        cfg.time_step = cfg.time_step.min(0.1 * tau_p);
        let result = run_ensemble(&seq_t, couplings, &cfg, n_periods, &InitialState::default())?;
        let final_fid = *result.mean_fidelity.last().expect("non-empty trace");
        let stderr = *result.fidelity_stderr.last().expect("non-empty trace");
        out.push(RatePoint {
            ratio,
            infidelity: 1.0 - final_fid,
            stderr,
        });
    }
    Ok(out)
}
