//! Shaped π-pulses: envelopes V(t), the accumulated phase φ(t) = ∫₀ᵗ V, and
//! the dimensionless defect parameters
//!
//! ```text
//! s = ⟨sin φ(t)⟩          (single time average, 1/τ_p)
//! α = ⟨θ(t−t′) sin[φ(t)−φ(t′)]⟩   (double time average, 1/τ_p²)
//! ζ = ⟨θ(t−t′) cos φ(t′)⟩
//! ```
//!
//! A pulse with s = 0 is first-order self-refocusing; s = α = 0 makes it
//! second-order. Every envelope is rescaled at construction so that
//! φ(τ_p) equals the target angle (π) to 1e-12 relative.
//!
//! The Gaussian `width_fraction` is the 1/e half-width over the duration:
//! V(t) ∝ exp(−(t−τ_p/2)²/w²) with w = width_fraction·τ_p. This reading is
//! pinned by the regression tests on the built-in parameter table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::GaussLegendre;

pub const TARGET_ANGLE: f64 = std::f64::consts::PI;

/// Default total quadrature node budget for parameter evaluation.
pub const DEFAULT_NODES: usize = 2048;

const PANEL_ORDER: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    /// Instantaneous kick at t = τ_p/2; handled symbolically everywhere.
    Delta,
    /// exp(−(t−τ_p/2)²/w²) hard-truncated to [0, τ_p], w = width_fraction·τ_p.
    TruncatedGaussian { width_fraction: f64 },
    /// Σ_k c_k H_{2k}(u) e^{−u²/2}, u = (t−τ_p/2)/(width_fraction·τ_p).
    /// Even Hermite functions only, so the envelope is time-symmetric.
    HermiteSeries {
        center_width_fraction: f64,
        coefficients: Vec<f64>,
    },
    /// Piecewise-linear interpolation of a strictly increasing (t, V) grid
    /// covering [0, τ_p].
    Sampled { samples: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseShape {
    kind: ShapeKind,
    duration: f64,
    target_angle: f64,
    /// Rescale factor applied to the raw envelope so ∫V = target_angle.
    amplitude: f64,
}

impl PulseShape {
    pub fn delta(duration: f64) -> Result<Self> {
        Self::build(ShapeKind::Delta, duration)
    }

    pub fn gaussian(duration: f64, width_fraction: f64) -> Result<Self> {
        if !(width_fraction > 0.0) {
            return Err(Error::InvalidShape(format!(
                "gaussian width_fraction must be positive, got {width_fraction}"
            )));
        }
        Self::build(ShapeKind::TruncatedGaussian { width_fraction }, duration)
    }

    pub fn hermite(duration: f64, width_fraction: f64, coefficients: Vec<f64>) -> Result<Self> {
        if !(width_fraction > 0.0) {
            return Err(Error::InvalidShape(format!(
                "hermite width_fraction must be positive, got {width_fraction}"
            )));
        }
        if coefficients.is_empty() {
            return Err(Error::InvalidShape(
                "hermite series needs coefficients".into(),
            ));
        }
        Self::build(
            ShapeKind::HermiteSeries {
                center_width_fraction: width_fraction,
                coefficients,
            },
            duration,
        )
    }

    pub fn sampled(duration: f64, samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidShape(
                "sampled grid needs at least two points".into(),
            ));
        }
        let eps = 1e-12 * duration;
        if (samples[0].0).abs() > eps || (samples[samples.len() - 1].0 - duration).abs() > eps {
            return Err(Error::InvalidShape(
                "sampled grid must cover [0, duration]".into(),
            ));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidShape(
                "sampled grid must be strictly increasing in time".into(),
            ));
        }
        Self::build(ShapeKind::Sampled { samples }, duration)
    }

    fn build(kind: ShapeKind, duration: f64) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::InvalidShape(format!(
                "duration must be positive and finite, got {duration}"
            )));
        }
        let mut shape = Self {
            kind,
            duration,
            target_angle: TARGET_ANGLE,
            amplitude: 1.0,
        };
        if !matches!(shape.kind, ShapeKind::Delta) {
            let raw = shape.raw_integral();
            if !raw.is_finite() || raw.abs() < 1e-12 {
                return Err(Error::InvalidShape(format!(
                    "envelope integral {raw:.3e} cannot be normalized to the target angle"
                )));
            }
            shape.amplitude = shape.target_angle / raw;
        }
        Ok(shape)
    }

    pub fn kind(&self) -> &ShapeKind {
        &self.kind
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn target_angle(&self) -> f64 {
        self.target_angle
    }

    pub fn is_delta(&self) -> bool {
        matches!(self.kind, ShapeKind::Delta)
    }

    /// Same shape stretched to a new duration. Dimensionless shape
    /// parameters (and hence s, α, ζ) are untouched.
    pub fn rescaled(&self, new_duration: f64) -> Result<Self> {
        let ratio = new_duration / self.duration;
        let kind = match &self.kind {
            ShapeKind::Sampled { samples } => ShapeKind::Sampled {
                samples: samples.iter().map(|&(t, v)| (t * ratio, v)).collect(),
            },
            other => other.clone(),
        };
        Self::build(kind, new_duration)
    }

    /// Normalized envelope V(t) on [0, τ_p].
    ///
    /// Panics for the delta kind, whose envelope is symbolic: callers must
    /// branch on [`Self::is_delta`] first.
    pub fn envelope(&self, t: f64) -> f64 {
        self.amplitude * self.raw_envelope(t)
    }

    fn raw_envelope(&self, t: f64) -> f64 {
        let tau = self.duration;
        match &self.kind {
            ShapeKind::Delta => panic!("delta envelope is symbolic, not sampled"),
            ShapeKind::TruncatedGaussian { width_fraction } => {
                if !(0.0..=tau).contains(&t) {
                    return 0.0;
                }
                let w = width_fraction * tau;
                let u = (t - 0.5 * tau) / w;
                (-u * u).exp()
            }
            ShapeKind::HermiteSeries {
                center_width_fraction,
                coefficients,
            } => {
                if !(0.0..=tau).contains(&t) {
                    return 0.0;
                }
                let w = center_width_fraction * tau;
                let u = (t - 0.5 * tau) / w;
                hermite_even_series(coefficients, u) * (-0.5 * u * u).exp()
            }
            ShapeKind::Sampled { samples } => {
                if t <= samples[0].0 {
                    return samples[0].1;
                }
                if t >= samples[samples.len() - 1].0 {
                    return samples[samples.len() - 1].1;
                }
                let idx = samples.partition_point(|&(ti, _)| ti <= t) - 1;
                let (t0, v0) = samples[idx];
                let (t1, v1) = samples[idx + 1];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    fn raw_integral(&self) -> f64 {
        match &self.kind {
            ShapeKind::Delta => self.target_angle,
            ShapeKind::Sampled { samples } => samples
                .windows(2)
                .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
                .sum(),
            _ => {
                let rule = GaussLegendre::new(PANEL_ORDER);
                // enough panels to resolve narrow envelopes
                let width = match &self.kind {
                    ShapeKind::TruncatedGaussian { width_fraction } => *width_fraction,
                    ShapeKind::HermiteSeries {
                        center_width_fraction,
                        ..
                    } => *center_width_fraction,
                    _ => 1.0,
                };
                let panels = (128.0_f64).max((1.0 / width).ceil()) as usize;
                crate::quad::composite(&rule, 0.0, self.duration, panels, |t| {
                    self.raw_envelope(t)
                })
            }
        }
    }

    /// Sample the normalized envelope on a uniform grid (endpoints included),
    /// e.g. to export a synthesized pulse for reuse as a `Sampled` shape.
    pub fn sample_grid(&self, n: usize) -> Result<Vec<(f64, f64)>> {
        if self.is_delta() {
            return Err(Error::InvalidShape("delta pulse cannot be sampled".into()));
        }
        let n = n.max(2);
        Ok((0..n)
            .map(|i| {
                let t = self.duration * i as f64 / (n - 1) as f64;
                (t, self.envelope(t))
            })
            .collect())
    }
}

/// Σ_k c_k H_{2k}(u) with physicists' Hermite polynomials.
fn hermite_even_series(coeffs: &[f64], u: f64) -> f64 {
    let mut total = 0.0;
    let mut h_prev = 1.0; // H_0
    let mut h_cur = 2.0 * u; // H_1
    let mut degree = 1usize;
    total += coeffs[0] * h_prev;
    for &c in &coeffs[1..] {
        // advance recurrence to the next even degree
        for _ in 0..2 {
            let h_next = 2.0 * u * h_cur - 2.0 * (degree as f64) * h_prev;
            h_prev = h_cur;
            h_cur = h_next;
            degree += 1;
        }
        total += c * h_prev;
    }
    total
}

// ---------------------------------------------------------------------------
// phase profile
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum ProfileImpl {
    /// φ jumps 0 → target at τ_p/2.
    Step,
    /// Cumulative envelope integrals at panel edges; within-panel values by a
    /// fresh Gauss-Legendre partial integral.
    Panels {
        edges: Vec<f64>,
        cumulative: Vec<f64>,
    },
    /// Exact piecewise-quadratic phase of the piecewise-linear envelope.
    PiecewiseLinear { prefix: Vec<f64> },
}

/// The accumulated phase φ(t) of a pulse, with the quadrature grid used to
/// build it.
#[derive(Debug, Clone)]
pub struct PhaseProfile {
    shape: PulseShape,
    profile: ProfileImpl,
    rule: GaussLegendre,
    node_count: usize,
}

/// Build φ(t) for `shape` using a total quadrature budget of `nodes` points.
pub fn phase_profile(shape: &PulseShape, nodes: usize) -> Result<PhaseProfile> {
    if !shape.is_delta() && nodes < 64 {
        return Err(Error::InvalidArgument(format!(
            "need at least 64 quadrature nodes for shaped pulses, got {nodes}"
        )));
    }
    let rule = GaussLegendre::new(PANEL_ORDER);
    let tau = shape.duration();
    let profile = match shape.kind() {
        ShapeKind::Delta => ProfileImpl::Step,
        ShapeKind::Sampled { samples } => {
            let mut prefix = Vec::with_capacity(samples.len());
            let mut acc = 0.0;
            prefix.push(0.0);
            for w in samples.windows(2) {
                acc += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0) * shape.amplitude;
                prefix.push(acc);
            }
            ProfileImpl::PiecewiseLinear { prefix }
        }
        _ => {
            let panels = nodes.div_ceil(PANEL_ORDER).max(4);
            let edges: Vec<f64> = (0..=panels)
                .map(|p| tau * p as f64 / panels as f64)
                .collect();
            let mut cumulative = Vec::with_capacity(panels + 1);
            let mut acc = 0.0;
            cumulative.push(0.0);
            for w in edges.windows(2) {
                acc += rule.integrate(w[0], w[1], |t| shape.envelope(t));
                cumulative.push(acc);
            }
            ProfileImpl::Panels { edges, cumulative }
        }
    };
    let profile = PhaseProfile {
        shape: shape.clone(),
        profile,
        rule,
        node_count: nodes,
    };
    let end = profile.phi(tau);
    let target = shape.target_angle();
    if (end - target).abs() > 1e-10 * target.abs() {
        return Err(Error::QuadratureError(format!(
            "phase endpoint {end} differs from target angle {target}; \
             the node budget does not resolve this envelope, increase nodes"
        )));
    }
    Ok(profile)
}

impl PhaseProfile {
    pub fn phi(&self, t: f64) -> f64 {
        let tau = self.shape.duration();
        let t = t.clamp(0.0, tau);
        match &self.profile {
            ProfileImpl::Step => {
                if t < 0.5 * tau {
                    0.0
                } else if t > 0.5 * tau {
                    self.shape.target_angle()
                } else {
                    0.5 * self.shape.target_angle()
                }
            }
            ProfileImpl::Panels { edges, cumulative } => {
                let idx = edges.partition_point(|&e| e <= t).saturating_sub(1);
                let idx = idx.min(edges.len() - 2);
                cumulative[idx]
                    + self
                        .rule
                        .integrate(edges[idx], t, |x| self.shape.envelope(x))
            }
            ProfileImpl::PiecewiseLinear { prefix } => {
                let samples = match self.shape.kind() {
                    ShapeKind::Sampled { samples } => samples,
                    _ => unreachable!("piecewise profile only built for sampled shapes"),
                };
                let idx = samples
                    .partition_point(|&(ti, _)| ti <= t)
                    .saturating_sub(1)
                    .min(samples.len() - 2);
                let (t0, v0) = samples[idx];
                let (t1, v1) = samples[idx + 1];
                let a = self.shape.amplitude;
                let dt = t - t0;
                let slope = (v1 - v0) / (t1 - t0);
                prefix[idx] + a * (v0 * dt + 0.5 * slope * dt * dt)
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Cumulative-quadrature error estimate: the defect of the phase endpoint
    /// against the construction-time normalization.
    pub fn endpoint_defect(&self) -> f64 {
        (self.phi(self.shape.duration()) - self.shape.target_angle()).abs()
    }

    pub fn shape(&self) -> &PulseShape {
        &self.shape
    }

    /// Integration panel edges covering [0, τ_p] for parameter quadrature.
    fn integration_edges(&self, min_panels: usize) -> Vec<f64> {
        let tau = self.shape.duration();
        match &self.profile {
            ProfileImpl::PiecewiseLinear { .. } => {
                // respect sample breakpoints, subdividing long intervals
                let samples = match self.shape.kind() {
                    ShapeKind::Sampled { samples } => samples,
                    _ => unreachable!(),
                };
                let max_len = tau / min_panels as f64;
                let mut edges = vec![0.0];
                for w in samples.windows(2) {
                    let span = w[1].0 - w[0].0;
                    let sub = (span / max_len).ceil().max(1.0) as usize;
                    for k in 1..=sub {
                        edges.push(w[0].0 + span * k as f64 / sub as f64);
                    }
                }
                edges
            }
            _ => (0..=min_panels)
                .map(|p| tau * p as f64 / min_panels as f64)
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// defect parameters
// ---------------------------------------------------------------------------

/// The (s, α, ζ) defect triple of a π-pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    pub s: f64,
    pub alpha: f64,
    pub zeta: f64,
    pub quadrature_error_estimate: f64,
}

impl PulseParams {
    /// Exact parameters of the delta pulse.
    pub const DELTA: PulseParams = PulseParams {
        s: 0.0,
        alpha: 0.0,
        zeta: 0.25,
        quadrature_error_estimate: 0.0,
    };

    pub fn is_first_order(&self, tol: f64) -> bool {
        self.s.abs() <= tol
    }

    pub fn is_second_order(&self, tol: f64) -> bool {
        self.s.abs() <= tol && self.alpha.abs() <= tol
    }
}

/// Evaluate (s, α, ζ) with the given node budget plus an error estimate from a
/// half-resolution comparison.
pub fn pulse_params(shape: &PulseShape, nodes: usize) -> Result<PulseParams> {
    if shape.is_delta() {
        return Ok(PulseParams::DELTA);
    }
    let coarse = raw_params(shape, (nodes / 2).max(64))?;
    let fine = raw_params(shape, nodes)?;
    let estimate = (fine.0 - coarse.0)
        .abs()
        .max((fine.1 - coarse.1).abs())
        .max((fine.2 - coarse.2).abs())
        .max(1e-14);
    Ok(PulseParams {
        s: fine.0,
        alpha: fine.1,
        zeta: fine.2,
        quadrature_error_estimate: estimate,
    })
}

/// s = ⟨sin φ(t)⟩ with the default node budget.
pub fn compute_s(shape: &PulseShape) -> Result<f64> {
    Ok(pulse_params(shape, DEFAULT_NODES)?.s)
}

/// α = ⟨θ(t−t′) sin[φ(t)−φ(t′)]⟩ with the default node budget.
pub fn compute_alpha(shape: &PulseShape) -> Result<f64> {
    Ok(pulse_params(shape, DEFAULT_NODES)?.alpha)
}

/// ζ = ⟨θ(t−t′) cos φ(t′)⟩ with the default node budget.
pub fn compute_zeta(shape: &PulseShape) -> Result<f64> {
    Ok(pulse_params(shape, DEFAULT_NODES)?.zeta)
}

/// Fast s-only evaluation (used in optimizer inner loops targeting s alone).
pub fn compute_s_with_nodes(shape: &PulseShape, nodes: usize) -> Result<f64> {
    if shape.is_delta() {
        return Ok(0.0);
    }
    let profile = phase_profile(shape, nodes)?;
    let tau = shape.duration();
    let edges = profile.integration_edges(nodes.div_ceil(PANEL_ORDER).max(4));
    let rule = GaussLegendre::new(PANEL_ORDER);
    let mut s = 0.0;
    for w in edges.windows(2) {
        s += rule.integrate(w[0], w[1], |t| profile.phi(t).sin());
    }
    Ok(s / tau)
}

/// Single-resolution (s, α, ζ).
///
/// The two-time integrals reduce to single integrals over the cumulative
/// antiderivatives C(t) = ∫₀ᵗ cos φ and S(t) = ∫₀ᵗ sin φ:
/// α = ⟨sin φ·C − cos φ·S⟩/τ_p², ζ = ⟨C⟩/τ_p².
pub(crate) fn raw_params(shape: &PulseShape, nodes: usize) -> Result<(f64, f64, f64)> {
    let profile = phase_profile(shape, nodes)?;
    let tau = shape.duration();
    let rule = GaussLegendre::new(PANEL_ORDER);
    let cumul = crate::quad::cumulative_matrix(&rule);
    let edges = profile.integration_edges(nodes.div_ceil(PANEL_ORDER).max(4));

    let mut s_int = 0.0;
    let mut alpha_int = 0.0;
    let mut zeta_int = 0.0;
    let mut c_edge = 0.0;
    let mut s_edge = 0.0;
    let k = PANEL_ORDER;
    let mut cos_v = vec![0.0; k];
    let mut sin_v = vec![0.0; k];
    for w in edges.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        let mid = 0.5 * (w[0] + w[1]);
        for j in 0..k {
            let phi = profile.phi(mid + half * rule.nodes[j]);
            cos_v[j] = phi.cos();
            sin_v[j] = phi.sin();
        }
        for i in 0..k {
            // cumulative antiderivatives at node i from the panel interpolant
            let mut c_t = c_edge;
            let mut s_t = s_edge;
            for j in 0..k {
                c_t += half * cumul[i][j] * cos_v[j];
                s_t += half * cumul[i][j] * sin_v[j];
            }
            let wt = half * rule.weights[i];
            s_int += wt * sin_v[i];
            alpha_int += wt * (sin_v[i] * c_t - cos_v[i] * s_t);
            zeta_int += wt * c_t;
        }
        for j in 0..k {
            c_edge += half * rule.weights[j] * cos_v[j];
            s_edge += half * rule.weights[j] * sin_v[j];
        }
    }
    Ok((s_int / tau, alpha_int / (tau * tau), zeta_int / (tau * tau)))
}

// ---------------------------------------------------------------------------
// JSON shape specification (CLI / config files)
// ---------------------------------------------------------------------------

/// Wire format for pulse shapes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeSpec {
    Delta {
        duration: f64,
    },
    Gaussian {
        duration: f64,
        width_fraction: f64,
    },
    Hermite {
        duration: f64,
        width_fraction: f64,
        coefficients: Vec<f64>,
    },
    Sampled {
        duration: f64,
        samples: Vec<(f64, f64)>,
    },
}

impl ShapeSpec {
    pub fn build(&self) -> Result<PulseShape> {
        match self {
            ShapeSpec::Delta { duration } => PulseShape::delta(*duration),
            ShapeSpec::Gaussian {
                duration,
                width_fraction,
            } => PulseShape::gaussian(*duration, *width_fraction),
            ShapeSpec::Hermite {
                duration,
                width_fraction,
                coefficients,
            } => PulseShape::hermite(*duration, *width_fraction, coefficients.clone()),
            ShapeSpec::Sampled { duration, samples } => {
                PulseShape::sampled(*duration, samples.clone())
            }
        }
    }

    pub fn from_shape(shape: &PulseShape) -> Self {
        match shape.kind() {
            ShapeKind::Delta => ShapeSpec::Delta {
                duration: shape.duration(),
            },
            ShapeKind::TruncatedGaussian { width_fraction } => ShapeSpec::Gaussian {
                duration: shape.duration(),
                width_fraction: *width_fraction,
            },
            ShapeKind::HermiteSeries {
                center_width_fraction,
                coefficients,
            } => ShapeSpec::Hermite {
                duration: shape.duration(),
                width_fraction: *center_width_fraction,
                coefficients: coefficients.clone(),
            },
            ShapeKind::Sampled { samples } => ShapeSpec::Sampled {
                duration: shape.duration(),
                samples: samples.clone(),
            },
        }
    }
}
