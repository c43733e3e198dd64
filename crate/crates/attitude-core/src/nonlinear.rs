//! Nonlinear attitude filters on SO(3): constant-gain, adaptive-gain,
//! and prescribed-performance variants, each in a deterministic and a
//! stochastic flavor, driven either by a reconstructed attitude
//! (semi-direct) or by vector measurements (direct).
//!
//! All filters share the discrete pattern `R̂[k+1] = R̂[k]·exp([·]×Δt)`
//! with forward-Euler updates for the bias (and, where present, the
//! noise-bound estimate). The prescribed-performance filters constrain
//! an error measure to a shrinking envelope `δ̄·ξ(t)`; a sample that
//! escapes the envelope is clamped back and reported as a recoverable
//! event so long runs can complete.

use crate::sim::MeasurementFrame;
use crate::so3::{
    dist_identity, exp_so3, orthonormalize, vex_antisym, Mat3, RotationMatrix, Vec3,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Proximity tolerance for the unstable-set guards (denominators
/// `1 − ‖R̃‖_I`, `1 + Tr{R̃}`, `1 + Υ`).
pub const UNSTABLE_TOL: f64 = 1e-9;
/// `|ℰ + 1|` below this is a gain singularity in the stochastic
/// prescribed-performance correction.
pub const GAIN_SINGULARITY_TOL: f64 = 1e-6;
/// Condition-number limit for the measurement Gram matrix `M^B`.
pub const MB_COND_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NonlinearError {
    #[error("error measure {dist:.6} escaped the performance envelope {bound:.6}")]
    FunnelViolation { dist: f64, bound: f64 },
    #[error("state too close to the unstable set: {quantity} = {value:.9}")]
    UnstableSetProximity { quantity: &'static str, value: f64 },
    #[error("transformed error near gain singularity: eps = {eps:.9}")]
    GainSingularity { eps: f64 },
    #[error("measurement Gram matrix near-singular (condition estimate {cond:.3e})")]
    SingularMB { cond: f64 },
    #[error("semi-direct mode requires a reconstructed attitude")]
    MissingReconstruction,
    #[error("invalid parameters: {0}")]
    BadParams(String),
}

/// Correction source: a reconstructed attitude or raw vector pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SemiDirect,
    Direct,
}

/// Stochastic calculus convention of the adaptive-gain stochastic filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NsafVariant {
    Ito,
    Stratonovich,
}

/// Which slope function the performance transform uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpfVariant {
    Deterministic,
    Stochastic,
}

/// Recoverable per-step events, accumulated by the caller.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterEvents {
    pub funnel_violated: bool,
}

impl FilterEvents {
    fn violated() -> Self {
        Self {
            funnel_violated: true,
        }
    }
}

/// Deterministic-filter state: attitude estimate and gyro-bias estimate.
#[derive(Debug, Clone, Copy)]
pub struct NdafState {
    pub r_hat: RotationMatrix,
    pub b_hat: Vec3,
}

impl NdafState {
    pub fn new(r_hat: RotationMatrix) -> Self {
        Self {
            r_hat,
            b_hat: Vec3::zeros(),
        }
    }
}

/// Stochastic-filter state: adds the noise-bound estimate `σ̂`.
#[derive(Debug, Clone, Copy)]
pub struct NsafState {
    pub r_hat: RotationMatrix,
    pub b_hat: Vec3,
    pub sigma_hat: Vec3,
}

impl NsafState {
    pub fn new(r_hat: RotationMatrix) -> Self {
        Self {
            r_hat,
            b_hat: Vec3::zeros(),
            sigma_hat: Vec3::zeros(),
        }
    }
}

/// Gains of the constant- and adaptive-gain deterministic filters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct NdafGains {
    pub kw: f64,
    pub gamma: f64,
}

impl Default for NdafGains {
    fn default() -> Self {
        Self { kw: 1.0, gamma: 1.0 }
    }
}

/// Gains of the adaptive-gain stochastic filters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct NsafGains {
    pub gamma1: f64,
    pub gamma2: f64,
    pub kb: f64,
    pub ksigma: f64,
    pub kw: f64,
    pub k2: f64,
    pub epsilon: f64,
}

impl Default for NsafGains {
    fn default() -> Self {
        Self {
            gamma1: 1.0,
            gamma2: 1.0,
            kb: 0.01,
            ksigma: 0.01,
            kw: 2.0,
            k2: 0.5,
            epsilon: 0.1,
        }
    }
}

/// Performance-envelope parameters and gains of the
/// guaranteed-performance filters.
///
/// The envelope is `ξ(t) = (ξ₀ − ξ∞)e^{−ℓt} + ξ∞` with funnel walls
/// `−δ_·ξ` and `δ̄·ξ`. `gamma1` is the bias-adaptation gain (the `γ` of
/// the deterministic filters); `gamma2` drives the noise-bound estimate
/// of the stochastic filters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct PpfParams {
    pub xi0: f64,
    pub xi_inf: f64,
    pub ell: f64,
    pub delta_hi: f64,
    pub delta_lo: f64,
    pub kw: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Default for PpfParams {
    fn default() -> Self {
        Self::benchmark_ndaf()
    }
}

impl PpfParams {
    /// Benchmark configuration of the deterministic filters.
    pub fn benchmark_ndaf() -> Self {
        Self {
            xi0: 1.7,
            xi_inf: 0.08,
            ell: 4.0,
            delta_hi: 1.7,
            delta_lo: 1.7,
            kw: 2.0,
            gamma1: 1.0,
            gamma2: 1.0,
        }
    }

    /// Benchmark configuration of the stochastic filters.
    pub fn benchmark_nsaf() -> Self {
        Self {
            gamma2: 0.1,
            ..Self::benchmark_ndaf()
        }
    }

    pub fn validate(&self) -> Result<(), NonlinearError> {
        if !(self.xi0 > self.xi_inf && self.xi_inf > 0.0) {
            return Err(NonlinearError::BadParams(format!(
                "need xi0 > xi_inf > 0, got xi0 = {}, xi_inf = {}",
                self.xi0, self.xi_inf
            )));
        }
        if self.ell <= 0.0 || self.delta_hi <= 0.0 || self.delta_lo <= 0.0 {
            return Err(NonlinearError::BadParams(
                "ell, delta_hi, delta_lo must be positive".into(),
            ));
        }
        if self.kw <= 0.0 || self.gamma1 <= 0.0 || self.gamma2 <= 0.0 {
            return Err(NonlinearError::BadParams("gains must be positive".into()));
        }
        Ok(())
    }
}

/// Auxiliary quantities computed from one frame of vector measurements
/// and the current attitude estimate; `M^B = Σ sᵢ υᵢᴮ(υᵢᴮ)ᵀ` is the
/// measurement Gram matrix and `R̃` the attitude error it multiplies.
#[derive(Debug, Clone, Copy)]
pub struct VmAuxiliaries {
    /// `vex(P_a(M^B R̃)) = Σ (sᵢ/2) υ̂ᵢᴮ × υᵢᴮ`
    pub vex_pa: Vec3,
    /// `‖M^B R̃‖_I = (1/4) Σ sᵢ (1 − (υ̂ᵢᴮ)ᵀυᵢᴮ)`
    pub dist: f64,
    /// `Υ = Tr{M^B⁻¹ · Σ sᵢ υᵢᴮ(υ̂ᵢᴮ)ᵀ}`
    pub upsilon_big: f64,
    /// Smallest eigenvalue of `Tr{M^B}I₃ − M^B`
    pub lambda_min: f64,
}

/// Computes the vector-measurement auxiliaries for the direct filters,
/// with `υ̂ᵢᴮ = R̂ᵀυᵢᴵ`.
pub fn vm_auxiliaries(
    frame: &MeasurementFrame,
    r_hat: &RotationMatrix,
    weights: &[f64],
) -> Result<VmAuxiliaries, NonlinearError> {
    let n = frame.upsilon_body.len();
    if n < 2 || frame.upsilon_inertial.len() != n {
        return Err(NonlinearError::BadParams(format!(
            "need >= 2 matched observation pairs, got {n} body / {} inertial",
            frame.upsilon_inertial.len()
        )));
    }
    if weights.len() != n {
        return Err(NonlinearError::BadParams(format!(
            "{} weights for {n} pairs",
            weights.len()
        )));
    }

    let rt = r_hat.transpose();
    let mut vex_pa = Vec3::zeros();
    let mut dist = 0.0;
    let mut m_b = Mat3::zeros();
    let mut m_cross = Mat3::zeros();
    for i in 0..n {
        let ub = frame.upsilon_body[i];
        let ub_hat = rt * frame.upsilon_inertial[i];
        let s = weights[i];
        vex_pa += (s / 2.0) * ub_hat.cross(&ub);
        dist += s * (1.0 - ub_hat.dot(&ub)) / 4.0;
        m_b += s * ub * ub.transpose();
        m_cross += s * ub * ub_hat.transpose();
    }

    // M^B is symmetric PSD; its spectrum gives both the conditioning
    // check and (shifted) the smallest eigenvalue of Tr{M^B}I₃ − M^B.
    let eigs = nalgebra::linalg::SymmetricEigen::new(m_b).eigenvalues;
    let lam_max = eigs.max();
    let lam_min_mb = eigs.min();
    let cond = if lam_min_mb > 0.0 {
        lam_max / lam_min_mb
    } else {
        f64::INFINITY
    };
    if !cond.is_finite() || cond >= MB_COND_LIMIT {
        return Err(NonlinearError::SingularMB { cond });
    }
    let lambda_min = m_b.trace() - lam_max;

    let m_b_inv = m_b.try_inverse().ok_or(NonlinearError::SingularMB {
        cond: f64::INFINITY,
    })?;
    let upsilon_big = (m_b_inv * m_cross).trace();

    Ok(VmAuxiliaries {
        vex_pa,
        dist: dist.max(0.0),
        upsilon_big,
        lambda_min,
    })
}

/// Performance envelope `ξ(t)` and its time derivative.
pub fn ppf_envelope(t: f64, p: &PpfParams) -> (f64, f64) {
    let decay = (-p.ell * t).exp();
    let xi = (p.xi0 - p.xi_inf) * decay + p.xi_inf;
    let xi_dot = -p.ell * (p.xi0 - p.xi_inf) * decay;
    (xi, xi_dot)
}

/// Maps a constrained error measure to the unconstrained error `ℰ` and
/// the transform slope `μ`.
pub fn ppf_transform(
    dist: f64,
    xi: f64,
    p: &PpfParams,
    variant: PpfVariant,
) -> Result<(f64, f64), NonlinearError> {
    let hi = p.delta_hi * xi;
    let lo = -p.delta_lo * xi;
    if dist >= hi {
        return Err(NonlinearError::FunnelViolation { dist, bound: hi });
    }
    if dist <= lo {
        return Err(NonlinearError::FunnelViolation { dist, bound: lo });
    }
    let eps = 0.5 * ((p.delta_lo + dist / xi) / (p.delta_hi - dist / xi)).ln();
    let mu = match variant {
        PpfVariant::Deterministic => {
            0.5 / (p.delta_lo * xi + dist) + 0.5 / (p.delta_hi * xi - dist)
        }
        PpfVariant::Stochastic => {
            ((2.0 * eps).exp() + (-2.0 * eps).exp() + 2.0) / (8.0 * xi * p.delta_hi)
        }
    };
    Ok((eps, mu))
}

/// Fraction of the envelope half-width at which the transform input
/// saturates. `eps` and the slope `mu` both diverge at the envelope
/// edge, so an in-domain sample arbitrarily close to it commands an
/// unbounded correction that the fixed-step recursion cannot follow
/// (one step overshoots through the opposite wall). Saturating the
/// input here keeps the per-step correction a contraction toward the
/// funnel center while leaving the transform exact across the
/// interior the filters operate in.
const TRANSFORM_SATURATION: f64 = 0.9;

/// One funnel evaluation: envelope value, its backward difference, and
/// the transform at `dist` (saturated near the edge). A `dist` outside
/// the envelope is outside the transform's domain, so `eps`/`mu` are
/// zeroed and `violated` is set; callers must not correct off such a
/// frame.
struct FunnelEval {
    xi: f64,
    xi_bar_d: f64,
    eps: f64,
    mu: f64,
    violated: bool,
}

fn eval_funnel(
    dist: f64,
    t: f64,
    dt: f64,
    p: &PpfParams,
    variant: PpfVariant,
) -> Result<FunnelEval, NonlinearError> {
    let (xi, _) = ppf_envelope(t, p);
    // Backward difference with the sample before t = 0 pinned to ξ₀.
    let xi_prev = ppf_envelope((t - dt).max(0.0), p).0;
    let xi_bar_d = (xi - xi_prev) / dt;
    let hi = p.delta_hi * xi;
    let lo = -p.delta_lo * xi;
    if dist >= hi || dist <= lo {
        return Ok(FunnelEval {
            xi,
            xi_bar_d,
            eps: 0.0,
            mu: 0.0,
            violated: true,
        });
    }
    let z = dist.clamp(TRANSFORM_SATURATION * lo, TRANSFORM_SATURATION * hi);
    let (eps, mu) = ppf_transform(z, xi, p, variant)?;
    Ok(FunnelEval {
        xi,
        xi_bar_d,
        eps,
        mu,
        violated: false,
    })
}

fn propagate(r: &RotationMatrix, rate: Vec3, dt: f64) -> RotationMatrix {
    orthonormalize(*(*r * exp_so3(rate * dt)).matrix())
}

/// Bias-compensated gyro propagation with no measurement correction,
/// used when the frame's error measure escaped the envelope and the
/// performance transform is undefined. Bias and noise-bound estimates
/// carry over unchanged.
fn coast_ndaf(state: &NdafState, frame: &MeasurementFrame, dt: f64) -> NdafState {
    NdafState {
        r_hat: propagate(&state.r_hat, frame.omega_m - state.b_hat, dt),
        b_hat: state.b_hat,
    }
}

fn coast_nsaf(state: &NsafState, frame: &MeasurementFrame, dt: f64) -> NsafState {
    NsafState {
        r_hat: propagate(&state.r_hat, frame.omega_m - state.b_hat, dt),
        b_hat: state.b_hat,
        sigma_hat: state.sigma_hat,
    }
}

fn error_rotation(r_hat: &RotationMatrix, r_y: &RotationMatrix) -> RotationMatrix {
    r_y.transpose() * *r_hat
}

/// Constant-gain deterministic step. Semi-direct mode corrects along
/// `vex(P_a(R̃))` with `R̃ = R_yᵀR̂`; direct mode along
/// `vex(P_a(M^B R̃))` straight from the measurements.
pub fn cg_ndaf_step(
    state: &NdafState,
    frame: &MeasurementFrame,
    r_y: Option<&RotationMatrix>,
    dt: f64,
    mode: Mode,
    gains: &NdafGains,
) -> Result<NdafState, NonlinearError> {
    let w = match mode {
        Mode::SemiDirect => {
            let r_y = r_y.ok_or(NonlinearError::MissingReconstruction)?;
            vex_antisym(error_rotation(&state.r_hat, r_y).matrix())
        }
        Mode::Direct => vm_auxiliaries(frame, &state.r_hat, &frame.weights)?.vex_pa,
    };
    Ok(NdafState {
        r_hat: propagate(
            &state.r_hat,
            frame.omega_m - state.b_hat - gains.kw * w,
            dt,
        ),
        b_hat: state.b_hat + gains.gamma * w * dt,
    })
}

/// Adaptive-gain deterministic step: the correction scales with
/// `1/(1 + Tr{R̃})`, growing without bound as the error approaches the
/// unstable set.
pub fn ag_ndaf_step(
    state: &NdafState,
    r_y: &RotationMatrix,
    omega_m: Vec3,
    dt: f64,
    gains: &NdafGains,
) -> Result<NdafState, NonlinearError> {
    let r_tilde = error_rotation(&state.r_hat, r_y);
    let tr = r_tilde.trace();
    if tr <= -1.0 + UNSTABLE_TOL {
        return Err(NonlinearError::UnstableSetProximity {
            quantity: "1 + Tr(error rotation)",
            value: 1.0 + tr,
        });
    }
    let w = vex_antisym(r_tilde.matrix()) / (1.0 + tr);
    Ok(NdafState {
        r_hat: propagate(&state.r_hat, omega_m - state.b_hat - gains.kw * w, dt),
        b_hat: state.b_hat + gains.gamma * w * dt,
    })
}

/// Guaranteed-performance deterministic step (semi-direct or direct).
pub fn gp_ndaf_step(
    state: &NdafState,
    frame: &MeasurementFrame,
    r_y: Option<&RotationMatrix>,
    t: f64,
    dt: f64,
    p: &PpfParams,
    mode: Mode,
) -> Result<(NdafState, FilterEvents), NonlinearError> {
    let (w, correction_dir, f) = match mode {
        Mode::SemiDirect => {
            let r_y = r_y.ok_or(NonlinearError::MissingReconstruction)?;
            let r_tilde = error_rotation(&state.r_hat, r_y);
            let d = dist_identity(&r_tilde);
            if 1.0 - d <= UNSTABLE_TOL {
                return Err(NonlinearError::UnstableSetProximity {
                    quantity: "1 - dist(error rotation)",
                    value: 1.0 - d,
                });
            }
            let psi = vex_antisym(r_tilde.matrix());
            let f = eval_funnel(d, t, dt, p, PpfVariant::Deterministic)?;
            if f.violated {
                return Ok((coast_ndaf(state, frame, dt), FilterEvents::violated()));
            }
            let w = 2.0 * (p.kw * f.mu * f.eps - f.xi_bar_d / (4.0 * f.xi)) / (1.0 - d) * psi;
            (w, psi, f)
        }
        Mode::Direct => {
            let aux = vm_auxiliaries(frame, &state.r_hat, &frame.weights)?;
            if aux.upsilon_big <= -1.0 + UNSTABLE_TOL {
                return Err(NonlinearError::UnstableSetProximity {
                    quantity: "1 + Upsilon",
                    value: 1.0 + aux.upsilon_big,
                });
            }
            let f = eval_funnel(aux.dist, t, dt, p, PpfVariant::Deterministic)?;
            if f.violated {
                return Ok((coast_ndaf(state, frame, dt), FilterEvents::violated()));
            }
            let w = (4.0 / aux.lambda_min) * (p.kw * f.mu * f.eps - f.xi_bar_d / f.xi)
                / (1.0 + aux.upsilon_big)
                * aux.vex_pa;
            (w, aux.vex_pa, f)
        }
    };
    let next = NdafState {
        r_hat: propagate(
            &state.r_hat,
            frame.omega_m - state.b_hat - p.kw * w,
            dt,
        ),
        b_hat: state.b_hat + (p.gamma1 / 2.0) * f.mu * f.eps * correction_dir * dt,
    };
    Ok((next, FilterEvents { funnel_violated: false }))
}

/// Adaptive-gain stochastic step (Ito or Stratonovich convention).
pub fn nsaf_step(
    state: &NsafState,
    r_y: &RotationMatrix,
    omega_m: Vec3,
    dt: f64,
    variant: NsafVariant,
    gains: &NsafGains,
) -> Result<NsafState, NonlinearError> {
    let r_tilde = error_rotation(&state.r_hat, r_y);
    let d = dist_identity(&r_tilde);
    if 1.0 - d <= UNSTABLE_TOL {
        return Err(NonlinearError::UnstableSetProximity {
            quantity: "1 - dist(error rotation)",
            value: 1.0 - d,
        });
    }
    let psi = vex_antisym(r_tilde.matrix());
    let d_psi = Mat3::from_columns(&[psi, psi, psi]);
    let diag_psi = Mat3::from_diagonal(&psi);
    let w = (gains.kw / gains.epsilon) * ((2.0 - d) / (1.0 - d)) * psi
        + gains.k2 * (d_psi * state.sigma_hat);

    let (rate, sigma_next) = match variant {
        NsafVariant::Ito => (
            omega_m - state.b_hat - w,
            state.sigma_hat
                + (gains.kw * gains.gamma2 * d * (d_psi.transpose() * psi)
                    - gains.gamma2 * gains.ksigma * state.sigma_hat)
                    * dt,
        ),
        NsafVariant::Stratonovich => (
            omega_m - state.b_hat - 0.5 / (1.0 - d) * (diag_psi * state.sigma_hat) - w,
            state.sigma_hat
                + (gains.gamma2
                    * d
                    * (gains.kw * (d_psi.transpose() * psi)
                        + 0.5 / (1.0 - d) * (diag_psi * psi))
                    - gains.gamma2 * gains.ksigma * state.sigma_hat)
                    * dt,
        ),
    };

    Ok(NsafState {
        r_hat: propagate(&state.r_hat, rate, dt),
        b_hat: state.b_hat
            + (gains.gamma1 * d * psi - gains.gamma1 * gains.kb * state.b_hat) * dt,
        sigma_hat: sigma_next,
    })
}

/// Guaranteed-performance stochastic step (semi-direct or direct).
pub fn gp_nsaf_step(
    state: &NsafState,
    frame: &MeasurementFrame,
    r_y: Option<&RotationMatrix>,
    t: f64,
    dt: f64,
    p: &PpfParams,
    mode: Mode,
) -> Result<(NsafState, FilterEvents), NonlinearError> {
    match mode {
        Mode::SemiDirect => {
            let r_y = r_y.ok_or(NonlinearError::MissingReconstruction)?;
            let r_tilde = error_rotation(&state.r_hat, r_y);
            let d = dist_identity(&r_tilde);
            if 1.0 - d <= UNSTABLE_TOL {
                return Err(NonlinearError::UnstableSetProximity {
                    quantity: "1 - dist(error rotation)",
                    value: 1.0 - d,
                });
            }
            let psi = vex_antisym(r_tilde.matrix());
            let diag_psi = Mat3::from_diagonal(&psi);
            let f = eval_funnel(d, t, dt, p, PpfVariant::Stochastic)?;
            if f.violated {
                return Ok((coast_nsaf(state, frame, dt), FilterEvents::violated()));
            }
            if (f.eps + 1.0).abs() < GAIN_SINGULARITY_TOL {
                return Err(NonlinearError::GainSingularity { eps: f.eps });
            }
            let w = 2.0 * ((f.eps + 2.0) / (f.eps + 1.0)) * f.mu * (diag_psi * state.sigma_hat)
                + 2.0 * (p.kw * f.mu * (f.eps + 1.0) - f.xi_bar_d / (4.0 * f.xi)) / (1.0 - d)
                    * psi;
            let e_exp = f.eps.exp();
            let next = NsafState {
                r_hat: propagate(&state.r_hat, frame.omega_m - state.b_hat - w, dt),
                b_hat: state.b_hat + p.gamma1 * (f.eps + 1.0) * e_exp * f.mu * psi * dt,
                sigma_hat: state.sigma_hat
                    + p.gamma2 * f.eps * (f.eps + 2.0) * e_exp * f.mu * f.mu * (diag_psi * psi)
                        * dt,
            };
            Ok((next, FilterEvents { funnel_violated: false }))
        }
        Mode::Direct => {
            let aux = vm_auxiliaries(frame, &state.r_hat, &frame.weights)?;
            if aux.upsilon_big <= -1.0 + UNSTABLE_TOL {
                return Err(NonlinearError::UnstableSetProximity {
                    quantity: "1 + Upsilon",
                    value: 1.0 + aux.upsilon_big,
                });
            }
            let psi_m = aux.vex_pa;
            let diag_psi_m = Mat3::from_diagonal(&psi_m);
            let f = eval_funnel(aux.dist, t, dt, p, PpfVariant::Stochastic)?;
            if f.violated {
                return Ok((coast_nsaf(state, frame, dt), FilterEvents::violated()));
            }
            if (f.eps + 1.0).abs() < GAIN_SINGULARITY_TOL {
                return Err(NonlinearError::GainSingularity { eps: f.eps });
            }
            let w = 2.0 * ((f.eps + 2.0) / (f.eps + 1.0)) * f.mu * (diag_psi_m * state.sigma_hat)
                + (4.0 / aux.lambda_min) * (p.kw * f.mu * f.eps - f.xi_bar_d / f.xi)
                    / (1.0 + aux.upsilon_big)
                    * psi_m;
            let e_exp = f.eps.exp();
            let next = NsafState {
                r_hat: propagate(&state.r_hat, frame.omega_m - state.b_hat - w, dt),
                b_hat: state.b_hat + p.gamma1 * f.mu * (f.eps + 1.0) * e_exp * psi_m * dt,
                sigma_hat: state.sigma_hat
                    + p.gamma2 * (f.eps + 2.0) * e_exp * f.mu * f.mu * (diag_psi_m * psi_m) * dt,
            };
            Ok((next, FilterEvents { funnel_violated: false }))
        }
    }
}
