//! Monte-Carlo benchmark harness: configure a trajectory, a sensor
//! suite, and a bank of algorithms; run each (algorithm, seed) pair over
//! the same truth; record error series; summarize windows into
//! table-shaped statistics; emit CSV artifacts.
//!
//! Runs are sequential and fully determined by the configuration and the
//! seed list, so repeated invocations produce byte-identical outputs.

use crate::determination::{quest, svd_wahba, triad, DeterminationError, WahbaWeights};
use crate::gaussian::{
    gamef_step, kf_bias_step, kf_step, mekf_step, GamefState, GaussianNoiseConfig, KfBiasState,
    KfState, MekfState,
};
use crate::nonlinear::{
    ag_ndaf_step, cg_ndaf_step, gp_ndaf_step, gp_nsaf_step, nsaf_step, ppf_envelope, FilterEvents,
    Mode, NdafGains, NdafState, NonlinearError, NsafGains, NsafState, NsafVariant, PpfParams,
};
use crate::sim::{run_truth_and_measurements, MeasurementFrame, SensorSpec, TrajectoryConfig,
    TruthSample};
use crate::so3::{
    angle_axis_to_rot, dist_identity, exp_so3, orthonormalize, quat_to_rot, rot_to_angle_error,
    rot_to_quat, AngleAxis, Mat3, RotationMatrix, Vec3,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// A window mean error above this marks the run unstable.
pub const UNSTABLE_MEAN_DIST: f64 = 0.05;
/// Environment variable overriding the configured output directory.
pub const OUT_DIR_ENV: &str = "ATTITUDE_OUT_DIR";
/// Pitch closer than this (radians) to ±90° has no unique Euler triple.
const GIMBAL_TOL: f64 = 1e-6;
/// Benchmark-preset sub-Euler intervals per frame. The 100 Hz frame
/// interval is too coarse for the stiffest tunings (the covariance
/// recursions overshoot, and the funnel filters overshoot near the
/// envelope edge), so the preset integrates each held frame in finer
/// steps.
const GAUSSIAN_SUBSTEPS: u32 = 100;
const NONLINEAR_SUBSTEPS: u32 = 10;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("statistics window contains no samples")]
    EmptyWindow,
    #[error("pitch within {0:.3e} of ±90 degrees; Euler angles undefined")]
    GimbalLock(f64),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// Full experiment description, loadable from a TOML document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub trajectory: TrajectoryConfig,
    pub sensors: SensorSpec,
    pub algorithms: Vec<AlgorithmSpec>,
    pub seeds: Vec<u64>,
    /// `(t_start, t_end)` in seconds, inclusive on both ends.
    pub stats_window: (f64, f64),
    #[serde(default)]
    pub output: OutputConfig,
}

/// One algorithm entry: a registry id, a unique display label, and an
/// id-specific parameter table (missing keys fall back to defaults).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub id: String,
    pub label: String,
    /// Euler sub-iterations per measurement frame for the filters whose
    /// recursions discretize a continuous flow (held measurements,
    /// interval Δt/substeps). 1 applies each printed recursion once per
    /// frame. Rejected for the per-frame algorithms (determination and
    /// the discrete predict/correct Kalman filters), where repeating the
    /// cycle would count one measurement several times.
    #[serde(default = "default_substeps")]
    pub substeps: u32,
    #[serde(default)]
    pub params: toml::Table,
}

fn default_substeps() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub tables: bool,
    pub plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            tables: true,
            plots: true,
        }
    }
}

impl OutputConfig {
    /// Configured directory, unless the override variable is set.
    pub fn resolved_dir(&self) -> PathBuf {
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.dir.clone())
    }
}

/// Error series of one (algorithm, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub label: String,
    pub seed: u64,
    pub samples: Vec<RunSample>,
    /// `δ̄·ξ(t)` per sample, present only for the guaranteed-performance
    /// algorithms.
    pub envelope: Option<Vec<f64>>,
    pub funnel_violations: u64,
    pub unstable_events: u64,
    /// A hard mid-run failure truncates the series and is recorded here.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSample {
    pub t: f64,
    /// `‖RᵀR̂‖_I` against the truth at this sample.
    pub dist: f64,
    /// Rotation-angle error in degrees.
    pub alpha_deg: f64,
    /// True gyro bias minus the current estimate (minus zero for
    /// algorithms without a bias state).
    pub b_tilde: Vec3,
    /// Noise-bound estimate, stochastic filters only.
    pub sigma_hat: Option<Vec3>,
}

/// Windowed statistics of one run, shaped like the benchmark tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub label: String,
    pub mean_dist: f64,
    pub std_dist: f64,
    pub inf_dist: f64,
    #[serde(rename = "mean_alpha")]
    pub mean_alpha_deg: f64,
    #[serde(rename = "std_alpha")]
    pub std_alpha_deg: f64,
    #[serde(rename = "inf_alpha")]
    pub inf_alpha_deg: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
        })
    }
}

/// Reconstruction backend for the semi-direct filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    #[default]
    Svd,
    Quest,
    Triad,
}

// Per-id parameter tables. Every field has a default so preset files can
// stay minimal.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct GaussParams {
    qv: f64,
    qw: f64,
    qb: f64,
    kf_alpha: f64,
    kf_sigma123: [f64; 3],
    kf_eta: f64,
    kf_epsilon: f64,
    kf_rho: f64,
}

impl Default for GaussParams {
    fn default() -> Self {
        let base = GaussianNoiseConfig::default();
        Self {
            qv: 1.0,
            qw: 1.0,
            qb: 1.0,
            kf_alpha: base.kf_alpha,
            kf_sigma123: base.kf_sigma123,
            kf_eta: base.kf_eta,
            kf_epsilon: base.kf_epsilon,
            kf_rho: base.kf_rho,
        }
    }
}

impl GaussParams {
    fn to_config(&self, pairs: usize) -> GaussianNoiseConfig {
        GaussianNoiseConfig {
            qv: vec![Mat3::identity() * self.qv; pairs],
            qw: Mat3::identity() * self.qw,
            qb: Mat3::identity() * self.qb,
            kf_alpha: self.kf_alpha,
            kf_sigma123: self.kf_sigma123,
            kf_eta: self.kf_eta,
            kf_epsilon: self.kf_epsilon,
            kf_rho: self.kf_rho,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct NdafParams {
    #[serde(flatten)]
    gains: NdafGains,
    reconstruction: Reconstruction,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct GpParams {
    #[serde(flatten)]
    ppf: PpfParams,
    reconstruction: Reconstruction,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct NsafParams {
    #[serde(flatten)]
    gains: NsafGains,
    reconstruction: Reconstruction,
}

/// Algorithm registry: id, summary, whether the row is a single-frame
/// determination method (no filter state).
pub const ALGORITHM_IDS: [(&str, &str); 16] = [
    ("triad", "two-pair algebraic determination (triads)"),
    ("quest", "Davenport eigenproblem determination (Rodrigues gain)"),
    ("svd", "optimal least-squares determination (SVD)"),
    ("kf", "quaternion Kalman filter"),
    ("kf_bias", "quaternion Kalman filter with gyro-bias state"),
    ("mekf", "multiplicative extended Kalman filter"),
    ("gamef", "geometric approximate minimum-energy filter"),
    ("cgsd_ndaf", "constant-gain deterministic filter, semi-direct"),
    ("cgd_ndaf", "constant-gain deterministic filter, direct"),
    ("ag_ndaf", "adaptive-gain deterministic filter, semi-direct"),
    ("gpsd_ndaf", "guaranteed-performance deterministic filter, semi-direct"),
    ("gpd_ndaf", "guaranteed-performance deterministic filter, direct"),
    ("agi_nsaf", "adaptive-gain stochastic filter, Ito form"),
    ("ags_nsaf", "adaptive-gain stochastic filter, Stratonovich form"),
    ("gpsd_nsaf", "guaranteed-performance stochastic filter, semi-direct"),
    ("gpd_nsaf", "guaranteed-performance stochastic filter, direct"),
];

#[derive(Debug, Clone)]
enum Runner {
    Triad,
    Quest,
    Svd,
    Kf(GaussianNoiseConfig),
    KfBias(GaussianNoiseConfig),
    Mekf(GaussianNoiseConfig),
    Gamef(GaussianNoiseConfig),
    CgNdaf {
        mode: Mode,
        gains: NdafGains,
        recon: Reconstruction,
    },
    AgNdaf {
        gains: NdafGains,
        recon: Reconstruction,
    },
    GpNdaf {
        mode: Mode,
        params: PpfParams,
        recon: Reconstruction,
    },
    Nsaf {
        variant: NsafVariant,
        gains: NsafGains,
        recon: Reconstruction,
    },
    GpNsaf {
        mode: Mode,
        params: PpfParams,
        recon: Reconstruction,
    },
}

fn parse_params<T: serde::de::DeserializeOwned>(
    spec: &AlgorithmSpec,
) -> Result<T, HarnessError> {
    toml::Value::Table(spec.params.clone())
        .try_into()
        .map_err(|e| {
            HarnessError::Config(format!(
                "algorithm '{}' ({}): bad params: {e}",
                spec.label, spec.id
            ))
        })
}

impl Runner {
    fn build(spec: &AlgorithmSpec, sensors: &SensorSpec) -> Result<Self, HarnessError> {
        if spec.substeps == 0 {
            return Err(HarnessError::Config(format!(
                "algorithm '{}': substeps must be at least 1",
                spec.label
            )));
        }
        if spec.substeps > 1
            && matches!(spec.id.as_str(), "triad" | "quest" | "svd" | "kf" | "kf_bias")
        {
            return Err(HarnessError::Config(format!(
                "algorithm '{}' ({}): substeps applies only to the continuous-form \
                 filters; this algorithm runs one cycle per measurement frame",
                spec.label, spec.id
            )));
        }
        let pairs = sensors.vector_count();
        let runner = match spec.id.as_str() {
            "triad" => Runner::Triad,
            "quest" => Runner::Quest,
            "svd" => Runner::Svd,
            "kf" | "kf_bias" | "mekf" | "gamef" => {
                let p: GaussParams = parse_params(spec)?;
                let cfg = p.to_config(pairs);
                cfg.validate().map_err(|e| {
                    HarnessError::Config(format!("algorithm '{}': {e}", spec.label))
                })?;
                match spec.id.as_str() {
                    "kf" => Runner::Kf(cfg),
                    "kf_bias" => Runner::KfBias(cfg),
                    "mekf" => Runner::Mekf(cfg),
                    _ => Runner::Gamef(cfg),
                }
            }
            "cgsd_ndaf" | "cgd_ndaf" => {
                let p: NdafParams = parse_params(spec)?;
                Runner::CgNdaf {
                    mode: if spec.id == "cgsd_ndaf" {
                        Mode::SemiDirect
                    } else {
                        Mode::Direct
                    },
                    gains: p.gains,
                    recon: p.reconstruction,
                }
            }
            "ag_ndaf" => {
                let p: NdafParams = parse_params(spec)?;
                Runner::AgNdaf {
                    gains: p.gains,
                    recon: p.reconstruction,
                }
            }
            "gpsd_ndaf" | "gpd_ndaf" => {
                let p: GpParams = parse_params(spec)?;
                p.ppf.validate().map_err(|e| {
                    HarnessError::Config(format!("algorithm '{}': {e}", spec.label))
                })?;
                Runner::GpNdaf {
                    mode: if spec.id == "gpsd_ndaf" {
                        Mode::SemiDirect
                    } else {
                        Mode::Direct
                    },
                    params: p.ppf,
                    recon: p.reconstruction,
                }
            }
            "agi_nsaf" | "ags_nsaf" => {
                let p: NsafParams = parse_params(spec)?;
                Runner::Nsaf {
                    variant: if spec.id == "agi_nsaf" {
                        NsafVariant::Ito
                    } else {
                        NsafVariant::Stratonovich
                    },
                    gains: p.gains,
                    recon: p.reconstruction,
                }
            }
            "gpsd_nsaf" | "gpd_nsaf" => {
                let p: GpParams = parse_params(spec)?;
                p.ppf.validate().map_err(|e| {
                    HarnessError::Config(format!("algorithm '{}': {e}", spec.label))
                })?;
                Runner::GpNsaf {
                    mode: if spec.id == "gpsd_nsaf" {
                        Mode::SemiDirect
                    } else {
                        Mode::Direct
                    },
                    params: p.ppf,
                    recon: p.reconstruction,
                }
            }
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown algorithm id '{other}'; known ids: {}",
                    ALGORITHM_IDS
                        .iter()
                        .map(|(id, _)| *id)
                        .collect::<Vec<_>>()
                        .join(", ")
                )))
            }
        };
        Ok(runner)
    }

    fn ppf(&self) -> Option<&PpfParams> {
        match self {
            Runner::GpNdaf { params, .. } | Runner::GpNsaf { params, .. } => Some(params),
            _ => None,
        }
    }
}

enum State {
    None,
    Kf(KfState),
    KfBias(KfBiasState),
    Mekf(MekfState),
    Gamef(GamefState),
    Ndaf(NdafState),
    Nsaf(NsafState),
}

impl State {
    fn attitude(&self) -> Option<RotationMatrix> {
        match self {
            State::None => None,
            State::Kf(s) => Some(quat_to_rot(&s.q_hat)),
            State::KfBias(s) => Some(quat_to_rot(&s.q_hat)),
            State::Mekf(s) => Some(quat_to_rot(&s.q_hat)),
            State::Gamef(s) => Some(quat_to_rot(&s.q_hat)),
            State::Ndaf(s) => Some(s.r_hat),
            State::Nsaf(s) => Some(s.r_hat),
        }
    }

    fn bias_estimate(&self) -> Vec3 {
        match self {
            State::KfBias(s) => s.b_hat,
            State::Mekf(s) => s.b_hat,
            State::Gamef(s) => s.b_hat,
            State::Ndaf(s) => s.b_hat,
            State::Nsaf(s) => s.b_hat,
            State::None | State::Kf(_) => Vec3::zeros(),
        }
    }

    fn sigma_estimate(&self) -> Option<Vec3> {
        match self {
            State::Nsaf(s) => Some(s.sigma_hat),
            _ => None,
        }
    }
}

/// Shared filter initialization: 178° about `[8, 7, 4]`, which places
/// the initial error at `‖R̃(0)‖_I = 0.9997` when the truth starts at
/// the identity.
pub fn initial_attitude() -> RotationMatrix {
    let axis = Vec3::new(8.0, 7.0, 4.0).normalize();
    angle_axis_to_rot(&AngleAxis::new(178.0_f64.to_radians(), axis).expect("unit axis"))
}

fn reconstruct(
    frame: &MeasurementFrame,
    weights: &WahbaWeights,
    recon: Reconstruction,
) -> Result<RotationMatrix, DeterminationError> {
    Ok(match recon {
        Reconstruction::Svd => svd_wahba(frame, weights)?.r_y,
        Reconstruction::Quest => quest(frame, weights)?.r_y,
        Reconstruction::Triad => triad(frame)?.r_y,
    })
}

struct StepFailure {
    message: String,
}

impl StepFailure {
    fn of(e: impl std::fmt::Display) -> Self {
        Self {
            message: e.to_string(),
        }
    }
}

#[derive(Default)]
struct StepEvents {
    funnel: bool,
    skipped: bool,
}

impl From<FilterEvents> for StepEvents {
    fn from(ev: FilterEvents) -> Self {
        Self {
            funnel: ev.funnel_violated,
            skipped: false,
        }
    }
}

/// Guard trips (unstable-set proximity, gain singularities, degenerate
/// measurement geometry) are transient: the filter cannot apply this
/// frame's correction, so the harness propagates on the gyro alone and
/// counts the event instead of abandoning the run.
fn recoverable(e: &NonlinearError) -> bool {
    matches!(
        e,
        NonlinearError::UnstableSetProximity { .. }
            | NonlinearError::GainSingularity { .. }
            | NonlinearError::SingularMB { .. }
    )
}

fn gyro_only(r_hat: &RotationMatrix, b_hat: Vec3, omega_m: Vec3, dt: f64) -> RotationMatrix {
    orthonormalize(r_hat.matrix() * exp_so3((omega_m - b_hat) * dt).matrix())
}

fn ndaf_fallback(s: &mut NdafState, omega_m: Vec3, dt: f64) {
    s.r_hat = gyro_only(&s.r_hat, s.b_hat, omega_m, dt);
}

fn nsaf_fallback(s: &mut NsafState, omega_m: Vec3, dt: f64) {
    s.r_hat = gyro_only(&s.r_hat, s.b_hat, omega_m, dt);
}

/// Reconstruction backend this runner consumes each frame, if any.
fn needed_reconstruction(runner: &Runner) -> Option<Reconstruction> {
    match runner {
        Runner::CgNdaf {
            mode: Mode::SemiDirect,
            recon,
            ..
        }
        | Runner::GpNdaf {
            mode: Mode::SemiDirect,
            recon,
            ..
        }
        | Runner::GpNsaf {
            mode: Mode::SemiDirect,
            recon,
            ..
        }
        | Runner::AgNdaf { recon, .. }
        | Runner::Nsaf { recon, .. } => Some(*recon),
        _ => None,
    }
}

/// Advances one measurement frame, splitting it into `substeps` equal
/// Euler sub-intervals with the measurements (and any reconstruction)
/// held constant. Events are reported per frame, not per sub-interval.
fn step_state(
    runner: &Runner,
    state: &mut State,
    frame: &MeasurementFrame,
    weights: &WahbaWeights,
    t: f64,
    dt: f64,
    substeps: u32,
) -> Result<StepEvents, StepFailure> {
    let r_y = match needed_reconstruction(runner) {
        Some(recon) => Some(reconstruct(frame, weights, recon).map_err(StepFailure::of)?),
        None => None,
    };
    let dt_sub = dt / f64::from(substeps);
    let mut events = StepEvents::default();
    for i in 0..substeps {
        let t_sub = t + f64::from(i) * dt_sub;
        let ev = step_once(runner, state, frame, r_y.as_ref(), t_sub, dt_sub)?;
        events.funnel |= ev.funnel;
        events.skipped |= ev.skipped;
    }
    Ok(events)
}

fn step_once(
    runner: &Runner,
    state: &mut State,
    frame: &MeasurementFrame,
    r_y: Option<&RotationMatrix>,
    t: f64,
    dt: f64,
) -> Result<StepEvents, StepFailure> {
    let mut events = StepEvents::default();
    match (runner, &mut *state) {
        (Runner::Triad | Runner::Quest | Runner::Svd, State::None) => {}
        (Runner::Kf(cfg), State::Kf(s)) => {
            *s = kf_step(s, frame, cfg, dt).map_err(StepFailure::of)?;
        }
        (Runner::KfBias(cfg), State::KfBias(s)) => {
            *s = kf_bias_step(s, frame, cfg, dt).map_err(StepFailure::of)?;
        }
        (Runner::Mekf(cfg), State::Mekf(s)) => {
            *s = mekf_step(s, frame, cfg, dt);
        }
        (Runner::Gamef(cfg), State::Gamef(s)) => {
            *s = gamef_step(s, frame, cfg, dt);
        }
        (Runner::CgNdaf { mode, gains, .. }, State::Ndaf(s)) => {
            match cg_ndaf_step(s, frame, r_y, dt, *mode, gains) {
                Ok(next) => *s = next,
                Err(e) if recoverable(&e) => {
                    ndaf_fallback(s, frame.omega_m, dt);
                    events.skipped = true;
                }
                Err(e) => return Err(StepFailure::of(e)),
            }
        }
        (Runner::AgNdaf { gains, .. }, State::Ndaf(s)) => {
            let r_y = r_y.expect("reconstruction prepared for semi-direct runners");
            match ag_ndaf_step(s, r_y, frame.omega_m, dt, gains) {
                Ok(next) => *s = next,
                Err(e) if recoverable(&e) => {
                    ndaf_fallback(s, frame.omega_m, dt);
                    events.skipped = true;
                }
                Err(e) => return Err(StepFailure::of(e)),
            }
        }
        (Runner::GpNdaf { mode, params, .. }, State::Ndaf(s)) => {
            match gp_ndaf_step(s, frame, r_y, t, dt, params, *mode) {
                Ok((next, ev)) => {
                    *s = next;
                    events = ev.into();
                }
                Err(e) if recoverable(&e) => {
                    ndaf_fallback(s, frame.omega_m, dt);
                    events.skipped = true;
                }
                Err(e) => return Err(StepFailure::of(e)),
            }
        }
        (Runner::Nsaf { variant, gains, .. }, State::Nsaf(s)) => {
            let r_y = r_y.expect("reconstruction prepared for semi-direct runners");
            match nsaf_step(s, r_y, frame.omega_m, dt, *variant, gains) {
                Ok(next) => *s = next,
                Err(e) if recoverable(&e) => {
                    nsaf_fallback(s, frame.omega_m, dt);
                    events.skipped = true;
                }
                Err(e) => return Err(StepFailure::of(e)),
            }
        }
        (Runner::GpNsaf { mode, params, .. }, State::Nsaf(s)) => {
            match gp_nsaf_step(s, frame, r_y, t, dt, params, *mode) {
                Ok((next, ev)) => {
                    *s = next;
                    events = ev.into();
                }
                Err(e) if recoverable(&e) => {
                    nsaf_fallback(s, frame.omega_m, dt);
                    events.skipped = true;
                }
                Err(e) => return Err(StepFailure::of(e)),
            }
        }
        _ => unreachable!("runner/state pairing is fixed at initialization"),
    }
    Ok(events)
}

fn run_single(
    runner: &Runner,
    label: &str,
    seed: u64,
    truth: &[TruthSample],
    frames: &[MeasurementFrame],
    sensors: &SensorSpec,
    dt: f64,
    substeps: u32,
) -> RunResult {
    let r0 = initial_attitude();
    let mut state = match runner {
        Runner::Triad | Runner::Quest | Runner::Svd => State::None,
        Runner::Kf(_) => State::Kf(KfState::with_quaternion(rot_to_quat(&r0))),
        Runner::KfBias(_) => State::KfBias(KfBiasState::with_quaternion(rot_to_quat(&r0))),
        Runner::Mekf(_) => State::Mekf(MekfState::with_quaternion(rot_to_quat(&r0))),
        Runner::Gamef(_) => State::Gamef(GamefState::with_quaternion(rot_to_quat(&r0))),
        Runner::CgNdaf { .. } | Runner::AgNdaf { .. } | Runner::GpNdaf { .. } => {
            State::Ndaf(NdafState::new(r0))
        }
        Runner::Nsaf { .. } | Runner::GpNsaf { .. } => State::Nsaf(NsafState::new(r0)),
    };

    let weights = WahbaWeights::new(sensors.weights.clone())
        .expect("weights validated with the sensor spec");
    let n = truth.len();
    let mut samples = Vec::with_capacity(n);
    let mut envelope = runner.ppf().map(|_| Vec::with_capacity(n));
    let mut funnel_violations = 0;
    let mut unstable_events = 0;
    let mut failure = None;

    for k in 0..n {
        let frame = &frames[k];
        let t = truth[k].t;

        let r_est = match (runner, state.attitude()) {
            (_, Some(r)) => r,
            (Runner::Triad, None) => match triad(frame) {
                Ok(res) => res.r_y,
                Err(e) => {
                    failure = Some(e.to_string());
                    break;
                }
            },
            (Runner::Quest, None) => match quest(frame, &weights) {
                Ok(res) => res.r_y,
                Err(e) => {
                    failure = Some(e.to_string());
                    break;
                }
            },
            (Runner::Svd, None) => match svd_wahba(frame, &weights) {
                Ok(res) => res.r_y,
                Err(e) => {
                    failure = Some(e.to_string());
                    break;
                }
            },
            _ => unreachable!("stateless runner without a determination arm"),
        };

        let r_tilde = truth[k].r.transpose() * r_est;
        samples.push(RunSample {
            t,
            dist: dist_identity(&r_tilde),
            alpha_deg: rot_to_angle_error(&r_tilde).to_degrees(),
            b_tilde: sensors.gyro_bias - state.bias_estimate(),
            sigma_hat: state.sigma_estimate(),
        });
        if let (Some(env), Some(p)) = (envelope.as_mut(), runner.ppf()) {
            env.push(p.delta_hi * ppf_envelope(t, p).0);
        }

        if k + 1 == n {
            break;
        }
        match step_state(runner, &mut state, frame, &weights, t, dt, substeps) {
            Ok(ev) => {
                funnel_violations += u64::from(ev.funnel);
                unstable_events += u64::from(ev.skipped);
            }
            Err(fail) => {
                failure = Some(fail.message);
                break;
            }
        }
    }

    RunResult {
        label: label.to_string(),
        seed,
        samples,
        envelope,
        funnel_violations,
        unstable_events,
        failure,
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("cannot parse {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.trajectory.validate()?;
        self.sensors.validate()?;
        if self.algorithms.is_empty() {
            return Err(HarnessError::Config("no algorithms configured".into()));
        }
        let mut labels = std::collections::BTreeSet::new();
        for alg in &self.algorithms {
            if !labels.insert(alg.label.as_str()) {
                return Err(HarnessError::Config(format!(
                    "duplicate algorithm label '{}'",
                    alg.label
                )));
            }
            Runner::build(alg, &self.sensors)?;
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("no seeds configured".into()));
        }
        let (t0, t1) = self.stats_window;
        if !(0.0 <= t0 && t0 < t1 && t1 <= self.trajectory.duration_s) {
            return Err(HarnessError::Config(format!(
                "stats window ({t0}, {t1}) must sit inside [0, {}]",
                self.trajectory.duration_s
            )));
        }
        Ok(())
    }
}

/// Runs every configured (algorithm, seed) pair and returns results
/// sorted by label, then seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunResult>, HarnessError> {
    cfg.validate()?;

    // Truth depends only on the trajectory; measurements vary per seed.
    let mut per_seed: BTreeMap<u64, (Vec<TruthSample>, Vec<MeasurementFrame>)> = BTreeMap::new();
    for &seed in &cfg.seeds {
        per_seed.entry(seed).or_insert(run_truth_and_measurements(
            &cfg.trajectory,
            &cfg.sensors,
            seed,
        )?);
    }

    let mut results = Vec::with_capacity(cfg.algorithms.len() * cfg.seeds.len());
    for alg in &cfg.algorithms {
        let runner = Runner::build(alg, &cfg.sensors)?;
        for &seed in &cfg.seeds {
            let (truth, frames) = &per_seed[&seed];
            results.push(run_single(
                &runner,
                &alg.label,
                seed,
                truth,
                frames,
                &cfg.sensors,
                cfg.trajectory.dt_s,
                alg.substeps,
            ));
        }
    }
    results.sort_by(|a, b| a.label.cmp(&b.label).then(a.seed.cmp(&b.seed)));
    Ok(results)
}

/// Windowed statistics (inclusive bounds): arithmetic mean, population
/// standard deviation, and max magnitude for both error measures.
pub fn summarize(run: &RunResult, window: (f64, f64)) -> Result<StatsSummary, HarnessError> {
    let (t0, t1) = window;
    let in_window: Vec<&RunSample> = run
        .samples
        .iter()
        .filter(|s| s.t >= t0 && s.t <= t1)
        .collect();
    if in_window.is_empty() {
        return Err(HarnessError::EmptyWindow);
    }
    let n = in_window.len() as f64;
    let stats = |get: &dyn Fn(&RunSample) -> f64| -> (f64, f64, f64) {
        let mean = in_window.iter().map(|s| get(s)).sum::<f64>() / n;
        let var = in_window
            .iter()
            .map(|s| (get(s) - mean).powi(2))
            .sum::<f64>()
            / n;
        let inf = in_window
            .iter()
            .map(|s| get(s).abs())
            .fold(0.0, f64::max);
        (mean, var.sqrt(), inf)
    };
    let (mean_dist, std_dist, inf_dist) = stats(&|s| s.dist);
    let (mean_alpha_deg, std_alpha_deg, inf_alpha_deg) = stats(&|s| s.alpha_deg);
    Ok(StatsSummary {
        label: run.label.clone(),
        mean_dist,
        std_dist,
        inf_dist,
        mean_alpha_deg,
        std_alpha_deg,
        inf_alpha_deg,
        verdict: verdict_for(mean_dist),
    })
}

/// A run is unstable when its window mean exceeds the threshold; a mean
/// that is not even finite counts as unstable too.
fn verdict_for(mean_dist: f64) -> Verdict {
    if mean_dist > UNSTABLE_MEAN_DIST || !mean_dist.is_finite() {
        Verdict::Unstable
    } else {
        Verdict::Stable
    }
}

/// Collapses per-seed summaries of one algorithm into an ensemble row:
/// means of means and deviations, maximum of the peak errors.
pub fn ensemble_summary(
    label: &str,
    per_seed: &[StatsSummary],
) -> Result<StatsSummary, HarnessError> {
    if per_seed.is_empty() {
        return Err(HarnessError::Config(format!(
            "no summaries to aggregate for '{label}'"
        )));
    }
    let n = per_seed.len() as f64;
    let mean = |get: &dyn Fn(&StatsSummary) -> f64| per_seed.iter().map(|s| get(s)).sum::<f64>() / n;
    let max = |get: &dyn Fn(&StatsSummary) -> f64| {
        per_seed.iter().map(|s| get(s)).fold(f64::MIN, f64::max)
    };
    let mean_dist = mean(&|s| s.mean_dist);
    Ok(StatsSummary {
        label: label.to_string(),
        mean_dist,
        std_dist: mean(&|s| s.std_dist),
        inf_dist: max(&|s| s.inf_dist),
        mean_alpha_deg: mean(&|s| s.mean_alpha_deg),
        std_alpha_deg: mean(&|s| s.std_alpha_deg),
        inf_alpha_deg: max(&|s| s.inf_alpha_deg),
        verdict: verdict_for(mean_dist),
    })
}

/// Writes summaries as CSV with the fixed column set
/// `label,mean_dist,std_dist,inf_dist,mean_alpha,std_alpha,inf_alpha,verdict`.
pub fn emit_table<W: std::io::Write>(
    summaries: &[StatsSummary],
    out: W,
) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record([
        "label",
        "mean_dist",
        "std_dist",
        "inf_dist",
        "mean_alpha",
        "std_alpha",
        "inf_alpha",
        "verdict",
    ])?;
    for s in summaries {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

fn sanitize_label(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes one CSV per run: `t,dist,alpha_deg` plus an `xi_envelope`
/// column for guaranteed-performance runs. Returns the written paths.
pub fn emit_plot_data(runs: &[RunResult], dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(runs.len());
    for run in runs {
        let path = dir.join(format!(
            "{}_seed{:02}.csv",
            sanitize_label(&run.label),
            run.seed
        ));
        let mut w = csv::Writer::from_path(&path)?;
        match &run.envelope {
            Some(env) => {
                w.write_record(["t", "dist", "alpha_deg", "xi_envelope"])?;
                for (s, e) in run.samples.iter().zip(env) {
                    w.serialize((s.t, s.dist, s.alpha_deg, e))?;
                }
            }
            None => {
                w.write_record(["t", "dist", "alpha_deg"])?;
                for s in &run.samples {
                    w.serialize((s.t, s.dist, s.alpha_deg))?;
                }
            }
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

/// Extracts yaw-pitch-roll angles (returned as `(phi, theta, psi)` in
/// degrees) such that rotating about z by psi, then y by theta, then x
/// by phi recomposes the input.
pub fn euler_extract(r: &RotationMatrix) -> Result<(f64, f64, f64), HarnessError> {
    let m = r.matrix();
    let s_theta = -m[(2, 0)];
    let c_theta = (m[(0, 0)].powi(2) + m[(1, 0)].powi(2)).sqrt();
    if c_theta < GIMBAL_TOL {
        return Err(HarnessError::GimbalLock(c_theta));
    }
    let theta = s_theta.atan2(c_theta);
    let psi = m[(1, 0)].atan2(m[(0, 0)]);
    let phi = m[(2, 1)].atan2(m[(2, 2)]);
    Ok((phi.to_degrees(), theta.to_degrees(), psi.to_degrees()))
}

// Preset construction: the benchmark scenario with every table row.

fn table(entries: &[(&str, toml::Value)]) -> toml::Table {
    entries
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn alg(id: &str, label: impl Into<String>, substeps: u32, params: toml::Table) -> AlgorithmSpec {
    AlgorithmSpec {
        id: id.into(),
        label: label.into(),
        substeps,
        params,
    }
}

fn num(v: f64) -> toml::Value {
    toml::Value::Float(v)
}

fn benchmark_trajectory() -> TrajectoryConfig {
    TrajectoryConfig {
        duration_s: 30.0,
        dt_s: 0.01,
        r0: RotationMatrix::identity(),
        profile: crate::sim::OmegaProfile::benchmark_sine(),
    }
}

fn benchmark_sensors() -> SensorSpec {
    SensorSpec {
        gyro_bias: Vec3::new(-0.1, 0.1, 0.05),
        gyro_noise_std: 0.2,
        vec_refs: vec![Vec3::new(1.0, -1.0, 1.0), Vec3::new(0.0, 0.0, 1.0)],
        vec_biases: vec![Vec3::new(0.13, -0.13, 0.13), Vec3::new(0.0, 0.0, 0.13)],
        vec_noise_stds: vec![0.13, 0.13],
        weights: vec![1.0, 1.0, 1.0],
        derive_third_by_cross: true,
    }
}

impl ExperimentConfig {
    /// The full benchmark: every algorithm configuration from the
    /// comparison study over ten seeds, statistics over 8-30 s.
    pub fn benchmark_preset() -> Self {
        let mut algorithms = vec![
            alg("triad", "TRIAD", 1, toml::Table::new()),
            alg("quest", "QUEST", 1, toml::Table::new()),
            alg("svd", "SVD", 1, toml::Table::new()),
        ];
        // Gaussian filter cases: (qv, qw, qb) per tuning case. The
        // aggressive cases discretize a stiff covariance flow, so they
        // run with finer sub-Euler intervals.
        let cases = [(1.0, 1.0, 1.0), (0.1, 10.0, 10.0), (0.01, 100.0, 100.0)];
        for (i, (qv, qw, qb)) in cases.iter().enumerate() {
            for id in ["mekf", "gamef"] {
                algorithms.push(alg(
                    id,
                    format!("{} Case {}", id.to_uppercase(), i + 1),
                    GAUSSIAN_SUBSTEPS,
                    table(&[("qv", num(*qv)), ("qw", num(*qw)), ("qb", num(*qb))]),
                ));
            }
        }
        for (i, kw) in [1.0, 10.0, 100.0].iter().enumerate() {
            for (id, family) in [("cgsd_ndaf", "CGSd-NDAF"), ("cgd_ndaf", "CGD-NDAF")] {
                algorithms.push(alg(
                    id,
                    format!("{} Case {}", family, i + 1),
                    NONLINEAR_SUBSTEPS,
                    table(&[("kw", num(*kw)), ("gamma", num(1.0))]),
                ));
            }
        }
        algorithms.push(alg(
            "ag_ndaf",
            "AG-NDAF",
            NONLINEAR_SUBSTEPS,
            table(&[("kw", num(8.0)), ("gamma", num(1.0))]),
        ));
        let gp_ndaf = PpfParams::benchmark_ndaf();
        for (id, label) in [("gpsd_ndaf", "GPSd-NDAF"), ("gpd_ndaf", "GPD-NDAF")] {
            algorithms.push(alg(id, label, NONLINEAR_SUBSTEPS, ppf_table(&gp_ndaf)));
        }
        let nsaf = NsafGains::default();
        for (id, label) in [("agi_nsaf", "AGI-NSAF"), ("ags_nsaf", "AGS-NSAF")] {
            algorithms.push(alg(
                id,
                label,
                NONLINEAR_SUBSTEPS,
                table(&[
                    ("gamma1", num(nsaf.gamma1)),
                    ("gamma2", num(nsaf.gamma2)),
                    ("kb", num(nsaf.kb)),
                    ("ksigma", num(nsaf.ksigma)),
                    ("kw", num(nsaf.kw)),
                    ("k2", num(nsaf.k2)),
                    ("epsilon", num(nsaf.epsilon)),
                ]),
            ));
        }
        let gp_nsaf = PpfParams::benchmark_nsaf();
        for (id, label) in [("gpsd_nsaf", "GPSd-NSAF"), ("gpd_nsaf", "GPD-NSAF")] {
            algorithms.push(alg(id, label, NONLINEAR_SUBSTEPS, ppf_table(&gp_nsaf)));
        }

        ExperimentConfig {
            trajectory: benchmark_trajectory(),
            sensors: benchmark_sensors(),
            algorithms,
            seeds: (1..=10).collect(),
            stats_window: (8.0, 30.0),
            output: OutputConfig::default(),
        }
    }

    /// Determination-only benchmark with full-run statistics.
    pub fn determination_preset() -> Self {
        let mut cfg = Self::benchmark_preset();
        cfg.algorithms.truncate(3);
        cfg.stats_window = (0.0, 30.0);
        cfg
    }
}

fn ppf_table(p: &PpfParams) -> toml::Table {
    table(&[
        ("xi0", num(p.xi0)),
        ("xi_inf", num(p.xi_inf)),
        ("ell", num(p.ell)),
        ("delta_hi", num(p.delta_hi)),
        ("delta_lo", num(p.delta_lo)),
        ("kw", num(p.kw)),
        ("gamma1", num(p.gamma1)),
        ("gamma2", num(p.gamma2)),
    ])
}
