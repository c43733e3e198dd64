//! Ground-truth trajectory generation and synthetic sensor production.
//!
//! The measurement model is
//!
//! ```text
//! Ω_m  = Ω + b + n_gyro            n_gyro ~ N(0, σ²) per axis
//! v_iᴮ = Rᵀ v_iᴵ + b_iᴮ + n_i      n_i    ~ N(0, σ_i²) per axis
//! ```
//!
//! with constant biases and i.i.d. per-axis, per-step Gaussian noise (no
//! √Δt scaling — rate-noise shaping belongs to filter tuning, not the
//! sensor model). Every run is driven by an explicitly seeded ChaCha12
//! generator split into one independent sub-stream per sensor channel
//! (stream 0: gyro; stream 1+i: vector observation i), so outputs are
//! bit-reproducible across platforms and safe to parallelize across seeds.

use crate::so3::{exp_so3, RotationMatrix, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pre-normalization vector norms below this are degenerate observations.
pub const DEGENERATE_NORM: f64 = 1e-9;
/// Two observation directions closer than this angle (rad) are collinear.
pub const COLLINEAR_ANGLE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("degenerate frame at t = {t}: vector {index} has norm {norm:.3e}")]
    DegenerateFrame { t: f64, index: usize, norm: f64 },
    #[error("frame dump failed: {0}")]
    Io(#[from] csv::Error),
}

/// Angular-velocity profile: a per-axis sinusoid family plus constants.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OmegaProfile {
    /// `Ω_i(t) = amp_i · sin(freq_i · t + phase_i)`.
    Sine {
        amp: [f64; 3],
        freq: [f64; 3],
        phase: [f64; 3],
    },
    /// Constant rate (use zeros for a static body).
    Constant { omega: [f64; 3] },
}

impl OmegaProfile {
    /// The default benchmark trajectory:
    /// `[sin(0.4t), sin(0.7t + π/4), 0.4·sin(0.3t + π/2)]` rad/s.
    pub fn benchmark_sine() -> Self {
        OmegaProfile::Sine {
            amp: [1.0, 1.0, 0.4],
            freq: [0.4, 0.7, 0.3],
            phase: [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2],
        }
    }

    pub fn zero() -> Self {
        OmegaProfile::Constant { omega: [0.0; 3] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub duration_s: f64,
    pub dt_s: f64,
    /// Initial true attitude; identity when omitted in config files.
    #[serde(default = "RotationMatrix::identity")]
    pub r0: RotationMatrix,
    pub profile: OmegaProfile,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt_s > 0.0) {
            return Err(SimError::Config(format!("dt_s must be > 0, got {}", self.dt_s)));
        }
        if self.duration_s < self.dt_s {
            return Err(SimError::Config(format!(
                "duration_s ({}) must be at least dt_s ({})",
                self.duration_s, self.dt_s
            )));
        }
        Ok(())
    }

    /// Number of recorded samples: `floor(duration/dt) + 1`.
    pub fn sample_count(&self) -> usize {
        (self.duration_s / self.dt_s).floor() as usize + 1
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorSpec {
    /// Constant gyro bias `b` (rad/s).
    pub gyro_bias: Vec3,
    /// Per-axis gyro noise STD (rad/s).
    pub gyro_noise_std: f64,
    /// Inertial-frame reference directions `v_iᴵ` (raw; need not be unit).
    pub vec_refs: Vec<Vec3>,
    /// Constant body-frame measurement bias per observation.
    pub vec_biases: Vec<Vec3>,
    /// Per-axis noise STD per observation.
    pub vec_noise_stds: Vec<f64>,
    /// Sensor confidence weights `s_i > 0`, one per observation *after*
    /// the optional derived third vector is appended.
    pub weights: Vec<f64>,
    /// Append `v₃ᴵ = v₁ᴵ × v₂ᴵ` and `v₃ᴮ = v₁ᴮ × v₂ᴮ` (the body-frame
    /// cross is taken over the noisy measurements, so the derived vector
    /// inherits their noise).
    pub derive_third_by_cross: bool,
}

impl SensorSpec {
    /// Observation count including the derived third vector.
    pub fn vector_count(&self) -> usize {
        self.vec_refs.len() + usize::from(self.derive_third_by_cross)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.vec_refs.len();
        if n < 2 {
            return Err(SimError::Config(format!(
                "at least two reference vectors are required, got {n}"
            )));
        }
        if self.vec_biases.len() != n || self.vec_noise_stds.len() != n {
            return Err(SimError::Config(format!(
                "vec_biases ({}) and vec_noise_stds ({}) must match vec_refs ({n})",
                self.vec_biases.len(),
                self.vec_noise_stds.len()
            )));
        }
        if self.weights.len() != self.vector_count() {
            return Err(SimError::Config(format!(
                "weights ({}) must cover all {} observations",
                self.weights.len(),
                self.vector_count()
            )));
        }
        if self.gyro_noise_std < 0.0 || self.vec_noise_stds.iter().any(|s| *s < 0.0) {
            return Err(SimError::Config("noise STDs must be >= 0".into()));
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) {
            return Err(SimError::Config("weights must be > 0".into()));
        }
        for v in &self.vec_refs {
            if v.norm() < DEGENERATE_NORM {
                return Err(SimError::Config("reference vectors must be nonzero".into()));
            }
        }
        // Rank-two condition: the first two references must span a plane.
        let u1 = self.vec_refs[0].normalize();
        let u2 = self.vec_refs[1].normalize();
        if u1.cross(&u2).norm() <= COLLINEAR_ANGLE {
            return Err(SimError::Config(
                "the first two reference vectors are collinear".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TruthSample {
    pub t: f64,
    pub r: RotationMatrix,
    pub omega: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFrame {
    pub t: f64,
    /// Measured angular rate `Ω_m = Ω + b + noise`.
    pub omega_m: Vec3,
    /// Raw body-frame observations (biased, noisy).
    pub v_body: Vec<Vec3>,
    /// Raw inertial-frame references.
    pub v_inertial: Vec<Vec3>,
    /// Unit-normalized body observations `υ_iᴮ`.
    pub upsilon_body: Vec<Vec3>,
    /// Unit-normalized inertial references `υ_iᴵ`.
    pub upsilon_inertial: Vec<Vec3>,
    /// Confidence weights `s_i`, aligned with the observation lists.
    pub weights: Vec<f64>,
}

/// True angular velocity at time `t`.
pub fn omega_true(t: f64, cfg: &TrajectoryConfig) -> Vec3 {
    match &cfg.profile {
        OmegaProfile::Sine { amp, freq, phase } => Vec3::new(
            amp[0] * (freq[0] * t + phase[0]).sin(),
            amp[1] * (freq[1] * t + phase[1]).sin(),
            amp[2] * (freq[2] * t + phase[2]).sin(),
        ),
        OmegaProfile::Constant { omega } => Vec3::new(omega[0], omega[1], omega[2]),
    }
}

/// Exact attitude integration over one step, `R · exp([Ω·Δt]×)`,
/// re-orthonormalized for float drift control.
pub fn propagate_truth(r: &RotationMatrix, omega: Vec3, dt: f64) -> RotationMatrix {
    RotationMatrix::orthonormalize(r.matrix() * exp_so3(omega * dt).matrix())
}

/// Independent per-channel noise streams for one simulated run.
///
/// Stream assignment (ChaCha12, explicit seed): stream 0 feeds the gyro,
/// stream `1 + i` feeds vector observation `i`. Each frame consumes
/// exactly three standard-normal draws per channel (x, y, z), so channel
/// histories never interleave.
pub struct SensorRng {
    gyro: ChaCha12Rng,
    vectors: Vec<ChaCha12Rng>,
}

impl SensorRng {
    pub fn new(seed: u64, spec: &SensorSpec) -> Self {
        let mut gyro = ChaCha12Rng::seed_from_u64(seed);
        gyro.set_stream(0);
        let vectors = (0..spec.vec_refs.len())
            .map(|i| {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                rng.set_stream(1 + i as u64);
                rng
            })
            .collect();
        Self { gyro, vectors }
    }

    fn normal3(rng: &mut ChaCha12Rng) -> Vec3 {
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        Vec3::new(x, y, z)
    }
}

/// Produces one synthetic measurement frame for a truth sample.
pub fn synthesize_frame(
    truth: &TruthSample,
    spec: &SensorSpec,
    rng: &mut SensorRng,
) -> Result<MeasurementFrame, SimError> {
    let omega_m = truth.omega + spec.gyro_bias + spec.gyro_noise_std * SensorRng::normal3(&mut rng.gyro);

    let rt = truth.r.transpose();
    let mut v_inertial: Vec<Vec3> = spec.vec_refs.clone();
    let mut v_body: Vec<Vec3> = Vec::with_capacity(spec.vector_count());
    for (i, v_ref) in spec.vec_refs.iter().enumerate() {
        let noise = SensorRng::normal3(&mut rng.vectors[i]);
        v_body.push(rt * *v_ref + spec.vec_biases[i] + spec.vec_noise_stds[i] * noise);
    }
    if spec.derive_third_by_cross {
        v_inertial.push(v_inertial[0].cross(&v_inertial[1]));
        v_body.push(v_body[0].cross(&v_body[1]));
    }

    let normalize = |vs: &[Vec3]| -> Result<Vec<Vec3>, SimError> {
        vs.iter()
            .enumerate()
            .map(|(index, v)| {
                let norm = v.norm();
                if norm < DEGENERATE_NORM {
                    Err(SimError::DegenerateFrame { t: truth.t, index, norm })
                } else {
                    Ok(v / norm)
                }
            })
            .collect()
    };
    let upsilon_body = normalize(&v_body)?;
    let upsilon_inertial = normalize(&v_inertial)?;

    Ok(MeasurementFrame {
        t: truth.t,
        omega_m,
        v_body,
        v_inertial,
        upsilon_body,
        upsilon_inertial,
        weights: spec.weights.clone(),
    })
}

/// Runs the full trajectory and sensor synthesis for one seed.
///
/// The truth series depends only on the trajectory configuration; the
/// measurement series shares that truth and varies with `seed`.
pub fn run_truth_and_measurements(
    cfg: &TrajectoryConfig,
    spec: &SensorSpec,
    seed: u64,
) -> Result<(Vec<TruthSample>, Vec<MeasurementFrame>), SimError> {
    cfg.validate()?;
    spec.validate()?;
    let n = cfg.sample_count();
    let mut truth = Vec::with_capacity(n);
    let mut r = cfg.r0;
    for k in 0..n {
        let t = k as f64 * cfg.dt_s;
        let omega = omega_true(t, cfg);
        truth.push(TruthSample { t, r, omega });
        r = propagate_truth(&r, omega, cfg.dt_s);
    }
    let mut rng = SensorRng::new(seed, spec);
    let frames = truth
        .iter()
        .map(|sample| synthesize_frame(sample, spec, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((truth, frames))
}

/// Optional frame dump: one row per frame with the measured rate and the
/// raw body/inertial components of every observation.
pub fn write_frames_csv<W: std::io::Write>(
    frames: &[MeasurementFrame],
    out: W,
) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    let n = frames.first().map_or(0, |f| f.v_body.len());
    let mut header = vec!["t".to_string(), "omega_m_x".into(), "omega_m_y".into(), "omega_m_z".into()];
    for i in 0..n {
        for axis in ["x", "y", "z"] {
            header.push(format!("v{}_body_{axis}", i + 1));
        }
        for axis in ["x", "y", "z"] {
            header.push(format!("v{}_inertial_{axis}", i + 1));
        }
    }
    w.write_record(&header)?;
    for f in frames {
        let mut row = vec![
            f.t.to_string(),
            f.omega_m.x.to_string(),
            f.omega_m.y.to_string(),
            f.omega_m.z.to_string(),
        ];
        for i in 0..n {
            for v in [&f.v_body[i], &f.v_inertial[i]] {
                row.push(v.x.to_string());
                row.push(v.y.to_string());
                row.push(v.z.to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
