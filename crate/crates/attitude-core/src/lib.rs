//! Attitude determination and estimation on SO(3).
//!
//! The crate is organized in layers, lowest first:
//!
//! * [`so3`] — rotation-group primitives: skew/vex, projections, the
//!   exponential map, quaternion and angle-axis conversions, and the
//!   normalized Euclidean distance used as the error metric everywhere.
//! * [`sim`] — ground-truth trajectory generation and seed-deterministic
//!   synthetic sensors (gyro + vector observations with bias and noise).
//! * [`determination`] — algebraic single-frame solvers for Wahba's
//!   problem: TRIAD, QUEST, and the SVD solution.
//! * [`gaussian`] — discrete-time Gaussian estimators: a quaternion
//!   Kalman filter, its bias-compensating variant, the multiplicative
//!   EKF, and the geometric approximate minimum-energy filter.
//! * [`nonlinear`] — nine nonlinear SO(3) observers: constant-gain,
//!   adaptive-gain, and prescribed-performance families, in deterministic
//!   and stochastic variants, driven either by a reconstructed attitude
//!   (semi-direct) or directly by vector measurements.
//! * [`harness`] — the Monte-Carlo benchmark: experiment configuration,
//!   seeded runs, windowed statistics, and CSV emission.

pub mod determination;
pub mod gaussian;
pub mod harness;
pub mod nonlinear;
pub mod sim;
pub mod so3;

pub use determination::{
    quest, svd_wahba, triad, wahba_cost, DeterminationError, DeterminationResult, WahbaWeights,
};
pub use gaussian::{
    gamef_step, kf_bias_step, kf_step, mekf_step, GamefState, GaussianError, GaussianNoiseConfig,
    KfBiasState, KfState, MekfState,
};
pub use harness::{
    emit_plot_data, emit_table, ensemble_summary, euler_extract, initial_attitude, run_experiment,
    summarize, AlgorithmSpec, ExperimentConfig, HarnessError, OutputConfig, Reconstruction,
    RunResult, RunSample, StatsSummary, Verdict, ALGORITHM_IDS, OUT_DIR_ENV, UNSTABLE_MEAN_DIST,
};
pub use nonlinear::{
    ag_ndaf_step, cg_ndaf_step, gp_ndaf_step, gp_nsaf_step, nsaf_step, ppf_envelope,
    ppf_transform, vm_auxiliaries, FilterEvents, Mode, NdafGains, NdafState, NonlinearError,
    NsafGains, NsafState, NsafVariant, PpfParams, PpfVariant, VmAuxiliaries,
};
pub use sim::{
    omega_true, propagate_truth, run_truth_and_measurements, synthesize_frame, MeasurementFrame,
    OmegaProfile, SensorSpec, SimError, TrajectoryConfig, TruthSample,
};
pub use so3::{
    angle_axis_to_rot, dist_identity, exp_so3, gamma_exp, gamma_matrix, in_unstable_set,
    orthonormalize, proj_antisym, proj_sym, quat_conj, quat_mul, quat_to_rot, rodrigues_to_rot,
    rot_to_angle_error, rot_to_quat, skew, vex, xi_matrix, AngleAxis, Mat3, Mat4, Mat4x3,
    RodriguesVector, RotationMatrix, So3Error, UnitQuaternion, Vec3, Vec4,
};
