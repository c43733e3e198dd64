//! Shared fixtures for the criterion benches: one deterministic
//! mid-trajectory measurement frame and matching filter states.

use attitude_core::{
    initial_attitude, rot_to_quat, run_truth_and_measurements, ExperimentConfig, GamefState,
    KfState, MeasurementFrame, MekfState, NdafState, NsafState, RotationMatrix,
};

/// Frame index used by all fixtures; far enough in for the trajectory
/// to be away from the identity.
pub const FRAME_INDEX: usize = 1000;

pub struct Fixture {
    pub frame: MeasurementFrame,
    pub truth: RotationMatrix,
    pub dt: f64,
    pub t: f64,
}

/// One benchmark-scenario frame, seeded, deterministic.
pub fn fixture() -> Fixture {
    let cfg = ExperimentConfig::benchmark_preset();
    let (truth, frames) = run_truth_and_measurements(&cfg.trajectory, &cfg.sensors, 1)
        .expect("benchmark preset is valid");
    Fixture {
        frame: frames[FRAME_INDEX].clone(),
        truth: truth[FRAME_INDEX].r,
        dt: cfg.trajectory.dt_s,
        t: truth[FRAME_INDEX].t,
    }
}

pub fn kf_state() -> KfState {
    KfState::with_quaternion(rot_to_quat(&initial_attitude()))
}

pub fn mekf_state() -> MekfState {
    MekfState::with_quaternion(rot_to_quat(&initial_attitude()))
}

pub fn gamef_state() -> GamefState {
    GamefState::with_quaternion(rot_to_quat(&initial_attitude()))
}

pub fn ndaf_state() -> NdafState {
    NdafState::new(initial_attitude())
}

pub fn nsaf_state() -> NsafState {
    NsafState::new(initial_attitude())
}
