//! Temporary probe: zero-rate, zero-noise bias-recovery scenario with
//! an aligned initial estimate (bias-only transient).

use attitude_core::determination::{svd_wahba, WahbaWeights};
use attitude_core::nonlinear::{cg_ndaf_step, Mode, NdafGains, NdafState};
use attitude_core::sim::{run_truth_and_measurements, OmegaProfile, SensorSpec, TrajectoryConfig};
use attitude_core::so3::{dist_identity, RotationMatrix, Vec3};

fn main() {
    let trajectory = TrajectoryConfig {
        duration_s: 30.0,
        dt_s: 0.01,
        r0: RotationMatrix::identity(),
        profile: OmegaProfile::zero(),
    };
    let sensors = SensorSpec {
        gyro_bias: Vec3::new(-0.1, 0.1, 0.05),
        gyro_noise_std: 0.0,
        vec_refs: vec![Vec3::new(1.0, -1.0, 1.0), Vec3::new(0.0, 0.0, 1.0)],
        vec_biases: vec![Vec3::zeros(), Vec3::zeros()],
        vec_noise_stds: vec![0.0, 0.0],
        weights: vec![1.0, 1.0, 1.0],
        derive_third_by_cross: true,
    };
    let (truth, frames) = run_truth_and_measurements(&trajectory, &sensors, 1).unwrap();
    let gains = NdafGains { kw: 10.0, gamma: 1.0 };
    let weights = WahbaWeights::new(vec![1.0, 1.0, 1.0]).unwrap();
    let substeps = 10;
    let dt_sub = trajectory.dt_s / substeps as f64;

    let mut state = NdafState::new(RotationMatrix::identity());
    for (k, frame) in frames.iter().enumerate() {
        if k > 0 {
            let r_y = svd_wahba(frame, &weights).unwrap().r_y;
            for _ in 0..substeps {
                state = cg_ndaf_step(&state, frame, Some(&r_y), dt_sub, Mode::SemiDirect, &gains)
                    .unwrap();
            }
        }
        if k % 300 == 0 || k == frames.len() - 1 {
            let dist = dist_identity(&(truth[k].r.transpose() * state.r_hat));
            let b_tilde = (sensors.gyro_bias - state.b_hat).norm();
            println!("t={:5.2}  dist={:9.3e}  |b~|={:9.3e}", frame.t, dist, b_tilde);
        }
    }
}
