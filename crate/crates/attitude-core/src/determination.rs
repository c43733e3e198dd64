//! Algebraic single-frame attitude reconstruction: TRIAD, QUEST, and the
//! SVD solution of Wahba's problem.
//!
//! All three return a consistent (rotation, quaternion) pair driving
//! `υᴮ ≈ R_yᵀ υᴵ`. TRIAD consumes exactly the first two observation
//! pairs; QUEST and SVD use all of them with normalized confidence
//! weights.

use crate::sim::MeasurementFrame;
use crate::so3::{
    quat_to_rot, rot_to_quat, Mat3, Mat4, RotationMatrix, UnitQuaternion, Vec3, Vec4,
};
use thiserror::Error;

/// Observation directions whose cross product is below this are treated
/// as collinear (≈ sin of the separation angle).
pub const COLLINEAR_TOL: f64 = 1e-6;
/// Below this squared norm the Rodrigues-gain construction of QUEST is
/// singular (180° rotation) and the eigenvector fallback is used.
const DEGENERATE_GAIN_TOL: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeterminationError {
    #[error("observations are collinear (cross-product norm {0:.3e})")]
    CollinearObservations(f64),
    #[error("invalid weights: {0}")]
    BadWeights(String),
    #[error("frame has {got} observation pairs, need at least {need}")]
    NotEnoughPairs { got: usize, need: usize },
}

/// Reconstructed attitude with its quaternion counterpart.
#[derive(Debug, Clone, Copy)]
pub struct DeterminationResult {
    pub r_y: RotationMatrix,
    pub q_y: UnitQuaternion,
}

/// Confidence weights `s_i > 0` and their normalization `w_i = s_i / Σs_j`.
#[derive(Debug, Clone)]
pub struct WahbaWeights {
    pub s: Vec<f64>,
    pub w: Vec<f64>,
}

impl WahbaWeights {
    pub fn new(s: Vec<f64>) -> Result<Self, DeterminationError> {
        if s.is_empty() {
            return Err(DeterminationError::BadWeights("empty weight list".into()));
        }
        if s.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(DeterminationError::BadWeights(format!(
                "weights must be finite and > 0, got {s:?}"
            )));
        }
        let total: f64 = s.iter().sum();
        let w = s.iter().map(|x| x / total).collect();
        Ok(Self { s, w })
    }

    pub fn from_frame(frame: &MeasurementFrame) -> Result<Self, DeterminationError> {
        Self::new(frame.weights.clone())
    }
}

/// TRIAD: builds orthogonal triads from the first two pairs, anchored on
/// the first (pass observations highest-confidence first).
pub fn triad(frame: &MeasurementFrame) -> Result<DeterminationResult, DeterminationError> {
    if frame.upsilon_body.len() < 2 {
        return Err(DeterminationError::NotEnoughPairs {
            got: frame.upsilon_body.len(),
            need: 2,
        });
    }
    let triad_of = |u1: Vec3, u2: Vec3| -> Result<Mat3, DeterminationError> {
        let b1 = u1;
        let b2 = b1.cross(&u2);
        let cross_norm = b2.norm();
        if cross_norm <= COLLINEAR_TOL {
            return Err(DeterminationError::CollinearObservations(cross_norm));
        }
        let b2 = b2 / cross_norm;
        // Unit by construction for unit inputs; normalized defensively.
        let b3 = b1.cross(&b2);
        let b3 = b3 / b3.norm();
        Ok(Mat3::from_columns(&[b1, b2, b3]))
    };
    let t_inertial = triad_of(frame.upsilon_inertial[0], frame.upsilon_inertial[1])?;
    let t_body = triad_of(frame.upsilon_body[0], frame.upsilon_body[1])?;
    // The body triad is orthonormal, so the inverse form and this
    // transpose form coincide.
    let r_y = RotationMatrix::orthonormalize(t_inertial * t_body.transpose());
    Ok(DeterminationResult {
        r_y,
        q_y: rot_to_quat(&r_y),
    })
}

/// QUEST: Davenport matrix assembly, iterative symmetric eigen-solve for
/// `λ_max`, and the Rodrigues-gain quaternion with an eigenvector
/// fallback at the 180° singularity.
pub fn quest(
    frame: &MeasurementFrame,
    weights: &WahbaWeights,
) -> Result<DeterminationResult, DeterminationError> {
    check_pairs(frame, weights)?;
    let b = attitude_profile(frame, weights);
    let tr_b = b.trace();
    let s = b + b.transpose();
    let z = Vec3::new(
        b[(1, 2)] - b[(2, 1)],
        b[(2, 0)] - b[(0, 2)],
        b[(0, 1)] - b[(1, 0)],
    );
    let mut m = Mat4::zeros();
    m[(0, 0)] = tr_b;
    for i in 0..3 {
        m[(0, 1 + i)] = z[i];
        m[(1 + i, 0)] = z[i];
        for j in 0..3 {
            m[(1 + i, 1 + j)] = s[(i, j)];
        }
        m[(1 + i, 1 + i)] -= tr_b;
    }
    let (eigvals, eigvecs) = jacobi_eigen_sym4(&m);
    let (max_idx, lambda_max) = eigvals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, l)| {
            if *l > acc.1 {
                (i, *l)
            } else {
                acc
            }
        });

    let beta1 = lambda_max * lambda_max - tr_b * tr_b + adjugate(&s).trace();
    let beta2 = lambda_max - tr_b;
    let x0 = ((lambda_max + tr_b) * Mat3::identity() - s).determinant();
    let x = (beta1 * Mat3::identity() + beta2 * s + s * s) * z;

    let gain = x0 * x0 + x.norm_squared();
    let q = if gain < DEGENERATE_GAIN_TOL {
        // 180° singularity of the Rodrigues gain: the defining relation
        // M·Q = λ_max·Q is still well-posed, so take the eigenvector.
        eigvecs.column(max_idx).into_owned()
    } else {
        Vec4::new(x0, x.x, x.y, x.z) / gain.sqrt()
    };
    let q = if q[0] < 0.0 { -q } else { q };
    let q_y = UnitQuaternion::renormalize(q);
    Ok(DeterminationResult {
        r_y: quat_to_rot(&q_y),
        q_y,
    })
}

/// SVD solution: `B = USVᵀ`, `R_y = V₊U₊ᵀ` with the determinant
/// correction attached to the smallest singular direction.
pub fn svd_wahba(
    frame: &MeasurementFrame,
    weights: &WahbaWeights,
) -> Result<DeterminationResult, DeterminationError> {
    check_pairs(frame, weights)?;
    let b = attitude_profile(frame, weights);
    // Singular values arrive sorted descending, so diag(1, 1, det)
    // attaches to the smallest.
    let svd = b.svd(true, true);
    let u = svd.u.expect("3x3 SVD with vectors requested");
    let v = svd.v_t.expect("3x3 SVD with vectors requested").transpose();
    let u_plus = u * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, u.determinant()));
    let v_plus = v * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, v.determinant()));
    let r_y = RotationMatrix::orthonormalize(v_plus * u_plus.transpose());
    Ok(DeterminationResult {
        r_y,
        q_y: rot_to_quat(&r_y),
    })
}

/// Wahba cost `(1/2)·Σ s_i‖υ_iᴮ − Rᵀυ_iᴵ‖²` over the normalized pairs.
pub fn wahba_cost(r: &RotationMatrix, frame: &MeasurementFrame, weights: &WahbaWeights) -> f64 {
    let rt = r.transpose();
    frame
        .upsilon_body
        .iter()
        .zip(&frame.upsilon_inertial)
        .zip(&weights.s)
        .map(|((ub, ui), s)| s * (ub - rt * *ui).norm_squared())
        .sum::<f64>()
        / 2.0
}

/// Weighted attitude profile `B = Σ w_i υ_iᴮ (υ_iᴵ)ᵀ`.
fn attitude_profile(frame: &MeasurementFrame, weights: &WahbaWeights) -> Mat3 {
    let mut b = Mat3::zeros();
    for ((ub, ui), w) in frame
        .upsilon_body
        .iter()
        .zip(&frame.upsilon_inertial)
        .zip(&weights.w)
    {
        b += *w * ub * ui.transpose();
    }
    b
}

fn check_pairs(
    frame: &MeasurementFrame,
    weights: &WahbaWeights,
) -> Result<(), DeterminationError> {
    let n = frame.upsilon_body.len();
    if n < 2 {
        return Err(DeterminationError::NotEnoughPairs { got: n, need: 2 });
    }
    if weights.w.len() != n {
        return Err(DeterminationError::BadWeights(format!(
            "{} weights for {} observation pairs",
            weights.w.len(),
            n
        )));
    }
    // Remark-1 rank condition: some pair of references must span a plane.
    let best = frame
        .upsilon_inertial
        .iter()
        .enumerate()
        .flat_map(|(i, a)| {
            frame.upsilon_inertial[i + 1..]
                .iter()
                .map(move |b| a.cross(b).norm())
        })
        .fold(0.0f64, f64::max);
    if best <= COLLINEAR_TOL {
        return Err(DeterminationError::CollinearObservations(best));
    }
    Ok(())
}

/// Adjugate (transpose cofactor matrix) of a 3×3, closed form.
fn adjugate(m: &Mat3) -> Mat3 {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| {
        m[(r0, c0)] * m[(r1, c1)] - m[(r0, c1)] * m[(r1, c0)]
    };
    // adj[j][i] = (-1)^{i+j} * minor(i, j)
    Mat3::new(
        c(1, 2, 1, 2),
        -c(0, 2, 1, 2),
        c(0, 1, 1, 2),
        -c(1, 2, 0, 2),
        c(0, 2, 0, 2),
        -c(0, 1, 0, 2),
        c(1, 2, 0, 1),
        -c(0, 2, 0, 1),
        c(0, 1, 0, 1),
    )
}

/// Cyclic Jacobi sweeps for a symmetric 4×4: returns (eigenvalues,
/// eigenvectors as columns). Converges quadratically; 50 sweeps is far
/// beyond what 4×4 needs.
fn jacobi_eigen_sym4(m: &Mat4) -> (Vec4, Mat4) {
    let mut a = *m;
    let mut v = Mat4::identity();
    for _ in 0..50 {
        let off: f64 = (0..4)
            .flat_map(|p| ((p + 1)..4).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)] * a[(p, q)])
            .sum();
        if off < 1e-28 {
            break;
        }
        for p in 0..4 {
            for q in (p + 1)..4 {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let mut g = Mat4::identity();
                g[(p, p)] = c;
                g[(q, q)] = c;
                g[(p, q)] = s;
                g[(q, p)] = -s;
                a = g.transpose() * a * g;
                v *= g;
            }
        }
    }
    (Vec4::new(a[(0, 0)], a[(1, 1)], a[(2, 2)], a[(3, 3)]), v)
}
