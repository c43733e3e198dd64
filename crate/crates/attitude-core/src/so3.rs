//! Rotation-group primitives shared by every other module.
//!
//! Conventions, fixed once and used everywhere:
//!
//! * Rotation matrices are attitude matrices `R` with `v_body = Rᵀ v_inertial`.
//! * `exp_so3(v)` evaluates `I + sin‖v‖ [u]× + (1 − cos‖v‖)[u]×²` with
//!   `u = v/‖v‖`, and `angle_axis_to_rot(α, u) == exp_so3(α·u)`.
//! * Quaternions are scalar-first `[q0, q1, q2, q3]` and `quat_to_rot`
//!   evaluates `I + 2·q0·[q]× + 2·[q]×²`, so `quat_to_rot` of the
//!   half-angle quaternion matches `exp_so3` of the full rotation vector.

use nalgebra as na;
use thiserror::Error;

pub type Vec3 = na::Vector3<f64>;
pub type Vec4 = na::Vector4<f64>;
pub type Mat3 = na::Matrix3<f64>;
pub type Mat4 = na::Matrix4<f64>;
pub type Mat4x3 = na::Matrix4x3<f64>;

/// Max deviation of `RᵀR` from identity (and of `det R` from one) accepted
/// by the checked [`RotationMatrix`] constructor.
pub const ROTATION_TOL: f64 = 1e-9;
/// Max deviation of a quaternion or axis norm from one accepted by checked
/// constructors.
pub const UNIT_NORM_TOL: f64 = 1e-9;
/// Max `‖m + mᵀ‖_∞` accepted by [`vex`] before the input is rejected as not
/// skew-symmetric.
pub const SKEW_TOL: f64 = 1e-6;
/// Below this rotation-vector norm the exponential map switches to its
/// second-order series to avoid the `sin θ / θ` indeterminacy.
const SMALL_ANGLE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum So3Error {
    #[error("matrix is not skew-symmetric: ‖m + mᵀ‖_∞ = {0:.3e}")]
    NotSkewSymmetric(f64),
    #[error("axis is not unit length: ‖u‖ = {0:.17}")]
    AxisNotUnit(f64),
    #[error("matrix is not a rotation: ‖RᵀR − I‖_∞ = {ortho:.3e}, det = {det:.17}")]
    NotRotation { ortho: f64, det: f64 },
    #[error("quaternion is not unit length: ‖q‖ = {0:.17}")]
    QuatNotUnit(f64),
}

/// A member of SO(3), validated on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    /// Accepts `m` iff `‖mᵀm − I‖_∞ ≤ 1e-9` and `|det m − 1| ≤ 1e-9`.
    pub fn new(m: Mat3) -> Result<Self, So3Error> {
        let ortho = max_abs(&(m.transpose() * m - Mat3::identity()));
        let det = m.determinant();
        if ortho > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(So3Error::NotRotation { ortho, det });
        }
        Ok(Self(m))
    }

    /// Projects `m` onto SO(3) by Gram-Schmidt on its rows. Intended for
    /// drift control after discrete propagation, not for repairing
    /// arbitrary matrices; rows must be linearly independent.
    pub fn orthonormalize(m: Mat3) -> Self {
        let r0: Vec3 = m.row(0).transpose();
        let r0 = r0 / r0.norm();
        let r1: Vec3 = m.row(1).transpose();
        let r1 = r1 - r0 * r0.dot(&r1);
        let r1 = r1 / r1.norm();
        let r2: Vec3 = m.row(2).transpose();
        let r2 = r2 - r0 * r0.dot(&r2) - r1 * r1.dot(&r2);
        let r2 = r2 / r2.norm();
        Self(Mat3::from_rows(&[
            r0.transpose(),
            r1.transpose(),
            r2.transpose(),
        ]))
    }

    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vec3> for RotationMatrix {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl AsRef<Mat3> for RotationMatrix {
    fn as_ref(&self) -> &Mat3 {
        &self.0
    }
}

// Config-file representation: row-major nested arrays, validated on load.
impl serde::Serialize for RotationMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: [[f64; 3]; 3] = [
            [self.0[(0, 0)], self.0[(0, 1)], self.0[(0, 2)]],
            [self.0[(1, 0)], self.0[(1, 1)], self.0[(1, 2)]],
            [self.0[(2, 0)], self.0[(2, 1)], self.0[(2, 2)]],
        ];
        rows.serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for RotationMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        let m = Mat3::new(
            rows[0][0], rows[0][1], rows[0][2], //
            rows[1][0], rows[1][1], rows[1][2], //
            rows[2][0], rows[2][1], rows[2][2],
        );
        RotationMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// Unit quaternion, scalar first: `[q0, q1, q2, q3]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion(Vec4);

impl UnitQuaternion {
    pub fn new(q: Vec4) -> Result<Self, So3Error> {
        let n = q.norm();
        if (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(So3Error::QuatNotUnit(n));
        }
        Ok(Self(q))
    }

    /// Rescales `q` to unit norm. `q` must be nonzero.
    pub fn renormalize(q: Vec4) -> Self {
        Self(q / q.norm())
    }

    pub fn identity() -> Self {
        Self(Vec4::new(1.0, 0.0, 0.0, 0.0))
    }

    pub fn scalar(&self) -> f64 {
        self.0[0]
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(self.0[1], self.0[2], self.0[3])
    }

    pub fn as_vec4(&self) -> &Vec4 {
        &self.0
    }
}

/// Angle-axis pair with a validated unit axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleAxis {
    pub angle: f64,
    pub axis: Vec3,
}

impl AngleAxis {
    pub fn new(angle: f64, axis: Vec3) -> Result<Self, So3Error> {
        let n = axis.norm();
        if (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(So3Error::AxisNotUnit(n));
        }
        Ok(Self { angle, axis })
    }
}

/// Rodrigues parameter vector `ρ = q/q0`; unconstrained, singular at 180°.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RodriguesVector(pub Vec3);

/// `[v]×`, the skew-symmetric matrix with `[v]× w = v × w`.
pub fn skew(v: Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`]. Rejects inputs whose symmetric part exceeds
/// [`SKEW_TOL`] instead of silently projecting them.
pub fn vex(m: &Mat3) -> Result<Vec3, So3Error> {
    let sym = max_abs(&(m + m.transpose()));
    if sym > SKEW_TOL {
        return Err(So3Error::NotSkewSymmetric(sym));
    }
    Ok(Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]))
}

/// Anti-symmetric projection `(m − mᵀ)/2`.
pub fn proj_antisym(m: &Mat3) -> Mat3 {
    (m - m.transpose()) / 2.0
}

/// Symmetric projection `(m + mᵀ)/2`.
pub fn proj_sym(m: &Mat3) -> Mat3 {
    (m + m.transpose()) / 2.0
}

/// `vex` of the anti-symmetric part, total function on any 3×3 input.
pub fn vex_antisym(m: &Mat3) -> Vec3 {
    let a = proj_antisym(m);
    Vec3::new(a[(2, 1)], a[(0, 2)], a[(1, 0)])
}

/// Normalized Euclidean distance from the identity,
/// `‖R‖_I = (1/4)·Tr{I − R} ∈ [0, 1]`.
pub fn dist_identity(r: &RotationMatrix) -> f64 {
    ((3.0 - r.trace()) / 4.0).clamp(0.0, 1.0)
}

/// Exponential map `so(3) → SO(3)` in Rodrigues form; second-order series
/// below [`SMALL_ANGLE`]. Exact for rotation vectors of any magnitude.
pub fn exp_so3(v: Vec3) -> RotationMatrix {
    let angle = v.norm();
    let vx = skew(v);
    let m = if angle < SMALL_ANGLE {
        Mat3::identity() + vx + vx * vx / 2.0
    } else {
        let u = skew(v / angle);
        Mat3::identity() + u * angle.sin() + u * u * (1.0 - angle.cos())
    };
    // Analytically in SO(3); construct directly to avoid rejecting 1-ulp drift.
    RotationMatrix(m)
}

/// Quaternion product `q1 ⊙ q2`, renormalized.
pub fn quat_mul(q1: &UnitQuaternion, q2: &UnitQuaternion) -> UnitQuaternion {
    let (s1, v1) = (q1.scalar(), q1.vector());
    let (s2, v2) = (q2.scalar(), q2.vector());
    let s = s1 * s2 - v1.dot(&v2);
    let v = s2 * v1 + s1 * v2 + v1.cross(&v2);
    UnitQuaternion::renormalize(Vec4::new(s, v.x, v.y, v.z))
}

/// Conjugate (= inverse for unit norm): scalar kept, vector negated.
pub fn quat_conj(q: &UnitQuaternion) -> UnitQuaternion {
    UnitQuaternion(Vec4::new(
        q.scalar(),
        -q.0[1],
        -q.0[2],
        -q.0[3],
    ))
}

/// `R(Q) = I + 2·q0·[q]× + 2·[q]×²`.
pub fn quat_to_rot(q: &UnitQuaternion) -> RotationMatrix {
    let qx = skew(q.vector());
    RotationMatrix(Mat3::identity() + qx * (2.0 * q.scalar()) + qx * qx * 2.0)
}

/// Inverse of [`quat_to_rot`] with the `q0 ≥ 0` sign convention, using the
/// max-of-four-diagonal-candidates branch for stability near `Tr ≈ −1`.
pub fn rot_to_quat(r: &RotationMatrix) -> UnitQuaternion {
    let m = r.matrix();
    let tr = m.trace();
    let (m00, m11, m22) = (m[(0, 0)], m[(1, 1)], m[(2, 2)]);

    let q = if tr >= m00.max(m11).max(m22) {
        let s = (1.0 + tr).sqrt() * 2.0; // 4·q0
        Vec4::new(
            0.25 * s,
            (m[(2, 1)] - m[(1, 2)]) / s,
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(1, 0)] - m[(0, 1)]) / s,
        )
    } else if m00 >= m11 && m00 >= m22 {
        let s = (1.0 + 2.0 * m00 - tr).sqrt() * 2.0; // 4·q1
        Vec4::new(
            (m[(2, 1)] - m[(1, 2)]) / s,
            0.25 * s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
        )
    } else if m11 >= m22 {
        let s = (1.0 + 2.0 * m11 - tr).sqrt() * 2.0; // 4·q2
        Vec4::new(
            (m[(0, 2)] - m[(2, 0)]) / s,
            (m[(0, 1)] + m[(1, 0)]) / s,
            0.25 * s,
            (m[(1, 2)] + m[(2, 1)]) / s,
        )
    } else {
        let s = (1.0 + 2.0 * m22 - tr).sqrt() * 2.0; // 4·q3
        Vec4::new(
            (m[(1, 0)] - m[(0, 1)]) / s,
            (m[(0, 2)] + m[(2, 0)]) / s,
            (m[(1, 2)] + m[(2, 1)]) / s,
            0.25 * s,
        )
    };
    let q = if q[0] < 0.0 { -q } else { q };
    UnitQuaternion::renormalize(q)
}

/// `I + sin(α)[u]× + (1 − cos α)[u]×²`; equals `exp_so3(α·u)`.
pub fn angle_axis_to_rot(a: &AngleAxis) -> RotationMatrix {
    exp_so3(a.axis * a.angle)
}

/// Rodrigues-parameter map
/// `R(ρ) = ((1 − ‖ρ‖²)I + 2ρρᵀ + 2[ρ]×) / (1 + ‖ρ‖²)`.
pub fn rodrigues_to_rot(p: &RodriguesVector) -> RotationMatrix {
    let rho = p.0;
    let n2 = rho.norm_squared();
    let m = (Mat3::identity() * (1.0 - n2) + rho * rho.transpose() * 2.0 + skew(rho) * 2.0)
        / (1.0 + n2);
    RotationMatrix(m)
}

/// Rotation angle `α = arccos((Tr{R} − 1)/2) ∈ [0, π]`, argument clamped
/// against floating-point drift past ±1.
pub fn rot_to_angle_error(r: &RotationMatrix) -> f64 {
    (((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0)).acos()
}

/// The 4×4 matrix `Γ(Ω) = [[0, −Ωᵀ], [Ω, −[Ω]×]]` driving the quaternion
/// kinematics `Q̇ = (1/2)Γ(Ω)Q`.
pub fn gamma_matrix(omega: Vec3) -> Mat4 {
    let (x, y, z) = (omega.x, omega.y, omega.z);
    Mat4::new(
        0.0, -x, -y, -z, //
        x, 0.0, z, -y, //
        y, -z, 0.0, x, //
        z, y, -x, 0.0,
    )
}

/// The 4×3 matrix `Ξ(Q) = [−qᵀ; q0·I + [q]×]`; its columns are orthogonal
/// to `Q`.
pub fn xi_matrix(q: &UnitQuaternion) -> Mat4x3 {
    let s = q.scalar();
    let v = q.vector();
    let b = Mat3::identity() * s + skew(v);
    Mat4x3::new(
        -v.x,
        -v.y,
        -v.z,
        b[(0, 0)],
        b[(0, 1)],
        b[(0, 2)],
        b[(1, 0)],
        b[(1, 1)],
        b[(1, 2)],
        b[(2, 0)],
        b[(2, 1)],
        b[(2, 2)],
    )
}

/// Closed-form `exp((Δt/2)·Γ(Ω))`. Since `Γ(Ω)² = −‖Ω‖²·I`, the series
/// collapses to `cos(θ)·I + sin(θ)/‖Ω‖·Γ(Ω)` with `θ = ‖Ω‖Δt/2`; a
/// second-order sinc series takes over near `‖Ω‖ = 0`.
pub fn gamma_exp(omega: Vec3, dt: f64) -> Mat4 {
    let n = omega.norm();
    let theta = n * dt / 2.0;
    let sin_over_n = if theta.abs() < SMALL_ANGLE {
        (dt / 2.0) * (1.0 - theta * theta / 6.0)
    } else {
        theta.sin() / n
    };
    Mat4::identity() * theta.cos() + gamma_matrix(omega) * sin_over_n
}

/// True iff `|Tr{r} + 1| ≤ tol`: the forward-invariant set of 180°
/// rotations where `‖R‖_I = 1`.
pub fn in_unstable_set(r: &RotationMatrix, tol: f64) -> bool {
    (r.trace() + 1.0).abs() <= tol
}

/// Gram-Schmidt row orthonormalization; see
/// [`RotationMatrix::orthonormalize`].
pub fn orthonormalize(m: Mat3) -> RotationMatrix {
    RotationMatrix::orthonormalize(m)
}

fn max_abs(m: &Mat3) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}
