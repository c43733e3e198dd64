// Single-step equivalence checks: every filter step function is
// compared against an independent arithmetic reimplementation of its
// printed recursion, built here from scratch (scalar formulas, own
// skew/exponential/inverse helpers), at an absolute tolerance of 1e-12
// per state entry. Inputs are fixed, generic values: rotated attitude,
// nonzero bias, asymmetric covariance blocks, and a frame whose body
// vectors disagree with the references by a deliberate offset.
//
// Included via #[path] by the per-crate test targets, so everything
// callable from outside is a plain pub fn that panics on mismatch.

use attitude_core::gaussian::{
    gamef_step, kf_bias_step, kf_step, mekf_step, GamefState, GaussianNoiseConfig, KfBiasState,
    KfState, MekfState,
};
use attitude_core::nonlinear::{
    cg_ndaf_step, gp_ndaf_step, gp_nsaf_step, nsaf_step, Mode, NdafGains, NdafState, NsafGains,
    NsafState, NsafVariant, PpfParams,
};
use attitude_core::sim::MeasurementFrame;
use attitude_core::so3::{exp_so3, rot_to_quat, RotationMatrix, UnitQuaternion};
use nalgebra::{SMatrix, SVector};

type V3 = SVector<f64, 3>;
type V4 = SVector<f64, 4>;
type V7 = SVector<f64, 7>;
type M3 = SMatrix<f64, 3, 3>;
type M4 = SMatrix<f64, 4, 4>;
type M7 = SMatrix<f64, 7, 7>;
type M4x3 = SMatrix<f64, 4, 3>;
type M4x7 = SMatrix<f64, 4, 7>;

const TOL: f64 = 1e-12;
const DT: f64 = 0.01;

// ---------------------------------------------------------------------
// Independent arithmetic helpers (the oracle's own primitives).
// ---------------------------------------------------------------------

fn osk(v: V3) -> M3 {
    M3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
}

fn osym(m: M3) -> M3 {
    (m + m.transpose()) * 0.5
}

fn ovex_antisym(m: M3) -> V3 {
    let a = (m - m.transpose()) * 0.5;
    V3::new(a[(2, 1)], a[(0, 2)], a[(1, 0)])
}

/// Rodrigues formula; magnitudes in these tests are far from the
/// small-angle regime's switch point.
fn oexp3(v: V3) -> M3 {
    let angle = v.norm();
    if angle < 1e-8 {
        let vx = osk(v);
        return M3::identity() + vx + vx * vx * 0.5;
    }
    let u = osk(v / angle);
    M3::identity() + u * angle.sin() + u * u * (1.0 - angle.cos())
}

/// Gram-Schmidt on rows, mirroring the propagation drift control.
fn ogs_rows(m: M3) -> M3 {
    let r0: V3 = m.row(0).transpose();
    let r0 = r0 / r0.norm();
    let r1: V3 = m.row(1).transpose();
    let r1 = r1 - r0 * r0.dot(&r1);
    let r1 = r1 / r1.norm();
    let r2: V3 = m.row(2).transpose();
    let r2 = r2 - r0 * r0.dot(&r2) - r1 * r1.dot(&r2);
    let r2 = r2 / r2.norm();
    M3::from_rows(&[r0.transpose(), r1.transpose(), r2.transpose()])
}

fn opropagate(r: M3, rate: V3, dt: f64) -> M3 {
    ogs_rows(r * oexp3(rate * dt))
}

/// `Γ(Ω) = [[0, −Ωᵀ], [Ω, −[Ω]×]]`.
fn ogamma(w: V3) -> M4 {
    let mut g = M4::zeros();
    for i in 0..3 {
        g[(0, 1 + i)] = -w[i];
        g[(1 + i, 0)] = w[i];
    }
    let wx = osk(w);
    for i in 0..3 {
        for j in 0..3 {
            g[(1 + i, 1 + j)] = -wx[(i, j)];
        }
    }
    g
}

/// `exp((Δt/2)Γ(Ω)) = cos(θ)I + sin(θ)/‖Ω‖·Γ(Ω)`, θ = ‖Ω‖Δt/2.
fn ogexp(w: V3, dt: f64) -> M4 {
    let n = w.norm();
    let theta = n * dt / 2.0;
    assert!(theta >= 1e-8, "fixture must stay in the exact branch");
    M4::identity() * theta.cos() + ogamma(w) * (theta.sin() / n)
}

/// `Ξ(Q) = [−qᵀ; q0·I + [q]×]`, scalar-first.
fn oxi(q: V4) -> M4x3 {
    let v = V3::new(q[1], q[2], q[3]);
    let b = M3::identity() * q[0] + osk(v);
    let mut out = M4x3::zeros();
    for j in 0..3 {
        out[(0, j)] = -v[j];
        for i in 0..3 {
            out[(1 + i, j)] = b[(i, j)];
        }
    }
    out
}

/// `R(Q) = I + 2q0[q]× + 2[q]×²`.
fn oquat_rot(q: V4) -> M3 {
    let v = V3::new(q[1], q[2], q[3]);
    let vx = osk(v);
    M3::identity() + vx * (2.0 * q[0]) + vx * vx * 2.0
}

/// Measurement matrix `[[0, −(υᴮ−υᴵ)ᵀ], [υᴮ−υᴵ, −[υᴮ+υᴵ]×]]`.
fn oh(ub: V3, ui: V3) -> M4 {
    let d = ub - ui;
    let sx = osk(ub + ui);
    let mut h = M4::zeros();
    for i in 0..3 {
        h[(0, 1 + i)] = -d[i];
        h[(1 + i, 0)] = d[i];
        for j in 0..3 {
            h[(1 + i, 1 + j)] = -sx[(i, j)];
        }
    }
    h
}

/// Gauss-Jordan 4×4 inverse with partial pivoting.
fn oinv4(s: M4) -> M4 {
    let mut a = s;
    let mut inv = M4::identity();
    for col in 0..4 {
        let mut pivot = col;
        for r in col + 1..4 {
            if a[(r, col)].abs() > a[(pivot, col)].abs() {
                pivot = r;
            }
        }
        assert!(a[(pivot, col)].abs() > 1e-300, "singular oracle matrix");
        if pivot != col {
            a.swap_rows(pivot, col);
            inv.swap_rows(pivot, col);
        }
        let p = a[(col, col)];
        for j in 0..4 {
            a[(col, j)] /= p;
            inv[(col, j)] /= p;
        }
        for r in 0..4 {
            if r != col {
                let f = a[(r, col)];
                for j in 0..4 {
                    a[(r, j)] -= f * a[(col, j)];
                    inv[(r, j)] -= f * inv[(col, j)];
                }
            }
        }
    }
    inv
}

fn assert_close<const R: usize, const C: usize>(
    got: &SMatrix<f64, R, C>,
    want: &SMatrix<f64, R, C>,
    what: &str,
) {
    let gap = (got - want).iter().fold(0.0f64, |a, x| a.max(x.abs()));
    assert!(gap <= TOL, "{what}: max entry gap {gap:.3e}");
}

// ---------------------------------------------------------------------
// Fixtures.
// ---------------------------------------------------------------------

const OMEGA_M: [f64; 3] = [0.2, -0.1, 0.15];
const B_HAT: [f64; 3] = [0.02, -0.03, 0.01];
const SIGMA_HAT: [f64; 3] = [0.05, 0.02, 0.04];

fn v(a: [f64; 3]) -> V3 {
    V3::new(a[0], a[1], a[2])
}

fn r_hat() -> RotationMatrix {
    exp_so3(v([0.3, -0.5, 0.2]))
}

/// Reconstruction that disagrees with `r_hat` by a small rotation.
fn r_y() -> RotationMatrix {
    exp_so3(v([0.25, -0.45, 0.15]))
}

/// Frame whose body vectors come from a third attitude plus fixed
/// offsets: nonzero residuals against both `r_hat` and `r_y`.
fn generic_frame() -> MeasurementFrame {
    let truth = exp_so3(v([0.25, -0.45, 0.15]));
    let rt = truth.transpose();
    let refs = [v([1.0, -1.0, 1.0]), v([0.0, 0.0, 1.0])];
    let offsets = [v([0.03, -0.02, 0.01]), v([-0.01, 0.02, 0.015])];
    let mut ub: Vec<V3> = refs
        .iter()
        .zip(&offsets)
        .map(|(r, o)| rt * *r + *o)
        .collect();
    let mut ui: Vec<V3> = refs.to_vec();
    ub.push(ub[0].cross(&ub[1]));
    ui.push(ui[0].cross(&ui[1]));
    let ub: Vec<V3> = ub.iter().map(|x| x.normalize()).collect();
    let ui: Vec<V3> = ui.iter().map(|x| x.normalize()).collect();
    MeasurementFrame {
        t: 0.5,
        omega_m: v(OMEGA_M),
        v_body: ub.clone(),
        v_inertial: ui.clone(),
        upsilon_body: ub,
        upsilon_inertial: ui,
        weights: vec![1.0; 3],
    }
}

/// Frame whose body vectors are exactly the standard basis, making the
/// measurement Gram matrix diagonal so its spectrum is hand-computable.
fn basis_frame() -> MeasurementFrame {
    let ub = vec![v([1.0, 0.0, 0.0]), v([0.0, 1.0, 0.0]), v([0.0, 0.0, 1.0])];
    let tweak = oexp3(v([0.04, -0.03, 0.05]));
    let rh = *r_hat().matrix();
    let ui: Vec<V3> = ub.iter().map(|e| (rh * tweak * e).normalize()).collect();
    MeasurementFrame {
        t: 0.5,
        omega_m: v(OMEGA_M),
        v_body: ub.clone(),
        v_inertial: ui.clone(),
        upsilon_body: ub,
        upsilon_inertial: ui,
        weights: vec![1.0, 0.8, 0.6],
    }
}

fn q_hat() -> UnitQuaternion {
    rot_to_quat(&r_hat())
}

fn pa0() -> M3 {
    M3::new(0.9, 0.1, 0.0, 0.1, 0.8, 0.05, 0.0, 0.05, 1.1)
}

fn pb0() -> M3 {
    M3::new(1.2, -0.1, 0.0, -0.1, 0.9, 0.02, 0.0, 0.02, 1.0)
}

fn pc0() -> M3 {
    M3::new(0.1, 0.02, -0.01, 0.03, -0.05, 0.04, 0.0, 0.01, 0.06)
}

fn gauss_cfg() -> GaussianNoiseConfig {
    let mut cfg = GaussianNoiseConfig::isotropic(0.1, 1.0, 1.0, 3);
    cfg.kf_alpha = 1e-3;
    cfg.kf_eta = 0.01;
    cfg.kf_epsilon = 0.05;
    cfg.kf_rho = 1.0;
    cfg.kf_sigma123 = [0.1, 0.2, 0.3];
    cfg
}

/// Hand evaluation of the funnel quantities shared by the
/// guaranteed-performance oracles.
struct Funnel {
    xi: f64,
    xi_bar_d: f64,
    eps: f64,
    mu_det: f64,
    mu_sto: f64,
}

fn ofunnel(dist: f64, t: f64, p: &PpfParams) -> Funnel {
    let xi_at = |tt: f64| (p.xi0 - p.xi_inf) * (-p.ell * tt).exp() + p.xi_inf;
    let xi = xi_at(t);
    let xi_prev = xi_at((t - DT).max(0.0));
    let xi_bar_d = (xi - xi_prev) / DT;
    assert!(
        dist < 0.9 * p.delta_hi * xi,
        "fixture must stay clear of the transform's saturation region"
    );
    let eps = 0.5 * ((p.delta_lo + dist / xi) / (p.delta_hi - dist / xi)).ln();
    let mu_det = 0.5 / (p.delta_lo * xi + dist) + 0.5 / (p.delta_hi * xi - dist);
    let mu_sto = ((2.0 * eps).exp() + (-2.0 * eps).exp() + 2.0) / (8.0 * xi * p.delta_hi);
    Funnel {
        xi,
        xi_bar_d,
        eps,
        mu_det,
        mu_sto,
    }
}

/// `R̃ = R_yᵀ R̂` plus its scalar error and antisymmetric projection.
fn oerror(r_hat: M3, r_y: M3) -> (f64, V3) {
    let r_tilde = r_y.transpose() * r_hat;
    let dist = ((3.0 - r_tilde.trace()) / 4.0).clamp(0.0, 1.0);
    (dist, ovex_antisym(r_tilde))
}

/// Oracle for the direct-mode vector-measurement quantities on
/// `basis_frame`, whose Gram matrix is `diag(weights)` exactly.
struct DirectAux {
    vex_pa: V3,
    dist: f64,
    upsilon_big: f64,
    lambda_min: f64,
}

fn odirect_aux(frame: &MeasurementFrame, r_hat: M3) -> DirectAux {
    let rt = r_hat.transpose();
    let s = &frame.weights;
    let mut vex_pa = V3::zeros();
    let mut dist = 0.0;
    let mut m_cross = M3::zeros();
    for i in 0..3 {
        let ub = frame.upsilon_body[i];
        let ub_hat = rt * frame.upsilon_inertial[i];
        vex_pa += ub_hat.cross(&ub) * (s[i] / 2.0);
        dist += s[i] * (1.0 - ub_hat.dot(&ub)) / 4.0;
        m_cross += ub * ub_hat.transpose() * s[i];
    }
    let trace: f64 = s.iter().sum();
    let lambda_min = trace - s.iter().cloned().fold(f64::MIN, f64::max);
    let minv = M3::from_diagonal(&V3::new(1.0 / s[0], 1.0 / s[1], 1.0 / s[2]));
    DirectAux {
        vex_pa,
        dist: dist.max(0.0),
        upsilon_big: (minv * m_cross).trace(),
        lambda_min,
    }
}

// ---------------------------------------------------------------------
// Gaussian filters.
// ---------------------------------------------------------------------

pub fn check_kf_step() {
    let frame = generic_frame();
    let cfg = gauss_cfg();
    let state = KfState {
        q_hat: q_hat(),
        p: M4::identity() + M4::from_diagonal(&V4::new(0.1, 0.05, 0.2, 0.15)),
    };
    let got = kf_step(&state, &frame, &cfg, DT).unwrap();

    let psi = ogexp(v(OMEGA_M), DT);
    let xi = oxi(*state.q_hat.as_vec4());
    let qq = xi * (M3::identity() * cfg.kf_eta) * xi.transpose() * (DT / 2.0) * (DT / 2.0);
    let mut q: V4 = psi * state.q_hat.as_vec4();
    let mut p: M4 = psi * state.p * psi.transpose() + qq;
    for i in 0..3 {
        let h = oh(frame.upsilon_body[i], frame.upsilon_inertial[i]);
        let xi_pred = oxi(q / q.norm());
        let rq = xi_pred * (M3::identity() * cfg.kf_epsilon) * xi_pred.transpose() * 0.25
            + M4::identity() * cfg.kf_alpha;
        let s: M4 = h * p * h.transpose() + rq;
        let k: M4 = p * h.transpose() * oinv4(s);
        let ikh = M4::identity() - k * h;
        q = ikh * q;
        p = ikh * p * ikh.transpose() + k * rq * k.transpose();
        p = (p + p.transpose()) * 0.5;
    }
    let q = q / q.norm();

    assert_close(got.q_hat.as_vec4(), &q, "kf quaternion");
    assert_close(&got.p, &p, "kf covariance");
}

pub fn check_kf_bias_step() {
    let frame = generic_frame();
    let cfg = gauss_cfg();
    let state = KfBiasState {
        q_hat: q_hat(),
        b_hat: v(B_HAT),
        p: M7::identity() * 0.9
            + M7::from_fn(|i, j| if i == j { 0.0 } else { 0.01 * (i + j) as f64 }),
    };
    let got = kf_bias_step(&state, &frame, &cfg, DT).unwrap();

    let [s1, s2, s3] = cfg.kf_sigma123;
    let omega_hat = v(OMEGA_M) - state.b_hat;
    let psi = ogexp(omega_hat, DT);
    let q_prev = *state.q_hat.as_vec4();

    let mut phi = M7::identity();
    for i in 0..4 {
        for j in 0..4 {
            phi[(i, j)] = psi[(i, j)];
        }
    }
    let coupling = oxi(q_prev) * (-DT / 2.0);
    for i in 0..4 {
        for j in 0..3 {
            phi[(i, 4 + j)] = coupling[(i, j)];
        }
    }

    let p_q_prev: M4 = state.p.fixed_view::<4, 4>(0, 0).into_owned();
    let m_hat: M4 = q_prev * q_prev.transpose() + p_q_prev;
    let mut p_w = M7::zeros();
    let top = (M4::identity() * m_hat.trace() - m_hat) * (s1 * s1 + s2 * s2 * DT);
    for i in 0..4 {
        for j in 0..4 {
            p_w[(i, j)] = top[(i, j)];
        }
    }
    for i in 0..3 {
        p_w[(4 + i, 4 + i)] = s3 * s3 * DT;
    }

    let mut p: M7 = phi * state.p * phi.transpose() + p_w;
    let mut x = V7::zeros();
    let q_pred: V4 = psi * q_prev;
    for i in 0..4 {
        x[i] = q_pred[i];
    }
    for i in 0..3 {
        x[4 + i] = state.b_hat[i];
    }

    for idx in 0..3 {
        let h = oh(frame.upsilon_body[idx], frame.upsilon_inertial[idx]);
        let mut h_bar = M4x7::zeros();
        for i in 0..4 {
            for j in 0..4 {
                h_bar[(i, j)] = h[(i, j)];
            }
        }
        let p_q: M4 = p.fixed_view::<4, 4>(0, 0).into_owned();
        let q_cur: V4 = x.fixed_rows::<4>(0).into_owned();
        let m_hat: M4 = q_cur * q_cur.transpose() + p_q;
        let gamma_v = ogamma(frame.upsilon_body[idx]);
        let p_v = (M4::identity() * m_hat.trace() - m_hat - gamma_v * m_hat * gamma_v.transpose())
            * (0.25 * cfg.kf_rho);
        let s: M4 = h * p_q * h.transpose() + p_v;
        let k = p * h_bar.transpose() * oinv4(s);
        let ikh: M7 = M7::identity() - k * h_bar;
        x = ikh * x;
        p = ikh * p * ikh.transpose() + k * p_v * k.transpose();
        p = (p + p.transpose()) * 0.5;
    }

    let q_part: V4 = x.fixed_rows::<4>(0).into_owned();
    let q_final = q_part / q_part.norm();
    let b_final: V3 = x.fixed_rows::<3>(4).into_owned();

    assert_close(got.q_hat.as_vec4(), &q_final, "kf-bias quaternion");
    assert_close(&got.b_hat, &b_final, "kf-bias bias");
    assert_close(&got.p, &p, "kf-bias covariance");
}

/// `W = Σ υ̂×(Q̄ᵥ⁻¹(υ̂ − υ))` and `S = Σ [υ̂]×Q̄ᵥ⁻¹[υ̂]×ᵀ` with
/// `υ̂ = R(Q̂)ᵀυᴵ`, for the isotropic `Q̄ᵥ = qv·I` of the fixture.
fn ows(q: V4, frame: &MeasurementFrame, qv: f64) -> (V3, M3) {
    let rt = oquat_rot(q).transpose();
    let mut w = V3::zeros();
    let mut s = M3::zeros();
    for i in 0..3 {
        let ub = frame.upsilon_body[i];
        let ub_hat = rt * frame.upsilon_inertial[i];
        w += ub_hat.cross(&((ub_hat - ub) / qv));
        s += osk(ub_hat) * (1.0 / qv) * osk(ub_hat).transpose();
    }
    (w, s)
}

pub fn check_mekf_step() {
    let frame = generic_frame();
    let cfg = GaussianNoiseConfig::isotropic(0.1, 1.0, 1.0, 3);
    let state = MekfState {
        q_hat: q_hat(),
        b_hat: v(B_HAT),
        pa: pa0(),
        pb: pb0(),
        pc: pc0(),
    };
    let got = mekf_step(&state, &frame, &cfg, DT);

    let (w, s) = ows(*state.q_hat.as_vec4(), &frame, 0.1);
    let omega_c = v(OMEGA_M) - state.b_hat;
    let q_next = ogexp(omega_c + state.pa * w, DT) * state.q_hat.as_vec4();
    let q_next = q_next / q_next.norm();
    let b_next = state.b_hat + state.pc.transpose() * w * DT;
    let qw = M3::identity();
    let qb = M3::identity();
    let pa_next = state.pa
        + (qw + osym(state.pa * osk(omega_c) - state.pc) * 2.0 - state.pa * s * state.pa) * DT;
    let pb_next = state.pb + (qb - state.pc * s * state.pc) * DT;
    let pc_next =
        state.pc - (osk(omega_c) * state.pc + state.pa * s * state.pc + state.pb) * DT;

    assert_close(got.q_hat.as_vec4(), &q_next, "mekf quaternion");
    assert_close(&got.b_hat, &b_next, "mekf bias");
    assert_close(&got.pa, &osym(pa_next), "mekf Pa");
    assert_close(&got.pb, &osym(pb_next), "mekf Pb");
    assert_close(&got.pc, &pc_next, "mekf Pc");
}

pub fn check_gamef_step() {
    let frame = generic_frame();
    let cfg = GaussianNoiseConfig::isotropic(0.1, 1.0, 1.0, 3);
    let state = GamefState {
        q_hat: q_hat(),
        b_hat: v(B_HAT),
        pa: pa0(),
        pb: pb0(),
        pc: pc0(),
    };
    let got = gamef_step(&state, &frame, &cfg, DT);

    let q4 = *state.q_hat.as_vec4();
    let (w, s) = ows(q4, &frame, 0.1);
    let rt = oquat_rot(q4).transpose();
    let mut c = M3::zeros();
    for i in 0..3 {
        let ub = frame.upsilon_body[i];
        let ub_hat = rt * frame.upsilon_inertial[i];
        c += osym((ub_hat - ub) * (1.0 / 0.1) * ub_hat.transpose());
    }
    let e = M3::identity() * c.trace() - c;

    let omega_c = v(OMEGA_M) - state.b_hat - state.pa * w * 0.5;
    let q_next = ogexp(v(OMEGA_M) - state.b_hat + state.pa * w, DT) * q4;
    let q_next = q_next / q_next.norm();
    let b_next = state.b_hat + state.pc.transpose() * w * DT;
    let qw = M3::identity();
    let qb = M3::identity();
    let pa_next = state.pa
        + (qw + osym(state.pa * osk(omega_c) - state.pc) * 2.0 + state.pa * (e - s) * state.pa)
            * DT;
    let pb_next = state.pb + (qb + state.pc * (e - s) * state.pc) * DT;
    let pc_next = state.pc
        - (osk(omega_c) * state.pc - state.pa * (e - s) * state.pc + state.pb) * DT;

    assert_close(got.q_hat.as_vec4(), &q_next, "gamef quaternion");
    assert_close(&got.b_hat, &b_next, "gamef bias");
    assert_close(&got.pa, &osym(pa_next), "gamef Pa");
    assert_close(&got.pb, &osym(pb_next), "gamef Pb");
    assert_close(&got.pc, &pc_next, "gamef Pc");
}

// ---------------------------------------------------------------------
// Nonlinear deterministic filters.
// ---------------------------------------------------------------------

pub fn check_cg_ndaf_step() {
    let frame = generic_frame();
    let gains = NdafGains {
        kw: 10.0,
        gamma: 1.0,
    };
    let state = NdafState {
        r_hat: r_hat(),
        b_hat: v(B_HAT),
    };
    let ry = r_y();

    // Semi-direct: correction along vex(P_a(R̃)).
    let got = cg_ndaf_step(&state, &frame, Some(&ry), DT, Mode::SemiDirect, &gains).unwrap();
    let (_, psi) = oerror(*state.r_hat.matrix(), *ry.matrix());
    let rate = v(OMEGA_M) - state.b_hat - psi * gains.kw;
    assert_close(
        got.r_hat.matrix(),
        &opropagate(*state.r_hat.matrix(), rate, DT),
        "cg semi attitude",
    );
    assert_close(&got.b_hat, &(state.b_hat + psi * gains.gamma * DT), "cg semi bias");

    // Direct: correction along Σ (sᵢ/2) υ̂ᵢ × υᵢ.
    let got = cg_ndaf_step(&state, &frame, None, DT, Mode::Direct, &gains).unwrap();
    let rt = state.r_hat.transpose();
    let mut w = V3::zeros();
    for i in 0..3 {
        let ub_hat = *rt.matrix() * frame.upsilon_inertial[i];
        w += ub_hat.cross(&frame.upsilon_body[i]) * (frame.weights[i] / 2.0);
    }
    let rate = v(OMEGA_M) - state.b_hat - w * gains.kw;
    assert_close(
        got.r_hat.matrix(),
        &opropagate(*state.r_hat.matrix(), rate, DT),
        "cg direct attitude",
    );
    assert_close(&got.b_hat, &(state.b_hat + w * gains.gamma * DT), "cg direct bias");
}

pub fn check_gp_ndaf_step() {
    let p = PpfParams::benchmark_ndaf();
    let t = 0.5;
    let state = NdafState {
        r_hat: r_hat(),
        b_hat: v(B_HAT),
    };

    // Semi-direct.
    let frame = generic_frame();
    let ry = r_y();
    let (got, ev) =
        gp_ndaf_step(&state, &frame, Some(&ry), t, DT, &p, Mode::SemiDirect).unwrap();
    assert!(!ev.funnel_violated);
    let (d, psi) = oerror(*state.r_hat.matrix(), *ry.matrix());
    let f = ofunnel(d, t, &p);
    let w = psi * (2.0 * (p.kw * f.mu_det * f.eps - f.xi_bar_d / (4.0 * f.xi)) / (1.0 - d));
    let rate = v(OMEGA_M) - state.b_hat - w * p.kw;
    assert_close(
        got.r_hat.matrix(),
        &opropagate(*state.r_hat.matrix(), rate, DT),
        "gp semi attitude",
    );
    assert_close(
        &got.b_hat,
        &(state.b_hat + psi * ((p.gamma1 / 2.0) * f.mu_det * f.eps * DT)),
        "gp semi bias",
    );

    // Direct, on the diagonal-Gram frame.
    let frame = basis_frame();
    let (got, ev) = gp_ndaf_step(&state, &frame, None, t, DT, &p, Mode::Direct).unwrap();
    assert!(!ev.funnel_violated);
    let aux = odirect_aux(&frame, *state.r_hat.matrix());
    let f = ofunnel(aux.dist, t, &p);
    let w = aux.vex_pa
        * ((4.0 / aux.lambda_min) * (p.kw * f.mu_det * f.eps - f.xi_bar_d / f.xi)
            / (1.0 + aux.upsilon_big));
    let rate = v(OMEGA_M) - state.b_hat - w * p.kw;
    assert_close(
        got.r_hat.matrix(),
        &opropagate(*state.r_hat.matrix(), rate, DT),
        "gp direct attitude",
    );
    assert_close(
        &got.b_hat,
        &(state.b_hat + aux.vex_pa * ((p.gamma1 / 2.0) * f.mu_det * f.eps * DT)),
        "gp direct bias",
    );
}

// ---------------------------------------------------------------------
// Nonlinear stochastic filters.
// ---------------------------------------------------------------------

pub fn check_nsaf_step() {
    let gains = NsafGains::default();
    let state = NsafState {
        r_hat: r_hat(),
        b_hat: v(B_HAT),
        sigma_hat: v(SIGMA_HAT),
    };
    let ry = r_y();
    let (d, psi) = oerror(*state.r_hat.matrix(), *ry.matrix());
    let d_psi = M3::from_columns(&[psi, psi, psi]);
    let diag_psi = M3::from_diagonal(&psi);
    let w = psi * ((gains.kw / gains.epsilon) * ((2.0 - d) / (1.0 - d)))
        + d_psi * state.sigma_hat * gains.k2;
    let b_next = state.b_hat + (psi * (gains.gamma1 * d) - state.b_hat * (gains.gamma1 * gains.kb)) * DT;

    // Ito convention.
    let got = nsaf_step(&state, &ry, v(OMEGA_M), DT, NsafVariant::Ito, &gains).unwrap();
    let rate = v(OMEGA_M) - state.b_hat - w;
    let sigma_next = state.sigma_hat
        + (d_psi.transpose() * psi * (gains.kw * gains.gamma2 * d)
            - state.sigma_hat * (gains.gamma2 * gains.ksigma))
            * DT;
    assert_close(
        got.r_hat.matrix(),
        &opropagate(*state.r_hat.matrix(), rate, DT),
        "nsaf ito attitude",
    );
    assert_close(&got.b_hat, &b_next, "nsaf ito bias");
    assert_close(&got.sigma_hat, &sigma_next, "nsaf ito sigma");

    // Stratonovich convention adds the convention-correction drift.
    let got = nsaf_step(&state, &ry, v(OMEGA_M), DT, NsafVariant::Stratonovich, &gains).unwrap();
    let rate = v(OMEGA_M) - state.b_hat - diag_psi * state.sigma_hat * (0.5 / (1.0 - d)) - w;
    let sigma_next = state.sigma_hat
        + (((d_psi.transpose() * psi) * gains.kw + diag_psi * psi * (0.5 / (1.0 - d)))
            * (gains.gamma2 * d)
            - state.sigma_hat * (gains.gamma2 * gains.ksigma))
            * DT;
    assert_close(
        got.r_hat.matrix(),
        &opropagate(*state.r_hat.matrix(), rate, DT),
        "nsaf stratonovich attitude",
    );
    assert_close(&got.b_hat, &b_next, "nsaf stratonovich bias");
    assert_close(&got.sigma_hat, &sigma_next, "nsaf stratonovich sigma");
}

pub fn check_gp_nsaf_step() {
    let p = PpfParams::benchmark_nsaf();
    let t = 0.5;
    let state = NsafState {
        r_hat: r_hat(),
        b_hat: v(B_HAT),
        sigma_hat: v(SIGMA_HAT),
    };

    // Semi-direct.
    let frame = generic_frame();
    let ry = r_y();
    let (got, ev) =
        gp_nsaf_step(&state, &frame, Some(&ry), t, DT, &p, Mode::SemiDirect).unwrap();
    assert!(!ev.funnel_violated);
    let (d, psi) = oerror(*state.r_hat.matrix(), *ry.matrix());
    let diag_psi = M3::from_diagonal(&psi);
    let f = ofunnel(d, t, &p);
    let mu = f.mu_sto;
    let w = diag_psi * state.sigma_hat * (2.0 * ((f.eps + 2.0) / (f.eps + 1.0)) * mu)
        + psi * (2.0 * (p.kw * mu * (f.eps + 1.0) - f.xi_bar_d / (4.0 * f.xi)) / (1.0 - d));
    let rate = v(OMEGA_M) - state.b_hat - w;
    let e_exp = f.eps.exp();
    assert_close(
        got.r_hat.matrix(),
        &opropagate(*state.r_hat.matrix(), rate, DT),
        "gp-nsaf semi attitude",
    );
    assert_close(
        &got.b_hat,
        &(state.b_hat + psi * (p.gamma1 * (f.eps + 1.0) * e_exp * mu * DT)),
        "gp-nsaf semi bias",
    );
    assert_close(
        &got.sigma_hat,
        &(state.sigma_hat
            + diag_psi * psi * (p.gamma2 * f.eps * (f.eps + 2.0) * e_exp * mu * mu * DT)),
        "gp-nsaf semi sigma",
    );

    // Direct, on the diagonal-Gram frame.
    let frame = basis_frame();
    let (got, ev) = gp_nsaf_step(&state, &frame, None, t, DT, &p, Mode::Direct).unwrap();
    assert!(!ev.funnel_violated);
    let aux = odirect_aux(&frame, *state.r_hat.matrix());
    let psi_m = aux.vex_pa;
    let diag_psi_m = M3::from_diagonal(&psi_m);
    let f = ofunnel(aux.dist, t, &p);
    let mu = f.mu_sto;
    let w = diag_psi_m * state.sigma_hat * (2.0 * ((f.eps + 2.0) / (f.eps + 1.0)) * mu)
        + psi_m
            * ((4.0 / aux.lambda_min) * (p.kw * mu * f.eps - f.xi_bar_d / f.xi)
                / (1.0 + aux.upsilon_big));
    let rate = v(OMEGA_M) - state.b_hat - w;
    let e_exp = f.eps.exp();
    assert_close(
        got.r_hat.matrix(),
        &opropagate(*state.r_hat.matrix(), rate, DT),
        "gp-nsaf direct attitude",
    );
    assert_close(
        &got.b_hat,
        &(state.b_hat + psi_m * (p.gamma1 * mu * (f.eps + 1.0) * e_exp * DT)),
        "gp-nsaf direct bias",
    );
    assert_close(
        &got.sigma_hat,
        &(state.sigma_hat + diag_psi_m * psi_m * (p.gamma2 * (f.eps + 2.0) * e_exp * mu * mu * DT)),
        "gp-nsaf direct sigma",
    );
}
