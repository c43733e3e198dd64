use attitude_bench::{fixture, gamef_state, kf_state, mekf_state, ndaf_state, nsaf_state};
use attitude_core::{
    cg_ndaf_step, exp_so3, gamma_exp, gp_nsaf_step, kf_step, mekf_step, quest, svd_wahba, triad,
    GaussianNoiseConfig, Mode, NdafGains, NsafGains, NsafVariant, PpfParams, Vec3, WahbaWeights,
};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn bench_so3(c: &mut Criterion) {
    let w = Vec3::new(0.3, -0.2, 0.5);
    c.bench_function("exp_so3", |b| b.iter(|| exp_so3(black_box(w))));
    c.bench_function("gamma_exp", |b| b.iter(|| gamma_exp(black_box(w), 0.01)));
}

fn bench_determination(c: &mut Criterion) {
    let fix = fixture();
    let weights = WahbaWeights::new(fix.frame.weights.clone()).unwrap();
    c.bench_function("triad", |b| b.iter(|| triad(black_box(&fix.frame)).unwrap()));
    c.bench_function("quest", |b| {
        b.iter(|| quest(black_box(&fix.frame), &weights).unwrap())
    });
    c.bench_function("svd_wahba", |b| {
        b.iter(|| svd_wahba(black_box(&fix.frame), &weights).unwrap())
    });
}

fn bench_gaussian(c: &mut Criterion) {
    let fix = fixture();
    let cfg = GaussianNoiseConfig::isotropic(1.0, 1.0, 1.0, fix.frame.upsilon_body.len());
    let kf = kf_state();
    c.bench_function("kf_step", |b| {
        b.iter(|| kf_step(black_box(&kf), &fix.frame, &cfg, fix.dt).unwrap())
    });
    let mekf = mekf_state();
    c.bench_function("mekf_step", |b| {
        b.iter(|| mekf_step(black_box(&mekf), &fix.frame, &cfg, fix.dt))
    });
    let gamef = gamef_state();
    c.bench_function("gamef_step", |b| {
        b.iter(|| attitude_core::gamef_step(black_box(&gamef), &fix.frame, &cfg, fix.dt))
    });
}

fn bench_nonlinear(c: &mut Criterion) {
    let fix = fixture();
    let weights = WahbaWeights::new(fix.frame.weights.clone()).unwrap();
    let r_y = svd_wahba(&fix.frame, &weights).unwrap().r_y;
    let ndaf = ndaf_state();
    let gains = NdafGains::default();
    c.bench_function("cg_ndaf_step_semi", |b| {
        b.iter(|| {
            cg_ndaf_step(
                black_box(&ndaf),
                &fix.frame,
                Some(&r_y),
                fix.dt,
                Mode::SemiDirect,
                &gains,
            )
            .unwrap()
        })
    });
    c.bench_function("cg_ndaf_step_direct", |b| {
        b.iter(|| {
            cg_ndaf_step(
                black_box(&ndaf),
                &fix.frame,
                None,
                fix.dt,
                Mode::Direct,
                &gains,
            )
            .unwrap()
        })
    });
    let nsaf = nsaf_state();
    let nsaf_gains = NsafGains::default();
    c.bench_function("nsaf_step_ito", |b| {
        b.iter(|| {
            attitude_core::nsaf_step(
                black_box(&nsaf),
                &r_y,
                fix.frame.omega_m,
                fix.dt,
                NsafVariant::Ito,
                &nsaf_gains,
            )
            .unwrap()
        })
    });
    let ppf = PpfParams::benchmark_nsaf();
    c.bench_function("gp_nsaf_step_semi", |b| {
        b.iter(|| {
            gp_nsaf_step(
                black_box(&nsaf),
                &fix.frame,
                Some(&r_y),
                fix.t,
                fix.dt,
                &ppf,
                Mode::SemiDirect,
            )
            .unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_so3,
    bench_determination,
    bench_gaussian,
    bench_nonlinear
);
criterion_main!(benches);
