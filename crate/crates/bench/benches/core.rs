use criterion::{criterion_group, criterion_main, Criterion};
use omnimorph_core::nalgebra::{DMatrix, DVector, Vector3};
use omnimorph_core::optimizer::{solve_box_qp, BoxQP, QpOptions};
use omnimorph_core::trajectory::hover_mission;
use omnimorph_core::*;
use std::hint::black_box;

fn platform() -> (PlatformParams, PropellerLayout) {
    let p = PlatformParams::default();
    let l = PropellerLayout::for_params(&p).unwrap();
    (p, l)
}

fn allocation(c: &mut Criterion) {
    let (p, l) = platform();
    c.bench_function("allocation_matrix", |b| {
        b.iter(|| allocation_matrix(&p, &l, black_box(0.7)))
    });
    let u = InputVector::from_element(1.6e5);
    c.bench_function("classify_actuation", |b| {
        b.iter(|| classify_actuation(&p, &l, black_box(0.7), &u))
    });
}

fn qp(c: &mut Criterion) {
    // deterministic SPD problem with a few active bounds
    let n = 8;
    let m = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5);
    let qp = BoxQP {
        hessian: &m * m.transpose() + DMatrix::identity(n, n) * 0.1,
        linear: DVector::from_fn(n, |i, _| if i % 2 == 0 { 2.0 } else { -1.5 }),
        lower: DVector::from_element(n, -1.0),
        upper: DVector::from_element(n, 1.0),
    };
    let opts = QpOptions::default();
    c.bench_function("box_qp_8", |b| b.iter(|| solve_box_qp(black_box(&qp), &opts).unwrap()));
}

fn support(c: &mut Criterion) {
    let (p, l) = platform();
    let dir = Vector3::new(1.0, 1.0, 1.0).normalize();
    c.bench_function("support_force_zero_torque", |b| {
        b.iter(|| support_force(&p, &l, black_box(0.8), &dir, true).unwrap())
    });
}

fn control(c: &mut Criterion) {
    let (p, l) = platform();
    let gains = ControlGains::preset();
    let weights = OptWeights::case_a();
    let options = ControlOptions::default();
    let state = RigidBodyState::at_rest(Vector3::new(0.02, -0.01, 0.98));
    let reference = FlatReference::hold(
        Vector3::new(0.0, 0.0, 1.0),
        omnimorph_core::nalgebra::Matrix3::identity(),
    );
    let u0 = hover_input(&p, &l, 0.3, p.mass).unwrap();
    c.bench_function("control_step", |b| {
        b.iter(|| {
            let mut ctrl = ControllerState::new(0.3, u0);
            control_step(&p, &l, &gains, &weights, &options, &state, &reference, &mut ctrl, 0.0).unwrap()
        })
    });
}

fn simulation(c: &mut Criterion) {
    let (p, _) = platform();
    let mission = hover_mission(Vector3::new(0.0, 0.0, 1.0), 1.0).unwrap();
    let scenario = Scenario::new(p, ControlGains::preset(), OptWeights::case_a(), mission);
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    group.bench_function("hover_1s", |b| b.iter(|| simulate(black_box(&scenario)).unwrap()));
    group.finish();
}

criterion_group!(benches, allocation, qp, support, control, simulation);
criterion_main!(benches);
