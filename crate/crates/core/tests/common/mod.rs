#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use omnimorph_core::optimizer::BoxQP;
use omnimorph_core::{PlatformParams, PropellerLayout};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn setup() -> (PlatformParams, PropellerLayout) {
    let p = PlatformParams::default();
    let l = PropellerLayout::for_params(&p).unwrap();
    (p, l)
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &m * m.transpose() + DMatrix::identity(n, n) * rng.gen_range(0.05..1.0)
}

pub fn random_box_qp(rng: &mut ChaCha8Rng, n: usize) -> BoxQP {
    BoxQP {
        hessian: random_spd(rng, n),
        linear: DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0)),
        lower: DVector::from_element(n, -1.0),
        upper: DVector::from_element(n, 1.0),
    }
}

/// Projected gradient with the exact Lipschitz step.
pub fn projected_gradient(qp: &BoxQP, iterations: usize) -> DVector<f64> {
    let lmax = qp.hessian.symmetric_eigenvalues().max();
    let step = 1.0 / lmax;
    let mut x = DVector::zeros(qp.dim());
    for _ in 0..iterations {
        let g = qp.gradient(&x);
        let next = (&x - g * step).zip_zip_map(&qp.lower, &qp.upper, |v, l, u| v.clamp(l, u));
        let moved = (&next - &x).amax();
        x = next;
        if moved < 1e-15 {
            break;
        }
    }
    x
}
