//! Small dense linear algebra helpers.
//!
//! The allocation matrices handled here are at most 6x9, so a one-sided
//! (Hestenes) Jacobi SVD is both accurate and fast enough, and keeps rank
//! decisions independent of any LAPACK-style backend.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `m = u * diag(singular_values) * v_t`,
/// singular values sorted in non-increasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

/// One-sided Jacobi SVD.
pub fn jacobi_svd(m: &DMatrix<f64>) -> Svd {
    if m.nrows() < m.ncols() {
        let t = jacobi_svd(&m.transpose());
        return Svd {
            u: t.v_t.transpose(),
            singular_values: t.singular_values,
            v_t: t.u.transpose(),
        };
    }

    let (rows, cols) = m.shape();
    let mut x = m.clone();
    let mut v = DMatrix::<f64>::identity(cols, cols);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = x.column(p).norm_squared();
                let beta = x.column(q).norm_squared();
                let gamma = x.column(p).dot(&x.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut x, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols).map(|j| x.column(j).norm()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut u = DMatrix::<f64>::zeros(rows, cols);
    let mut sv = DVector::<f64>::zeros(cols);
    let mut v_sorted = DMatrix::<f64>::zeros(cols, cols);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        sv[dst] = sigma;
        if sigma > 0.0 {
            u.set_column(dst, &(x.column(src) / sigma));
        }
        v_sorted.set_column(dst, &v.column(src));
    }

    Svd {
        u,
        singular_values: sv,
        v_t: v_sorted.transpose(),
    }
}

fn rotate_columns(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let a = m[(r, p)];
        let b = m[(r, q)];
        m[(r, p)] = c * a - s * b;
        m[(r, q)] = s * a + c * b;
    }
}

pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    jacobi_svd(m).singular_values
}

/// Number of singular values strictly above `tol * sigma_max`.
/// The zero matrix has rank 0.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = singular_values(m);
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// Moore-Penrose pseudo-inverse; singular values at or below
/// `rcond * sigma_max` are treated as zero.
pub fn pseudo_inverse(m: &DMatrix<f64>, rcond: f64) -> DMatrix<f64> {
    let svd = jacobi_svd(m);
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let k = svd.singular_values.len();
    let mut out = DMatrix::<f64>::zeros(m.ncols(), m.nrows());
    for i in 0..k {
        let s = svd.singular_values[i];
        if max == 0.0 || s <= rcond * max {
            continue;
        }
        let vi = svd.v_t.row(i).transpose();
        let ui = svd.u.column(i);
        out += (vi * ui.transpose()) / s;
    }
    out
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] applied to the antisymmetric part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

pub fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation by `angle` about the unit vector `axis` (Rodrigues).
pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = skew(axis);
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

/// Nearest rotation matrix in the Frobenius sense (polar factor).
pub fn project_to_so3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}

pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}
