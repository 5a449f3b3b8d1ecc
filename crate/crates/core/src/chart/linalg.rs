//! 3×3 linear algebra generic over [`Scalar`], so the same code runs on numbers
//! and on jets.

use super::jet::{Jet, Scalar};

pub type Vec3<T> = [T; 3];
pub type Mat3<T> = [[T; 3]; 3];

pub fn zero<T: Scalar>() -> T {
    T::from_f64(0.0)
}

pub fn dot<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn add<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale<T: Scalar>(k: T, a: &Vec3<T>) -> Vec3<T> {
    [k * a[0], k * a[1], k * a[2]]
}

pub fn cross<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn mat_vec<T: Scalar>(m: &Mat3<T>, v: &Vec3<T>) -> Vec3<T> {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

/// `uᵀ M v`.
pub fn bilinear<T: Scalar>(m: &Mat3<T>, u: &Vec3<T>, v: &Vec3<T>) -> T {
    dot(u, &mat_vec(m, v))
}

pub fn mat_mul<T: Scalar>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut out = [[zero::<T>(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn transpose<T: Scalar>(a: &Mat3<T>) -> Mat3<T> {
    let mut out = *a;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

/// Matrix whose columns are `c`.
pub fn from_columns<T: Scalar>(c: [&Vec3<T>; 3]) -> Mat3<T> {
    let mut out = [[zero::<T>(); 3]; 3];
    for (j, col) in c.iter().enumerate() {
        for i in 0..3 {
            out[i][j] = col[i];
        }
    }
    out
}

pub fn column<T: Scalar>(m: &Mat3<T>, j: usize) -> Vec3<T> {
    [m[0][j], m[1][j], m[2][j]]
}

pub fn det<T: Scalar>(m: &Mat3<T>) -> T {
    dot(&m[0], &cross(&m[1], &m[2]))
}

/// Inverse by the adjugate; the caller checks that the determinant is away from zero.
pub fn inverse<T: Scalar>(m: &Mat3<T>) -> Mat3<T> {
    let c0 = cross(&m[1], &m[2]);
    let c1 = cross(&m[2], &m[0]);
    let c2 = cross(&m[0], &m[1]);
    let inv_det = dot(&m[0], &c0).recip();
    from_columns([&scale(inv_det, &c0), &scale(inv_det, &c1), &scale(inv_det, &c2)])
}

pub fn symmetrize<T: Scalar>(m: &Mat3<T>) -> Mat3<T> {
    let mut out = *m;
    let half = T::from_f64(0.5);
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = half * (m[i][j] + m[j][i]);
        }
    }
    out
}

pub fn values_vec<T: Scalar>(v: &Vec3<T>) -> [f64; 3] {
    [v[0].value(), v[1].value(), v[2].value()]
}

pub fn values_mat<T: Scalar>(m: &Mat3<T>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[i][j].value();
        }
    }
    out
}

pub fn lift_vec<T: Scalar>(v: &[f64; 3]) -> Vec3<T> {
    [T::from_f64(v[0]), T::from_f64(v[1]), T::from_f64(v[2])]
}

pub fn lift_mat<T: Scalar>(m: &[[f64; 3]; 3]) -> Mat3<T> {
    let mut out = [[zero::<T>(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = T::from_f64(m[i][j]);
        }
    }
    out
}

pub fn truncate_vec(v: &Vec3<Jet>, order: usize) -> Vec3<Jet> {
    [v[0].truncate(order), v[1].truncate(order), v[2].truncate(order)]
}

pub fn truncate_mat(m: &Mat3<Jet>, order: usize) -> Mat3<Jet> {
    [truncate_vec(&m[0], order), truncate_vec(&m[1], order), truncate_vec(&m[2], order)]
}

pub fn frobenius(m: &[[f64; 3]; 3]) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn to_na(m: &[[f64; 3]; 3]) -> nalgebra::Matrix3<f64> {
    nalgebra::Matrix3::from_fn(|i, j| m[i][j])
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &[[f64; 3]; 3]) -> f64 {
    to_na(m).symmetric_eigenvalues().min()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let m = [[2.0, 1.0, 0.5], [-1.0, 3.0, 0.0], [0.3, 0.2, 1.5]];
        let p = mat_mul(&m, &inverse(&m));
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((p[i][j] - id).abs() < 1e-14);
            }
        }
    }
}
