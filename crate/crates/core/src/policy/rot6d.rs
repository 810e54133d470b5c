//! Continuous 6-D rotation encoding: the first two matrix columns, decoded by
//! Gram–Schmidt.

use crate::error::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn col(m: &Mat3, j: usize) -> [f64; 3] {
    [m[0][j], m[1][j], m[2][j]]
}

pub fn det3(m: &Mat3) -> f64 {
    dot(col(m, 0), cross(col(m, 1), col(m, 2)))
}

/// Decode to a proper rotation with columns `(b1, b2, b1×b2)`.
pub fn rot6d_to_matrix(r: &[f64; 6]) -> Result<Mat3> {
    let a1 = [r[0], r[1], r[2]];
    let a2 = [r[3], r[4], r[5]];
    let n1 = dot(a1, a1).sqrt();
    if !(n1 > 1e-12) {
        return Err(Error::Degenerate("first 6-D column has zero norm".into()));
    }
    let b1 = a1.map(|v| v / n1);
    let p = dot(b1, a2);
    let u = [a2[0] - p * b1[0], a2[1] - p * b1[1], a2[2] - p * b1[2]];
    let n2 = dot(u, u).sqrt();
    if !(n2 > 1e-9 * dot(a2, a2).sqrt() && n2 > 1e-12) {
        return Err(Error::Degenerate("6-D columns are parallel".into()));
    }
    let b2 = u.map(|v| v / n2);
    let b3 = cross(b1, b2);
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        m[i] = [b1[i], b2[i], b3[i]];
    }
    Ok(m)
}

/// First two columns of a rotation matrix.
pub fn matrix_to_rot6d(m: &Mat3) -> Result<[f64; 6]> {
    for i in 0..3 {
        for j in 0..3 {
            let mtm = dot(col(m, i), col(m, j));
            let want = if i == j { 1.0 } else { 0.0 };
            if (mtm - want).abs() > 1e-3 {
                return Err(Error::OutOfRange("matrix is not orthonormal".into()));
            }
        }
    }
    if (det3(m) - 1.0).abs() > 1e-3 {
        return Err(Error::OutOfRange("matrix is a reflection".into()));
    }
    Ok([m[0][0], m[1][0], m[2][0], m[0][1], m[1][1], m[2][1]])
}

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
pub fn quat_to_matrix(q: [f64; 4]) -> Mat3 {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let [w, x, y, z] = q.map(|v| v / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}
