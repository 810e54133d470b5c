//! Continuous 6D rotation encoding round trip.

use gelfusion::policy::rot6d::{det3, matrix_to_rot6d, quat_to_matrix, rot6d_to_matrix};

fn main() -> gelfusion::Result<()> {
    let m = quat_to_matrix([0.9, 0.1, -0.3, 0.2]);
    let r = matrix_to_rot6d(&m)?;
    let back = rot6d_to_matrix(&r)?;
    let err = (0..9).map(|k| (m[k / 3][k % 3] - back[k / 3][k % 3]).abs()).fold(0.0, f64::max);
    println!("6d {r:.4?}");
    println!("round-trip error {err:.2e}, det {:.6}", det3(&back));
    // Any non-degenerate pair of columns decodes to a proper rotation.
    let skew = rot6d_to_matrix(&[1.0, 0.2, 0.0, 0.5, 1.0, 0.3])?;
    println!("decoded {skew:.4?} det {:.6}", det3(&skew));
    Ok(())
}
