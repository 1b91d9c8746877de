//! Two-node shear-deformable (Timoshenko) frame element in the plane.
//!
//! Element DOFs: `[u_x1, u_y1, r_z1, u_x2, u_y2, r_z2]` in global axes.

use super::section::MaterialSection;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const MIN_ELEMENT_LENGTH: f64 = 1e-9;

/// Local-axis stiffness for an element of length `len`.
pub fn local_stiffness(section: &MaterialSection, len: f64) -> [[f64; 6]; 6] {
    let ea = section.axial_rigidity() / len;
    let ei = section.bending_rigidity();
    let phi = 12.0 * ei / (section.shear_rigidity() * len * len);
    let c = ei / ((1.0 + phi) * len.powi(3));
    let k11 = 12.0 * c;
    let k12 = 6.0 * len * c;
    let k22 = (4.0 + phi) * len * len * c;
    let k23 = (2.0 - phi) * len * len * c;
    [
        [ea, 0.0, 0.0, -ea, 0.0, 0.0],
        [0.0, k11, k12, 0.0, -k11, k12],
        [0.0, k12, k22, 0.0, -k12, k23],
        [-ea, 0.0, 0.0, ea, 0.0, 0.0],
        [0.0, -k11, -k12, 0.0, k11, -k12],
        [0.0, k12, k23, 0.0, -k12, k22],
    ]
}

/// Global-axis 6×6 stiffness of the element joining `a` and `b`.
pub fn element_stiffness(section: &MaterialSection, a: [f64; 2], b: [f64; 2]) -> Result<Matrix> {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    let len = dx.hypot(dy);
    if len <= MIN_ELEMENT_LENGTH {
        return Err(Error::Model(format!(
            "zero-length element between {a:?} and {b:?}"
        )));
    }
    let (c, s) = (dx / len, dy / len);
    let kl = local_stiffness(section, len);

    // T maps global to local DOFs, block-diagonal with the 3×3 rotation.
    let mut t = [[0.0; 6]; 6];
    for blk in [0, 3] {
        t[blk][blk] = c;
        t[blk][blk + 1] = s;
        t[blk + 1][blk] = -s;
        t[blk + 1][blk + 1] = c;
        t[blk + 2][blk + 2] = 1.0;
    }

    let mut kt = [[0.0; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            kt[i][j] = (0..6).map(|k| kl[i][k] * t[k][j]).sum();
        }
    }
    let mut out = Matrix::zeros(6, 6);
    for i in 0..6 {
        for j in 0..6 {
            out[(i, j)] = (0..6).map(|k| t[k][i] * kt[k][j]).sum();
        }
    }
    // Remove round-off asymmetry from the triple product.
    for i in 0..6 {
        for j in 0..i {
            let m = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = m;
            out[(j, i)] = m;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{factor, FactorKind};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn axial_entry_of_horizontal_element() {
        let s = MaterialSection::steel_400x250();
        let k = element_stiffness(&s, [0.0, 0.0], [2.0, 0.0]).unwrap();
        assert!(rel(k[(0, 0)], s.axial_rigidity() / 2.0) < 1e-15);
        assert_eq!(k.asymmetry(), 0.0);
    }

    #[test]
    fn rigid_body_modes_annihilated() {
        let s = MaterialSection::steel_400x250();
        let (a, b) = ([1.0, 2.0], [3.5, -0.7]);
        let k = element_stiffness(&s, a, b).unwrap();
        let modes = [
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
            // small rotation about the origin: (u, v) = (−y, x)
            vec![-a[1], a[0], 1.0, -b[1], b[0], 1.0],
        ];
        for v in &modes {
            let kv = k.matvec(v).unwrap();
            let scale = k.max_abs() * v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(kv.iter().all(|x| x.abs() <= 1e-12 * scale), "{kv:?}");
        }
    }

    #[test]
    fn rank_deficiency_is_exactly_three() {
        // Fixing one end removes the rigid modes, leaving an SPD 3×3 block.
        let s = MaterialSection::steel_400x250();
        let k = element_stiffness(&s, [0.0, 0.0], [1.5, 2.0]).unwrap();
        let kb = k.select(&[3, 4, 5], &[3, 4, 5]);
        assert!(factor(&kb, FactorKind::Cholesky).is_ok());
    }

    #[test]
    fn euler_bernoulli_limit() {
        let mut s = MaterialSection::steel_400x250();
        s.shear_correction = 1e12;
        let len = 3.0;
        let k = element_stiffness(&s, [0.0, 0.0], [len, 0.0]).unwrap();
        let ei = s.bending_rigidity();
        assert!(rel(k[(1, 1)], 12.0 * ei / len.powi(3)) < 1e-9);
        assert!(rel(k[(1, 2)], 6.0 * ei / len.powi(2)) < 1e-9);
        assert!(rel(k[(2, 2)], 4.0 * ei / len) < 1e-9);
        assert!(rel(k[(2, 5)], 2.0 * ei / len) < 1e-9);
    }

    #[test]
    fn rotation_consistency() {
        // A vertical element's transverse stiffness acts along global x.
        let s = MaterialSection::steel_400x250();
        let h = element_stiffness(&s, [0.0, 0.0], [0.0, 2.0]).unwrap();
        let x = element_stiffness(&s, [0.0, 0.0], [2.0, 0.0]).unwrap();
        assert!(rel(h[(1, 1)], x[(0, 0)]) < 1e-12);
        assert!(rel(h[(0, 0)], x[(1, 1)]) < 1e-12);
        assert!(rel(h[(2, 2)], x[(2, 2)]) < 1e-12);
    }

    #[test]
    fn zero_length_rejected() {
        let s = MaterialSection::steel_400x250();
        assert!(element_stiffness(&s, [1.0, 1.0], [1.0, 1.0]).is_err());
    }
}
