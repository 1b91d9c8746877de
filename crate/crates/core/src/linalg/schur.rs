//! Static condensation onto a picked subset of DOFs.
//!
//! With `K` partitioned into picked (`I`) and remaining (`N`) blocks,
//!
//! ```text
//! S   = K_II − K_IN · K_NN⁻¹ · K_NI
//! F_c = F_I  − K_IN · K_NN⁻¹ · F_N
//! U_N = K_NN⁻¹ · (F_N − K_NI · U_I)
//! ```
//!
//! `K_NN` is factored once and reused for every force vector.

use serde::{Deserialize, Serialize};

use super::factor::{factor, solve_multi, FactorKind, Factorization};
use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Split of `0..n` into picked and remaining index lists, both sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    picked: Vec<usize>,
    remaining: Vec<usize>,
}

impl Partition {
    /// Builds a partition of `0..n` from the picked indices; duplicates and
    /// out-of-range entries are rejected.
    pub fn from_picked(n: usize, picked: &[usize]) -> Result<Self> {
        let mut mask = vec![false; n];
        for &i in picked {
            if i >= n {
                return Err(Error::Partition(format!(
                    "index {i} out of range for {n} DOFs"
                )));
            }
            if mask[i] {
                return Err(Error::Partition(format!("index {i} picked twice")));
            }
            mask[i] = true;
        }
        let picked: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
        let remaining: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
        if picked.is_empty() || remaining.is_empty() {
            return Err(Error::Partition(
                "picked and remaining sets must both be non-empty".into(),
            ));
        }
        Ok(Self { picked, remaining })
    }

    pub fn picked(&self) -> &[usize] {
        &self.picked
    }

    pub fn remaining(&self) -> &[usize] {
        &self.remaining
    }

    pub fn len(&self) -> usize {
        self.picked.len() + self.remaining.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Places `(u_i, u_n)` back into full DOF order.
    pub fn scatter(&self, u_i: &[f64], u_n: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.len()];
        for (&k, &v) in self.picked.iter().zip(u_i) {
            full[k] = v;
        }
        for (&k, &v) in self.remaining.iter().zip(u_n) {
            full[k] = v;
        }
        full
    }

    pub fn gather_picked(&self, full: &[f64]) -> Vec<f64> {
        self.picked.iter().map(|&k| full[k]).collect()
    }

    pub fn gather_remaining(&self, full: &[f64]) -> Vec<f64> {
        self.remaining.iter().map(|&k| full[k]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SchurSystem {
    partition: Partition,
    s_matrix: Matrix,
    knn: Factorization,
    kin: Matrix,
    kni: Matrix,
}

impl SchurSystem {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// The reduced stiffness `S`, `|I|×|I|`.
    pub fn s_matrix(&self) -> &Matrix {
        &self.s_matrix
    }

    pub fn knn(&self) -> &Factorization {
        &self.knn
    }

    pub fn kin(&self) -> &Matrix {
        &self.kin
    }

    pub fn kni(&self) -> &Matrix {
        &self.kni
    }

    pub fn picked_len(&self) -> usize {
        self.partition.picked.len()
    }
}

/// Forms the Schur complement with an LU factorization of `K_NN`.
pub fn schur_reduce(k: &Matrix, p: &Partition) -> Result<SchurSystem> {
    schur_reduce_with(k, p, FactorKind::Lu)
}

pub fn schur_reduce_with(k: &Matrix, p: &Partition, kind: FactorKind) -> Result<SchurSystem> {
    if !k.is_square() {
        return Err(Error::Dimension("schur_reduce: K is not square".into()));
    }
    if p.len() != k.rows() {
        return Err(Error::Partition(format!(
            "partition covers {} DOFs, K has {}",
            p.len(),
            k.rows()
        )));
    }
    let kii = k.select(&p.picked, &p.picked);
    let kin = k.select(&p.picked, &p.remaining);
    let kni = k.select(&p.remaining, &p.picked);
    let knn = k.select(&p.remaining, &p.remaining);
    let knn = factor(&knn, kind)?;
    let coupling = kin.matmul(&solve_multi(&knn, &kni)?)?;
    let s_matrix = kii.sub(&coupling)?;
    Ok(SchurSystem {
        partition: p.clone(),
        s_matrix,
        knn,
        kin,
        kni,
    })
}

/// `F_c = F_I − K_IN·K_NN⁻¹·F_N` for a full-length force vector.
pub fn reduce_force(s: &SchurSystem, f: &[f64]) -> Result<Vec<f64>> {
    let p = &s.partition;
    if f.len() != p.len() {
        return Err(Error::Dimension(format!(
            "reduce_force: force length {} vs {} DOFs",
            f.len(),
            p.len()
        )));
    }
    let f_i = p.gather_picked(f);
    let f_n = p.gather_remaining(f);
    let y = s.knn.solve(&f_n)?;
    let coupled = s.kin.matvec(&y)?;
    Ok(f_i.iter().zip(&coupled).map(|(a, b)| a - b).collect())
}

/// `U_N = K_NN⁻¹·(F_N − K_NI·U_I)`.
pub fn recover_interior(s: &SchurSystem, u_i: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    let p = &s.partition;
    if u_i.len() != p.picked.len() {
        return Err(Error::Dimension(format!(
            "recover_interior: u_i length {} vs {} picked DOFs",
            u_i.len(),
            p.picked.len()
        )));
    }
    if f.len() != p.len() {
        return Err(Error::Dimension(format!(
            "recover_interior: force length {} vs {} DOFs",
            f.len(),
            p.len()
        )));
    }
    let coupled = s.kni.matvec(u_i)?;
    let rhs: Vec<f64> = p
        .gather_remaining(f)
        .iter()
        .zip(&coupled)
        .map(|(a, b)| a - b)
        .collect();
    s.knn.solve(&rhs)
}
