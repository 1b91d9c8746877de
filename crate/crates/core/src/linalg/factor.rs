use serde::{Deserialize, Serialize};

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// Pivots below this multiple of the largest row entry are treated as zero.
pub const SINGULAR_RTOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    Lu,
    Cholesky,
}

/// A factored square matrix.
///
/// For LU the factors hold `L` (unit diagonal, strictly lower part) and `U`
/// (upper part including the diagonal) of `P·A`, with `perm[i]` the source row
/// of row `i`. For Cholesky the lower triangle holds `L` with `A = L·Lᵀ`.
#[derive(Debug, Clone)]
pub struct Factorization {
    kind: FactorKind,
    factors: Matrix,
    perm: Vec<usize>,
}

impl Factorization {
    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.factors.rows()
    }

    pub fn factors(&self) -> &Matrix {
        &self.factors
    }

    pub fn pivots(&self) -> &[usize] {
        &self.perm
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.size();
        if b.len() != n {
            return Err(Error::Dimension(format!(
                "solve: rhs length {} vs system size {n}",
                b.len()
            )));
        }
        let mut x = vec![0.0; n];
        self.solve_into(b, &mut x);
        Ok(x)
    }

    /// Solves into a caller-provided buffer. Lengths must match the system size.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.size();
        let f = &self.factors;
        match self.kind {
            FactorKind::Lu => {
                for i in 0..n {
                    x[i] = b[self.perm[i]];
                }
                for i in 0..n {
                    let s = dot(&f.row(i)[..i], &x[..i]);
                    x[i] -= s;
                }
                for i in (0..n).rev() {
                    let row = f.row(i);
                    let s = dot(&row[i + 1..], &x[i + 1..]);
                    x[i] = (x[i] - s) / row[i];
                }
            }
            FactorKind::Cholesky => {
                x.copy_from_slice(b);
                for i in 0..n {
                    let row = f.row(i);
                    let s = dot(&row[..i], &x[..i]);
                    x[i] = (x[i] - s) / row[i];
                }
                for i in (0..n).rev() {
                    let xi = x[i] / f[(i, i)];
                    x[i] = xi;
                    for k in 0..i {
                        x[k] -= f[(i, k)] * xi;
                    }
                }
            }
        }
    }

    /// Rebuilds the matrix the factorization represents.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.size();
        let f = &self.factors;
        let mut out = Matrix::zeros(n, n);
        match self.kind {
            FactorKind::Lu => {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for k in 0..=i.min(j) {
                            let l = if k == i { 1.0 } else { f[(i, k)] };
                            s += l * f[(k, j)];
                        }
                        out[(self.perm[i], j)] = s;
                    }
                }
            }
            FactorKind::Cholesky => {
                for i in 0..n {
                    for j in 0..n {
                        let s: f64 = (0..=i.min(j)).map(|k| f[(i, k)] * f[(j, k)]).sum();
                        out[(i, j)] = s;
                    }
                }
            }
        }
        out
    }
}

pub fn factor(m: &Matrix, kind: FactorKind) -> Result<Factorization> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "factor: matrix is {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    match kind {
        FactorKind::Lu => lu(m),
        FactorKind::Cholesky => cholesky(m),
    }
}

fn row_scales(m: &Matrix) -> Vec<f64> {
    (0..m.rows())
        .map(|i| m.row(i).iter().fold(0.0f64, |a, v| a.max(v.abs())))
        .collect()
}

fn lu(m: &Matrix) -> Result<Factorization> {
    let n = m.rows();
    let mut a = m.clone();
    let scales = row_scales(m);
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut p = k;
        let mut best = a[(k, k)].abs();
        for i in k + 1..n {
            let v = a[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= SINGULAR_RTOL * scales[perm[p]] || best == 0.0 {
            return Err(Error::Singular { pivot: k });
        }
        if p != k {
            perm.swap(p, k);
            for j in 0..n {
                a.data_mut().swap(p * n + j, k * n + j);
            }
        }
        let pivot = a[(k, k)];
        for i in k + 1..n {
            let l = a[(i, k)] / pivot;
            a[(i, k)] = l;
            if l != 0.0 {
                let (upper, lower) = a.data_mut().split_at_mut(i * n);
                let src = &upper[k * n + k + 1..k * n + n];
                let dst = &mut lower[k + 1..n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= l * s;
                }
            }
        }
    }
    Ok(Factorization {
        kind: FactorKind::Lu,
        factors: a,
        perm,
    })
}

fn cholesky(m: &Matrix) -> Result<Factorization> {
    let n = m.rows();
    let scales = row_scales(m);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let d = m[(j, j)] - dot(&l.row(j)[..j], &l.row(j)[..j]);
        if d.abs() <= SINGULAR_RTOL * scales[j] {
            return Err(Error::Singular { pivot: j });
        }
        if d < 0.0 {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let s = m[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
            l[(i, j)] = s / djj;
        }
    }
    Ok(Factorization {
        kind: FactorKind::Cholesky,
        factors: l,
        perm: (0..n).collect(),
    })
}

/// Solves every column of `rhs` independently. Each column goes through the
/// same code path as [`Factorization::solve`], so results agree bitwise.
pub fn solve_multi(f: &Factorization, rhs: &Matrix) -> Result<Matrix> {
    if rhs.rows() != f.size() {
        return Err(Error::Dimension(format!(
            "solve_multi: rhs has {} rows, system size {}",
            rhs.rows(),
            f.size()
        )));
    }
    let mut out = Matrix::zeros(rhs.rows(), rhs.cols());
    let mut x = vec![0.0; f.size()];
    for j in 0..rhs.cols() {
        let b = rhs.column(j);
        f.solve_into(&b, &mut x);
        out.set_column(j, &x);
    }
    Ok(out)
}
