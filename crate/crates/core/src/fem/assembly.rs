use super::element::element_stiffness;
use super::model::{dof, FrameModel, DOFS_PER_NODE};
use crate::error::{Error, Result};
use crate::linalg::{factor, FactorKind, Factorization, Matrix};

/// Assembled stiffness before support elimination, plus the free/constrained split.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    k: Matrix,
    constrained: Vec<usize>,
    free: Vec<usize>,
}

impl GlobalSystem {
    /// Full `3n × 3n` stiffness, supports not applied.
    pub fn k(&self) -> &Matrix {
        &self.k
    }

    pub fn n_dofs(&self) -> usize {
        self.k.rows()
    }

    pub fn constrained_dofs(&self) -> &[usize] {
        &self.constrained
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    /// Support-reduced stiffness over the free DOFs.
    pub fn k_free(&self) -> Matrix {
        self.k.select(&self.free, &self.free)
    }

    /// Restricts a full-length vector to the free DOFs.
    pub fn to_free(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&d| full[d]).collect()
    }

    /// Expands a free-DOF vector, writing zeros at constrained DOFs.
    pub fn from_free(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_dofs()];
        for (&d, &v) in self.free.iter().zip(free) {
            full[d] = v;
        }
        full
    }

    /// Eliminates supports and factors the reduced system with Cholesky.
    pub fn factorize(&self) -> Result<StaticSolver> {
        let k_free = self.k_free();
        let fact = factor(&k_free, FactorKind::Cholesky)?;
        Ok(StaticSolver {
            system: self.clone(),
            k_free,
            fact,
        })
    }
}

/// Factored support-reduced system, shared by every load case.
#[derive(Debug, Clone)]
pub struct StaticSolver {
    system: GlobalSystem,
    k_free: Matrix,
    fact: Factorization,
}

impl StaticSolver {
    pub fn system(&self) -> &GlobalSystem {
        &self.system
    }

    pub fn k_free(&self) -> &Matrix {
        &self.k_free
    }

    /// Solves `K·U = F` for a full-length force vector; constrained entries of
    /// the result are exactly zero and constrained entries of `f` are ignored.
    pub fn solve(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.system.n_dofs() {
            return Err(Error::Dimension(format!(
                "solve_static: force length {} vs {} DOFs",
                f.len(),
                self.system.n_dofs()
            )));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("force vector".into()));
        }
        let u = self.fact.solve(&self.system.to_free(f))?;
        Ok(self.system.from_free(&u))
    }
}

pub fn assemble(model: &FrameModel) -> Result<GlobalSystem> {
    model.validate()?;
    let n = model.n_dofs();
    let mut k = Matrix::zeros(n, n);
    for e in &model.elements {
        let ke = element_stiffness(&e.section, model.nodes[e.node_a], model.nodes[e.node_b])?;
        let map: Vec<usize> = (0..DOFS_PER_NODE)
            .map(|v| dof(e.node_a, v))
            .chain((0..DOFS_PER_NODE).map(|v| dof(e.node_b, v)))
            .collect();
        for (i, &gi) in map.iter().enumerate() {
            for (j, &gj) in map.iter().enumerate() {
                k[(gi, gj)] += ke[(i, j)];
            }
        }
    }
    Ok(GlobalSystem {
        k,
        constrained: model.constrained_dofs(),
        free: model.free_dofs(),
    })
}

/// One-shot static solve; factors the system on every call.
pub fn solve_static(sys: &GlobalSystem, f: &[f64]) -> Result<Vec<f64>> {
    sys.factorize()?.solve(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::model::{build_lattice, Element, Support};
    use crate::fem::section::MaterialSection;
    use crate::linalg::{dot, norm2};

    fn cantilever(len: f64) -> FrameModel {
        FrameModel {
            span: len,
            height: 1.0,
            nodes: vec![[0.0, 0.0], [len, 0.0]],
            elements: vec![Element {
                node_a: 0,
                node_b: 1,
                section: MaterialSection::steel_400x250(),
            }],
            supports: vec![Support::clamp(0)],
            bottom_chord: vec![0, 1],
        }
    }

    #[test]
    fn single_element_equals_element_matrix() {
        let m = cantilever(2.0);
        let sys = assemble(&m).unwrap();
        let ke = element_stiffness(&m.elements[0].section, m.nodes[0], m.nodes[1]).unwrap();
        assert_eq!(sys.k(), &ke);
    }

    #[test]
    fn cantilever_tip_deflection() {
        let len = 3.0;
        let m = cantilever(len);
        let s = m.elements[0].section;
        let p = -10_000.0;
        let mut f = vec![0.0; 6];
        f[4] = p;
        let u = solve_static(&assemble(&m).unwrap(), &f).unwrap();
        let expected =
            p * len.powi(3) / (3.0 * s.bending_rigidity()) + p * len / s.shear_rigidity();
        assert!(((u[4] - expected) / expected).abs() < 1e-9);
        assert_eq!(&u[..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn lattice_symmetric_and_rigid_modes() {
        let m = build_lattice(20.0, 5.0).unwrap();
        let sys = assemble(&m).unwrap();
        let k = sys.k();
        assert!(k.asymmetry() <= 1e-12);
        let n = m.n_nodes();
        let mut modes = vec![vec![0.0; 3 * n], vec![0.0; 3 * n], vec![0.0; 3 * n]];
        for (i, p) in m.nodes.iter().enumerate() {
            modes[0][dof(i, 0)] = 1.0;
            modes[1][dof(i, 1)] = 1.0;
            modes[2][dof(i, 0)] = -p[1];
            modes[2][dof(i, 1)] = p[0];
            modes[2][dof(i, 2)] = 1.0;
        }
        let knorm = k.frobenius_norm();
        for r in &modes {
            let kr = k.matvec(r).unwrap();
            assert!(norm2(&kr) <= 1e-8 * knorm * norm2(r));
        }
    }

    #[test]
    fn supported_lattice_is_spd() {
        let sys = assemble(&build_lattice(20.0, 5.0).unwrap()).unwrap();
        assert_eq!(sys.k_free().rows(), 165);
        sys.factorize().unwrap();
    }

    #[test]
    fn unsupported_lattice_is_singular() {
        let mut m = build_lattice(20.0, 5.0).unwrap();
        m.supports.truncate(1);
        m.supports[0] = Support::roller(0);
        let err = assemble(&m).unwrap().factorize().unwrap_err();
        assert!(matches!(
            err,
            Error::Singular { .. } | Error::NotPositiveDefinite { .. }
        ));
    }

    #[test]
    fn zero_force_zero_response() {
        let sys = assemble(&build_lattice(20.0, 5.0).unwrap()).unwrap();
        let u = solve_static(&sys, &vec![0.0; 168]).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn residual_and_energy_identity() {
        let sys = assemble(&build_lattice(20.0, 5.0).unwrap()).unwrap();
        let solver = sys.factorize().unwrap();
        let mut f = vec![0.0; 168];
        for (i, v) in f.iter_mut().enumerate() {
            *v = ((i * 37 % 11) as f64 - 5.0) * 1000.0;
        }
        for &c in sys.constrained_dofs() {
            f[c] = 0.0;
        }
        let u = solver.solve(&f).unwrap();
        let uf = sys.to_free(&u);
        let ff = sys.to_free(&f);
        let ku = solver.k_free().matvec(&uf).unwrap();
        let r: Vec<f64> = ku.iter().zip(&ff).map(|(a, b)| a - b).collect();
        assert!(norm2(&r) <= 1e-9 * norm2(&ff));
        let (uku, ufv) = (dot(&uf, &ku), dot(&uf, &ff));
        assert!((uku - ufv).abs() <= 1e-9 * ufv.abs());
    }
}
