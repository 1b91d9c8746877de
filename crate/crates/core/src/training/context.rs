use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fem::{dof, GlobalSystem, DOFS_PER_NODE};
use crate::linalg::{reduce_force, schur_reduce, Matrix, Partition, SchurSystem};

use super::loss::LossKind;

/// Default Schur picked nodes on the lattice: every third bottom-chord node
/// and the two top-chord quarter points.
pub const DEFAULT_SES_NODES: [usize; 9] = [0, 3, 6, 9, 12, 15, 18, 26, 36];

/// Everything the physics losses need besides the predictions.
///
/// The selector maps each entry of a predicted per-sample field to an index
/// of the physics vector (free DOF for the energy loss, picked DOF for the
/// Schur loss); `None` entries are left out.
#[derive(Debug, Clone)]
pub struct PhysicsContext {
    selector: Vec<Option<usize>>,
    target_len: usize,
    k_free: Option<Matrix>,
    schur: Option<SchurSystem>,
    forces: Vec<f64>,
    fc: Vec<f64>,
}

fn check_selector(selector: &[Option<usize>], target_len: usize) -> Result<()> {
    if let Some(bad) = selector.iter().flatten().find(|&&i| i >= target_len) {
        return Err(Error::Dimension(format!(
            "selector points at index {bad}, physics vector has {target_len}"
        )));
    }
    Ok(())
}

impl PhysicsContext {
    /// No physics; only the field length is known.
    pub fn none(field_len: usize) -> Self {
        Self {
            selector: vec![None; field_len],
            target_len: 0,
            k_free: None,
            schur: None,
            forces: Vec::new(),
            fc: Vec::new(),
        }
    }

    /// Energy loss context; `forces` holds one free-DOF force vector per sample.
    pub fn energy(k_free: Matrix, forces: Vec<f64>, selector: Vec<Option<usize>>) -> Result<Self> {
        let n = k_free.rows();
        if !k_free.is_square() || n == 0 || !forces.len().is_multiple_of(n) {
            return Err(Error::Dimension(format!(
                "K is {}×{}, forces hold {} values",
                k_free.rows(),
                k_free.cols(),
                forces.len()
            )));
        }
        check_selector(&selector, n)?;
        Ok(Self {
            selector,
            target_len: n,
            k_free: Some(k_free),
            schur: None,
            forces,
            fc: Vec::new(),
        })
    }

    /// Schur loss context; `fc` holds one reduced force vector per sample.
    pub fn with_schur(
        schur: SchurSystem,
        fc: Vec<f64>,
        selector: Vec<Option<usize>>,
    ) -> Result<Self> {
        let n = schur.picked_len();
        if !fc.len().is_multiple_of(n) {
            return Err(Error::Dimension(format!(
                "{} reduced force values for {n} picked DOFs",
                fc.len()
            )));
        }
        check_selector(&selector, n)?;
        Ok(Self {
            selector,
            target_len: n,
            k_free: None,
            schur: Some(schur),
            forces: Vec::new(),
            fc,
        })
    }

    /// Context for `kind` on a lattice dataset whose network predicts `nodes`.
    pub fn for_dataset(
        kind: LossKind,
        system: &GlobalSystem,
        ds: &Dataset,
        nodes: &[usize],
    ) -> Result<Self> {
        let free = system.free_dofs();
        match kind {
            LossKind::Dd => Ok(Self::none(nodes.len() * DOFS_PER_NODE)),
            LossKind::DdEc => Self::energy(
                system.k_free(),
                ds.forces.clone(),
                free_selector(free, nodes),
            ),
            LossKind::DdSes => {
                let picked = picked_free_dofs(free, nodes);
                let partition = Partition::from_picked(free.len(), &picked)?;
                let schur = schur_reduce(&system.k_free(), &partition)?;
                let fc = match (&ds.fc, &ds.manifest.schur_picked) {
                    (Some(fc), Some(p)) if *p == picked => fc.clone(),
                    _ => {
                        let mut fc = Vec::with_capacity(ds.len() * picked.len());
                        for i in 0..ds.len() {
                            fc.extend(reduce_force(&schur, ds.force(i))?);
                        }
                        fc
                    }
                };
                let selector = free_selector(free, nodes)
                    .into_iter()
                    .map(|f| f.and_then(|f| picked.binary_search(&f).ok()))
                    .collect();
                Self::with_schur(schur, fc, selector)
            }
        }
    }

    pub fn field_len(&self) -> usize {
        self.selector.len()
    }

    pub fn selector(&self) -> &[Option<usize>] {
        &self.selector
    }

    pub fn k_free(&self) -> Option<&Matrix> {
        self.k_free.as_ref()
    }

    pub fn schur(&self) -> Option<&SchurSystem> {
        self.schur.as_ref()
    }

    pub fn force(&self, sample: usize) -> Result<&[f64]> {
        let n = self.target_len;
        self.forces
            .get(sample * n..(sample + 1) * n)
            .filter(|_| self.k_free.is_some())
            .ok_or(Error::MissingForce(sample))
    }

    pub fn fc(&self, sample: usize) -> Result<&[f64]> {
        let n = self.target_len;
        self.fc
            .get(sample * n..(sample + 1) * n)
            .filter(|_| self.schur.is_some())
            .ok_or(Error::MissingForce(sample))
    }

    /// Scatters a predicted field into a physics vector; unselected entries of
    /// `out` become zero.
    pub fn gather(&self, field: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (v, sel) in field.iter().zip(&self.selector) {
            if let Some(i) = *sel {
                out[i] = *v;
            }
        }
    }

    /// Adds a physics-space gradient back onto the predicted-field gradient.
    pub fn scatter_add(&self, grad: &[f64], field_grad: &mut [f64]) {
        for (g, sel) in field_grad.iter_mut().zip(&self.selector) {
            if let Some(i) = *sel {
                *g += grad[i];
            }
        }
    }

    pub fn check_kind(&self, kind: LossKind) -> Result<()> {
        match kind {
            LossKind::Dd => Ok(()),
            LossKind::DdEc if self.k_free.is_none() => Err(Error::MissingPhysics {
                loss: "dd+ec",
                what: "a stiffness matrix",
            }),
            LossKind::DdSes if self.schur.is_none() => Err(Error::MissingPhysics {
                loss: "dd+ses",
                what: "a Schur system",
            }),
            _ => Ok(()),
        }
    }
}

/// Free-DOF index of every `(node, var)` entry of a field over `nodes`.
pub fn free_selector(free_dofs: &[usize], nodes: &[usize]) -> Vec<Option<usize>> {
    nodes
        .iter()
        .flat_map(|&n| (0..DOFS_PER_NODE).map(move |v| dof(n, v)))
        .map(|d| free_dofs.binary_search(&d).ok())
        .collect()
}

/// Sorted free-DOF indices belonging to `nodes`.
pub fn picked_free_dofs(free_dofs: &[usize], nodes: &[usize]) -> Vec<usize> {
    let mut picked: Vec<usize> = free_selector(free_dofs, nodes)
        .into_iter()
        .flatten()
        .collect();
    picked.sort_unstable();
    picked.dedup();
    picked
}
