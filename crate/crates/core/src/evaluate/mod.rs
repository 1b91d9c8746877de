//! Inference, Schur-based field recovery, per-variable error statistics and
//! CSV/JSON exports.

mod export;

use serde::{Deserialize, Serialize};

pub use export::{field_csv, histogram, histogram_csv, write_exports, HIST_BINS};

use crate::dataset::{Dataset, VARIABLE_NAMES};
use crate::deeponet::{ModelFile, Network};
use crate::error::{Error, Result};
use crate::fem::{GlobalSystem, DOFS_PER_NODE};
use crate::linalg::{recover_interior, schur_reduce, Partition, SchurSystem};
use crate::training::{free_selector, picked_free_dofs};

/// Schur recovery state for a network that predicts only picked nodes.
#[derive(Debug, Clone)]
struct Recovery {
    schur: SchurSystem,
    /// predicted-field entry → picked-DOF position
    selector: Vec<Option<usize>>,
}

/// A loaded model ready to produce physical full fields.
#[derive(Debug, Clone)]
pub struct Predictor {
    model: ModelFile,
    net: Network,
    system: GlobalSystem,
    recovery: Option<Recovery>,
}

impl Predictor {
    pub fn new(model: ModelFile, system: GlobalSystem) -> Result<Self> {
        let net = model.network()?;
        let nodes = &model.manifest.predicted_nodes;
        let n_nodes = system.n_dofs() / DOFS_PER_NODE;
        if nodes.iter().any(|&n| n >= n_nodes) {
            return Err(Error::Model("predicted node outside the structure".into()));
        }
        let full = nodes.len() == n_nodes && nodes.iter().enumerate().all(|(i, &n)| i == n);
        let recovery = if full {
            None
        } else {
            let free = system.free_dofs();
            let picked = picked_free_dofs(free, nodes);
            let partition = Partition::from_picked(free.len(), &picked)?;
            let schur = schur_reduce(&system.k_free(), &partition)?;
            let selector = free_selector(free, nodes)
                .into_iter()
                .map(|f| f.and_then(|f| picked.binary_search(&f).ok()))
                .collect();
            Some(Recovery { schur, selector })
        };
        Ok(Self {
            model,
            net,
            system,
            recovery,
        })
    }

    pub fn model(&self) -> &ModelFile {
        &self.model
    }

    pub fn system(&self) -> &GlobalSystem {
        &self.system
    }

    /// True when the network predicts a node subset and fields need recovery.
    pub fn uses_recovery(&self) -> bool {
        self.recovery.is_some()
    }

    /// Physical values at the predicted nodes (`nodes × 3`), with constrained
    /// DOFs pinned to zero.
    pub fn predict_nodes(&self, branch_raw: &[f64]) -> Result<Vec<f64>> {
        let m = &self.model.manifest;
        let x = m.scaler.normalize_branch(branch_raw);
        let out = self.net.predict(&self.model.params, &x, &m.trunk)?;
        let mut field = m.scaler.denormalize_field(&out);
        let constrained = self.system.constrained_dofs();
        for (k, &n) in m.predicted_nodes.iter().enumerate() {
            for v in 0..DOFS_PER_NODE {
                if constrained.contains(&(n * DOFS_PER_NODE + v)) {
                    field[k * DOFS_PER_NODE + v] = 0.0;
                }
            }
        }
        Ok(field)
    }

    /// Full physical field over every DOF. Subset models need the sample's
    /// free-DOF force vector for recovery.
    pub fn full_field(&self, branch_raw: &[f64], f_free: Option<&[f64]>) -> Result<Vec<f64>> {
        let pred = self.predict_nodes(branch_raw)?;
        match &self.recovery {
            None => Ok(pred),
            Some(r) => {
                let f = f_free.ok_or(Error::MissingForce(0))?;
                let mut u_i = vec![0.0; r.schur.picked_len()];
                for (v, sel) in pred.iter().zip(&r.selector) {
                    if let Some(i) = *sel {
                        u_i[i] = *v;
                    }
                }
                let u_n = recover_interior(&r.schur, &u_i, f)?;
                let free = r.schur.partition().scatter(&u_i, &u_n);
                Ok(self.system.from_free(&free))
            }
        }
    }
}

/// Physical field for all nodes from a full-field model.
pub fn predict_field(
    model: &ModelFile,
    system: &GlobalSystem,
    branch_raw: &[f64],
) -> Result<Vec<f64>> {
    Predictor::new(model.clone(), system.clone())?.predict_nodes(branch_raw)
}

/// Full field from picked-DOF values: picked entries are taken as given and
/// the rest come from interior recovery, scattered to global DOF order.
pub fn recover_full(
    system: &GlobalSystem,
    schur: &SchurSystem,
    u_picked: &[f64],
    f_free: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let f = f_free.ok_or(Error::MissingForce(0))?;
    let u_n = recover_interior(schur, u_picked, f)?;
    Ok(system.from_free(&schur.partition().scatter(u_picked, &u_n)))
}

/// Relative L2 error per variable; `None` where the true variable is zero.
pub fn per_variable_errors(pred: &[f64], truth: &[f64], n_vars: usize) -> Vec<Option<f64>> {
    (0..n_vars)
        .map(|v| {
            let (mut num, mut den) = (0.0, 0.0);
            for (p, t) in pred.iter().zip(truth).skip(v).step_by(n_vars) {
                num += (p - t) * (p - t);
                den += t * t;
            }
            (den > 0.0).then(|| (num / den).sqrt())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableStats {
    pub name: String,
    /// percent
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub samples: usize,
    /// Samples skipped because the true variable was identically zero.
    pub excluded: usize,
    /// `mean (min~max)`
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub variables: Vec<VariableStats>,
}

impl ErrorStats {
    /// Aggregates per-sample relative errors (fractions) into percentages.
    pub fn from_errors(errors: &[Vec<Option<f64>>], names: &[&str]) -> Self {
        let variables = names
            .iter()
            .enumerate()
            .map(|(v, name)| {
                let vals: Vec<f64> = errors
                    .iter()
                    .filter_map(|e| e[v])
                    .map(|x| 100.0 * x)
                    .collect();
                let excluded = errors.len() - vals.len();
                let (mean, min, max) = if vals.is_empty() {
                    (f64::NAN, f64::NAN, f64::NAN)
                } else {
                    (
                        vals.iter().sum::<f64>() / vals.len() as f64,
                        vals.iter().cloned().fold(f64::INFINITY, f64::min),
                        vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                    )
                };
                VariableStats {
                    name: name.to_string(),
                    mean,
                    min,
                    max,
                    samples: vals.len(),
                    excluded,
                    summary: format!("{mean:.2} ({min:.2}~{max:.2})"),
                }
            })
            .collect();
        Self { variables }
    }

    pub fn variable(&self, name: &str) -> Option<&VariableStats> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Largest per-variable mean error, percent.
    pub fn max_mean(&self) -> f64 {
        self.variables
            .iter()
            .map(|v| v.mean)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Average of the per-variable mean errors, percent.
    pub fn overall_mean(&self) -> f64 {
        self.variables.iter().map(|v| v.mean).sum::<f64>() / self.variables.len().max(1) as f64
    }
}

/// Full-field predictions and errors for a set of dataset samples.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub samples: Vec<usize>,
    /// one full field per sample, global DOF order
    pub predictions: Vec<Vec<f64>>,
    /// per sample, per variable relative errors (fractions)
    pub errors: Vec<Vec<Option<f64>>>,
    pub stats: ErrorStats,
}

/// Predicts and scores `samples`, spreading work over `threads` workers.
/// Results do not depend on the thread count.
pub fn evaluate(
    predictor: &Predictor,
    ds: &Dataset,
    samples: &[usize],
    threads: usize,
) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::EmptySplit);
    }
    if let Some(&bad) = samples.iter().find(|&&i| i >= ds.len()) {
        return Err(Error::Config(format!("sample {bad} outside the dataset")));
    }
    let nv = ds.manifest.n_vars;
    let run = |i: usize| -> Result<(Vec<f64>, Vec<Option<f64>>)> {
        let field = predictor.full_field(ds.branch_raw(i), Some(ds.force(i)))?;
        let err = per_variable_errors(&field, ds.target(i), nv);
        Ok((field, err))
    };
    let threads = threads.clamp(1, samples.len());
    let chunk = samples.len().div_ceil(threads);
    let results: Vec<Result<(Vec<f64>, Vec<Option<f64>>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = samples
            .chunks(chunk)
            .map(|ids| scope.spawn(move || ids.iter().map(|&i| run(i)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });
    let mut predictions = Vec::with_capacity(samples.len());
    let mut errors = Vec::with_capacity(samples.len());
    for r in results {
        let (f, e) = r?;
        predictions.push(f);
        errors.push(e);
    }
    let stats = ErrorStats::from_errors(&errors, &VARIABLE_NAMES[..nv]);
    Ok(Evaluation {
        samples: samples.to_vec(),
        predictions,
        errors,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, Scaler};
    use crate::deeponet::{DeepONetParams, DeepONetSpec};
    use crate::fem::{assemble, build_lattice, UvlDirection};
    use crate::linalg::reduce_force;
    use crate::training::DEFAULT_SES_NODES;

    #[test]
    fn per_variable_uniform_scaling() {
        let truth = [1.0, -2.0, 0.5, 3.0, 4.0, -0.1];
        let pred: Vec<f64> = truth.iter().map(|v| 1.01 * v).collect();
        for e in per_variable_errors(&pred, &truth, 3) {
            assert!((100.0 * e.unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(per_variable_errors(&truth, &truth, 3)
            .iter()
            .all(|e| *e == Some(0.0)));
    }

    #[test]
    fn stats_ordering_and_exclusion() {
        let errs = vec![vec![Some(0.01), None], vec![Some(0.03), Some(0.2)]];
        let s = ErrorStats::from_errors(&errs, &["a", "b"]);
        let a = s.variable("a").unwrap();
        assert!((a.mean - 2.0).abs() < 1e-12 && a.min <= a.mean && a.mean <= a.max);
        assert_eq!(s.variable("b").unwrap().excluded, 1);
    }

    #[test]
    fn stats_invariant_under_node_permutation() {
        let truth = [1.0, 2.0, 3.0, -1.0, 0.5, 0.25, 4.0, -3.0, 1.0];
        let pred = [1.1, 2.0, 2.9, -1.2, 0.5, 0.3, 4.0, -2.0, 1.0];
        let perm = [2, 0, 1];
        let shuffle = |f: &[f64]| -> Vec<f64> {
            perm.iter()
                .flat_map(|&n| f[n * 3..n * 3 + 3].to_vec())
                .collect()
        };
        assert_eq!(
            per_variable_errors(&pred, &truth, 3),
            per_variable_errors(&shuffle(&pred), &shuffle(&truth), 3)
        );
    }

    #[test]
    fn zero_model_gives_scaler_mean_and_pinned_supports() {
        let model = build_lattice(20.0, 5.0).unwrap();
        let sys = assemble(&model).unwrap();
        let spec = DeepONetSpec::split_2d();
        let net = Network::new(spec.clone()).unwrap();
        let scaler = Scaler {
            output_mean: vec![1e-5, -2e-5, 3e-6],
            output_std: vec![1.0, 1.0, 1.0],
            branch_max_abs: 15.0,
        };
        let trunk = crate::dataset::trunk_coordinates(&model);
        let file = ModelFile::new(
            spec,
            0,
            "dd",
            scaler,
            (0..56).collect(),
            trunk,
            DeepONetParams::zeros(net.layout()),
        );
        let f = predict_field(&file, &sys, &[1.0; 21]).unwrap();
        assert_eq!(f.len(), 168);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[61], 0.0);
        assert_eq!(f[2], 3e-6);
        assert_eq!(f[3], 1e-5);
        assert_eq!(f[4], -2e-5);
    }

    fn ses_fixture() -> (GlobalSystem, SchurSystem, Dataset) {
        let model = build_lattice(20.0, 5.0).unwrap();
        let sys = assemble(&model).unwrap();
        let picked = picked_free_dofs(sys.free_dofs(), &DEFAULT_SES_NODES);
        let p = Partition::from_picked(sys.free_dofs().len(), &picked).unwrap();
        let schur = schur_reduce(&sys.k_free(), &p).unwrap();
        let ds = build_dataset(&model, 3, 3, UvlDirection::default(), None, 1).unwrap();
        (sys, schur, ds)
    }

    #[test]
    fn recovery_from_exact_reduced_solution_matches_direct_solve() {
        let (sys, schur, ds) = ses_fixture();
        let s_fact =
            crate::linalg::factor(schur.s_matrix(), crate::linalg::FactorKind::Cholesky).unwrap();
        for i in 0..ds.len() {
            let f = ds.force(i);
            let fc = reduce_force(&schur, f).unwrap();
            let u_i = s_fact.solve(&fc).unwrap();
            let full = recover_full(&sys, &schur, &u_i, Some(f)).unwrap();
            let truth = ds.target(i);
            let scale = crate::linalg::max_abs(truth);
            let err = full
                .iter()
                .zip(truth)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-9 * scale, "sample {i}: {err} vs {scale}");
        }
    }

    #[test]
    fn recovery_is_linear_in_picked_values() {
        let (sys, schur, ds) = ses_fixture();
        let f = ds.force(0);
        let n = schur.picked_len();
        let base_u = vec![1e-5; n];
        let base = recover_full(&sys, &schur, &base_u, Some(f)).unwrap();
        let mut du = base_u.clone();
        let delta = 2e-6;
        du[4] += delta;
        let pert = recover_full(&sys, &schur, &du, Some(f)).unwrap();
        // expected change in remaining DOFs: −K_NN⁻¹·K_NI·(δ e₄)
        let mut e = vec![0.0; n];
        e[4] = delta;
        let rhs: Vec<f64> = schur.kni().matvec(&e).unwrap().iter().map(|v| -v).collect();
        let expect_n = schur.knn().solve(&rhs).unwrap();
        let expect = sys.from_free(&schur.partition().scatter(&e, &expect_n));
        for ((a, b), c) in pert.iter().zip(&base).zip(&expect) {
            assert!((a - b - c).abs() <= 1e-9 * delta);
        }
        let zero = recover_full(&sys, &schur, &vec![0.0; n], Some(&vec![0.0; f.len()])).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        assert!(matches!(
            recover_full(&sys, &schur, &base_u, None),
            Err(Error::MissingForce(_))
        ));
    }
}
