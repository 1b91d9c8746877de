//! Load-case sampling, ground-truth generation, scalers, splits and the
//! on-disk dataset layout.
//!
//! A dataset directory holds `manifest.json` plus raw little-endian `f64`
//! arrays:
//!
//! | file          | shape                      | contents                               |
//! |---------------|----------------------------|----------------------------------------|
//! | `branch.f64`  | samples × sensors          | line-load intensity at chord nodes, kN/m |
//! | `trunk.f64`   | nodes × 2                  | node coordinates scaled to [0, 1]²     |
//! | `targets.f64` | samples × nodes × 3        | `u_x` (m), `u_y` (m), `r_z` (rad)      |
//! | `forces.f64`  | samples × free DOFs        | support-reduced nodal forces, N / N·m  |
//! | `fc.f64`      | samples × picked DOFs      | reduced forces (only with a Schur system) |

mod scaler;
mod split;

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use scaler::{fit_scalers, Scaler, VARIABLE_NAMES};
pub use split::{split, SplitRecord, STUDY_RATIOS};

use crate::blob::{self, ArrayRecord};
use crate::error::{Error, Result};
use crate::fem::{
    assemble, equivalent_nodal_loads, FrameModel, LoadCase, Scenario, StaticSolver, UvlDirection,
    DOFS_PER_NODE, MAX_INTENSITY_KN, MIN_INTENSITY_KN,
};
use crate::linalg::{reduce_force, SchurSystem};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_PER_SCENARIO: usize = 1016;

/// Draws `per_scenario` intensities for each scenario, scenario-major, i.i.d.
/// uniform on the admissible intensity range.
pub fn sample_cases(seed: u64, per_scenario: usize, uvl_direction: UvlDirection) -> Vec<LoadCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(3 * per_scenario);
    for scenario in Scenario::ALL {
        for _ in 0..per_scenario {
            cases.push(LoadCase {
                scenario,
                intensity: rng.random_range(MIN_INTENSITY_KN..=MAX_INTENSITY_KN),
                uvl_direction,
            });
        }
    }
    cases
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub sample_count: usize,
    pub seed: u64,
    pub per_scenario: usize,
    pub uvl_direction: UvlDirection,
    pub scenarios: Vec<Scenario>,
    /// kN/m, after clamping to the admissible minimum.
    pub intensities: Vec<f64>,
    pub n_sensors: usize,
    pub n_nodes: usize,
    pub n_vars: usize,
    pub span: f64,
    pub height: f64,
    /// Global DOF index of each entry in a force record.
    pub free_dofs: Vec<usize>,
    /// Free-DOF indices of the Schur picked set, when `fc.f64` is present.
    #[serde(default)]
    pub schur_picked: Option<Vec<usize>>,
    #[serde(default)]
    pub model_file: Option<String>,
    pub arrays: BTreeMap<String, ArrayRecord>,
    #[serde(default)]
    pub split: Option<SplitRecord>,
    #[serde(default)]
    pub scaler: Option<Scaler>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    /// samples × sensors, kN/m
    pub branch: Vec<f64>,
    /// nodes × 2, normalized
    pub trunk: Vec<f64>,
    /// samples × nodes × vars, physical
    pub targets: Vec<f64>,
    /// samples × free DOFs
    pub forces: Vec<f64>,
    /// samples × picked DOFs
    pub fc: Option<Vec<f64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.manifest.sample_count
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.sample_count == 0
    }

    pub fn n_free(&self) -> usize {
        self.manifest.free_dofs.len()
    }

    pub fn field_len(&self) -> usize {
        self.manifest.n_nodes * self.manifest.n_vars
    }

    pub fn branch_raw(&self, i: usize) -> &[f64] {
        let n = self.manifest.n_sensors;
        &self.branch[i * n..(i + 1) * n]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        let n = self.field_len();
        &self.targets[i * n..(i + 1) * n]
    }

    pub fn force(&self, i: usize) -> &[f64] {
        let n = self.n_free();
        &self.forces[i * n..(i + 1) * n]
    }

    pub fn fc(&self, i: usize) -> Option<&[f64]> {
        let n = self.manifest.schur_picked.as_ref()?.len();
        self.fc.as_ref().map(|fc| &fc[i * n..(i + 1) * n])
    }

    pub fn split_record(&self) -> Result<&SplitRecord> {
        self.manifest
            .split
            .as_ref()
            .ok_or_else(|| Error::Config("dataset has no train/test split".into()))
    }

    /// Assigns a stratified split and refits the scaler on its train part.
    pub fn apply_split(&mut self, ratio: f64, seed: u64) -> Result<()> {
        let record = split(&self.manifest.scenarios, ratio, seed)?;
        let scaler = fit_scalers(
            &self.branch,
            self.manifest.n_sensors,
            &self.targets,
            self.manifest.n_nodes,
            self.manifest.n_vars,
            &record.train,
        )?;
        self.manifest.split = Some(record);
        self.manifest.scaler = Some(scaler);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let arrays = &self.manifest.arrays;
        let put = |name: &str, values: &[f64]| -> Result<()> {
            let rec = arrays
                .get(name)
                .ok_or_else(|| Error::Parse(format!("manifest lacks array {name}")))?;
            blob::write(dir, rec, values)
        };
        put("branch", &self.branch)?;
        put("trunk", &self.trunk)?;
        put("targets", &self.targets)?;
        put("forces", &self.forces)?;
        if let Some(fc) = &self.fc {
            put("fc", fc)?;
        }
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)?;
        let get = |name: &str| -> Result<Vec<f64>> {
            let rec = manifest
                .arrays
                .get(name)
                .ok_or_else(|| Error::Parse(format!("manifest lacks array {name}")))?;
            blob::read(dir, rec)
        };
        let fc = if manifest.arrays.contains_key("fc") {
            Some(get("fc")?)
        } else {
            None
        };
        Ok(Self {
            branch: get("branch")?,
            trunk: get("trunk")?,
            targets: get("targets")?,
            forces: get("forces")?,
            fc,
            manifest,
        })
    }
}

/// Normalized node coordinates: x by span, y by height.
pub fn trunk_coordinates(model: &FrameModel) -> Vec<f64> {
    model
        .nodes
        .iter()
        .flat_map(|p| [p[0] / model.span, p[1] / model.height])
        .collect()
}

/// Solves every case and collects the raw arrays.
///
/// Cases below the minimum intensity are clamped up to it. `schur`, when
/// given, must partition the free DOFs; `fc.f64` is then filled as well.
/// `threads` > 1 solves cases concurrently; the output does not depend on it.
pub fn generate(
    model: &FrameModel,
    cases: &[LoadCase],
    schur: Option<&SchurSystem>,
    threads: usize,
) -> Result<Dataset> {
    let system = assemble(model)?;
    let solver = system.factorize()?;
    let n_free = system.free_dofs().len();
    if let Some(s) = schur {
        if s.partition().len() != n_free {
            return Err(Error::Partition(format!(
                "Schur system covers {} DOFs, model has {n_free} free DOFs",
                s.partition().len()
            )));
        }
    }
    let cases: Vec<LoadCase> = cases
        .iter()
        .map(|c| LoadCase {
            intensity: c.intensity.max(MIN_INTENSITY_KN),
            ..*c
        })
        .collect();

    let n = cases.len();
    let n_sensors = model.bottom_chord.len();
    let field_len = model.n_dofs();
    let n_picked = schur.map_or(0, |s| s.picked_len());
    let mut rows: Vec<CaseRow> = (0..n).map(|_| CaseRow::default()).collect();

    let threads = threads.clamp(1, n.max(1));
    let chunk = n.div_ceil(threads).max(1);
    std::thread::scope(|scope| -> Result<()> {
        let handles: Vec<_> = rows
            .chunks_mut(chunk)
            .enumerate()
            .map(|(c, out)| {
                let cases = &cases;
                let solver = &solver;
                scope.spawn(move || -> Result<()> {
                    for (k, row) in out.iter_mut().enumerate() {
                        let index = c * chunk + k;
                        *row = solve_case(model, solver, &cases[index], schur).map_err(|e| {
                            Error::CaseFailed {
                                index,
                                source: Box::new(e),
                            }
                        })?;
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("case worker panicked"))
            .collect::<Result<Vec<()>>>()?;
        Ok(())
    })?;

    let mut branch = Vec::with_capacity(n * n_sensors);
    let mut targets = Vec::with_capacity(n * field_len);
    let mut forces = Vec::with_capacity(n * n_free);
    let mut fc = schur.map(|_| Vec::with_capacity(n * n_picked));
    for row in rows {
        branch.extend(row.branch);
        targets.extend(row.target);
        forces.extend(row.force);
        if let Some(fc) = fc.as_mut() {
            fc.extend(row.fc);
        }
    }

    let mut arrays = BTreeMap::new();
    arrays.insert(
        "branch".into(),
        ArrayRecord::new("branch.f64", vec![n, n_sensors]),
    );
    arrays.insert(
        "trunk".into(),
        ArrayRecord::new("trunk.f64", vec![model.n_nodes(), 2]),
    );
    arrays.insert(
        "targets".into(),
        ArrayRecord::new("targets.f64", vec![n, model.n_nodes(), DOFS_PER_NODE]),
    );
    arrays.insert(
        "forces".into(),
        ArrayRecord::new("forces.f64", vec![n, n_free]),
    );
    if schur.is_some() {
        arrays.insert("fc".into(), ArrayRecord::new("fc.f64", vec![n, n_picked]));
    }

    let per_scenario = Scenario::ALL
        .iter()
        .map(|s| cases.iter().filter(|c| c.scenario == *s).count())
        .max()
        .unwrap_or(0);
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        sample_count: n,
        seed: 0,
        per_scenario,
        uvl_direction: cases.first().map(|c| c.uvl_direction).unwrap_or_default(),
        scenarios: cases.iter().map(|c| c.scenario).collect(),
        intensities: cases.iter().map(|c| c.intensity).collect(),
        n_sensors,
        n_nodes: model.n_nodes(),
        n_vars: DOFS_PER_NODE,
        span: model.span,
        height: model.height,
        free_dofs: system.free_dofs().to_vec(),
        schur_picked: schur.map(|s| s.partition().picked().to_vec()),
        model_file: None,
        arrays,
        split: None,
        scaler: None,
    };
    Ok(Dataset {
        manifest,
        branch,
        trunk: trunk_coordinates(model),
        targets,
        forces,
        fc,
    })
}

#[derive(Default)]
struct CaseRow {
    branch: Vec<f64>,
    target: Vec<f64>,
    force: Vec<f64>,
    fc: Vec<f64>,
}

fn solve_case(
    model: &FrameModel,
    solver: &StaticSolver,
    case: &LoadCase,
    schur: Option<&SchurSystem>,
) -> Result<CaseRow> {
    let f = equivalent_nodal_loads(model, case)?;
    let u = solver.solve(&f)?;
    let force = solver.system().to_free(&f);
    let fc = match schur {
        Some(s) => reduce_force(s, &force)?,
        None => Vec::new(),
    };
    Ok(CaseRow {
        branch: case.nodal_intensities(model),
        target: u,
        force,
        fc,
    })
}

/// Samples cases and generates the dataset in one go, recording the seed.
pub fn build_dataset(
    model: &FrameModel,
    seed: u64,
    per_scenario: usize,
    uvl_direction: UvlDirection,
    schur: Option<&SchurSystem>,
    threads: usize,
) -> Result<Dataset> {
    if per_scenario == 0 {
        return Err(Error::Config("per_scenario must be at least 1".into()));
    }
    let cases = sample_cases(seed, per_scenario, uvl_direction);
    let mut ds = generate(model, &cases, schur, threads)?;
    ds.manifest.seed = seed;
    ds.manifest.per_scenario = per_scenario;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_lattice, solve_static};

    #[test]
    fn case_counts_and_determinism() {
        let a = sample_cases(5, 1016, UvlDirection::default());
        assert_eq!(a.len(), 3048);
        let b = sample_cases(5, 1016, UvlDirection::default());
        assert_eq!(a, b);
        assert_eq!(a[0].scenario, Scenario::UdlHalf);
        assert_eq!(a[3047].scenario, Scenario::UdlFull);
    }

    #[test]
    fn intensities_bounded() {
        let cases = sample_cases(99, 33_334, UvlDirection::default());
        assert!(cases.len() >= 100_000);
        assert!(cases
            .iter()
            .all(|c| (MIN_INTENSITY_KN..=MAX_INTENSITY_KN).contains(&c.intensity)));
    }

    #[test]
    fn stored_target_is_solver_output() {
        let model = build_lattice(20.0, 5.0).unwrap();
        let case = LoadCase::new(Scenario::UdlFull, 1.0);
        let ds = generate(&model, &[case], None, 1).unwrap();
        let f = equivalent_nodal_loads(&model, &case).unwrap();
        let u = solve_static(&assemble(&model).unwrap(), &f).unwrap();
        assert_eq!(ds.target(0), u.as_slice());
        assert_eq!(ds.branch_raw(0), vec![1.0; 21].as_slice());
    }

    #[test]
    fn zero_intensity_clamped_and_doubling_is_linear() {
        let model = build_lattice(20.0, 5.0).unwrap();
        let cases = [
            LoadCase::new(Scenario::UdlHalf, 0.0),
            LoadCase::new(Scenario::UvlHalf, 3.0),
            LoadCase::new(Scenario::UvlHalf, 6.0),
        ];
        let ds = generate(&model, &cases, None, 2).unwrap();
        assert_eq!(ds.manifest.intensities[0], MIN_INTENSITY_KN);
        assert!(ds.target(0).iter().any(|v| *v != 0.0));
        let scale = ds.target(2).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in ds.target(1).iter().zip(ds.target(2)) {
            assert!((2.0 * a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let model = build_lattice(20.0, 5.0).unwrap();
        let a = build_dataset(&model, 3, 4, UvlDirection::default(), None, 1).unwrap();
        let b = build_dataset(&model, 3, 4, UvlDirection::default(), None, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn failing_case_reports_index() {
        let model = build_lattice(20.0, 5.0).unwrap();
        let cases = [
            LoadCase::new(Scenario::UdlHalf, 1.0),
            LoadCase::new(Scenario::UdlHalf, 99.0),
        ];
        let err = generate(&model, &cases, None, 1).unwrap_err();
        assert!(matches!(err, Error::CaseFailed { index: 1, .. }), "{err}");
    }

    #[test]
    fn scaler_ignores_test_split() {
        let model = build_lattice(20.0, 5.0).unwrap();
        let mut ds = build_dataset(&model, 1, 10, UvlDirection::default(), None, 1).unwrap();
        ds.apply_split(0.2, 4).unwrap();
        let before = ds.manifest.scaler.clone().unwrap();
        let test = ds.split_record().unwrap().test.clone();
        let fl = ds.field_len();
        let n_s = ds.manifest.n_sensors;
        // sentinel outliers in a test sample
        ds.targets[test[0] * fl..(test[0] + 1) * fl].fill(1e3);
        ds.branch[test[0] * n_s..(test[0] + 1) * n_s].fill(1e6);
        ds.apply_split(0.2, 4).unwrap();
        assert_eq!(ds.manifest.scaler.unwrap(), before);
    }
}
