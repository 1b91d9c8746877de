use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VARIABLE_NAMES: [&str; 3] = ["u_x", "u_y", "r_z"];

/// Normalization constants fitted on the training split.
///
/// Outputs use a per-variable z-score (population standard deviation);
/// branch inputs are divided by one global max-abs value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scaler {
    pub output_mean: Vec<f64>,
    pub output_std: Vec<f64>,
    pub branch_max_abs: f64,
}

impl Scaler {
    pub fn n_vars(&self) -> usize {
        self.output_mean.len()
    }

    /// Identity scaling for `n_vars` output variables.
    pub fn identity(n_vars: usize) -> Self {
        Self {
            output_mean: vec![0.0; n_vars],
            output_std: vec![1.0; n_vars],
            branch_max_abs: 1.0,
        }
    }

    pub fn normalize_branch(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().map(|v| v / self.branch_max_abs).collect()
    }

    /// Field stored point-major with `n_vars` values per point.
    pub fn normalize_field(&self, field: &[f64]) -> Vec<f64> {
        let nv = self.n_vars();
        field
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.output_mean[i % nv]) / self.output_std[i % nv])
            .collect()
    }

    pub fn denormalize_field(&self, field: &[f64]) -> Vec<f64> {
        let nv = self.n_vars();
        field
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.output_std[i % nv] + self.output_mean[i % nv])
            .collect()
    }
}

/// Fits a scaler on the given sample indices only.
///
/// `branch` holds `n_sensors` raw values per sample and `targets` holds
/// `n_points × n_vars` physical values per sample.
pub fn fit_scalers(
    branch: &[f64],
    n_sensors: usize,
    targets: &[f64],
    n_points: usize,
    n_vars: usize,
    train: &[usize],
) -> Result<Scaler> {
    if train.is_empty() {
        return Err(Error::EmptySplit);
    }
    let per_sample = n_points * n_vars;
    let var_name = |v: usize| {
        VARIABLE_NAMES
            .get(v)
            .map_or_else(|| format!("#{v}"), |s| s.to_string())
    };
    if train.len() < 2 {
        return Err(Error::ZeroVariance(format!(
            "{} (a single training sample gives a degenerate scale)",
            (0..n_vars).map(var_name).collect::<Vec<_>>().join(", ")
        )));
    }

    let count = (train.len() * n_points) as f64;
    let mut mean = vec![0.0; n_vars];
    for &s in train {
        let field = &targets[s * per_sample..(s + 1) * per_sample];
        for (i, v) in field.iter().enumerate() {
            mean[i % n_vars] += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);

    let mut var = vec![0.0; n_vars];
    for &s in train {
        let field = &targets[s * per_sample..(s + 1) * per_sample];
        for (i, v) in field.iter().enumerate() {
            let d = v - mean[i % n_vars];
            var[i % n_vars] += d * d;
        }
    }
    let std: Vec<f64> = var.iter().map(|v| (v / count).sqrt()).collect();
    for (v, s) in std.iter().enumerate() {
        let scale = mean[v].abs().max(f64::MIN_POSITIVE);
        if !(*s > 1e-14 * scale) || *s == 0.0 {
            return Err(Error::ZeroVariance(var_name(v)));
        }
    }

    let branch_max_abs = train
        .iter()
        .flat_map(|&s| &branch[s * n_sensors..(s + 1) * n_sensors])
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if branch_max_abs == 0.0 {
        return Err(Error::ZeroVariance("branch input".into()));
    }

    Ok(Scaler {
        output_mean: mean,
        output_std: std,
        branch_max_abs,
    })
}
