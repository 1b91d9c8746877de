use super::mlp::{backward_batch, forward_batch, MlpCache};
use super::params::{DeepONetParams, Layout};
use super::spec::DeepONetSpec;
use crate::error::{Error, Result};

/// Grouped dot product of one branch output with a batch of trunk outputs.
///
/// `trunk_outs` is `n_points × width`; the width is cut into `biases.len()`
/// equal groups and output `[p][k] = Σ_{j ∈ group k} b_j·t_j(p) + bias_k`.
pub fn combine(branch_out: &[f64], trunk_outs: &[f64], biases: &[f64]) -> Result<Vec<f64>> {
    let width = branch_out.len();
    let groups = biases.len();
    if groups == 0 || !width.is_multiple_of(groups) {
        return Err(Error::Spec(format!(
            "width {width} cannot be split into {groups} groups"
        )));
    }
    if width == 0 || !trunk_outs.len().is_multiple_of(width) {
        return Err(Error::Dimension(format!(
            "trunk batch of {} values is not a multiple of width {width}",
            trunk_outs.len()
        )));
    }
    let gw = width / groups;
    Ok(trunk_outs
        .chunks_exact(width)
        .flat_map(|t| {
            (0..groups).map(move |k| {
                let r = k * gw..(k + 1) * gw;
                crate::linalg::dot(&branch_out[r.clone()], &t[r]) + biases[k]
            })
        })
        .collect())
}

#[derive(Debug, Clone, Default)]
pub struct MemberCache {
    pub branch: MlpCache,
    pub trunk: MlpCache,
}

#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    pub members: Vec<MemberCache>,
    pub batch: usize,
    pub points: usize,
    /// `batch × points × n_outputs`, normalized units.
    pub output: Vec<f64>,
    d_branch: Vec<f64>,
    d_trunk: Vec<f64>,
    scratch: Vec<f64>,
}

/// A DeepONet (split) or ensemble of DeepONets (independent) over one flat
/// parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: DeepONetSpec,
    layout: Layout,
}

impl Network {
    pub fn new(spec: DeepONetSpec) -> Result<Self> {
        let layout = Layout::new(&spec)?;
        Ok(Self { spec, layout })
    }

    pub fn spec(&self) -> &DeepONetSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn n_params(&self) -> usize {
        self.layout.len
    }

    pub fn n_outputs(&self) -> usize {
        self.spec.n_outputs
    }

    pub fn init(&self, seed: u64) -> DeepONetParams {
        super::params::init(&self.spec, seed).expect("spec validated on construction")
    }

    /// Forward pass for `batch` branch inputs against `points` trunk inputs.
    /// The result lands in `cache.output`, laid out `batch × points × n_outputs`.
    pub fn forward(
        &self,
        params: &DeepONetParams,
        branch_in: &[f64],
        trunk_in: &[f64],
        cache: &mut ForwardCache,
    ) -> Result<()> {
        let s_in = self.spec.branch.input_size();
        let t_in = self.spec.trunk.input_size();
        if !branch_in.len().is_multiple_of(s_in) || !trunk_in.len().is_multiple_of(t_in) {
            return Err(Error::Dimension(format!(
                "branch batch of {} values (input size {s_in}) or trunk batch of {} values (input size {t_in})",
                branch_in.len(),
                trunk_in.len()
            )));
        }
        if params.len() != self.layout.len {
            return Err(Error::Dimension(format!(
                "{} parameters for a layout of {}",
                params.len(),
                self.layout.len
            )));
        }
        let batch = branch_in.len() / s_in;
        let points = trunk_in.len() / t_in;
        let n_out = self.spec.n_outputs;
        let width = self.spec.width();
        let gw = self.spec.group_width();
        cache.batch = batch;
        cache.points = points;
        cache
            .members
            .resize_with(self.layout.members.len(), MemberCache::default);
        cache.output.clear();
        cache.output.resize(batch * points * n_out, 0.0);

        let p = &params.values;
        for (m, mc) in self.layout.members.iter().zip(cache.members.iter_mut()) {
            forward_batch(
                &m.branch,
                self.spec.branch.activation,
                p,
                branch_in,
                batch,
                &mut mc.branch,
            );
            forward_batch(
                &m.trunk,
                self.spec.trunk.activation,
                p,
                trunk_in,
                points,
                &mut mc.trunk,
            );
            let bias = &p[m.combine_bias..m.combine_bias + m.n_outputs];
            let bo = mc.branch.output();
            let to = mc.trunk.output();
            for b in 0..batch {
                let brow = &bo[b * width..(b + 1) * width];
                for pt in 0..points {
                    let trow = &to[pt * width..(pt + 1) * width];
                    let out = &mut cache.output[(b * points + pt) * n_out..][..n_out];
                    for k in 0..m.n_outputs {
                        let r = k * gw..(k + 1) * gw;
                        out[m.first_output + k] =
                            crate::linalg::dot(&brow[r.clone()], &trow[r]) + bias[k];
                    }
                }
            }
        }
        Ok(())
    }

    /// Accumulates `∂L/∂params` into `grads`, given `d_out = ∂L/∂output` for
    /// the batch of the last forward pass.
    pub fn backward(
        &self,
        params: &DeepONetParams,
        cache: &mut ForwardCache,
        d_out: &[f64],
        grads: &mut [f64],
    ) {
        let (batch, points) = (cache.batch, cache.points);
        let n_out = self.spec.n_outputs;
        let width = self.spec.width();
        let gw = self.spec.group_width();
        debug_assert_eq!(d_out.len(), batch * points * n_out);
        debug_assert_eq!(grads.len(), self.layout.len);
        let p = &params.values;

        for (m, mc) in self.layout.members.iter().zip(cache.members.iter()) {
            let bo = mc.branch.output();
            let to = mc.trunk.output();
            cache.d_branch.clear();
            cache.d_branch.resize(batch * width, 0.0);
            cache.d_trunk.clear();
            cache.d_trunk.resize(points * width, 0.0);
            for b in 0..batch {
                for pt in 0..points {
                    let d = &d_out[(b * points + pt) * n_out..][..n_out];
                    for k in 0..m.n_outputs {
                        let g = d[m.first_output + k];
                        if g == 0.0 {
                            continue;
                        }
                        grads[m.combine_bias + k] += g;
                        let r = k * gw..(k + 1) * gw;
                        let (b_lo, t_lo) = (b * width, pt * width);
                        for j in r {
                            cache.d_branch[b_lo + j] += g * to[t_lo + j];
                            cache.d_trunk[t_lo + j] += g * bo[b_lo + j];
                        }
                    }
                }
            }
            backward_batch(
                &m.branch,
                self.spec.branch.activation,
                p,
                &mc.branch,
                &mut cache.d_branch,
                grads,
                &mut cache.scratch,
            );
            backward_batch(
                &m.trunk,
                self.spec.trunk.activation,
                p,
                &mc.trunk,
                &mut cache.d_trunk,
                grads,
                &mut cache.scratch,
            );
        }
    }

    /// Prediction for one branch input over all trunk points, `points × n_outputs`.
    pub fn predict(
        &self,
        params: &DeepONetParams,
        branch_in: &[f64],
        trunk_in: &[f64],
    ) -> Result<Vec<f64>> {
        if branch_in.len() != self.spec.branch.input_size() {
            return Err(Error::Dimension(format!(
                "branch input has {} values, expected {}",
                branch_in.len(),
                self.spec.branch.input_size()
            )));
        }
        let mut cache = ForwardCache::default();
        self.forward(params, branch_in, trunk_in, &mut cache)?;
        Ok(cache.output)
    }
}
