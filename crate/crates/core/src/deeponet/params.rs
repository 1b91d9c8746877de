use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::spec::{DeepONetSpec, MlpSpec};
use crate::error::{Error, Result};

/// Offsets of one dense layer inside the flat parameter vector. Weights are
/// stored `in × out`, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub bias: usize,
}

impl LayerSlot {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.weights..self.weights + self.fan_in * self.fan_out
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias..self.bias + self.fan_out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemberLayout {
    pub branch: Vec<LayerSlot>,
    pub trunk: Vec<LayerSlot>,
    /// One combine bias per output function of this member.
    pub combine_bias: usize,
    /// First global output column served by this member.
    pub first_output: usize,
    pub n_outputs: usize,
    /// Whole parameter range owned by the member.
    pub range: std::ops::Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub members: Vec<MemberLayout>,
    pub len: usize,
}

fn mlp_slots(spec: &MlpSpec, offset: &mut usize) -> Vec<LayerSlot> {
    spec.layer_sizes
        .windows(2)
        .map(|w| {
            let slot = LayerSlot {
                fan_in: w[0],
                fan_out: w[1],
                weights: *offset,
                bias: *offset + w[0] * w[1],
            };
            *offset += w[0] * w[1] + w[1];
            slot
        })
        .collect()
}

impl Layout {
    pub fn new(spec: &DeepONetSpec) -> Result<Self> {
        spec.validate()?;
        let mut offset = 0;
        let per = spec.outputs_per_member();
        let members = (0..spec.n_members())
            .map(|m| {
                let start = offset;
                let branch = mlp_slots(&spec.branch, &mut offset);
                let trunk = mlp_slots(&spec.trunk, &mut offset);
                let combine_bias = offset;
                offset += per;
                MemberLayout {
                    branch,
                    trunk,
                    combine_bias,
                    first_output: m * per,
                    n_outputs: per,
                    range: start..offset,
                }
            })
            .collect();
        Ok(Self {
            members,
            len: offset,
        })
    }
}

/// All trainable values of a DeepONet (or ensemble) in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepONetParams {
    pub values: Vec<f64>,
}

impl DeepONetParams {
    pub fn zeros(layout: &Layout) -> Self {
        Self {
            values: vec![0.0; layout.len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check(&self, layout: &Layout) -> Result<()> {
        if self.values.len() != layout.len {
            return Err(Error::Dimension(format!(
                "parameter vector has {} values, layout needs {}",
                self.values.len(),
                layout.len
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(())
    }

    pub fn combine_bias(&self, layout: &Layout, member: usize) -> &[f64] {
        let m = &layout.members[member];
        &self.values[m.combine_bias..m.combine_bias + m.n_outputs]
    }
}

/// Glorot-normal weights (variance `2/(fan_in + fan_out)`), zero biases.
///
/// Draw order is member by member, branch layers then trunk layers.
pub fn init(spec: &DeepONetSpec, seed: u64) -> Result<DeepONetParams> {
    let layout = Layout::new(spec)?;
    let mut params = DeepONetParams::zeros(&layout);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for m in &layout.members {
        for slot in m.branch.iter().chain(&m.trunk) {
            let std = (2.0 / (slot.fan_in + slot.fan_out) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            for w in &mut params.values[slot.weight_range()] {
                *w = normal.sample(&mut rng);
            }
        }
    }
    Ok(params)
}
