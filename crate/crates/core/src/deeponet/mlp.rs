//! Batched dense forward and reverse passes over a flat parameter slice.

use super::params::LayerSlot;
use super::spec::{Activation, MlpSpec};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};

/// Per-layer activations from the last forward pass.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    pub rows: usize,
    pub input: Vec<f64>,
    /// Pre-activation per layer, `rows × fan_out`.
    pub pre: Vec<Vec<f64>>,
    /// Post-activation per layer; the last entry is the network output.
    pub post: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().map_or(&[], Vec::as_slice)
    }
}

/// Forward pass for `rows` inputs stored row-major in `x`.
pub fn forward_batch(
    slots: &[LayerSlot],
    activation: Activation,
    params: &[f64],
    x: &[f64],
    rows: usize,
    cache: &mut MlpCache,
) {
    let n_layers = slots.len();
    debug_assert_eq!(x.len(), rows * slots[0].fan_in);
    cache.rows = rows;
    cache.input.clear();
    cache.input.extend_from_slice(x);
    cache.pre.resize_with(n_layers, Vec::new);
    cache.post.resize_with(n_layers, Vec::new);

    for (l, slot) in slots.iter().enumerate() {
        let w = &params[slot.weight_range()];
        let b = &params[slot.bias_range()];
        let (fi, fo) = (slot.fan_in, slot.fan_out);
        let mut z = std::mem::take(&mut cache.pre[l]);
        z.clear();
        z.resize(rows * fo, 0.0);
        {
            let input: &[f64] = if l == 0 {
                &cache.input
            } else {
                &cache.post[l - 1]
            };
            for r in 0..rows {
                let zr = &mut z[r * fo..(r + 1) * fo];
                zr.copy_from_slice(b);
                for (k, &xv) in input[r * fi..(r + 1) * fi].iter().enumerate() {
                    if xv != 0.0 {
                        axpy(xv, &w[k * fo..(k + 1) * fo], zr);
                    }
                }
            }
        }
        let y = &mut cache.post[l];
        y.clear();
        if l + 1 < n_layers {
            y.extend(z.iter().map(|&v| activation.apply(v)));
        } else {
            y.extend_from_slice(&z);
        }
        cache.pre[l] = z;
    }
}

/// Accumulates parameter gradients into `grads` given `d_out`, the gradient
/// of the loss with respect to the network output (`rows × fan_out`).
/// `d_out` is used as scratch and left in an unspecified state.
pub fn backward_batch(
    slots: &[LayerSlot],
    activation: Activation,
    params: &[f64],
    cache: &MlpCache,
    d_out: &mut Vec<f64>,
    grads: &mut [f64],
    scratch: &mut Vec<f64>,
) {
    let rows = cache.rows;
    let n_layers = slots.len();
    for l in (0..n_layers).rev() {
        let slot = slots[l];
        let (fi, fo) = (slot.fan_in, slot.fan_out);
        let dz = &mut *d_out;
        if l + 1 < n_layers {
            for ((d, &z), &y) in dz.iter_mut().zip(&cache.pre[l]).zip(&cache.post[l]) {
                *d *= activation.derivative(z, y);
            }
        }
        let input: &[f64] = if l == 0 {
            &cache.input
        } else {
            &cache.post[l - 1]
        };
        {
            let (gw, gb) = grads.split_at_mut(slot.bias);
            let gw = &mut gw[slot.weights..];
            let gb = &mut gb[..fo];
            for r in 0..rows {
                let dzr = &dz[r * fo..(r + 1) * fo];
                axpy(1.0, dzr, gb);
                for (k, &xv) in input[r * fi..(r + 1) * fi].iter().enumerate() {
                    if xv != 0.0 {
                        axpy(xv, dzr, &mut gw[k * fo..(k + 1) * fo]);
                    }
                }
            }
        }
        if l > 0 {
            let w = &params[slot.weight_range()];
            scratch.clear();
            scratch.resize(rows * fi, 0.0);
            for r in 0..rows {
                let dzr = &dz[r * fo..(r + 1) * fo];
                for k in 0..fi {
                    scratch[r * fi + k] = dot(dzr, &w[k * fo..(k + 1) * fo]);
                }
            }
            std::mem::swap(d_out, scratch);
        }
    }
}

/// Slots for a standalone MLP whose parameters start at offset 0.
pub fn standalone_slots(spec: &MlpSpec) -> Vec<LayerSlot> {
    let mut offset = 0;
    spec.layer_sizes
        .windows(2)
        .map(|w| {
            let s = LayerSlot {
                fan_in: w[0],
                fan_out: w[1],
                weights: offset,
                bias: offset + w[0] * w[1],
            };
            offset += w[0] * w[1] + w[1];
            s
        })
        .collect()
}

/// Single-input forward pass; `params` holds exactly this MLP's parameters.
pub fn mlp_forward(spec: &MlpSpec, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    spec.validate("mlp")?;
    if x.len() != spec.input_size() {
        return Err(Error::Dimension(format!(
            "mlp input has {} values, expected {}",
            x.len(),
            spec.input_size()
        )));
    }
    if params.len() != spec.n_params() {
        return Err(Error::Dimension(format!(
            "mlp has {} parameters, expected {}",
            params.len(),
            spec.n_params()
        )));
    }
    let slots = standalone_slots(spec);
    let mut cache = MlpCache::default();
    forward_batch(&slots, spec.activation, params, x, 1, &mut cache);
    Ok(cache.output().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_net_gives_zero() {
        let spec = MlpSpec::new(vec![3, 4, 2], Activation::Tanh);
        let p = vec![0.0; spec.n_params()];
        assert_eq!(
            mlp_forward(&spec, &p, &[1.0, -2.0, 3.0]).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn identity_layer() {
        let spec = MlpSpec::new(vec![3, 3], Activation::Tanh);
        let mut p = vec![0.0; spec.n_params()];
        for i in 0..3 {
            p[i * 3 + i] = 1.0;
        }
        let x = [0.3, -7.0, 2.0];
        assert_eq!(mlp_forward(&spec, &p, &x).unwrap(), x.to_vec());
    }

    #[test]
    fn scalar_tanh_chain() {
        // [w1, b1, w2, b2]
        let spec = MlpSpec::new(vec![1, 1, 1], Activation::Tanh);
        let y = mlp_forward(&spec, &[1.0, 0.0, 1.0, 0.0], &[0.5]).unwrap();
        assert!((y[0] - 0.5f64.tanh()).abs() < 1e-15);
        assert!((y[0] - 0.462117).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch() {
        let spec = MlpSpec::new(vec![2, 2], Activation::Relu);
        let p = vec![0.0; spec.n_params()];
        assert!(mlp_forward(&spec, &p, &[1.0]).is_err());
        assert!(mlp_forward(&spec, &p[..3], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn batch_rows_independent() {
        let spec = MlpSpec::new(vec![2, 5, 3], Activation::Sigmoid);
        let p: Vec<f64> = (0..spec.n_params())
            .map(|i| ((i * 7 % 13) as f64 - 6.0) / 5.0)
            .collect();
        let slots = standalone_slots(&spec);
        let x = [0.1, 0.2, -0.4, 0.9];
        let mut cache = MlpCache::default();
        forward_batch(&slots, spec.activation, &p, &x, 2, &mut cache);
        let a = mlp_forward(&spec, &p, &x[..2]).unwrap();
        let b = mlp_forward(&spec, &p, &x[2..]).unwrap();
        assert_eq!(&cache.output()[..3], a.as_slice());
        assert_eq!(&cache.output()[3..], b.as_slice());
    }

    #[test]
    fn backward_matches_finite_differences() {
        for act in [Activation::Tanh, Activation::Sigmoid, Activation::Sin] {
            let spec = MlpSpec::new(vec![3, 4, 4, 2], act);
            let slots = standalone_slots(&spec);
            let mut p: Vec<f64> = (0..spec.n_params())
                .map(|i| ((i * 11 % 17) as f64 - 8.0) / 9.0)
                .collect();
            let x = [0.3, -0.5, 0.8, 0.1, 0.0, -0.9];
            let weights = [0.7, -1.3, 0.4, 2.0];
            let loss = |p: &[f64]| {
                let mut c = MlpCache::default();
                forward_batch(&slots, act, p, &x, 2, &mut c);
                c.output()
                    .iter()
                    .zip(&weights)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            };
            let mut cache = MlpCache::default();
            forward_batch(&slots, act, &p, &x, 2, &mut cache);
            let mut grads = vec![0.0; p.len()];
            let mut d = weights.to_vec();
            backward_batch(&slots, act, &p, &cache, &mut d, &mut grads, &mut Vec::new());
            let h = 1e-6;
            for i in 0..p.len() {
                let orig = p[i];
                p[i] = orig + h;
                let up = loss(&p);
                p[i] = orig - h;
                let dn = loss(&p);
                p[i] = orig;
                let fd = (up - dn) / (2.0 * h);
                assert!(
                    (fd - grads[i]).abs() < 1e-7,
                    "{act:?} param {i}: {fd} vs {}",
                    grads[i]
                );
            }
        }
    }
}
