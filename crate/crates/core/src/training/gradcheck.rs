use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::context::PhysicsContext;
use super::loss::{LossKind, LossSpec};
use super::trainer::{loss_gradient, TrainData};
use crate::dataset::Scaler;
use crate::deeponet::{Activation, DeepONetParams, DeepONetSpec, Network, Strategy};
use crate::error::Result;
use crate::linalg::{reduce_force, schur_reduce, Matrix, Partition};

const STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub kind: LossKind,
    pub strategy: Strategy,
    pub n_params: usize,
    /// max over parameters of |analytic − central difference| / max(1, |analytic|)
    pub max_deviation: f64,
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let a: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let a = Matrix::from_vec(n, n, a).expect("finite");
    let mut k = a.transpose().matmul(&a).expect("square");
    for i in 0..n {
        k.data_mut()[i * n + i] += 1.0;
    }
    k
}

/// Compares analytic and central-difference gradients of the composite loss
/// on a width-6 toy network.
///
/// The energy case uses a 6-DOF stiffness matrix over two predicted points;
/// the Schur case a 2-DOF reduced system of a 4-DOF matrix over one point.
pub fn grad_check(kind: LossKind, strategy: Strategy, seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = match kind {
        LossKind::Dd => 3,
        LossKind::DdEc => 2,
        LossKind::DdSes => 1,
    };
    let samples = 3;
    let sensors = 4;
    let spec = DeepONetSpec::uniform(sensors, 2, 6, 3, 3, strategy, Activation::Tanh);
    let net = Network::new(spec)?;
    let field_len = points * 3;
    let mut draw = |n: usize, lo: f64, hi: f64| -> Vec<f64> {
        (0..n).map(|_| rng.random_range(lo..hi)).collect()
    };
    let branch = draw(samples * sensors, -1.0, 1.0);
    let trunk = draw(points * 2, 0.0, 1.0);
    let targets = draw(samples * field_len, -1.0, 1.0);
    let forces = draw(samples * 6, -1.0, 1.0);
    let ids: Vec<usize> = (0..samples).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let ctx = match kind {
        LossKind::Dd => PhysicsContext::none(field_len),
        LossKind::DdEc => {
            PhysicsContext::energy(random_spd(6, &mut rng), forces, (0..6).map(Some).collect())?
        }
        LossKind::DdSes => {
            let k = random_spd(4, &mut rng);
            let p = Partition::from_picked(4, &[0, 2])?;
            let s = schur_reduce(&k, &p)?;
            let mut fc = Vec::new();
            for f in forces.chunks_exact(6) {
                fc.extend(reduce_force(&s, &f[..4])?);
            }
            PhysicsContext::with_schur(s, fc, vec![Some(0), Some(1), None])?
        }
    };
    let data = TrainData {
        n_sensors: sensors,
        branch,
        trunk,
        targets,
        field_len,
        scaler: Scaler {
            output_mean: vec![0.1, -0.2, 0.05],
            output_std: vec![0.5, 2.0, 1.5],
            branch_max_abs: 1.0,
        },
        train: ids.clone(),
        test: Vec::new(),
    };
    let loss = LossSpec::new(kind);
    let mut params: DeepONetParams = net.init(seed);
    // nonzero combine biases so their gradient path is exercised
    for m in &net.layout().members {
        for k in 0..m.n_outputs {
            params.values[m.combine_bias + k] = 0.1 * (k as f64 + 1.0);
        }
    }
    let (_, analytic) = loss_gradient(&net, &params, &data, &ctx, &loss, &ids)?;
    let mut max_dev: f64 = 0.0;
    for i in 0..params.len() {
        let orig = params.values[i];
        params.values[i] = orig + STEP;
        let up = loss_gradient(&net, &params, &data, &ctx, &loss, &ids)?
            .0
            .total;
        params.values[i] = orig - STEP;
        let dn = loss_gradient(&net, &params, &data, &ctx, &loss, &ids)?
            .0
            .total;
        params.values[i] = orig;
        let fd = (up - dn) / (2.0 * STEP);
        let dev = (analytic[i] - fd).abs() / analytic[i].abs().max(1.0);
        max_dev = max_dev.max(dev);
    }
    Ok(GradCheckReport {
        kind,
        strategy,
        n_params: params.len(),
        max_deviation: max_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_kinds_pass_for_both_strategies() {
        for kind in [LossKind::Dd, LossKind::DdEc, LossKind::DdSes] {
            for strategy in [Strategy::Split, Strategy::Independent] {
                let r = grad_check(kind, strategy, 7).unwrap();
                assert!(r.max_deviation < 1e-5, "{r:?}");
            }
        }
    }

    #[test]
    fn constant_predictor_bias_gradient() {
        // zero network: prediction is the bias b at every point;
        // d/db ‖b·1 − t‖/‖t‖ = Σ(b − t_j) / (‖b·1 − t‖ ‖t‖)
        let spec = DeepONetSpec::uniform(2, 2, 3, 2, 1, Strategy::Split, Activation::Tanh);
        let net = Network::new(spec).unwrap();
        let mut params = DeepONetParams::zeros(net.layout());
        let b = 0.4;
        params.values[net.layout().members[0].combine_bias] = b;
        let t = [1.0, 2.0, -0.5];
        let data = TrainData {
            n_sensors: 2,
            branch: vec![0.3, 0.7],
            trunk: vec![0.0, 0.0, 0.5, 0.0, 1.0, 0.0],
            targets: t.to_vec(),
            field_len: 3,
            scaler: Scaler::identity(1),
            train: vec![0],
            test: vec![],
        };
        let ctx = PhysicsContext::none(3);
        let (_, g) = loss_gradient(
            &net,
            &params,
            &data,
            &ctx,
            &LossSpec::new(LossKind::Dd),
            &[0],
        )
        .unwrap();
        let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dn = t.iter().map(|v| (b - v) * (b - v)).sum::<f64>().sqrt();
        let expect = t.iter().map(|v| b - v).sum::<f64>() / (dn * tn);
        let got = g[net.layout().members[0].combine_bias];
        assert!((got - expect).abs() < 1e-14, "{got} vs {expect}");
        let bias = net.layout().members[0].combine_bias;
        assert!(g.iter().enumerate().all(|(i, &v)| i == bias || v == 0.0));
    }

    #[test]
    fn zeroed_column_gives_member_no_gradient() {
        let spec = DeepONetSpec::uniform(2, 2, 4, 2, 3, Strategy::Independent, Activation::Tanh);
        let net = Network::new(spec).unwrap();
        let params = net.init(4);
        // truth equal to the prediction in column 2 removes its DD contribution
        let mut data = TrainData {
            n_sensors: 2,
            branch: vec![0.3, 0.7],
            trunk: vec![0.0, 0.0, 1.0, 0.5],
            targets: vec![1.0; 6],
            field_len: 6,
            scaler: Scaler::identity(3),
            train: vec![0],
            test: vec![],
        };
        let pred = net.predict(&params, &data.branch, &data.trunk).unwrap();
        data.targets[2] = pred[2];
        data.targets[5] = pred[5];
        let ctx = PhysicsContext::none(6);
        let (_, g) = loss_gradient(
            &net,
            &params,
            &data,
            &ctx,
            &LossSpec::new(LossKind::Dd),
            &[0],
        )
        .unwrap();
        let m2 = &net.layout().members[2];
        assert!(g[m2.range.clone()].iter().all(|&v| v == 0.0));
        assert!(g[net.layout().members[0].range.clone()]
            .iter()
            .any(|&v| v != 0.0));
    }
}
