use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamState, DEFAULT_LEARNING_RATE};
use super::context::PhysicsContext;
use super::loss::{loss_parts, LossKind, LossParts, LossSpec};
use crate::dataset::{Dataset, Scaler};
use crate::deeponet::{DeepONetParams, ForwardCache, Network};
use crate::error::{Error, Result};

pub const DEFAULT_EPOCHS: usize = 2500;
pub const SMOKE_EPOCHS: usize = 100;
pub const DEFAULT_BATCH_SIZE: usize = 20;
const EVAL_CHUNK: usize = 128;

fn default_lr() -> f64 {
    DEFAULT_LEARNING_RATE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: LossSpec,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
}

impl TrainConfig {
    pub fn new(loss: LossSpec, seed: u64) -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            seed,
            loss,
            learning_rate: DEFAULT_LEARNING_RATE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        self.loss.validate()
    }

    /// Optimizer steps per epoch for `n_train` samples (last batch may be short).
    pub fn steps_per_epoch(&self, n_train: usize) -> usize {
        n_train.div_ceil(self.batch_size)
    }
}

/// Network-ready arrays: normalized branch inputs, trunk coordinates and
/// physical targets restricted to the predicted nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainData {
    pub n_sensors: usize,
    /// samples × sensors, normalized
    pub branch: Vec<f64>,
    /// points × coords
    pub trunk: Vec<f64>,
    /// samples × field_len, physical
    pub targets: Vec<f64>,
    pub field_len: usize,
    pub scaler: Scaler,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl TrainData {
    /// Uses the dataset's split and scaler; the field covers `nodes` in order.
    pub fn from_dataset(ds: &Dataset, nodes: &[usize]) -> Result<Self> {
        let split = ds.split_record()?;
        let scaler = ds
            .manifest
            .scaler
            .clone()
            .ok_or_else(|| Error::Config("dataset has no fitted scaler".into()))?;
        let n_nodes = ds.manifest.n_nodes;
        if let Some(&bad) = nodes.iter().find(|&&n| n >= n_nodes) {
            return Err(Error::Config(format!(
                "predicted node {bad} outside 0..{n_nodes}"
            )));
        }
        let nv = ds.manifest.n_vars;
        let field_len = nodes.len() * nv;
        let mut targets = Vec::with_capacity(ds.len() * field_len);
        for i in 0..ds.len() {
            let t = ds.target(i);
            for &n in nodes {
                targets.extend_from_slice(&t[n * nv..(n + 1) * nv]);
            }
        }
        let trunk = nodes
            .iter()
            .flat_map(|&n| [ds.trunk[2 * n], ds.trunk[2 * n + 1]])
            .collect();
        Ok(Self {
            n_sensors: ds.manifest.n_sensors,
            branch: scaler.normalize_branch(&ds.branch),
            trunk,
            targets,
            field_len,
            scaler,
            train: split.train.clone(),
            test: split.test.clone(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.branch.len() / self.n_sensors
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.field_len..(i + 1) * self.field_len]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss: LossSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub n_params: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub steps_per_epoch: usize,
    /// Divisor applied to the physics term.
    pub phys_norm: f64,
    pub initial_train_loss: f64,
    pub initial_test_loss: f64,
    /// Sample-weighted mean of the batch losses seen during each epoch.
    pub train_loss: Vec<f64>,
    pub train_dd: Vec<f64>,
    pub test_loss: Vec<f64>,
    pub test_dd: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub total_seconds: f64,
    /// 1-based epoch whose parameters were kept; 0 means the initial ones.
    pub best_epoch: usize,
    pub best_test_loss: f64,
}

impl TrainReport {
    pub fn mean_epoch_seconds(&self) -> f64 {
        self.epoch_seconds.iter().sum::<f64>() / self.epoch_seconds.len().max(1) as f64
    }
}

/// Reusable buffers for batch evaluation.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    cache: ForwardCache,
    branch: Vec<f64>,
    truth: Vec<f64>,
    pred: Vec<f64>,
    d_pred: Vec<f64>,
}

/// Loss of the samples `ids`, weighted by `scale`; with `grads`, adds
/// `scale·∂L/∂params`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn batch_loss(
    net: &Network,
    params: &DeepONetParams,
    data: &TrainData,
    ctx: &PhysicsContext,
    spec: &LossSpec,
    phys_norm: f64,
    ids: &[usize],
    scale: f64,
    grads: Option<&mut [f64]>,
    ws: &mut Workspace,
) -> Result<LossParts> {
    let s = data.n_sensors;
    ws.branch.clear();
    ws.truth.clear();
    for &i in ids {
        ws.branch
            .extend_from_slice(&data.branch[i * s..(i + 1) * s]);
        ws.truth.extend_from_slice(data.target(i));
    }
    net.forward(params, &ws.branch, &data.trunk, &mut ws.cache)?;
    let sc = &data.scaler;
    let nv = sc.n_vars();
    ws.pred.clear();
    ws.pred.extend(
        ws.cache
            .output
            .iter()
            .enumerate()
            .map(|(k, v)| v * sc.output_std[k % nv] + sc.output_mean[k % nv]),
    );
    match grads {
        None => loss_parts(spec, &ws.pred, &ws.truth, ids, ctx, phys_norm, scale, None),
        Some(g) => {
            ws.d_pred.clear();
            ws.d_pred.resize(ws.pred.len(), 0.0);
            let parts = loss_parts(
                spec,
                &ws.pred,
                &ws.truth,
                ids,
                ctx,
                phys_norm,
                scale,
                Some(&mut ws.d_pred),
            )?;
            for (k, d) in ws.d_pred.iter_mut().enumerate() {
                *d *= sc.output_std[k % nv];
            }
            net.backward(params, &mut ws.cache, &ws.d_pred, g);
            Ok(parts)
        }
    }
}

/// Batch loss and its gradient with respect to every network parameter.
pub fn loss_gradient(
    net: &Network,
    params: &DeepONetParams,
    data: &TrainData,
    ctx: &PhysicsContext,
    spec: &LossSpec,
    ids: &[usize],
) -> Result<(LossParts, Vec<f64>)> {
    let mut grads = vec![0.0; params.len()];
    let mut ws = Workspace::default();
    let parts = batch_loss(
        net,
        params,
        data,
        ctx,
        spec,
        1.0,
        ids,
        1.0,
        Some(&mut grads),
        &mut ws,
    )?;
    Ok((parts, grads))
}

/// Mean loss over a sample set, evaluated in chunks.
#[allow(clippy::too_many_arguments)]
pub(crate) fn set_loss(
    net: &Network,
    params: &DeepONetParams,
    data: &TrainData,
    ctx: &PhysicsContext,
    spec: &LossSpec,
    phys_norm: f64,
    ids: &[usize],
    ws: &mut Workspace,
) -> Result<LossParts> {
    let mut acc = LossParts::default();
    if ids.is_empty() {
        return Ok(LossParts {
            total: f64::NAN,
            dd: f64::NAN,
            phys: f64::NAN,
        });
    }
    let n = ids.len() as f64;
    for chunk in ids.chunks(EVAL_CHUNK) {
        let w = chunk.len() as f64 / n;
        let p = batch_loss(
            net, params, data, ctx, spec, phys_norm, chunk, 1.0, None, ws,
        )?;
        acc.total += w * p.total;
        acc.dd += w * p.dd;
        acc.phys += w * p.phys;
    }
    Ok(acc)
}

/// Per-epoch progress passed to the observer of [`train_with`].
#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub seconds: f64,
}

pub fn train(
    net: &Network,
    init: DeepONetParams,
    data: &TrainData,
    ctx: &PhysicsContext,
    config: &TrainConfig,
) -> Result<(DeepONetParams, TrainReport)> {
    train_with(net, init, data, ctx, config, |_| {})
}

/// Mini-batch Adam training. Returns the parameters with the lowest test
/// loss (training loss when there is no test set) and the report.
pub fn train_with(
    net: &Network,
    init: DeepONetParams,
    data: &TrainData,
    ctx: &PhysicsContext,
    config: &TrainConfig,
    mut observe: impl FnMut(&EpochStats),
) -> Result<(DeepONetParams, TrainReport)> {
    config.validate()?;
    ctx.check_kind(config.loss.kind)?;
    init.check(net.layout())?;
    if data.train.is_empty() {
        return Err(Error::EmptySplit);
    }
    let out_per_point = net.n_outputs();
    if out_per_point != data.scaler.n_vars()
        || data.trunk.len() / net.spec().trunk.input_size() * out_per_point != data.field_len
        || ctx.field_len() != data.field_len
        || data.n_sensors != net.spec().branch.input_size()
    {
        return Err(Error::Dimension(format!(
            "network, data (field {}) and physics context (field {}) disagree",
            data.field_len,
            ctx.field_len()
        )));
    }

    let spec = config.loss;
    let mut ws = Workspace::default();
    let mut params = init;

    let phys_norm = if spec.phys_scale && spec.kind != LossKind::Dd {
        let p = set_loss(net, &params, data, ctx, &spec, 1.0, &data.train, &mut ws)?.phys;
        if p.is_finite() && p > 0.0 {
            p
        } else {
            1.0
        }
    } else {
        1.0
    };

    let initial_train = set_loss(
        net,
        &params,
        data,
        ctx,
        &spec,
        phys_norm,
        &data.train,
        &mut ws,
    )?;
    let initial_test = set_loss(
        net, &params, data, ctx, &spec, phys_norm, &data.test, &mut ws,
    )?;
    let select = |train: f64, test: f64| if data.test.is_empty() { train } else { test };

    let mut best = params.clone();
    let mut best_loss = select(initial_train.total, initial_test.total);
    let mut best_epoch = 0;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut adam = AdamState::new(params.len(), config.learning_rate);
    let mut grads = vec![0.0; params.len()];
    let mut order = data.train.clone();
    let n_train = order.len() as f64;

    let mut report = TrainReport {
        loss: spec,
        epochs: config.epochs,
        batch_size: config.batch_size,
        seed: config.seed,
        learning_rate: config.learning_rate,
        n_params: params.len(),
        n_train: data.train.len(),
        n_test: data.test.len(),
        steps_per_epoch: config.steps_per_epoch(data.train.len()),
        phys_norm,
        initial_train_loss: initial_train.total,
        initial_test_loss: initial_test.total,
        train_loss: Vec::with_capacity(config.epochs),
        train_dd: Vec::with_capacity(config.epochs),
        test_loss: Vec::with_capacity(config.epochs),
        test_dd: Vec::with_capacity(config.epochs),
        epoch_seconds: Vec::with_capacity(config.epochs),
        total_seconds: 0.0,
        best_epoch: 0,
        best_test_loss: best_loss,
    };

    let started = Instant::now();
    for epoch in 1..=config.epochs {
        let t0 = Instant::now();
        order.shuffle(&mut rng);
        let (mut tl, mut tdd) = (0.0, 0.0);
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            grads.fill(0.0);
            let parts = batch_loss(
                net,
                &params,
                data,
                ctx,
                &spec,
                phys_norm,
                batch,
                1.0,
                Some(&mut grads),
                &mut ws,
            )?;
            if !parts.total.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NanLoss { epoch, batch: b });
            }
            adam.update(&mut params.values, &grads)?;
            let w = batch.len() as f64 / n_train;
            tl += w * parts.total;
            tdd += w * parts.dd;
        }
        let test = set_loss(
            net, &params, data, ctx, &spec, phys_norm, &data.test, &mut ws,
        )?;
        let seconds = t0.elapsed().as_secs_f64();
        let score = select(tl, test.total);
        if score < best_loss {
            best_loss = score;
            best_epoch = epoch;
            best.values.copy_from_slice(&params.values);
        }
        report.train_loss.push(tl);
        report.train_dd.push(tdd);
        report.test_loss.push(test.total);
        report.test_dd.push(test.dd);
        report.epoch_seconds.push(seconds);
        observe(&EpochStats {
            epoch,
            train_loss: tl,
            test_loss: test.total,
            seconds,
        });
    }
    report.total_seconds = started.elapsed().as_secs_f64();
    report.best_epoch = best_epoch;
    report.best_test_loss = best_loss;
    Ok((best, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deeponet::{Activation, DeepONetSpec, Strategy};

    /// Linear toy operator: field = outer(branch-derived amplitude, shape).
    fn toy_data(n: usize) -> TrainData {
        let points = 4;
        let mut branch = Vec::new();
        let mut targets = Vec::new();
        for i in 0..n {
            let a = 0.2 + (i as f64 * 0.37).fract();
            branch.extend([a, 0.5 * a, -a]);
            for p in 0..points {
                let x = p as f64 / 3.0;
                targets.extend([a * x, a * (1.0 - x) + 0.1, 0.3 * a]);
            }
        }
        let trunk = (0..points).flat_map(|p| [p as f64 / 3.0, 0.0]).collect();
        TrainData {
            n_sensors: 3,
            branch,
            trunk,
            targets,
            field_len: points * 3,
            scaler: Scaler::identity(3),
            train: (0..n - 4).collect(),
            test: (n - 4..n).collect(),
        }
    }

    fn toy_net() -> Network {
        Network::new(DeepONetSpec::uniform(
            3,
            2,
            6,
            2,
            3,
            Strategy::Split,
            Activation::Tanh,
        ))
        .unwrap()
    }

    #[test]
    fn steps_per_epoch_rounds_up() {
        let c = TrainConfig::new(LossSpec::new(LossKind::Dd), 0);
        assert_eq!(c.steps_per_epoch(2438), 122);
        assert_eq!(c.steps_per_epoch(20), 1);
        assert_eq!(c.steps_per_epoch(21), 2);
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let data = toy_data(24);
        let net = toy_net();
        let ctx = PhysicsContext::none(data.field_len);
        let mut cfg = TrainConfig::new(LossSpec::new(LossKind::Dd), 3);
        cfg.epochs = 60;
        cfg.batch_size = 5;
        cfg.learning_rate = 1e-2;
        let (_, a) = train(&net, net.init(1), &data, &ctx, &cfg).unwrap();
        assert_eq!(a.train_loss.len(), 60);
        assert_eq!(a.steps_per_epoch, 4);
        assert!(*a.train_loss.last().unwrap() < a.initial_train_loss);
        let (_, b) = train(&net, net.init(1), &data, &ctx, &cfg).unwrap();
        assert_eq!(a.train_loss, b.train_loss);
        assert_eq!(a.test_loss, b.test_loss);
    }

    #[test]
    fn best_params_match_reported_loss() {
        let data = toy_data(24);
        let net = toy_net();
        let ctx = PhysicsContext::none(data.field_len);
        let mut cfg = TrainConfig::new(LossSpec::new(LossKind::Dd), 3);
        cfg.epochs = 20;
        cfg.batch_size = 7;
        let (best, rep) = train(&net, net.init(2), &data, &ctx, &cfg).unwrap();
        let mut ws = Workspace::default();
        let l = set_loss(
            &net, &best, &data, &ctx, &cfg.loss, 1.0, &data.test, &mut ws,
        )
        .unwrap();
        assert_eq!(l.total, rep.best_test_loss);
        let min = rep
            .test_loss
            .iter()
            .cloned()
            .fold(rep.initial_test_loss, f64::min);
        assert_eq!(rep.best_test_loss, min);
    }

    #[test]
    fn nan_aborts_with_position() {
        let mut data = toy_data(12);
        data.branch[3] = f64::NAN;
        let net = toy_net();
        let ctx = PhysicsContext::none(data.field_len);
        let mut cfg = TrainConfig::new(LossSpec::new(LossKind::Dd), 0);
        cfg.epochs = 2;
        cfg.batch_size = 2;
        match train(&net, net.init(0), &data, &ctx, &cfg) {
            Err(Error::NanLoss { epoch, batch }) => assert!(epoch == 1 && batch < 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn physics_kind_needs_context() {
        let data = toy_data(12);
        let net = toy_net();
        let ctx = PhysicsContext::none(data.field_len);
        let cfg = TrainConfig::new(LossSpec::new(LossKind::DdEc), 0);
        assert!(matches!(
            train(&net, net.init(0), &data, &ctx, &cfg),
            Err(Error::MissingPhysics { .. })
        ));
    }

    #[test]
    fn empty_train_split_rejected() {
        let mut data = toy_data(12);
        data.train.clear();
        let net = toy_net();
        let ctx = PhysicsContext::none(data.field_len);
        let cfg = TrainConfig::new(LossSpec::new(LossKind::Dd), 0);
        assert!(matches!(
            train(&net, net.init(0), &data, &ctx, &cfg),
            Err(Error::EmptySplit)
        ));
    }
}
