use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use stiffonet_core::dataset::{build_dataset, Dataset};
use stiffonet_core::deeponet::{DeepONetSpec, ModelFile, Network};
use stiffonet_core::evaluate::{evaluate, write_exports, ErrorStats, Predictor};
use stiffonet_core::fem::{assemble, build_lattice_with, FrameModel, GlobalSystem};
use stiffonet_core::linalg::{schur_reduce, Partition};
use stiffonet_core::training::{
    picked_free_dofs, train_with, LossKind, LossSpec, PhysicsContext, TrainConfig, TrainData,
    TrainReport,
};
use stiffonet_core::{Error, Result};

use crate::config::LoadedConfig;

/// Command-line overrides shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: usize,
}

pub struct Context {
    pub cfg: LoadedConfig,
    pub threads: usize,
    out: Option<PathBuf>,
}

impl Context {
    pub fn new(mut cfg: LoadedConfig, o: Overrides) -> Self {
        if let Some(seed) = o.seed {
            cfg.config.seed = seed;
        }
        Self {
            cfg,
            threads: o.threads.max(1),
            out: o.out,
        }
    }

    fn out_or(&self, default: PathBuf) -> PathBuf {
        self.out.clone().unwrap_or(default)
    }

    fn load_model(&self) -> Result<FrameModel> {
        FrameModel::load(&self.cfg.model_file())
    }

    /// The dataset with the configured split applied.
    fn load_dataset(&self) -> Result<Dataset> {
        let mut ds = Dataset::read(&self.cfg.dataset_dir())?;
        let ratio = self.cfg.config.dataset.ratio;
        let seed = self.cfg.dataset_seed();
        let current = ds.manifest.split.as_ref().map(|s| (s.ratio, s.seed));
        if current != Some((ratio, seed)) || ds.manifest.scaler.is_none() {
            ds.apply_split(ratio, seed)?;
        }
        Ok(ds)
    }

    fn train_config(&self, epochs: usize, batch_size: usize) -> TrainConfig {
        let t = &self.cfg.config.train;
        TrainConfig {
            epochs,
            batch_size,
            seed: self.cfg.config.seed,
            loss: self.cfg.config.loss,
            learning_rate: t.learning_rate,
        }
    }
}

pub fn gen_model(ctx: &Context) -> Result<PathBuf> {
    let m = &ctx.cfg.config.model;
    let model = build_lattice_with(m.span, m.height, m.section)?;
    let path = match &ctx.out {
        Some(dir) => dir.join(m.file.file_name().unwrap_or("model.json".as_ref())),
        None => ctx.cfg.model_file(),
    };
    let dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    ctx.cfg.echo_into(&dir)?;
    model.save(&path)?;
    println!(
        "model: {} nodes, {} elements, {} free DOFs -> {}",
        model.n_nodes(),
        model.elements.len(),
        model.free_dofs().len(),
        path.display()
    );
    Ok(path)
}

pub fn gen_data(ctx: &Context) -> Result<PathBuf> {
    let c = &ctx.cfg.config;
    let model = ctx.load_model()?;
    let system = assemble(&model)?;
    let schur = match &c.schur_nodes {
        Some(nodes) => {
            let picked = picked_free_dofs(system.free_dofs(), nodes);
            let p = Partition::from_picked(system.free_dofs().len(), &picked)?;
            Some(schur_reduce(&system.k_free(), &p)?)
        }
        None => None,
    };
    let seed = ctx.cfg.dataset_seed();
    let mut ds = build_dataset(
        &model,
        seed,
        c.dataset.per_scenario,
        c.dataset.uvl_direction,
        schur.as_ref(),
        ctx.threads,
    )?;
    ds.apply_split(c.dataset.ratio, seed)?;
    ds.manifest.model_file = Some(ctx.cfg.model_file().display().to_string());
    let dir = ctx.out_or(ctx.cfg.dataset_dir());
    ctx.cfg.echo_into(&dir)?;
    ds.write(&dir)?;
    let split = ds.split_record()?;
    println!(
        "dataset: {} samples ({} train / {} test) -> {}",
        ds.len(),
        split.train.len(),
        split.test.len(),
        dir.display()
    );
    Ok(dir)
}

#[derive(Serialize)]
struct TrainOutput<'a> {
    config: serde_json::Value,
    predicted_nodes: &'a [usize],
    #[serde(flatten)]
    report: &'a TrainReport,
}

/// Trains one network on the prepared dataset.
fn fit(
    spec: DeepONetSpec,
    ds: &Dataset,
    system: &GlobalSystem,
    nodes: Vec<usize>,
    cfg: &TrainConfig,
    verbose: bool,
) -> Result<(ModelFile, TrainReport)> {
    let data = TrainData::from_dataset(ds, &nodes)?;
    let phys = PhysicsContext::for_dataset(cfg.loss.kind, system, ds, &nodes)?;
    if spec.branch.input_size() != data.n_sensors {
        return Err(Error::Config(format!(
            "network expects {} branch inputs, dataset has {} sensors",
            spec.branch.input_size(),
            data.n_sensors
        )));
    }
    let net = Network::new(spec.clone())?;
    let init = net.init(cfg.seed);
    let every = (cfg.epochs / 10).max(1);
    let (params, report) = train_with(&net, init, &data, &phys, cfg, |s| {
        if verbose && (s.epoch % every == 0 || s.epoch == 1) {
            eprintln!(
                "epoch {:>5}  train {:.6}  test {:.6}  {:.3}s",
                s.epoch, s.train_loss, s.test_loss, s.seconds
            );
        }
    })?;
    let file = ModelFile::new(
        spec,
        cfg.seed,
        cfg.loss.kind.name(),
        data.scaler.clone(),
        nodes,
        data.trunk.clone(),
        params,
    );
    Ok((file, report))
}

pub fn train(ctx: &Context) -> Result<PathBuf> {
    let c = &ctx.cfg.config;
    let spec = c.network.resolve()?;
    let model = ctx.load_model()?;
    let system = assemble(&model)?;
    let ds = ctx.load_dataset()?;
    let cfg = ctx.train_config(c.train.epochs, c.train.batch_size);
    let nodes = ctx.cfg.predicted_nodes(ds.manifest.n_nodes);
    let (file, report) = fit(spec, &ds, &system, nodes, &cfg, true)?;
    let dir = ctx.out_or(ctx.cfg.out_dir());
    ctx.cfg.echo_into(&dir)?;
    file.save(&dir)?;
    let out = TrainOutput {
        config: serde_json::from_str(&ctx.cfg.text)?,
        predicted_nodes: &file.manifest.predicted_nodes,
        report: &report,
    };
    let path = dir.join("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&out)?)
        .map_err(|e| Error::Io { path, source: e })?;
    println!(
        "trained {} ({} params): best test loss {:.6} at epoch {}, {:.4} s/epoch -> {}",
        cfg.loss.kind.name(),
        report.n_params,
        report.best_test_loss,
        report.best_epoch,
        report.mean_epoch_seconds(),
        dir.display()
    );
    Ok(dir)
}

pub fn eval(ctx: &Context) -> Result<ErrorStats> {
    let c = &ctx.cfg.config;
    let model_dir = match &c.eval.model {
        Some(p) => ctx.cfg.resolve(p),
        None => ctx.cfg.out_dir(),
    };
    let file = ModelFile::load(&model_dir)?;
    let model = ctx.load_model()?;
    let system = assemble(&model)?;
    let ds = ctx.load_dataset()?;
    let test = ds.split_record()?.test.clone();
    let predictor = Predictor::new(file, system)?;
    let evaluation = evaluate(&predictor, &ds, &test, ctx.threads)?;
    let fields = if c.eval.field_samples.is_empty() {
        vec![test[0]]
    } else {
        c.eval.field_samples.clone()
    };
    let dir = ctx.out_or(ctx.cfg.out_dir().join("eval"));
    ctx.cfg.echo_into(&dir)?;
    write_exports(&dir, &evaluation, &ds, &model.nodes, &fields)?;
    for v in &evaluation.stats.variables {
        println!("{:<4} {}", v.name, v.summary);
    }
    if predictor.uses_recovery() {
        println!(
            "fields recovered from {} predicted nodes",
            predictor.model().manifest.predicted_nodes.len()
        );
    }
    println!("-> {}", dir.display());
    Ok(evaluation.stats)
}

/// One trained configuration of the parametric study.
#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub sweep: &'static str,
    pub width: usize,
    pub layers: usize,
    pub batch_size: usize,
    pub n_params: usize,
    pub epochs: usize,
    pub errors: [f64; 3],
    pub seconds_per_1000_epochs: f64,
}

impl StudyRow {
    pub fn aspect_ratio(&self) -> f64 {
        self.width as f64 / self.layers as f64
    }

    pub fn mean_error(&self) -> f64 {
        self.errors.iter().sum::<f64>() / 3.0
    }
}

/// Width rounded up so the split strategy can share it among the outputs.
fn output_width(width: usize, n_outputs: usize) -> usize {
    width.div_ceil(n_outputs) * n_outputs
}

fn study_spec(
    sensors: usize,
    width: usize,
    layers: usize,
    strategy: stiffonet_core::deeponet::Strategy,
) -> DeepONetSpec {
    let mut spec = DeepONetSpec::uniform(
        sensors,
        2,
        width,
        layers,
        3,
        strategy,
        stiffonet_core::deeponet::Activation::Tanh,
    );
    let last = output_width(width, 3);
    *spec.branch.layer_sizes.last_mut().unwrap() = last;
    *spec.trunk.layer_sizes.last_mut().unwrap() = last;
    spec
}

pub const STUDY_HEADER: &str =
    "sweep,width,layers,aspect_ratio,batch_size,n_params,epochs,err_u_x,err_u_y,err_r_z,err_mean,seconds_per_1000_epochs";

pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from(STUDY_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.4},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.3}",
            r.sweep,
            r.width,
            r.layers,
            r.aspect_ratio(),
            r.batch_size,
            r.n_params,
            r.epochs,
            r.errors[0],
            r.errors[1],
            r.errors[2],
            r.mean_error(),
            r.seconds_per_1000_epochs
        )
        .unwrap();
    }
    out
}

pub fn study(ctx: &Context) -> Result<Vec<StudyRow>> {
    let c = &ctx.cfg.config;
    let s = &c.study;
    let model = ctx.load_model()?;
    let system = assemble(&model)?;
    let ds = ctx.load_dataset()?;
    let epochs = s.epochs.unwrap_or(c.train.epochs);
    let sensors = ds.manifest.n_sensors;
    let base = c.network.resolve()?;
    let base_width = base.width();
    let base_layers = base.branch.n_layers();

    let mut points: Vec<(&'static str, usize, usize, usize)> = Vec::new();
    for &w in &s.neurons {
        points.push(("neurons", w, 6, c.train.batch_size));
    }
    for &l in &s.layers {
        points.push(("layers", 48, l, c.train.batch_size));
    }
    for &[l, w] in &s.aspect {
        points.push(("aspect", w, l, c.train.batch_size));
    }
    for &b in &s.batch_sizes {
        points.push(("batch", base_width, base_layers, b));
    }
    if points.is_empty() {
        return Err(Error::Config("study: no sweep values given".into()));
    }

    let dir = ctx.out_or(ctx.cfg.out_dir().join("study"));
    ctx.cfg.echo_into(&dir)?;
    let test = ds.split_record()?.test.clone();
    let mut rows = Vec::with_capacity(points.len());
    for (sweep, width, layers, batch) in points {
        let spec = if sweep == "batch" {
            base.clone()
        } else {
            study_spec(sensors, width, layers, s.strategy)
        };
        let cfg = TrainConfig {
            loss: LossSpec::new(LossKind::Dd),
            ..ctx.train_config(epochs, batch)
        };
        let nodes = (0..ds.manifest.n_nodes).collect();
        let (file, report) = fit(spec, &ds, &system, nodes, &cfg, false)?;
        let predictor = Predictor::new(file, system.clone())?;
        let e = evaluate(&predictor, &ds, &test, ctx.threads)?;
        let errors = [0, 1, 2].map(|v| e.stats.variables[v].mean);
        let row = StudyRow {
            sweep,
            width,
            layers,
            batch_size: batch,
            n_params: report.n_params,
            epochs,
            errors,
            seconds_per_1000_epochs: 1000.0 * report.mean_epoch_seconds(),
        };
        println!(
            "{sweep:<8} width {width:>3} layers {layers:>2} batch {batch:>3}: mean error {:.3}%  {:.2} s/1000 epochs",
            row.mean_error(),
            row.seconds_per_1000_epochs
        );
        rows.push(row);
        let path = dir.join("study.csv");
        std::fs::write(&path, study_csv(&rows)).map_err(|e| Error::Io { path, source: e })?;
    }
    Ok(rows)
}
