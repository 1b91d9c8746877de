//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. The training criteria share one dataset and
//! take tens of minutes on a single core.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stiffonet::commands::{self, Context, Overrides};
use stiffonet::config::LoadedConfig;
use stiffonet_core::dataset::sample_cases;
use stiffonet_core::deeponet::Strategy;
use stiffonet_core::evaluate::ErrorStats;
use stiffonet_core::fem::{
    assemble, build_lattice, dof, equivalent_nodal_loads, solve_static, Element, FrameModel,
    MaterialSection, Support, UvlDirection,
};
use stiffonet_core::linalg::{
    dot, factor, max_abs, norm2, recover_interior, reduce_force, schur_reduce, FactorKind,
    Partition,
};
use stiffonet_core::training::{grad_check, LossKind};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn report(n: usize, name: &str, o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("criterion {n:>2} {tag}: {name}: {}", o.detail);
}

fn cantilever_oracle() -> Outcome {
    let t = Instant::now();
    let len = 3.0;
    let section = MaterialSection::steel_400x250();
    let model = FrameModel {
        span: len,
        height: 1.0,
        nodes: vec![[0.0, 0.0], [len, 0.0]],
        elements: vec![Element {
            node_a: 0,
            node_b: 1,
            section,
        }],
        supports: vec![Support::clamp(0)],
        bottom_chord: vec![0, 1],
    };
    let p = -10_000.0;
    let mut f = vec![0.0; 6];
    f[4] = p;
    let u = solve_static(&assemble(&model).unwrap(), &f).unwrap();
    let expected =
        p * len.powi(3) / (3.0 * section.bending_rigidity()) + p * len / section.shear_rigidity();
    let rel = ((u[4] - expected) / expected).abs();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        rel <= 1e-9 && secs < 1.0,
        format!("relative error {rel:.2e} (≤ 1e-9), {secs:.3} s (< 1 s)"),
    )
}

fn rigid_body_modes() -> Outcome {
    let m = build_lattice(20.0, 5.0).unwrap();
    let k = assemble(&m).unwrap().k().clone();
    let n = m.n_nodes();
    let mut modes = vec![vec![0.0; 3 * n]; 3];
    for (i, p) in m.nodes.iter().enumerate() {
        modes[0][dof(i, 0)] = 1.0;
        modes[1][dof(i, 1)] = 1.0;
        modes[2][dof(i, 0)] = -p[1];
        modes[2][dof(i, 1)] = p[0];
        modes[2][dof(i, 2)] = 1.0;
    }
    let knorm = k.frobenius_norm();
    let worst = modes
        .iter()
        .map(|r| norm2(&k.matvec(r).unwrap()) / (knorm * norm2(r)))
        .fold(0.0, f64::max);
    let asym = k.asymmetry();
    outcome(
        worst <= 1e-8 && asym <= 1e-12,
        format!("rigid-mode residual {worst:.2e} (≤ 1e-8), asymmetry {asym:.2e} (≤ 1e-12)"),
    )
}

fn energy_identity() -> Outcome {
    let m = build_lattice(20.0, 5.0).unwrap();
    let sys = assemble(&m).unwrap();
    let solver = sys.factorize().unwrap();
    let cases = sample_cases(11, 34, UvlDirection::PeakAtSupport);
    let mut worst: f64 = 0.0;
    for case in cases.iter().take(100) {
        let f = equivalent_nodal_loads(&m, case).unwrap();
        let u = solver.solve(&f).unwrap();
        let ku = sys.k().matvec(&u).unwrap();
        let (uku, uf) = (dot(&u, &ku), dot(&u, &f));
        worst = worst.max((uku - uf).abs() / uf.abs());
    }
    outcome(
        worst <= 1e-8,
        format!("max |UᵀKU − UᵀF|/|UᵀF| = {worst:.2e} over 100 solutions (≤ 1e-8)"),
    )
}

fn schur_round_trip() -> Outcome {
    let t = Instant::now();
    let sys = assemble(&build_lattice(20.0, 5.0).unwrap()).unwrap();
    let k = sys.k_free();
    let n = k.rows();
    let direct = factor(&k, FactorKind::Cholesky).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let size = rng.random_range(1..n);
        let mut picked = sample(&mut rng, n, size).into_vec();
        picked.sort_unstable();
        let p = Partition::from_picked(n, &picked).unwrap();
        let s = schur_reduce(&k, &p).unwrap();
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1e4..1e4)).collect();
        let fc = reduce_force(&s, &f).unwrap();
        let u_i = factor(s.s_matrix(), FactorKind::Cholesky)
            .unwrap()
            .solve(&fc)
            .unwrap();
        let u_n = recover_interior(&s, &u_i, &f).unwrap();
        let u = p.scatter(&u_i, &u_n);
        let reference = direct.solve(&f).unwrap();
        let diff: Vec<f64> = u.iter().zip(&reference).map(|(a, b)| a - b).collect();
        worst = worst.max(max_abs(&diff) / max_abs(&reference));
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 10.0,
        format!(
            "max relative deviation {worst:.2e} over 20 partitions (≤ 1e-9), {secs:.2} s (< 10 s)"
        ),
    )
}

fn gradient_checks() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for kind in [LossKind::Dd, LossKind::DdEc, LossKind::DdSes] {
        for strategy in [Strategy::Split, Strategy::Independent] {
            worst = worst.max(grad_check(kind, strategy, 7).unwrap().max_deviation);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst < 1e-5 && secs < 30.0,
        format!(
            "max deviation {worst:.2e} (< 1e-5) over 3 losses × 2 strategies, {secs:.2} s (< 30 s)"
        ),
    )
}

/// Results of one `train` + `eval` pass.
struct Run {
    stats: ErrorStats,
    train_loss: Vec<f64>,
    test_loss: Vec<f64>,
    epoch_seconds: f64,
    total_seconds: f64,
}

struct Workspace {
    dir: PathBuf,
}

impl Workspace {
    fn config(&self, name: &str, body: &str) -> Context {
        let path = self.dir.join(format!("{name}.json"));
        std::fs::write(&path, body).unwrap();
        Context::new(
            LoadedConfig::load(&path).unwrap(),
            Overrides {
                threads: 1,
                ..Default::default()
            },
        )
    }

    fn prepare(&self) {
        let ctx = self.config(
            "data",
            r#"{"seed": 42, "schur_nodes": [0, 3, 6, 9, 12, 15, 18, 26, 36]}"#,
        );
        commands::gen_model(&ctx).unwrap();
        commands::gen_data(&ctx).unwrap();
    }

    fn run(&self, name: &str, loss: &str, ratio: f64) -> Run {
        let body = format!(
            r#"{{"seed": 42, "out": "{name}", "dataset": {{"ratio": {ratio}}},
                 "network": {{"preset": "split-2d"}},
                 "train": {{"epochs": 2500, "batch_size": 20}}, "loss": {loss}}}"#
        );
        let ctx = self.config(name, &body);
        let dir = commands::train(&ctx).unwrap();
        let stats = commands::eval(&ctx).unwrap();
        read_run(&dir, stats)
    }
}

fn read_run(dir: &Path, stats: ErrorStats) -> Run {
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let floats = |key: &str| -> Vec<f64> {
        v[key]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .collect()
    };
    let epoch = floats("epoch_seconds");
    Run {
        stats,
        train_loss: floats("train_loss"),
        test_loss: floats("test_loss"),
        epoch_seconds: epoch.iter().sum::<f64>() / epoch.len() as f64,
        total_seconds: v["total_seconds"].as_f64().unwrap(),
    }
}

fn describe(stats: &ErrorStats) -> String {
    stats
        .variables
        .iter()
        .map(|v| format!("{} {:.2}%", v.name, v.mean))
        .collect::<Vec<_>>()
        .join(", ")
}

fn main() -> ExitCode {
    let mut results: Vec<bool> = Vec::new();
    let mut check = |n: usize, name: &str, o: Outcome| {
        report(n, name, &o);
        results.push(o.pass);
    };

    check(1, "cantilever tip deflection", cantilever_oracle());
    check(2, "rigid-body null space and symmetry", rigid_body_modes());
    check(3, "energy identity", energy_identity());
    check(4, "Schur round trip", schur_round_trip());
    check(5, "gradient checks", gradient_checks());

    let tmp = tempfile::tempdir().unwrap();
    let ws = Workspace {
        dir: tmp.path().to_path_buf(),
    };
    ws.prepare();
    let budget = 45.0 * 60.0;

    let dd = ws.run("dd", r#"{"kind": "dd"}"#, 0.8);
    let ec = ws.run("ec", r#"{"kind": "dd+ec", "phys_scale": true}"#, 0.8);
    let dd_ok = dd.stats.variables.iter().all(|v| v.mean < 5.0);
    let order_ok = ec.stats.max_mean() <= dd.stats.max_mean();
    let time_ok = dd.total_seconds <= budget && ec.total_seconds <= budget;
    check(
        6,
        "DD vs DD+EC at 80% training ratio",
        outcome(
            dd_ok && order_ok && time_ok,
            format!(
                "DD [{}] (each < 5%); DD+EC [{}]; max mean DD+EC {:.2}% vs DD {:.2}% (needs ≤); {:.0} s and {:.0} s (≤ 2700 s)",
                describe(&dd.stats),
                describe(&ec.stats),
                ec.stats.max_mean(),
                dd.stats.max_mean(),
                dd.total_seconds,
                ec.total_seconds
            ),
        ),
    );

    let ses = ws.run("ses", r#"{"kind": "dd+ses", "phys_scale": true}"#, 0.8);
    let ses_ok = ses.stats.variables.iter().all(|v| v.mean < 5.0);
    let faster = ses.epoch_seconds < ec.epoch_seconds;
    check(
        7,
        "DD+SES with interior recovery",
        outcome(
            ses_ok && faster,
            format!(
                "full field [{}] (each < 5%); {:.4} s/epoch vs DD+EC {:.4} s/epoch",
                describe(&ses.stats),
                ses.epoch_seconds,
                ec.epoch_seconds
            ),
        ),
    );

    let low = ws.run("dd20", r#"{"kind": "dd"}"#, 0.2);
    check(
        8,
        "training-ratio trend",
        outcome(
            dd.stats.max_mean() <= low.stats.max_mean(),
            format!(
                "max mean error at 80% {:.2}% vs at 20% {:.2}% (needs ≤)",
                dd.stats.max_mean(),
                low.stats.max_mean()
            ),
        ),
    );

    let again = ws.run("dd_again", r#"{"kind": "dd"}"#, 0.8);
    let same = |a: &[f64], b: &[f64]| {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
    };
    let identical =
        same(&dd.train_loss, &again.train_loss) && same(&dd.test_loss, &again.test_loss);
    check(
        9,
        "determinism",
        outcome(
            identical,
            format!(
                "{} epochs of train and test loss bit-identical: {identical}",
                dd.train_loss.len()
            ),
        ),
    );

    let ctx = ws.config(
        "study",
        r#"{"seed": 42, "out": "dd", "study": {"epochs": 3, "batch_sizes": [10, 20, 40, 80]}}"#,
    );
    let rows = commands::study(&ctx).unwrap();
    let csv = std::fs::read_to_string(ws.dir.join("dd/study/study.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    let width = commands::STUDY_HEADER.split(',').count();
    let well_formed = lines[0] == commands::STUDY_HEADER
        && lines.len() == 5
        && lines[1..].iter().all(|l| l.split(',').count() == width)
        && rows
            .iter()
            .all(|r| r.seconds_per_1000_epochs.is_finite() && r.seconds_per_1000_epochs > 0.0);
    let timings: Vec<String> = rows
        .iter()
        .map(|r| format!("b{} {:.1} s", r.batch_size, r.seconds_per_1000_epochs))
        .collect();
    check(
        10,
        "batch-size study report",
        outcome(
            well_formed,
            format!(
                "study.csv well formed: {well_formed}; per 1000 epochs: {}",
                timings.join(", ")
            ),
        ),
    );

    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
