//! One PASS/FAIL line per acceptance criterion; the test fails if any line
//! reads FAIL. Lines go straight to stderr so they show without `--nocapture`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::{affine_patch, flat2, flat3, flat4, graph_oracle, graph_patch, perturbed_grid, random_grid, random_tensors, rel_err, rng, Poly};
use cpgeo::cache::FeatureCache;
use cpgeo::config::RunConfig;
use cpgeo::harness::{self, reduction_report};
use cpgeo::synth::{self, SynthConfig};
use cpgeo_core::bezier::{eval_patch, jet, ControlGrid, PiecewiseManifold, SurfacePoint, Vec3};
use cpgeo_core::dataset::NeighborMode;
use cpgeo_core::geometry::{feature_bundle, features_from_jet, Convention};
use cpgeo_core::nn::{adam_step, AdamConfig, AdamState, Batch, Model, ModelConfig, Params, SubnetSpec, Topology};
use cpgeo_core::stencil::{build_stencil, stencil_features, CENTER_SLOT, DEFAULT_SPACINGS};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn geometry_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let mut r = rng(seed);
        let f = Poly::random(&mut r, 4);
        let grid = graph_patch(0, &f, 4);
        for _ in 0..20 {
            let (u, v) = (r.random_range(0.01..0.99), r.random_range(0.01..0.99));
            let got = features_from_jet(&jet(&grid, u, v, 3).unwrap(), Convention::PositiveSphere).unwrap();
            let want = graph_oracle(&f, u, v);
            worst = worst
                .max(rel_err(&flat2(&got.g), &flat2(&want.g), 1e-300))
                .max(rel_err(&flat3(&got.gamma), &flat3(&want.gamma), 1e-12))
                .max(rel_err(&[got.scalar], &[want.scalar], want.scalar_scale.max(1e-300)));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-8 && secs < 10.0, format!("50 surfaces x 20 points, worst rel err {worst:.2e}, {secs:.2} s"))
}

fn flat_annihilation() -> Outcome {
    let patches = vec![
        affine_patch(1, 1, 1, Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)),
        affine_patch(2, 3, 2, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.7, 0.2, 0.1), Vec3::new(-0.1, 1.3, 0.4)),
        affine_patch(3, 5, 4, Vec3::new(2.0, -1.0, 3.0), Vec3::new(0.0, 2.0, -1.0), Vec3::new(0.5, 0.5, 0.5)),
    ];
    let mut m = PiecewiseManifold::new(patches).unwrap();
    let valid = m.check_all(32, &Default::default()).unwrap().iter().all(|r| r.valid);
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let id = m.patches()[k % 3].patch();
        let p = SurfacePoint::new(id, r.random_range(0.0..=1.0), r.random_range(0.0..=1.0)).unwrap();
        let ft = feature_bundle(&m, &p, Convention::PositiveSphere).unwrap();
        worst = flat3(&ft.gamma).into_iter().chain(flat4(&ft.riemann)).chain([ft.scalar]).fold(worst, |a, x| a.max(x.abs()));
    }
    outcome(valid && worst <= 1e-10, format!("3 planar patches, 1000 points, max |Gamma|,|R|,|S| = {worst:.2e}"))
}

/// Each order-k analytic partial against a central difference of the
/// order-(k-1) analytic partial.
fn jet_fd_worst(grid: &ControlGrid, u: f64, v: f64) -> f64 {
    let h = 1e-4;
    let lower = |u: f64, v: f64, p: usize, q: usize| -> Vec3 {
        if p + q == 0 {
            eval_patch(grid, u, v).unwrap()
        } else {
            jet(grid, u, v, 3).unwrap().d(p, q)
        }
    };
    let centre = jet(grid, u, v, 3).unwrap();
    let mut worst = 0.0f64;
    for order in 1..=3 {
        for p in 0..=order {
            let q = order - p;
            let fd = if p > 0 {
                (lower(u + h, v, p - 1, q) - lower(u - h, v, p - 1, q)) * (0.5 / h)
            } else {
                (lower(u, v + h, p, q - 1) - lower(u, v - h, p, q - 1)) * (0.5 / h)
            };
            worst = worst.max(rel_err(&centre.d(p, q).0, &fd.0, 1.0));
        }
    }
    worst
}

fn jet_correctness() -> Outcome {
    let mut r = rng(2024);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let g = random_grid(&mut r, k as u32, 1 + k % 5, 1 + (k * 3) % 5);
        for &(u, v) in &[(0.21, 0.33), (0.5, 0.5), (0.77, 0.12), (0.9, 0.85)] {
            worst = worst.max(jet_fd_worst(&g, u, v));
        }
    }
    outcome(worst < 1e-5, format!("20 random patches, orders 1-3, worst rel err {worst:.2e}"))
}

fn tiny_fusion(mode: NeighborMode, seed: u64) -> ModelConfig {
    ModelConfig {
        name: "tiny".into(),
        topology: Topology::Fusion {
            k: 2,
            functions: [
                Some(SubnetSpec::fc(4, 1)),
                Some(SubnetSpec::Conv { channels: vec![2, 3] }),
                Some(SubnetSpec::Conv { channels: vec![2, 3, 4] }),
                Some(SubnetSpec::Conv { channels: vec![3] }),
                Some(SubnetSpec::fc(3, 2)),
            ],
            context_hidden: vec![4, 3],
        },
        neighbor_mode: mode,
        leaky_slope: 0.01,
        seed,
    }
}

fn gradient_check() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (seed, mode) in [(1, NeighborMode::NinePoint), (2, NeighborMode::OnePoint)] {
        let model = Model::new(tiny_fusion(mode, seed)).unwrap();
        let params = model.init_params();
        let batch = Batch::new(&random_tensors(&mut rng(seed + 100), 8), mode);
        let idx: Vec<usize> = (0..batch.len).collect();
        let (_, grads) = model.loss_and_grad(&params, &batch, &idx).unwrap();
        let loss = |p: &Params| model.loss_and_grad(p, &batch, &idx).unwrap().0;
        let h = 1e-6;
        let mut p = params.clone();
        for i in 0..model.param_count {
            let w = params.values[i];
            p.values[i] = w + h;
            let plus = loss(&p);
            p.values[i] = w - h;
            let minus = loss(&p);
            p.values[i] = w;
            let n = (plus - minus) / (2.0 * h);
            worst = worst.max((grads[i] - n).abs() / grads[i].abs().max(n.abs()).max(1e-5));
        }
        count += model.param_count;
    }
    outcome(worst < 1e-4, format!("{count} parameters, worst rel err {worst:.2e}"))
}

fn adam_check() -> Outcome {
    let cfg = AdamConfig::default();
    let mut w = [0.0];
    let mut st = AdamState::new(1);
    adam_step(&mut w, &[1.0], &mut st, &cfg).unwrap();
    let (m_hat, v_hat) = (0.1 / (1.0 - 0.9), 0.001 / (1.0 - 0.999));
    let expect = -cfg.learning_rate * m_hat / (f64::sqrt(v_hat) + cfg.epsilon);
    let err = (w[0] - expect).abs();
    outcome(err <= 1e-12, format!("first step {:.15e}, hand value {expect:.15e}, |diff| {err:.1e}", w[0]))
}

fn table_metric_arithmetic() -> Outcome {
    // AoA, RGFiL (d = 0.005) MSE, image-based baseline MSE, published eta
    let table = [
        (7.0, 1.47, 1.52, 3.28),
        (12.0, 1.15, 1.21, 4.95),
        (16.0, 5.97e-1, 6.50e-1, 8.15),
        (18.0, 2.01e-1, 2.29e-1, 12.23),
        (18.5, 1.21e-1, 1.56e-1, 22.43),
        (19.0, 7.28e-2, 7.98e-2, 8.77),
        (20.0, 1.26e-2, 2.30e-2, 45.22),
    ];
    let model = ("rgfil".to_string(), table.iter().map(|t| (t.0, t.1)).collect());
    let base = ("baseline".to_string(), table.iter().map(|t| (t.0, t.2)).collect());
    let r = reduction_report(model, base).unwrap();
    let worst = r.folds.iter().zip(&table).map(|(f, t)| (f.eta_percent - t.3).abs()).fold(0.0, f64::max);
    let avg_err = (r.average_eta_percent - 15.00).abs();
    let etas: Vec<String> = r.folds.iter().map(|f| format!("{:.2}", f.eta_percent)).collect();
    outcome(
        worst <= 0.05 && avg_err <= 0.05,
        format!("eta [{}], average {:.3} (max fold deviation {worst:.3} pp)", etas.join(", "), r.average_eta_percent),
    )
}

fn synth_cache(cfg: &SynthConfig, dir: &Path) -> FeatureCache {
    let data = synth::generate(cfg).unwrap();
    let sdir = dir.join("synth");
    synth::write(&sdir, &data).unwrap();
    harness::extract(&sdir.join(synth::GRID_FILE), &sdir.join(synth::SAMPLES_FILE), &RunConfig::default(), &dir.join("features")).unwrap()
}

fn overfit() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let scfg = SynthConfig { seed: 3, stations: 5, points_per_section: 10, aoas: vec![16.0], ..Default::default() };
    let cache = synth_cache(&scfg, tmp.path());
    let cfg = RunConfig { epochs: 2000, ..Default::default() };
    let start = Instant::now();
    let trained = harness::fit(&cfg, 0, &cache.tensors, &[], &[], "overfit").unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mse = *trained.outcome.train_loss.last().unwrap();
    outcome(
        cache.tensors.len() == 50 && mse < 1e-3 && secs < 120.0,
        format!("{} samples, K = {}, 2000 epochs, train MSE {mse:.2e}, {secs:.1} s", cache.tensors.len(), cfg.k),
    )
}

const ABLATION_EPOCHS: usize = 150;

fn ablation() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..3u64 {
        let dir = tmp.path().join(format!("seed{seed}"));
        let cache = synth_cache(&SynthConfig { seed, ..Default::default() }, &dir);
        let mut cfg = RunConfig { seed, epochs: ABLATION_EPOCHS, ..Default::default() };
        let all = harness::crossval(&cache, &cfg, None).unwrap().average_mse;
        cfg.set("groups", "x1,x2").unwrap();
        let pos = harness::crossval(&cache, &cfg, None).unwrap().average_mse;
        if all < pos {
            wins += 1;
        }
        lines.push(format!("seed {seed}: all {all:.2e} vs x1,x2 {pos:.2e}"));
    }
    outcome(wins >= 2, format!("{wins}/3 seeds favour all features ({ABLATION_EPOCHS} epochs; {})", lines.join("; ")))
}

fn not_reproducible_statement() -> Outcome {
    let readme = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap_or_default();
    let stated = readme.contains("NOT reproduced at desk scale");
    outcome(
        stated,
        "absolute DLR-F11 MSEs and the 15.00% gain over the image-based baseline are not reproduced \
         (wind-tunnel data and baseline pipeline unavailable); stated in README",
    )
}

fn stencil_spacing() -> Outcome {
    let mut worst_axial = 0.0f64;
    let mut monotone = 0;
    let mut total = 0;
    for seed in 0..20 {
        let mut r = rng(seed);
        let mut m = PiecewiseManifold::new(vec![perturbed_grid(&mut r, 0, 4, 4, 0.15)]).unwrap();
        m.exempt_all();
        let grid = m.patches()[0].clone();
        for _ in 0..5 {
            let c = SurfacePoint::new(grid.patch(), r.random_range(0.1..0.9), r.random_range(0.1..0.9)).unwrap();
            let centre = eval_patch(&grid, c.u, c.v).unwrap();
            let mut spreads = Vec::new();
            for d in DEFAULT_SPACINGS {
                let st = build_stencil(&m, &c, d).unwrap();
                for slot in [1, 3, 5, 7] {
                    let p = &st.points[slot];
                    let chord = (eval_patch(&grid, p.u, p.v).unwrap() - centre).norm();
                    worst_axial = worst_axial.max((chord - d).abs() / d);
                }
                let s: Vec<f64> = stencil_features(&m, &st, Convention::PositiveSphere).unwrap().iter().map(|f| f.scalar).collect();
                let mean = s.iter().sum::<f64>() / 9.0;
                spreads.push((s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 9.0).sqrt());
                assert_eq!(st.points[CENTER_SLOT], c);
            }
            total += 1;
            if spreads[0] > spreads[1] && spreads[1] > spreads[2] {
                monotone += 1;
            }
        }
    }
    outcome(
        worst_axial <= 0.01 && monotone == total,
        format!("worst axial chord deviation {:.3}% of d; S spread monotone at {monotone}/{total} centres", 100.0 * worst_axial),
    )
}

fn run_cli(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_cpgeo")).args(args).env("RUST_LOG", "warn").stdout(std::process::Stdio::null()).status().unwrap();
    assert!(status.success(), "cpgeo {args:?} failed");
}

fn pipeline(root: &Path, config: &Path) -> Vec<(String, Vec<u8>)> {
    let p = |s: &str| root.join(s).to_str().unwrap().to_string();
    let cfg = config.to_str().unwrap();
    run_cli(&["synth", "--config", cfg, "--out", &p("synth")]);
    run_cli(&["extract", "--config", cfg, "--grid", &p("synth/grid.csv"), "--samples", &p("synth/samples.csv"), "--out", &p("features")]);
    run_cli(&["crossval", "--config", cfg, "--features", &p("features"), "--out", &p("rgfil")]);
    run_cli(&["crossval", "--config", cfg, "--model", "mlp", "--features", &p("features"), "--out", &p("mlp")]);
    run_cli(&[
        "report",
        "--model-report",
        &p("rgfil/crossval_report.json"),
        "--baseline",
        &p("mlp/crossval_report.json"),
        "--out",
        &p("report"),
    ]);
    ["report/report.json", "report/report.csv", "rgfil/crossval_report.json", "mlp/crossval_report.json", "features/x5.csv"]
        .iter()
        .map(|f| (f.to_string(), std::fs::read(root.join(f)).unwrap()))
        .collect()
}

fn end_to_end_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.cfg");
    std::fs::write(&config, "seed = 7\nepochs = 5\nsynth.stations = 4\nsynth.points_per_section = 6\n").unwrap();
    let a = pipeline(&tmp.path().join("a"), &config);
    let b = pipeline(&tmp.path().join("b"), &config);
    let differing: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    outcome(differing.is_empty(), format!("two synth/extract/crossval/report runs, {} files compared, differing: {differing:?}", a.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("geometry oracle suite", geometry_oracle),
        ("flat-manifold annihilation", flat_annihilation),
        ("jet correctness", jet_correctness),
        ("gradient check", gradient_check),
        ("Adam unit check", adam_check),
        ("per-fold reduction arithmetic", table_metric_arithmetic),
        ("overfit capability", overfit),
        ("directional ablation", ablation),
        ("NOT reproducible at desk scale", not_reproducible_statement),
        ("stencil spacing", stencil_spacing),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let mut failed = Vec::new();
    let _ = writeln!(std::io::stderr());
    for (name, check) in criteria {
        let o = check();
        // bypasses libtest output capture
        let _ = writeln!(std::io::stderr(), "{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
