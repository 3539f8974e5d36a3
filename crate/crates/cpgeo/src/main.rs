use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cpgeo::cache::FeatureCache;
use cpgeo::config::{RunConfig, KEYS};
use cpgeo::harness::{self, load_checkpoint};
use cpgeo::manifest::RunManifest;
use cpgeo::{io, synth, Error, Result};
use cpgeo_core::metrics::loss_mse;

#[derive(Parser)]
#[command(name = "cpgeo", version, about = "Riemannian surface features and fusion regression for pressure coefficients")]
#[command(after_help = config_help())]
struct Cli {
    /// Flat key = value config file (see the key list below).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Stencil chord spacing: 0.01, 0.005 or 0.001.
    #[arg(long, global = true)]
    d: Option<f64>,
    /// Model preset: rgfil, mlp, mtl or mdf.
    #[arg(long, global = true, value_parser = ["rgfil", "mlp", "mtl", "mdf"])]
    model: Option<String>,
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Immersion and self-intersection check of every patch.
    CheckGeometry {
        #[arg(long)]
        grid: PathBuf,
    },
    /// Stencil features for every sample (fails if any patch is invalid).
    Extract {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        samples: PathBuf,
    },
    /// Seeded synthetic wing geometry and C_P samples.
    Synth,
    /// Train one model on a feature cache (with a validation split).
    Train {
        #[arg(long)]
        features: PathBuf,
    },
    /// Leave-one-AoA-out cross-validation on a feature cache.
    Crossval {
        #[arg(long)]
        features: PathBuf,
    },
    /// Test MSE and error map of a checkpoint on a feature cache.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
    /// Predictions of a checkpoint on a feature cache.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
    /// Per-fold MSE reduction of a model against a baseline.
    Report {
        /// Crossval report (.json) or AoA,mse table (.csv).
        #[arg(long = "model-report")]
        model_report: PathBuf,
        /// Baseline in the same formats.
        #[arg(long)]
        baseline: PathBuf,
    },
}

fn config_help() -> String {
    let mut s = String::from("Config keys:\n");
    for (k, doc) in KEYS {
        s.push_str(&format!("  {k:<26} {doc}\n"));
    }
    s
}

fn run_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = cli.d {
        cfg.d = d;
    }
    if let Some(m) = &cli.model {
        cfg.model = m.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.synth.seed = s;
    }
    if let Some(e) = cli.epochs {
        cfg.epochs = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = run_config(&cli)?;
    let out = cli.out.as_path();
    std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.to_path_buf(), source: e })?;
    let name = match &cli.command {
        Command::CheckGeometry { .. } => "check-geometry",
        Command::Extract { .. } => "extract",
        Command::Synth => "synth",
        Command::Train { .. } => "train",
        Command::Crossval { .. } => "crossval",
        Command::Eval { .. } => "eval",
        Command::Predict { .. } => "predict",
        Command::Report { .. } => "report",
    };
    let mut manifest = RunManifest::new(name, &cfg);
    if let Some(p) = &cli.config {
        manifest.input(p)?;
    }
    let result = dispatch(&cli.command, &cfg, out, &mut manifest);
    manifest.write(out)?;
    result
}

fn dispatch(command: &Command, cfg: &RunConfig, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    match command {
        Command::CheckGeometry { grid } => {
            manifest.input(grid)?;
            let (_, reports) = manifest.time("check", || harness::check_geometry(grid, cfg.samples_per_axis))?;
            io::write_json(&out.join("geometry.json"), &reports)?;
            for r in &reports {
                println!(
                    "patch {}: {} (immersion margin {:.3e}, {} self-intersection pairs)",
                    r.patch,
                    if r.valid { "valid" } else { "INVALID" },
                    r.immersion_margin,
                    r.intersection_count
                );
            }
            harness::rejected(&reports).map_or(Ok(()), Err)
        }
        Command::Extract { grid, samples } => {
            manifest.input(grid)?;
            manifest.input(samples)?;
            let cache = manifest.time("extract", || harness::extract(grid, samples, cfg, out))?;
            println!("{} samples extracted, {} dropped", cache.tensors.len(), cache.manifest.dropped.len());
            Ok(())
        }
        Command::Synth => {
            let data = manifest.time("generate", || synth::generate(&cfg.synth))?;
            synth::write(out, &data)?;
            println!("{} patches, {} samples", data.grids.len(), data.samples.len());
            Ok(())
        }
        Command::Train { features } => {
            let cache = read_cache(features, manifest)?;
            let aoas = cache.aoas();
            let all: Vec<usize> = (0..cache.tensors.len()).collect();
            let (tr, val) = cpgeo_core::dataset::train_val_split(&all, &aoas, cfg.val_fraction, cfg.seed);
            let trained = manifest.time("train", || {
                harness::fit(cfg, cfg.seed, &cache.select(&tr), &cache.select(&val), &[], "train:all")
            })?;
            harness::save_checkpoint(out, &trained.checkpoint(cfg), &trained.params)?;
            harness::write_losses(&out.join("loss.csv"), &trained.outcome)?;
            println!("final train MSE {:.6e}", trained.outcome.train_loss.last().copied().unwrap_or(f64::NAN));
            Ok(())
        }
        Command::Crossval { features } => {
            let cache = read_cache(features, manifest)?;
            let rep = manifest.time("crossval", || harness::crossval(&cache, cfg, Some(out)))?;
            for f in &rep.folds {
                println!("fold {} AoA {:>5}: MSE {:.6e}", f.fold, f.aoa, f.mse);
            }
            println!("average MSE {:.6e}", rep.average_mse);
            Ok(())
        }
        Command::Eval { checkpoint, features } | Command::Predict { checkpoint, features } => {
            manifest.input(&checkpoint.join(harness::CHECKPOINT_FILE))?;
            let cache = read_cache(features, manifest)?;
            let (ck, model, params) = load_checkpoint(checkpoint)?;
            let pred = harness::predict(&model, &params, &ck.normalizer, &cache.tensors)?;
            let target: Vec<f64> = cache.tensors.iter().map(|t| t.y).collect();
            if matches!(command, Command::Eval { .. }) {
                let mse = loss_mse(&pred, &target)?;
                harness::write_error_map(&out.join("errors.csv"), &cache.meta, &target, &pred)?;
                io::write_json(&out.join("eval.json"), &serde_json::json!({ "samples": pred.len(), "mse": mse }))?;
                println!("MSE {mse:.6e} over {} samples", pred.len());
            } else {
                let mut w = io::CsvOut::create(&out.join("predictions.csv"), &["row", "patch_id", "u", "v", "AoA", "prediction"])?;
                for (m, p) in cache.meta.iter().zip(&pred) {
                    w.row([
                        m.row.to_string(),
                        m.patch.to_string(),
                        io::fmt_f64(m.u),
                        io::fmt_f64(m.v),
                        io::fmt_f64(m.aoa),
                        io::fmt_f64(*p),
                    ])?;
                }
                w.finish()?;
            }
            Ok(())
        }
        Command::Report { model_report, baseline } => {
            manifest.input(model_report)?;
            manifest.input(baseline)?;
            let r = harness::reduction_report(harness::load_fold_mses(model_report)?, harness::load_fold_mses(baseline)?)?;
            harness::write_reduction(out, &r)?;
            for f in &r.folds {
                println!("AoA {:>5}: model {:.4e} baseline {:.4e} eta {:.2}%", f.aoa, f.model_mse, f.baseline_mse, f.eta_percent);
            }
            println!("average eta {:.2}%", r.average_eta_percent);
            Ok(())
        }
    }
}

fn read_cache(dir: &Path, manifest: &mut RunManifest) -> Result<FeatureCache> {
    manifest.input(&dir.join(cpgeo::cache::TARGET_FILE))?;
    for g in ["x1", "x2", "x3", "x4", "x5"] {
        manifest.input(&dir.join(format!("{g}.csv")))?;
    }
    FeatureCache::read(dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
