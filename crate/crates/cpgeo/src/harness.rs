//! Pipeline steps behind the CLI commands.

use std::collections::BTreeSet;
use std::path::Path;

use cpgeo_core::bezier::{CheckOptions, ValidityReport};
use cpgeo_core::dataset::{assemble, fit_normalizer, fold_split, train_val_split, FeatureTensors, NormalizationSpec};
use cpgeo_core::metrics::{error_map, loss_mse, reduction};
use cpgeo_core::nn::{train, Batch, Model, ModelConfig, Params, TrainConfig, TrainOutcome};
use cpgeo_core::{Convention, PiecewiseManifold};
use serde::{Deserialize, Serialize};

use crate::cache::{FeatureCache, SampleMeta};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{self, fmt_f64, read_json, write_json, CsvIn, CsvOut};
use crate::synth::{self, SynthManifest};

pub const CHECKPOINT_FILE: &str = "model.json";
pub const WEIGHTS_FILE: &str = "weights.csv";
pub const CROSSVAL_REPORT: &str = "crossval_report.json";
pub const CROSSVAL_TABLE: &str = "crossval_report.csv";

/// Reads a control-grid file and runs the validity check on every patch.
pub fn check_geometry(grid_path: &Path, samples_per_axis: usize) -> Result<(PiecewiseManifold, Vec<ValidityReport>)> {
    let grids = io::read_grids(grid_path)?;
    let mut manifold = PiecewiseManifold::new(grids)?;
    let reports = manifold.check_all(samples_per_axis, &CheckOptions::default())?;
    Ok((manifold, reports))
}

pub fn rejected(reports: &[ValidityReport]) -> Option<Error> {
    let bad: Vec<_> = reports.iter().filter(|r| !r.valid).map(|r| r.patch).collect();
    (!bad.is_empty()).then_some(Error::GeometryRejected { patches: bad })
}

/// Geometry gate, stencil assembly and cache/dump output.
pub fn extract(grid_path: &Path, samples_path: &Path, cfg: &RunConfig, out: &Path) -> Result<FeatureCache> {
    let (manifold, reports) = check_geometry(grid_path, cfg.samples_per_axis)?;
    write_json(&out.join("geometry.json"), &reports)?;
    if let Some(e) = rejected(&reports) {
        return Err(e);
    }
    let known: BTreeSet<_> = manifold.patches().iter().map(|g| g.patch()).collect();
    let samples = io::load_samples(samples_path, Some(&known))?;
    let assembled = assemble(&manifold, &samples, cfg.d, cfg.convention)?;
    for d in &assembled.dropped {
        log::warn!("dropped sample at row {}: {}", d.row, d.reason);
    }

    let generator_path = samples_path.with_file_name(synth::MANIFEST_FILE);
    let generator: Option<SynthManifest> =
        if generator_path.exists() { Some(read_json(&generator_path)?) } else { None };
    let cache = FeatureCache::from_assembled(&assembled, &samples, cfg.d, cfg.convention, generator);
    cache.write(out)?;

    let centre: Vec<_> = assembled
        .samples
        .iter()
        .map(|s| (s.features[cpgeo_core::stencil::CENTER_SLOT], cpgeo_core::Vec3(s.positions[4])))
        .collect();
    io::write_feature_dump(&out.join("features.csv"), &centre)?;
    let stencils: Vec<_> = assembled
        .samples
        .iter()
        .zip(&assembled.kept)
        .map(|(s, &i)| (samples[i].row, s.features, s.positions))
        .collect();
    io::write_stencil_dump(&out.join("stencils.csv"), &stencils)?;
    Ok(cache)
}

/// Everything needed to rebuild a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub normalizer: NormalizationSpec,
    pub convention: Convention,
    pub d: f64,
    pub param_count: usize,
    pub weights_file: String,
    /// How `weights.csv` is laid out.
    pub weight_order: String,
    pub conv_padding: String,
}

const WEIGHT_ORDER: &str = "function networks in group order x1..x5, then the context network; \
within a network, layers in order; within a layer, weights then biases. Dense weights are \
[output][input]; convolution weights are [out_channel][in_channel][ky][kx]";

const CONV_PADDING: &str = "2x2 kernels, stride 2, valid windows only; a spatial axis shorter than 2 \
(the 9x1 intermediate) is zero-padded to length 2 at its far end first";

pub struct Trained {
    pub model: Model,
    pub params: Params,
    pub normalizer: NormalizationSpec,
    pub outcome: TrainOutcome,
    pub train_config: TrainConfig,
}

impl Trained {
    pub fn checkpoint(&self, cfg: &RunConfig) -> Checkpoint {
        Checkpoint {
            model: self.model.config.clone(),
            train: self.train_config,
            normalizer: self.normalizer.clone(),
            convention: cfg.convention,
            d: cfg.d,
            param_count: self.model.param_count,
            weights_file: WEIGHTS_FILE.into(),
            weight_order: WEIGHT_ORDER.into(),
            conv_padding: CONV_PADDING.into(),
        }
    }

    pub fn predict(&self, tensors: &[FeatureTensors]) -> Result<Vec<f64>> {
        predict(&self.model, &self.params, &self.normalizer, tensors)
    }
}

/// Fits the normaliser on `train`, then trains a fresh model seeded by `seed`.
pub fn fit(
    cfg: &RunConfig,
    seed: u64,
    train_set: &[FeatureTensors],
    val_set: &[FeatureTensors],
    probes: &[FeatureTensors],
    provenance: &str,
) -> Result<Trained> {
    let normalizer = fit_normalizer(train_set, cfg.normalize_target, provenance)?;
    let model = Model::new(cfg.model_config(seed)?)?;
    let mode = model.config.neighbor_mode;
    let batch = |ts: &[FeatureTensors]| Batch::new(&normalizer.apply_all(ts), mode);
    let tb = batch(train_set);
    let vb = (!val_set.is_empty()).then(|| batch(val_set));
    let pb = (!probes.is_empty()).then(|| batch(probes));
    let train_config = cfg.train_config(seed);
    let outcome = train(&model, model.init_params(), &tb, vb.as_ref(), &train_config, pb.as_ref())?;
    Ok(Trained { params: outcome.params.clone(), model, normalizer, outcome, train_config })
}

/// Predictions in raw C_P units.
pub fn predict(model: &Model, params: &Params, normalizer: &NormalizationSpec, tensors: &[FeatureTensors]) -> Result<Vec<f64>> {
    let batch = Batch::new(&normalizer.apply_all(tensors), model.config.neighbor_mode);
    Ok(model
        .predict(params, &batch)?
        .into_iter()
        .map(|y| normalizer.invert_target(y))
        .collect())
}

pub fn save_checkpoint(dir: &Path, ck: &Checkpoint, params: &Params) -> Result<()> {
    write_json(&dir.join(CHECKPOINT_FILE), ck)?;
    let mut out = CsvOut::create(&dir.join(&ck.weights_file), &["index", "value"])?;
    for (i, w) in params.values.iter().enumerate() {
        out.row([i.to_string(), fmt_f64(*w)])?;
    }
    out.finish()
}

pub fn load_checkpoint(dir: &Path) -> Result<(Checkpoint, Model, Params)> {
    let ck: Checkpoint = read_json(&dir.join(CHECKPOINT_FILE))?;
    let model = Model::new(ck.model.clone())?;
    let path = dir.join(&ck.weights_file);
    let csv = CsvIn::open(&path, &["index", "value"])?;
    if csv.len() != model.param_count {
        return Err(Error::format(&path, format!("{} weights, model needs {}", csv.len(), model.param_count)));
    }
    let mut values = vec![0.0; csv.len()];
    for r in 0..csv.len() {
        let i = csv.usize(r, 0)?;
        if i != r {
            return Err(csv.err(r, "weights out of order"));
        }
        values[i] = csv.f64(r, 1)?;
    }
    Ok((ck, model, Params { values }))
}

pub fn write_losses(path: &Path, o: &TrainOutcome) -> Result<()> {
    let mut out = CsvOut::create(path, &["epoch", "train_mse", "val_mse"])?;
    for (e, l) in o.train_loss.iter().enumerate() {
        let v = o.val_loss.get(e).map(|&x| fmt_f64(x)).unwrap_or_default();
        out.row([e.to_string(), fmt_f64(*l), v])?;
    }
    out.finish()
}

pub fn write_weight_log(path: &Path, o: &TrainOutcome, probe_rows: &[usize]) -> Result<()> {
    let width = o.weight_log.first().map(|e| e.weights.len()).unwrap_or(0);
    let header: Vec<String> = ["epoch", "probe_row"]
        .into_iter()
        .map(String::from)
        .chain((0..width).map(|i| format!("c_{i}")))
        .collect();
    let mut out = CsvOut::create(path, &header)?;
    for e in &o.weight_log {
        let row = probe_rows.get(e.probe).copied().unwrap_or(e.probe);
        out.row([e.epoch.to_string(), row.to_string()].into_iter().chain(e.weights.iter().map(|&w| fmt_f64(w))))?;
    }
    out.finish()
}

/// Per-sample `|cp − ŷ|`, joined with the sample location.
pub fn write_error_map(path: &Path, meta: &[SampleMeta], target: &[f64], pred: &[f64]) -> Result<()> {
    let err = error_map(pred, target)?;
    let mut out = CsvOut::create(path, &["row", "patch_id", "u", "v", "AoA", "cp", "prediction", "err"])?;
    for (((m, y), p), e) in meta.iter().zip(target).zip(pred).zip(err) {
        out.row([
            m.row.to_string(),
            m.patch.to_string(),
            fmt_f64(m.u),
            fmt_f64(m.v),
            fmt_f64(m.aoa),
            fmt_f64(*y),
            fmt_f64(*p),
            fmt_f64(e),
        ])?;
    }
    out.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub aoa: f64,
    pub seed: u64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    /// Test MSE on raw (denormalised) C_P.
    pub mse: f64,
    pub final_train_loss: f64,
    pub final_val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalReport {
    pub model: String,
    pub groups: Vec<String>,
    pub d: f64,
    pub convention: Convention,
    pub seed: u64,
    pub epochs: usize,
    pub folds: Vec<FoldReport>,
    /// Unweighted mean of the per-fold MSEs.
    pub average_mse: f64,
}

/// Leave-one-AoA-out cross-validation. Fold `k` (0-based) trains from scratch
/// with seed `cfg.seed + k`; with `out` set, fold artefacts go to
/// `out/fold_{k+1}`.
pub fn crossval(cache: &FeatureCache, cfg: &RunConfig, out: Option<&Path>) -> Result<CrossvalReport> {
    let aoas = cache.aoas();
    let folds = fold_split(&aoas, &cfg.fold_aoas)?;
    let model_cfg = cfg.model_config(cfg.seed)?;
    let mut reports = Vec::with_capacity(folds.len());
    for (k, fold) in folds.iter().enumerate() {
        let seed = cfg.seed + k as u64;
        let (tr, val) = train_val_split(&fold.train, &aoas, cfg.val_fraction, seed);
        let probes: Vec<usize> = fold.test.iter().copied().take(cfg.probes).collect();
        log::info!("fold {} (AoA {}): {} train, {} val, {} test", k + 1, fold.aoa, tr.len(), val.len(), fold.test.len());
        let trained = fit(
            cfg,
            seed,
            &cache.select(&tr),
            &cache.select(&val),
            &cache.select(&probes),
            &format!("train:fold-{}:aoa-{}", k + 1, fold.aoa),
        )?;
        let test = cache.select(&fold.test);
        let target: Vec<f64> = test.iter().map(|t| t.y).collect();
        let pred = trained.predict(&test)?;
        let mse = loss_mse(&pred, &target)?;
        log::info!("fold {} test MSE {mse:.6e}", k + 1);

        if let Some(dir) = out {
            let fdir = dir.join(format!("fold_{}", k + 1));
            save_checkpoint(&fdir, &trained.checkpoint(cfg), &trained.params)?;
            write_losses(&fdir.join("loss.csv"), &trained.outcome)?;
            let meta: Vec<_> = fold.test.iter().map(|&i| cache.meta[i]).collect();
            write_error_map(&fdir.join("errors.csv"), &meta, &target, &pred)?;
            if !probes.is_empty() {
                let rows: Vec<usize> = probes.iter().map(|&i| cache.meta[i].row).collect();
                write_weight_log(&fdir.join("context_weights.csv"), &trained.outcome, &rows)?;
            }
        }
        reports.push(FoldReport {
            fold: k + 1,
            aoa: fold.aoa,
            seed,
            train: tr.len(),
            val: val.len(),
            test: fold.test.len(),
            mse,
            final_train_loss: trained.outcome.train_loss.last().copied().unwrap_or(f64::NAN),
            final_val_loss: trained.outcome.val_loss.last().copied(),
        });
    }
    let average_mse = reports.iter().map(|r| r.mse).sum::<f64>() / reports.len() as f64;
    let report = CrossvalReport {
        model: cfg.model.clone(),
        groups: model_cfg.active_groups().iter().map(|g| g.name().to_string()).collect(),
        d: cfg.d,
        convention: cfg.convention,
        seed: cfg.seed,
        epochs: cfg.epochs,
        folds: reports,
        average_mse,
    };
    if let Some(dir) = out {
        write_json(&dir.join(CROSSVAL_REPORT), &report)?;
        let mut t = CsvOut::create(&dir.join(CROSSVAL_TABLE), &["fold", "AoA", "mse"])?;
        for f in &report.folds {
            t.row([f.fold.to_string(), fmt_f64(f.aoa), fmt_f64(f.mse)])?;
        }
        t.row(["average".to_string(), String::new(), fmt_f64(report.average_mse)])?;
        t.finish()?;
    }
    Ok(report)
}

/// Per-fold MSEs keyed by AoA, from a crossval report (`.json`) or a table
/// with `AoA,mse` columns (`.csv`; rows with an empty or `average` AoA are
/// skipped).
pub fn load_fold_mses(path: &Path) -> Result<(String, Vec<(f64, f64)>)> {
    if path.extension().is_some_and(|e| e == "csv") {
        let csv = CsvIn::open(path, &["AoA", "mse"])?;
        let mut rows = Vec::new();
        for r in 0..csv.len() {
            let aoa = csv.text(r, 0).trim();
            if aoa.is_empty() || aoa.eq_ignore_ascii_case("average") {
                continue;
            }
            rows.push((csv.f64(r, 0)?, csv.f64(r, 1)?));
        }
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok((name, rows))
    } else {
        let rep: CrossvalReport = read_json(path)?;
        let name = format!("{}[{}]", rep.model, rep.groups.join(","));
        Ok((name, rep.folds.iter().map(|f| (f.aoa, f.mse)).collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionRow {
    pub aoa: f64,
    pub model_mse: f64,
    pub baseline_mse: f64,
    /// `(baseline − model) / baseline`, in percent.
    pub eta_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub model: String,
    pub baseline: String,
    pub folds: Vec<ReductionRow>,
    pub model_average_mse: f64,
    pub baseline_average_mse: f64,
    pub average_eta_percent: f64,
    pub note: String,
}

pub fn reduction_report(model: (String, Vec<(f64, f64)>), baseline: (String, Vec<(f64, f64)>)) -> Result<ReductionReport> {
    let (mname, m) = model;
    let (bname, b) = baseline;
    let mut pairs = Vec::with_capacity(m.len());
    for &(aoa, mse) in &m {
        let base = b
            .iter()
            .find(|(a, _)| (a - aoa).abs() <= cpgeo_core::dataset::AOA_MATCH_TOL)
            .ok_or_else(|| Error::Config(format!("baseline has no fold at AoA {aoa}")))?;
        pairs.push((aoa, mse, base.1));
    }
    if pairs.len() != b.len() {
        return Err(Error::Config("model and baseline fold sets differ".into()));
    }
    let model_mse: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let base_mse: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let red = reduction(&model_mse, &base_mse)?;
    let n = pairs.len() as f64;
    Ok(ReductionReport {
        model: mname,
        baseline: bname,
        folds: pairs
            .iter()
            .zip(&red.per_fold)
            .map(|(&(aoa, mm, bm), &eta)| ReductionRow { aoa, model_mse: mm, baseline_mse: bm, eta_percent: eta })
            .collect(),
        model_average_mse: model_mse.iter().sum::<f64>() / n,
        baseline_average_mse: base_mse.iter().sum::<f64>() / n,
        average_eta_percent: red.average,
        note: "averages are unweighted means over folds; MSEs on denormalised C_P".into(),
    })
}

pub fn write_reduction(dir: &Path, r: &ReductionReport) -> Result<()> {
    write_json(&dir.join("report.json"), r)?;
    let mut t = CsvOut::create(&dir.join("report.csv"), &["AoA", "model_mse", "baseline_mse", "eta_percent"])?;
    for f in &r.folds {
        t.row([fmt_f64(f.aoa), fmt_f64(f.model_mse), fmt_f64(f.baseline_mse), fmt_f64(f.eta_percent)])?;
    }
    t.row([
        "average".to_string(),
        fmt_f64(r.model_average_mse),
        fmt_f64(r.baseline_average_mse),
        fmt_f64(r.average_eta_percent),
    ])?;
    t.finish()
}
