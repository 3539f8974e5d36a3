//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored; unknown keys are an error.
//! Lists are comma separated.

use std::path::Path;

use cpgeo_core::dataset::{DEFAULT_FOLD_AOAS, FeatureGroup};
use cpgeo_core::nn::{AdamConfig, ModelConfig, TrainConfig, DEFAULT_K};
use cpgeo_core::stencil::DEFAULT_SPACINGS;
use cpgeo_core::Convention;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::SynthConfig;

/// Every recognised key with its meaning, as printed by `--help`.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "base seed; fold k trains with seed + k"),
    ("model", "rgfil | mlp | mtl | mdf"),
    ("k", "outputs per function network"),
    ("d", "stencil chord spacing: 0.01 | 0.005 | 0.001"),
    ("convention", "Ricci contraction: positive-sphere | literal"),
    ("groups", "active feature groups, e.g. x1,x2"),
    ("epochs", "training epochs"),
    ("batch_size", "mini-batch size"),
    ("learning_rate", "Adam step size"),
    ("beta1", "Adam first-moment decay"),
    ("beta2", "Adam second-moment decay"),
    ("epsilon", "Adam denominator offset"),
    ("leaky_slope", "LeakyReLU negative slope"),
    ("val_fraction", "per-fold validation share, stratified by AoA"),
    ("normalize_target", "also min-max scale C_P (reports are denormalised)"),
    ("fold_aoas", "held-out AoA of each fold"),
    ("samples_per_axis", "geometry check sample grid"),
    ("probes", "test samples per fold whose context weights are logged every epoch"),
    ("synth.patches", "spanwise patches (3..=6)"),
    ("synth.stations", "span stations"),
    ("synth.points_per_section", "chordwise samples per station and AoA"),
    ("synth.aoas", "angles of attack"),
    ("synth.noise_sigma", "Gaussian noise on C_P"),
    ("synth.jitter", "random z bound on interior control points"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub model: String,
    pub k: usize,
    pub d: f64,
    pub convention: Convention,
    pub groups: [bool; 5],
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub leaky_slope: f64,
    pub val_fraction: f64,
    pub normalize_target: bool,
    pub fold_aoas: Vec<f64>,
    pub samples_per_axis: usize,
    pub probes: usize,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            model: "rgfil".into(),
            k: DEFAULT_K,
            d: 0.005,
            convention: Convention::PositiveSphere,
            groups: [true; 5],
            epochs: TrainConfig::default().epochs,
            batch_size: TrainConfig::default().batch_size,
            adam: AdamConfig::default(),
            leaky_slope: cpgeo_core::nn::model::DEFAULT_LEAKY_SLOPE,
            val_fraction: 0.1,
            normalize_target: false,
            fold_aoas: DEFAULT_FOLD_AOAS.to_vec(),
            samples_per_axis: cpgeo_core::bezier::DEFAULT_SAMPLES_PER_AXIS,
            probes: 0,
            synth: SynthConfig::default(),
        }
    }
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',').map(|s| s.trim().parse::<f64>().map_err(|e| e.to_string())).collect()
}

fn parse_groups(v: &str) -> std::result::Result<[bool; 5], String> {
    let mut mask = [false; 5];
    for name in v.split(',').map(str::trim) {
        let g = FeatureGroup::ALL
            .into_iter()
            .find(|g| g.name() == name)
            .ok_or_else(|| format!("unknown feature group '{name}'"))?;
        mask[g.index()] = true;
    }
    Ok(mask)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, "expected 'key = value'"))?;
            cfg.set(k.trim(), v.trim()).map_err(|m| Error::parse(path, i + 1, m))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| format!("'{v}': {e}"))
        }
        match key {
            "seed" => self.seed = num(v)?,
            "model" => self.model = v.to_string(),
            "k" => self.k = num(v)?,
            "d" => self.d = num(v)?,
            "convention" => self.convention = v.parse().map_err(|e: cpgeo_core::Error| e.to_string())?,
            "groups" => self.groups = parse_groups(v)?,
            "epochs" => self.epochs = num(v)?,
            "batch_size" => self.batch_size = num(v)?,
            "learning_rate" => self.adam.learning_rate = num(v)?,
            "beta1" => self.adam.beta1 = num(v)?,
            "beta2" => self.adam.beta2 = num(v)?,
            "epsilon" => self.adam.epsilon = num(v)?,
            "leaky_slope" => self.leaky_slope = num(v)?,
            "val_fraction" => self.val_fraction = num(v)?,
            "normalize_target" => self.normalize_target = num(v)?,
            "fold_aoas" => self.fold_aoas = parse_list(v)?,
            "samples_per_axis" => self.samples_per_axis = num(v)?,
            "probes" => self.probes = num(v)?,
            "synth.patches" => self.synth.patches = num(v)?,
            "synth.stations" => self.synth.stations = num(v)?,
            "synth.points_per_section" => self.synth.points_per_section = num(v)?,
            "synth.aoas" => self.synth.aoas = parse_list(v)?,
            "synth.noise_sigma" => self.synth.noise_sigma = num(v)?,
            "synth.jitter" => self.synth.shape.jitter = num(v)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        cpgeo_core::stencil::validate_spacing(self.d, &DEFAULT_SPACINGS)?;
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config("val_fraction must be in [0, 1)".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        self.model_config(self.seed)?;
        Ok(())
    }

    /// The model preset with the group mask and slope applied.
    pub fn model_config(&self, seed: u64) -> Result<ModelConfig> {
        let mut m = ModelConfig::preset(&self.model, self.k, seed)?.with_mask(self.groups);
        m.leaky_slope = self.leaky_slope;
        if m.active_groups().is_empty() {
            return Err(Error::Config(format!("model '{}' has no active group under the mask", self.model)));
        }
        Ok(m)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { adam: self.adam, batch_size: self.batch_size, epochs: self.epochs, seed }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_table_matches_setter() {
        let mut c = RunConfig::default();
        for (k, _) in KEYS {
            let v = match *k {
                "model" => "mlp",
                "convention" => "literal",
                "groups" => "x1,x2",
                "normalize_target" => "true",
                "fold_aoas" | "synth.aoas" => "7, 12",
                "d" => "0.01",
                "learning_rate" | "beta1" | "beta2" | "epsilon" | "leaky_slope" | "val_fraction" => "0.5",
                "synth.noise_sigma" | "synth.jitter" => "0.5",
                _ => "3",
            };
            c.set(k, v).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
        assert_eq!(c.groups, [true, true, false, false, false]);
        assert!(c.set("nonsense", "1").is_err());
    }
}
