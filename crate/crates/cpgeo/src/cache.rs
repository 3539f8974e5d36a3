//! Feature cache: one CSV per input group plus `y.csv`, and a JSON manifest.
//!
//! Group files hold one row per kept sample, in input order, with a leading
//! `row` column (source data row) followed by the group's values in
//! row-major `(channel, row, col)` order for the 9-point layout.

use std::collections::BTreeMap;
use std::path::Path;

use cpgeo_core::dataset::{Assembled, FeatureGroup, FeatureTensors, NeighborMode, NormalizationSpec, RawSample, FLAT_LEN};
use cpgeo_core::{Convention, PatchId};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, read_json, write_json, CsvIn, CsvOut};
use crate::synth::SynthManifest;

pub const MANIFEST_FILE: &str = "features.json";
pub const TARGET_FILE: &str = "y.csv";

/// Where a cached sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub row: usize,
    pub patch: PatchId,
    pub u: f64,
    pub v: f64,
    pub aoa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRow {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheManifest {
    /// `[channels, height, width]` per group, 9-point layout.
    pub shapes: BTreeMap<String, [usize; 3]>,
    pub d: f64,
    pub convention: Convention,
    /// Normalisation is fit per training fold, so the cache holds raw values.
    pub normalizer: Option<NormalizationSpec>,
    pub generator: Option<SynthManifest>,
    pub seed: Option<u64>,
    pub samples: usize,
    pub dropped: Vec<DroppedRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCache {
    pub tensors: Vec<FeatureTensors>,
    pub meta: Vec<SampleMeta>,
    pub manifest: CacheManifest,
}

impl FeatureCache {
    pub fn from_assembled(
        assembled: &Assembled,
        samples: &[RawSample],
        d: f64,
        convention: Convention,
        generator: Option<SynthManifest>,
    ) -> Self {
        let meta = assembled
            .kept
            .iter()
            .map(|&i| {
                let s = &samples[i];
                SampleMeta {
                    row: s.row,
                    patch: s.location.patch,
                    u: s.location.u,
                    v: s.location.v,
                    aoa: s.condition.aoa,
                }
            })
            .collect();
        let shapes = FeatureGroup::ALL
            .iter()
            .map(|g| {
                let s = g.shape(NeighborMode::NinePoint);
                (g.name().to_string(), [s.channels, s.height, s.width])
            })
            .collect();
        let seed = generator.as_ref().map(|g| g.config.seed);
        FeatureCache {
            tensors: assembled.tensors(),
            meta,
            manifest: CacheManifest {
                shapes,
                d,
                convention,
                normalizer: None,
                generator,
                seed,
                samples: assembled.samples.len(),
                dropped: assembled
                    .dropped
                    .iter()
                    .map(|x| DroppedRow { row: x.row, reason: x.reason.clone() })
                    .collect(),
            },
        }
    }

    pub fn aoas(&self) -> Vec<f64> {
        self.meta.iter().map(|m| m.aoa).collect()
    }

    pub fn select(&self, idx: &[usize]) -> Vec<FeatureTensors> {
        idx.iter().map(|&i| self.tensors[i]).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut buf = Vec::new();
        for g in FeatureGroup::ALL {
            let len = g.shape(NeighborMode::NinePoint).len();
            let header: Vec<String> =
                std::iter::once("row".to_string()).chain((0..len).map(|k| format!("{}_{k}", g.name()))).collect();
            let mut out = CsvOut::create(&dir.join(format!("{}.csv", g.name())), &header)?;
            for (t, m) in self.tensors.iter().zip(&self.meta) {
                buf.clear();
                t.group_values(g, NeighborMode::NinePoint, &mut buf);
                out.row(std::iter::once(m.row.to_string()).chain(buf.iter().map(|&x| fmt_f64(x))))?;
            }
            out.finish()?;
        }
        let mut out = CsvOut::create(&dir.join(TARGET_FILE), &["row", "patch_id", "u", "v", "AoA", "cp"])?;
        for (t, m) in self.tensors.iter().zip(&self.meta) {
            out.row([
                m.row.to_string(),
                m.patch.to_string(),
                fmt_f64(m.u),
                fmt_f64(m.v),
                fmt_f64(m.aoa),
                fmt_f64(t.y),
            ])?;
        }
        out.finish()?;
        write_json(&dir.join(MANIFEST_FILE), &self.manifest)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let manifest: CacheManifest = read_json(&dir.join(MANIFEST_FILE))?;
        let ypath = dir.join(TARGET_FILE);
        let ycsv = CsvIn::open(&ypath, &["row", "patch_id", "u", "v", "AoA", "cp"])?;
        let mut meta = Vec::with_capacity(ycsv.len());
        let mut ys = Vec::with_capacity(ycsv.len());
        for r in 0..ycsv.len() {
            meta.push(SampleMeta {
                row: ycsv.usize(r, 0)?,
                patch: PatchId(ycsv.usize(r, 1)? as u32),
                u: ycsv.f64(r, 2)?,
                v: ycsv.f64(r, 3)?,
                aoa: ycsv.f64(r, 4)?,
            });
            ys.push(ycsv.f64(r, 5)?);
        }
        let mut flats = vec![[0.0; FLAT_LEN]; ys.len()];
        let mut offset = 0;
        for g in FeatureGroup::ALL {
            let len = g.shape(NeighborMode::NinePoint).len();
            let path = dir.join(format!("{}.csv", g.name()));
            let names: Vec<String> =
                std::iter::once("row".to_string()).chain((0..len).map(|k| format!("{}_{k}", g.name()))).collect();
            let cols: Vec<&str> = names.iter().map(String::as_str).collect();
            let csv = CsvIn::open(&path, &cols)?;
            if csv.len() != ys.len() {
                return Err(Error::format(&path, format!("{} rows, {} expected", csv.len(), ys.len())));
            }
            for (r, flat) in flats.iter_mut().enumerate() {
                if csv.usize(r, 0)? != meta[r].row {
                    return Err(csv.err(r, "row id differs from y.csv"));
                }
                for k in 0..len {
                    flat[offset + k] = csv.f64(r, k + 1)?;
                }
            }
            offset += len;
        }
        let tensors = flats.iter().zip(&ys).map(|(f, &y)| FeatureTensors::from_flat(f, y)).collect();
        Ok(FeatureCache { tensors, meta, manifest })
    }
}
