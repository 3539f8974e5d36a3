//! Samples, packed feature groups, max-min normalisation and
//! leave-one-AoA-out folds.
//!
//! Per sample the five feature groups are
//!
//! | group | content                          | shape (9-point) |
//! |-------|----------------------------------|-----------------|
//! | x1    | `[Ma, AoA, Re]`                  | 3               |
//! | x2    | stencil coordinates              | 1 x 9 x 3       |
//! | x3    | stacked 2x2 metrics              | 1 x 18 x 2      |
//! | x4    | stacked Christoffel arrays       | 2 x 18 x 2      |
//! | x5    | scalar curvatures                | 9               |
//!
//! Stencil slot `r` occupies row `r` of x2, rows `2r..2r+1` of x3 and of each
//! x4 channel (channel = upper index `k`), and entry `r` of x5.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bezier::{PiecewiseManifold, SurfacePoint};
use crate::error::{config, Error, Result};
use crate::geometry::{Convention, RiemannianFeatures};
use crate::num::abs;
use crate::stencil::{build_stencil, stencil_features, Stencil, CENTER_SLOT};

/// Angles of attack (degrees) whose samples form the default test folds.
pub const DEFAULT_FOLD_AOAS: [f64; 7] = [7.0, 12.0, 16.0, 18.0, 18.5, 19.0, 20.0];

/// Angles of attack present in the reference flight-condition table.
pub const REFERENCE_AOAS: [f64; 9] = [0.0, 7.0, 12.0, 16.0, 18.0, 18.5, 19.0, 20.0, 21.0];
pub const REFERENCE_MACH: f64 = 0.175;
pub const REFERENCE_REYNOLDS: f64 = 1.35e6;

/// Two angles of attack closer than this are the same fold key.
pub const AOA_MATCH_TOL: f64 = 1e-9;

/// Fraction of samples allowed to drop during assembly.
pub const MAX_DROP_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightCondition {
    pub mach: f64,
    /// Degrees.
    pub aoa: f64,
    pub reynolds: f64,
}

impl FlightCondition {
    pub fn new(mach: f64, aoa: f64, reynolds: f64) -> Result<Self> {
        if !(mach.is_finite() && aoa.is_finite() && reynolds.is_finite()) {
            return Err(config("flight condition has a non-finite value"));
        }
        if mach <= 0.0 || reynolds <= 0.0 {
            return Err(config(format!(
                "Mach ({mach}) and Reynolds ({reynolds}) must be positive"
            )));
        }
        Ok(FlightCondition { mach, aoa, reynolds })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    /// 1-based data row in the source file, for messages.
    pub row: usize,
    pub location: SurfacePoint,
    pub condition: FlightCondition,
    pub cp: f64,
    /// Percent span, metadata only.
    pub span: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborMode {
    OnePoint,
    NinePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureGroup {
    X1,
    X2,
    X3,
    X4,
    X5,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 5] = [
        FeatureGroup::X1,
        FeatureGroup::X2,
        FeatureGroup::X3,
        FeatureGroup::X4,
        FeatureGroup::X5,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["x1", "x2", "x3", "x4", "x5"][self.index()]
    }

    /// `(channels, height, width)` of the group for one sample.
    pub fn shape(self, mode: NeighborMode) -> Shape {
        let rows = match mode {
            NeighborMode::OnePoint => 1,
            NeighborMode::NinePoint => 9,
        };
        match (self, mode) {
            (FeatureGroup::X1, _) => Shape::new(1, 1, 3),
            (FeatureGroup::X2, NeighborMode::OnePoint) => Shape::new(1, 1, 3),
            (FeatureGroup::X2, NeighborMode::NinePoint) => Shape::new(1, 9, 3),
            (FeatureGroup::X3, _) => Shape::new(1, 2 * rows, 2),
            (FeatureGroup::X4, _) => Shape::new(2, 2 * rows, 2),
            (FeatureGroup::X5, _) => Shape::new(1, 1, rows),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape { channels, height, width }
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Number of input components of a 9-point sample across all groups.
pub const FLAT_LEN: usize = 3 + 27 + 36 + 72 + 9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureTensors {
    pub x1: [f64; 3],
    pub x2: [[f64; 3]; 9],
    pub x3: [[f64; 2]; 18],
    pub x4: [[[f64; 2]; 18]; 2],
    pub x5: [f64; 9],
    pub y: f64,
}

impl FeatureTensors {
    pub fn from_stencil(
        condition: &FlightCondition,
        positions: &[[f64; 3]; 9],
        features: &[RiemannianFeatures; 9],
        cp: f64,
    ) -> Self {
        let mut x3 = [[0.0; 2]; 18];
        let mut x4 = [[[0.0; 2]; 18]; 2];
        let mut x5 = [0.0; 9];
        for (r, f) in features.iter().enumerate() {
            for i in 0..2 {
                x3[2 * r + i] = f.g[i];
                for k in 0..2 {
                    x4[k][2 * r + i] = f.gamma[k][i];
                }
            }
            x5[r] = f.scalar;
        }
        FeatureTensors {
            x1: [condition.mach, condition.aoa, condition.reynolds],
            x2: *positions,
            x3,
            x4,
            x5,
            y: cp,
        }
    }

    /// Values of one group in row-major `(channel, row, col)` order.
    pub fn group_values(&self, group: FeatureGroup, mode: NeighborMode, out: &mut Vec<f64>) {
        let c = CENTER_SLOT;
        match (group, mode) {
            (FeatureGroup::X1, _) => out.extend_from_slice(&self.x1),
            (FeatureGroup::X2, NeighborMode::NinePoint) => {
                self.x2.iter().for_each(|r| out.extend_from_slice(r))
            }
            (FeatureGroup::X2, NeighborMode::OnePoint) => out.extend_from_slice(&self.x2[c]),
            (FeatureGroup::X3, NeighborMode::NinePoint) => {
                self.x3.iter().for_each(|r| out.extend_from_slice(r))
            }
            (FeatureGroup::X3, NeighborMode::OnePoint) => {
                self.x3[2 * c..2 * c + 2].iter().for_each(|r| out.extend_from_slice(r))
            }
            (FeatureGroup::X4, NeighborMode::NinePoint) => self
                .x4
                .iter()
                .for_each(|ch| ch.iter().for_each(|r| out.extend_from_slice(r))),
            (FeatureGroup::X4, NeighborMode::OnePoint) => self.x4.iter().for_each(|ch| {
                ch[2 * c..2 * c + 2].iter().for_each(|r| out.extend_from_slice(r))
            }),
            (FeatureGroup::X5, NeighborMode::NinePoint) => out.extend_from_slice(&self.x5),
            (FeatureGroup::X5, NeighborMode::OnePoint) => out.push(self.x5[c]),
        }
    }

    /// All inputs flattened in group order x1..x5 (9-point layout).
    pub fn to_flat(&self) -> [f64; FLAT_LEN] {
        let mut v = Vec::with_capacity(FLAT_LEN);
        for g in FeatureGroup::ALL {
            self.group_values(g, NeighborMode::NinePoint, &mut v);
        }
        let mut out = [0.0; FLAT_LEN];
        out.copy_from_slice(&v);
        out
    }

    pub fn from_flat(flat: &[f64; FLAT_LEN], y: f64) -> Self {
        let mut it = flat.iter().copied();
        let mut next = || it.next().expect("FLAT_LEN components");
        let mut t = FeatureTensors {
            x1: [0.0; 3],
            x2: [[0.0; 3]; 9],
            x3: [[0.0; 2]; 18],
            x4: [[[0.0; 2]; 18]; 2],
            x5: [0.0; 9],
            y,
        };
        t.x1.iter_mut().for_each(|x| *x = next());
        t.x2.iter_mut().flatten().for_each(|x| *x = next());
        t.x3.iter_mut().flatten().for_each(|x| *x = next());
        t.x4.iter_mut().flatten().flatten().for_each(|x| *x = next());
        t.x5.iter_mut().for_each(|x| *x = next());
        t
    }
}

/// Features of one sample plus the intermediate stencil data.
#[derive(Debug, Clone)]
pub struct AssembledSample {
    pub tensors: FeatureTensors,
    pub stencil: Stencil,
    pub positions: [[f64; 3]; 9],
    pub features: [RiemannianFeatures; 9],
}

pub fn assemble_sample(
    manifold: &PiecewiseManifold,
    sample: &RawSample,
    d: f64,
    convention: Convention,
) -> Result<AssembledSample> {
    let stencil = build_stencil(manifold, &sample.location, d)?;
    let features = stencil_features(manifold, &stencil, convention)?;
    let mut positions = [[0.0; 3]; 9];
    for (slot, p) in stencil.points.iter().enumerate() {
        positions[slot] = manifold.eval(p)?.0;
    }
    let tensors = FeatureTensors::from_stencil(&sample.condition, &positions, &features, sample.cp);
    Ok(AssembledSample { tensors, stencil, positions, features })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dropped {
    /// Index into the input sample list.
    pub index: usize,
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Assembled {
    pub samples: Vec<AssembledSample>,
    /// Index into the input list of each kept sample, ascending.
    pub kept: Vec<usize>,
    pub dropped: Vec<Dropped>,
}

impl Assembled {
    pub fn tensors(&self) -> Vec<FeatureTensors> {
        self.samples.iter().map(|s| s.tensors).collect()
    }
}

/// Whether an extraction error drops the sample instead of failing the run.
pub fn is_droppable(e: &Error) -> bool {
    matches!(e, Error::DegenerateMetric { .. } | Error::StencilOutOfPatch { .. })
}

/// Collects per-sample results (in input order) and applies the drop policy.
pub fn collect_assembled(
    results: Vec<(usize, Result<AssembledSample>)>,
    samples: &[RawSample],
) -> Result<Assembled> {
    let total = results.len();
    let mut out = Assembled { samples: Vec::new(), kept: Vec::new(), dropped: Vec::new() };
    for (index, r) in results {
        match r {
            Ok(s) => {
                out.samples.push(s);
                out.kept.push(index);
            }
            Err(e) if is_droppable(&e) => out.dropped.push(Dropped {
                index,
                row: samples[index].row,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    if out.dropped.len() as f64 > MAX_DROP_FRACTION * total as f64 {
        return Err(Error::TooManyDropped { dropped: out.dropped.len(), total });
    }
    Ok(out)
}

/// Stencil features for every sample, sequentially in input order.
pub fn assemble(
    manifold: &PiecewiseManifold,
    samples: &[RawSample],
    d: f64,
    convention: Convention,
) -> Result<Assembled> {
    let results = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (i, assemble_sample(manifold, s, d, convention)))
        .collect();
    collect_assembled(results, samples)
}

/// Per-component min and max of the inputs (and optionally the target).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub target: Option<[f64; 2]>,
    /// Which data the ranges were fit on, e.g. `"train:fold-3"`.
    pub provenance: String,
    pub fitted_samples: usize,
    /// Columns with `max == min` map to this value.
    pub constant_value: f64,
}

pub fn fit_normalizer(
    train: &[FeatureTensors],
    include_target: bool,
    provenance: impl Into<String>,
) -> Result<NormalizationSpec> {
    let first = train
        .first()
        .ok_or_else(|| config("cannot fit a normalizer on an empty training set"))?;
    let mut min = first.to_flat().to_vec();
    let mut max = min.clone();
    let mut target = [first.y, first.y];
    for t in &train[1..] {
        for (k, x) in t.to_flat().iter().enumerate() {
            min[k] = min[k].min(*x);
            max[k] = max[k].max(*x);
        }
        target[0] = target[0].min(t.y);
        target[1] = target[1].max(t.y);
    }
    Ok(NormalizationSpec {
        min,
        max,
        target: include_target.then_some(target),
        provenance: provenance.into(),
        fitted_samples: train.len(),
        constant_value: 0.0,
    })
}

#[inline]
fn scale(x: f64, lo: f64, hi: f64, constant: f64) -> f64 {
    if hi > lo {
        (x - lo) / (hi - lo)
    } else {
        constant
    }
}

#[inline]
fn unscale(x: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        x * (hi - lo) + lo
    } else {
        lo
    }
}

impl NormalizationSpec {
    pub fn apply(&self, t: &FeatureTensors) -> FeatureTensors {
        let mut flat = t.to_flat();
        for (k, x) in flat.iter_mut().enumerate() {
            *x = scale(*x, self.min[k], self.max[k], self.constant_value);
        }
        FeatureTensors::from_flat(&flat, self.apply_target(t.y))
    }

    pub fn invert(&self, t: &FeatureTensors) -> FeatureTensors {
        let mut flat = t.to_flat();
        for (k, x) in flat.iter_mut().enumerate() {
            *x = unscale(*x, self.min[k], self.max[k]);
        }
        FeatureTensors::from_flat(&flat, self.invert_target(t.y))
    }

    pub fn apply_target(&self, y: f64) -> f64 {
        match self.target {
            Some([lo, hi]) => scale(y, lo, hi, self.constant_value),
            None => y,
        }
    }

    pub fn invert_target(&self, y: f64) -> f64 {
        match self.target {
            Some([lo, hi]) => unscale(y, lo, hi),
            None => y,
        }
    }

    pub fn apply_all(&self, ts: &[FeatureTensors]) -> Vec<FeatureTensors> {
        ts.iter().map(|t| self.apply(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub aoa: f64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Leave-one-AoA-out folds over the samples' angles of attack.
pub fn fold_split(aoas: &[f64], fold_aoas: &[f64]) -> Result<Vec<Fold>> {
    if fold_aoas.is_empty() {
        return Err(config("fold AoA list is empty"));
    }
    for (i, a) in fold_aoas.iter().enumerate() {
        if fold_aoas[..i].iter().any(|b| abs(a - b) <= AOA_MATCH_TOL) {
            return Err(config(format!("duplicate fold AoA {a}")));
        }
    }
    fold_aoas
        .iter()
        .map(|&fa| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..aoas.len()).partition(|&i| abs(aoas[i] - fa) <= AOA_MATCH_TOL);
            if test.is_empty() {
                return Err(config(format!("fold AoA {fa} does not occur in the data")));
            }
            Ok(Fold { aoa: fa, train, test })
        })
        .collect()
}

/// Seeded validation split of `train`, stratified by AoA.
///
/// Returns `(train, validation)` index lists, both ascending.
pub fn train_val_split(
    train: &[usize],
    aoas: &[f64],
    val_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    // key on the bit pattern; AoAs come from the same parsed column
    let mut strata: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for &i in train {
        strata.entry(aoas[i].to_bits()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tr = Vec::new();
    let mut val = Vec::new();
    for (_, mut idx) in strata {
        idx.shuffle(&mut rng);
        let n_val = libm::round(val_fraction * idx.len() as f64) as usize;
        let n_val = n_val.min(idx.len());
        val.extend_from_slice(&idx[..n_val]);
        tr.extend_from_slice(&idx[n_val..]);
    }
    tr.sort_unstable();
    val.sort_unstable();
    (tr, val)
}
