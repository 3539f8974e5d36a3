//! Seeded synthetic wing: a swept, tapered upper surface split spanwise into
//! Bézier patches, with pressure samples from an explicit analytic formula
//! that depends on the local curvature features.

use std::path::Path;

use cpgeo_core::bezier::{CheckOptions, DEFAULT_SAMPLES_PER_AXIS};
use cpgeo_core::dataset::{FlightCondition, RawSample, REFERENCE_AOAS, REFERENCE_MACH, REFERENCE_REYNOLDS};
use cpgeo_core::geometry::{feature_bundle, Convention};
use cpgeo_core::{ControlGrid, PatchId, PiecewiseManifold, SurfacePoint, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub const FORMULA: &str = "cp = c0 + c1*a - c2*a*(1-u)^4 + c3*(1-eta)*u*(1-u) \
+ (c4 + c5*a)*tanh(S/s_ref) + (c6 + c7*a)*tanh(gamma_norm/g_ref) + N(0, sigma^2); \
a = AoA/20, u = chordwise parameter, eta = span fraction, S = scalar curvature \
(positive-sphere convention) and gamma_norm = Frobenius norm of the Christoffel \
array, both at the sample point";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub c: [f64; 8],
    pub s_ref: f64,
    pub g_ref: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients { c: [0.1, -0.4, 1.6, -0.6, 0.35, 0.5, -0.2, 0.25], s_ref: 0.15, g_ref: 0.3 }
    }
}

/// Noise-free part of the generator.
pub fn cp_model(k: &Coefficients, aoa: f64, u: f64, eta: f64, scalar: f64, gamma_norm: f64) -> f64 {
    let a = aoa / 20.0;
    let c = &k.c;
    c[0] + c[1] * a - c[2] * a * (1.0 - u).powi(4)
        + c[3] * (1.0 - eta) * u * (1.0 - u)
        + (c[4] + c[5] * a) * (scalar / k.s_ref).tanh()
        + (c[6] + c[7] * a) * (gamma_norm / k.g_ref).tanh()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WingShape {
    pub root_chord: f64,
    pub tip_chord: f64,
    pub semi_span: f64,
    /// Leading-edge x offset at the tip.
    pub sweep: f64,
    /// Peak thickness of the upper surface relative to the local chord.
    pub thickness: f64,
    pub dihedral: f64,
    /// Uniform random z offset bound on interior control points.
    pub jitter: f64,
}

impl Default for WingShape {
    fn default() -> Self {
        WingShape {
            root_chord: 1.0,
            tip_chord: 0.45,
            semi_span: 2.0,
            sweep: 0.6,
            thickness: 0.12,
            dihedral: 0.05,
            jitter: 0.004,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Spanwise patch count, 3..=6.
    pub patches: usize,
    /// Patch degrees `(m, n)`, each 3..=5.
    pub degrees: (usize, usize),
    pub stations: usize,
    pub points_per_section: usize,
    pub aoas: Vec<f64>,
    pub noise_sigma: f64,
    pub shape: WingShape,
    pub coefficients: Coefficients,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            patches: 4,
            degrees: (5, 4),
            stations: 10,
            points_per_section: 12,
            aoas: REFERENCE_AOAS.to_vec(),
            noise_sigma: 0.01,
            shape: WingShape::default(),
            coefficients: Coefficients::default(),
        }
    }
}

impl SynthConfig {
    pub fn sample_count(&self) -> usize {
        self.aoas.len() * self.stations * self.points_per_section
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(3..=6).contains(&self.patches) {
            return bad("synth patch count must be in 3..=6");
        }
        if !(3..=5).contains(&self.degrees.0) || !(3..=5).contains(&self.degrees.1) {
            return bad("synth patch degrees must be in 3..=5");
        }
        if self.stations == 0 || self.points_per_section == 0 || self.aoas.is_empty() {
            return bad("synth needs stations, points per section and AoAs");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise sigma must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub formula: String,
    pub coefficients: Coefficients,
    pub convention: Convention,
    pub config: SynthConfig,
    pub sample_count: usize,
}

pub struct SynthData {
    pub grids: Vec<ControlGrid>,
    pub samples: Vec<RawSample>,
    pub manifest: SynthManifest,
}

/// Patch `p` of `count` covers span fractions `[p/count, (p+1)/count]`.
fn wing_patch(shape: &WingShape, p: usize, count: usize, degrees: (usize, usize), rng: &mut ChaCha8Rng) -> Result<ControlGrid> {
    let s = shape;
    let eta0 = p as f64 / count as f64;
    let deta = 1.0 / count as f64;
    let dc = s.tip_chord - s.root_chord;
    // chord = c0 + c1 v
    let c0 = s.root_chord + dc * eta0;
    let c1 = dc * deta;
    // thickness profile t(u) = 4u - 5.2u² + 1.2u³, zero at both ends
    let t = [0.0, 4.0, -5.2, 1.2];
    let mut coeffs = vec![
        (0, 0, Vec3::new(s.sweep * eta0, s.semi_span * eta0, s.dihedral * eta0 * eta0)),
        (0, 1, Vec3::new(s.sweep * deta, s.semi_span * deta, 2.0 * s.dihedral * eta0 * deta)),
        (0, 2, Vec3::new(0.0, 0.0, s.dihedral * deta * deta)),
        (1, 0, Vec3::new(c0, 0.0, 0.0)),
        (1, 1, Vec3::new(c1, 0.0, 0.0)),
    ];
    for (i, &ti) in t.iter().enumerate().skip(1) {
        coeffs.push((i, 0, Vec3::new(0.0, 0.0, s.thickness * c0 * ti)));
        coeffs.push((i, 1, Vec3::new(0.0, 0.0, s.thickness * c1 * ti)));
    }
    let (m, n) = degrees;
    let base = ControlGrid::from_monomials(PatchId(p as u32), m, n, &coeffs)?;
    // interior jitter keeps shared edges, so seams stay C0
    let mut pts = base.points().to_vec();
    for a in 1..m {
        for b in 1..n {
            pts[a * (n + 1) + b] += Vec3::new(0.0, 0.0, rng.random_range(-s.jitter..=s.jitter));
        }
    }
    Ok(ControlGrid::new(PatchId(p as u32), m, n, pts)?)
}

pub fn wing(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Vec<ControlGrid>> {
    (0..cfg.patches)
        .map(|p| wing_patch(&cfg.shape, p, cfg.patches, cfg.degrees, rng))
        .collect()
}

/// Span fraction to `(patch, v)`.
pub fn locate_span(eta: f64, patches: usize) -> (PatchId, f64) {
    let x = eta * patches as f64;
    let p = (x.floor() as usize).min(patches - 1);
    (PatchId(p as u32), (x - p as f64).clamp(0.0, 1.0))
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grids = wing(cfg, &mut rng)?;
    let mut manifold = PiecewiseManifold::new(grids.clone())?;
    let reports = manifold.check_all(DEFAULT_SAMPLES_PER_AXIS, &CheckOptions::default())?;
    let bad: Vec<PatchId> = reports.iter().filter(|r| !r.valid).map(|r| r.patch).collect();
    if !bad.is_empty() {
        return Err(Error::GeometryRejected { patches: bad });
    }

    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let convention = Convention::PositiveSphere;
    let mut samples = Vec::with_capacity(cfg.sample_count());
    for &aoa in &cfg.aoas {
        let condition = FlightCondition::new(REFERENCE_MACH, aoa, REFERENCE_REYNOLDS)?;
        for st in 0..cfg.stations {
            let eta = (st as f64 + 0.5) / cfg.stations as f64;
            let (patch, v) = locate_span(eta, cfg.patches);
            for i in 0..cfg.points_per_section {
                // stratified chordwise taps, redrawn for every condition
                let w = (i as f64 + rng.random_range(0.0..1.0)) / cfg.points_per_section as f64;
                let u = 0.02 + 0.96 * w;
                let location = SurfacePoint::new(patch, u, v)?;
                let f = feature_bundle(&manifold, &location, convention)?;
                let clean = cp_model(&cfg.coefficients, aoa, u, eta, f.scalar, f.gamma_norm());
                let eps = if cfg.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                samples.push(RawSample {
                    row: samples.len() + 1,
                    location,
                    condition,
                    cp: clean + eps,
                    span: Some(100.0 * eta),
                });
            }
        }
    }
    let manifest = SynthManifest {
        formula: FORMULA.to_string(),
        coefficients: cfg.coefficients,
        convention,
        config: cfg.clone(),
        sample_count: samples.len(),
    };
    Ok(SynthData { grids, samples, manifest })
}

pub const GRID_FILE: &str = "grid.csv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const MANIFEST_FILE: &str = "synth_manifest.json";

pub fn write(dir: &Path, data: &SynthData) -> Result<()> {
    io::write_grids(&dir.join(GRID_FILE), &data.grids)?;
    io::write_samples(&dir.join(SAMPLES_FILE), &data.samples)?;
    io::write_json(&dir.join(MANIFEST_FILE), &data.manifest)
}
