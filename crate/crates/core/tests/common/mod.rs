//! Test-only oracles: direct polynomial evaluation, random grids and finite
//! differences. Nothing here calls into the Bézier machinery except to build
//! control grids.
#![allow(dead_code)]

use cpgeo_core::bezier::{ControlGrid, PatchId, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Scalar polynomial `Σ c u^i v^j`.
#[derive(Debug, Clone)]
pub struct Poly {
    pub terms: Vec<(usize, usize, f64)>,
}

impl Poly {
    /// Random polynomial of total degree ≤ `deg` with coefficients in [-1, 1].
    pub fn random(r: &mut ChaCha8Rng, deg: usize) -> Self {
        let mut terms = Vec::new();
        for i in 0..=deg {
            for j in 0..=(deg - i) {
                terms.push((i, j, r.random_range(-1.0..1.0)));
            }
        }
        Poly { terms }
    }

    /// `∂^{p+q} f / ∂u^p ∂v^q` at `(u, v)`.
    pub fn deriv(&self, p: usize, q: usize, u: f64, v: f64) -> f64 {
        self.terms
            .iter()
            .filter(|(i, j, _)| *i >= p && *j >= q)
            .map(|&(i, j, c)| {
                c * falling(i, p) * falling(j, q) * u.powi((i - p) as i32) * v.powi((j - q) as i32)
            })
            .sum()
    }
}

fn falling(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

/// Bézier patch of the graph surface `(u, v, f(u, v))`.
pub fn graph_patch(id: u32, f: &Poly, deg: usize) -> ControlGrid {
    let mut coeffs = vec![
        (1, 0, Vec3::new(1.0, 0.0, 0.0)),
        (0, 1, Vec3::new(0.0, 1.0, 0.0)),
    ];
    for &(i, j, c) in &f.terms {
        coeffs.push((i, j, Vec3::new(0.0, 0.0, c)));
    }
    ControlGrid::from_monomials(PatchId(id), deg, deg, &coeffs).unwrap()
}

pub fn random_grid(r: &mut ChaCha8Rng, id: u32, m: usize, n: usize) -> ControlGrid {
    ControlGrid::from_fn(PatchId(id), m, n, |_, _| {
        Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
    })
    .unwrap()
}

/// Planar patch with an affine parametrisation `o + u e1 + v e2`, elevated
/// to degrees `(m, n)`.
pub fn affine_patch(id: u32, m: usize, n: usize, o: Vec3, e1: Vec3, e2: Vec3) -> ControlGrid {
    ControlGrid::from_fn(PatchId(id), m, n, |a, b| {
        o + e1 * (a as f64 / m as f64) + e2 * (b as f64 / n as f64)
    })
    .unwrap()
}

/// `rel = ‖a - e‖∞ / max(‖e‖∞, floor)`.
pub fn rel_err(a: &[f64], e: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(e).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = e.iter().map(|x| x.abs()).fold(0.0, f64::max).max(floor);
    diff / scale
}

/// Closed-form graph-surface quantities at `(u, v)` for `F = (u, v, f)`:
/// `g_ij = δ_ij + f_i f_j`, `Γ^k_ij = f_ij f_k / (1 + |∇f|²)` and
/// `S = 2 (f_uu f_vv − f_uv²) / (1 + |∇f|²)²`.
pub struct GraphOracle {
    pub g: [[f64; 2]; 2],
    pub gamma: [[[f64; 2]; 2]; 2],
    pub scalar: f64,
    /// Magnitude of the terms entering `S` before cancellation.
    pub scalar_scale: f64,
}

pub fn graph_oracle(f: &Poly, u: f64, v: f64) -> GraphOracle {
    let grad = [f.deriv(1, 0, u, v), f.deriv(0, 1, u, v)];
    let hess = [
        [f.deriv(2, 0, u, v), f.deriv(1, 1, u, v)],
        [f.deriv(1, 1, u, v), f.deriv(0, 2, u, v)],
    ];
    let w = 1.0 + grad[0] * grad[0] + grad[1] * grad[1];
    let mut g = [[0.0; 2]; 2];
    let mut gamma = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            g[i][j] = if i == j { 1.0 } else { 0.0 } + grad[i] * grad[j];
            for k in 0..2 {
                gamma[k][i][j] = hess[i][j] * grad[k] / w;
            }
        }
    }
    let num = hess[0][0] * hess[1][1] - hess[0][1] * hess[0][1];
    let mag = (hess[0][0] * hess[1][1]).abs() + hess[0][1] * hess[0][1];
    GraphOracle {
        g,
        gamma,
        scalar: 2.0 * num / (w * w),
        scalar_scale: 2.0 * mag / (w * w),
    }
}

pub fn flat2(m: &[[f64; 2]; 2]) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

pub fn flat3(t: &[[[f64; 2]; 2]; 2]) -> Vec<f64> {
    t.iter().flatten().flatten().copied().collect()
}

pub fn flat4(t: &[[[[f64; 2]; 2]; 2]; 2]) -> Vec<f64> {
    t.iter().flatten().flatten().flatten().copied().collect()
}

/// Unit square control net with every point jittered by up to `amp` per
/// coordinate: curved but well-conditioned.
pub fn perturbed_grid(r: &mut ChaCha8Rng, id: u32, m: usize, n: usize, amp: f64) -> ControlGrid {
    ControlGrid::from_fn(PatchId(id), m, n, |a, b| {
        Vec3::new(a as f64 / m as f64, b as f64 / n as f64, 0.0)
            + Vec3::new(r.random_range(-amp..amp), r.random_range(-amp..amp), r.random_range(-amp..amp))
    })
    .unwrap()
}

/// Feature tensors with every input in [0, 1) and targets in [-0.5, 0.5).
pub fn random_tensors(r: &mut ChaCha8Rng, n: usize) -> Vec<cpgeo_core::dataset::FeatureTensors> {
    use cpgeo_core::dataset::{FeatureTensors, FLAT_LEN};
    (0..n)
        .map(|_| {
            let flat: [f64; FLAT_LEN] = core::array::from_fn(|_| r.random_range(0.0..1.0));
            FeatureTensors::from_flat(&flat, r.random_range(-0.5..0.5))
        })
        .collect()
}
