//! Tensor-product Bézier patches and piecewise manifolds built from them.
//!
//! A patch of degrees `(m, n)` maps the unit parameter square to 3D via
//! `F(u, v) = Σ_a Σ_b P_ab B_{a,m}(u) B_{b,n}(v)`. Partial derivatives up to
//! third order are evaluated analytically through the Bernstein derivative
//! recursion `d/dt B_{a,m} = m (B_{a-1,m-1} - B_{a,m-1})`, so jets of
//! polynomial surfaces carry no truncation error.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::num::{binomial, powi, sqrt};

/// Highest derivative order a [`SurfaceJet`] carries.
pub const MAX_JET_ORDER: usize = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    #[inline]
    pub fn dot(self, other: Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    #[inline]
    pub fn norm(self) -> f64 {
        sqrt(self.dot(self))
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        let [a, b, c] = self.0;
        let [x, y, z] = o.0;
        Vec3([b * z - c * y, c * x - a * z, a * y - b * x])
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PatchId(pub u32);

impl fmt::Display for PatchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Parameter-space address `(patch, u, v)` on a piecewise manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub patch: PatchId,
    pub u: f64,
    pub v: f64,
}

impl SurfacePoint {
    pub fn new(patch: PatchId, u: f64, v: f64) -> Result<Self> {
        check_param("u", u)?;
        check_param("v", v)?;
        Ok(SurfacePoint { patch, u, v })
    }
}

impl fmt::Display for SurfacePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "patch {} (u={}, v={})", self.patch, self.u, self.v)
    }
}

fn check_param(name: &str, t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(domain(format!("parameter {name} = {t} outside [0, 1]")))
    }
}

/// `(m+1) x (n+1)` control points of one surface segment, stored row-major
/// in `a` (the `u` index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlGrid {
    patch: PatchId,
    m: usize,
    n: usize,
    points: Vec<Vec3>,
}

impl ControlGrid {
    pub fn new(patch: PatchId, m: usize, n: usize, points: Vec<Vec3>) -> Result<Self> {
        let invalid = |reason: alloc::string::String| Error::InvalidGrid { patch, reason };
        if m < 1 || n < 1 {
            return Err(invalid(format!("degrees ({m}, {n}) must both be at least 1")));
        }
        if points.len() != (m + 1) * (n + 1) {
            return Err(invalid(format!(
                "expected {} control points for degrees ({m}, {n}), got {}",
                (m + 1) * (n + 1),
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(invalid(format!(
                "non-finite control point at a={}, b={}",
                i / (n + 1),
                i % (n + 1)
            )));
        }
        Ok(ControlGrid { patch, m, n, points })
    }

    /// Builds a grid from a closure over control indices `(a, b)`.
    pub fn from_fn(
        patch: PatchId,
        m: usize,
        n: usize,
        mut f: impl FnMut(usize, usize) -> Vec3,
    ) -> Result<Self> {
        let mut points = Vec::with_capacity((m + 1) * (n + 1));
        for a in 0..=m {
            for b in 0..=n {
                points.push(f(a, b));
            }
        }
        Self::new(patch, m, n, points)
    }

    /// Exact Bézier form of the polynomial surface `Σ c_ij u^i v^j`.
    ///
    /// `coeffs` lists `(i, j, c_ij)`; every `i ≤ m` and `j ≤ n`. Uses
    /// `u^i = Σ_{a ≥ i} C(a,i)/C(m,i) B_{a,m}(u)`.
    pub fn from_monomials(
        patch: PatchId,
        m: usize,
        n: usize,
        coeffs: &[(usize, usize, Vec3)],
    ) -> Result<Self> {
        if let Some((i, j, _)) = coeffs.iter().find(|(i, j, _)| *i > m || *j > n) {
            return Err(config(format!(
                "monomial u^{i} v^{j} does not fit in degrees ({m}, {n})"
            )));
        }
        Self::from_fn(patch, m, n, |a, b| {
            let mut p = Vec3::ZERO;
            for &(i, j, c) in coeffs {
                if i <= a && j <= b {
                    let w = binomial(a, i) / binomial(m, i) * binomial(b, j) / binomial(n, j);
                    p += c * w;
                }
            }
            p
        })
    }

    pub fn patch(&self) -> PatchId {
        self.patch
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn point(&self, a: usize, b: usize) -> Vec3 {
        self.points[a * (self.n + 1) + b]
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Applies `f` to every control point. Affine maps commute with evaluation.
    pub fn map_points(&self, mut f: impl FnMut(Vec3) -> Vec3) -> Result<Self> {
        Self::new(self.patch, self.m, self.n, self.points.iter().map(|&p| f(p)).collect())
    }

    /// Axis-aligned bounding box `(min, max)` of the control points.
    pub fn bbox(&self) -> (Vec3, Vec3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.points {
            for k in 0..3 {
                lo[k] = lo[k].min(p.0[k]);
                hi[k] = hi[k].max(p.0[k]);
            }
        }
        (Vec3(lo), Vec3(hi))
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }
}

/// `C(m, a) t^a (1 - t)^(m - a)`.
pub fn bernstein(a: usize, m: usize, t: f64) -> Result<f64> {
    if a > m {
        return Err(domain(format!("Bernstein index {a} exceeds degree {m}")));
    }
    check_param("t", t)?;
    Ok(bernstein_unchecked(a, m, t))
}

#[inline]
fn bernstein_unchecked(a: usize, m: usize, t: f64) -> f64 {
    binomial(m, a) * powi(t, a) * powi(1.0 - t, m - a)
}

/// `out[k][a] = d^k/dt^k B_{a,m}(t)` for `k = 0..=order`.
fn basis_jet(m: usize, t: f64, order: usize) -> Vec<Vec<f64>> {
    let lo = m.saturating_sub(order);
    // level[deg - lo][a]: current derivative order of B_{a,deg}
    let mut level: Vec<Vec<f64>> = (lo..=m)
        .map(|deg| (0..=deg).map(|a| bernstein_unchecked(a, deg, t)).collect())
        .collect();
    let mut out = Vec::with_capacity(order + 1);
    out.push(level[m - lo].clone());
    for k in 1..=order {
        let mut next = vec![Vec::new(); level.len()];
        for deg in (lo + k).max(1)..=m {
            let prev = &level[deg - 1 - lo];
            next[deg - lo] = (0..=deg)
                .map(|a| {
                    let left = if a >= 1 { prev[a - 1] } else { 0.0 };
                    let right = if a < deg { prev[a] } else { 0.0 };
                    deg as f64 * (left - right)
                })
                .collect();
        }
        let row = if next[m - lo].is_empty() {
            vec![0.0; m + 1]
        } else {
            next[m - lo].clone()
        };
        out.push(row);
        level = next;
    }
    out
}

pub fn eval_patch(grid: &ControlGrid, u: f64, v: f64) -> Result<Vec3> {
    check_param("u", u)?;
    check_param("v", v)?;
    let bu = basis_jet(grid.m, u, 0);
    let bv = basis_jet(grid.n, v, 0);
    Ok(contract_grid(grid, &bu[0], &bv[0]))
}

#[inline]
fn contract_grid(grid: &ControlGrid, wu: &[f64], wv: &[f64]) -> Vec3 {
    let mut acc = Vec3::ZERO;
    for (a, &wa) in wu.iter().enumerate() {
        let mut row = Vec3::ZERO;
        for (b, &wb) in wv.iter().enumerate() {
            row += grid.point(a, b) * wb;
        }
        acc += row * wa;
    }
    acc
}

/// All mixed partials `∂^{p+q}F / ∂u^p ∂v^q` with `p + q ≤ order` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceJet {
    pub point: SurfacePoint,
    pub order: usize,
    derivs: [[Vec3; MAX_JET_ORDER + 1]; MAX_JET_ORDER + 1],
}

impl SurfaceJet {
    /// `∂^{p+q}F / ∂u^p ∂v^q`; zero above the jet order.
    #[inline]
    pub fn d(&self, p: usize, q: usize) -> Vec3 {
        if p + q > self.order {
            Vec3::ZERO
        } else {
            self.derivs[p][q]
        }
    }

    pub fn position(&self) -> Vec3 {
        self.derivs[0][0]
    }

    /// Derivative with multi-index given as a list of parameter axes
    /// (`0` = u, `1` = v), e.g. `[0, 1, 1]` is `F_uvv`.
    #[inline]
    pub fn partial(&self, axes: &[usize]) -> Vec3 {
        let p = axes.iter().filter(|&&x| x == 0).count();
        self.d(p, axes.len() - p)
    }
}

pub fn jet(grid: &ControlGrid, u: f64, v: f64, order: usize) -> Result<SurfaceJet> {
    if !(1..=MAX_JET_ORDER).contains(&order) {
        return Err(domain(format!("jet order {order} not in 1..={MAX_JET_ORDER}")));
    }
    let point = SurfacePoint::new(grid.patch, u, v)?;
    let bu = basis_jet(grid.m, u, order);
    let bv = basis_jet(grid.n, v, order);
    let mut derivs = [[Vec3::ZERO; MAX_JET_ORDER + 1]; MAX_JET_ORDER + 1];
    for p in 0..=order {
        for q in 0..=(order - p) {
            derivs[p][q] = contract_grid(grid, &bu[p], &bv[q]);
        }
    }
    Ok(SurfaceJet { point, order, derivs })
}

/// Smallest singular value of the 3x2 Jacobian `[F_u, F_v]`.
pub fn immersion_margin(fu: Vec3, fv: Vec3) -> f64 {
    let (a, b, c) = (fu.dot(fu), fu.dot(fv), fv.dot(fv));
    let tr = a + c;
    let det = (a * c - b * b).max(0.0);
    let disc = sqrt(((a - c) * (a - c) + 4.0 * b * b).max(0.0));
    let big = 0.5 * (tr + disc);
    if big <= 0.0 {
        return 0.0;
    }
    // smaller eigenvalue of the Gram matrix via det / larger, avoids cancellation
    sqrt(det / big)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    /// Self-intersection distance threshold, relative to the bbox diagonal.
    pub eps_space_rel: f64,
    /// Minimum parameter distance for a close pair to count as a fold.
    pub delta_param: f64,
    /// Immersion threshold on the smallest singular value, relative to the
    /// bbox diagonal.
    pub rank_tol_rel: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            eps_space_rel: 1e-6,
            delta_param: 0.05,
            rank_tol_rel: 1e-8,
        }
    }
}

pub const DEFAULT_SAMPLES_PER_AXIS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionPair {
    pub first: (f64, f64),
    pub second: (f64, f64),
    pub distance: f64,
}

/// Cap on the number of intersection pairs listed in a report.
pub const MAX_REPORTED_PAIRS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub patch: PatchId,
    pub valid: bool,
    pub samples_per_axis: usize,
    pub immersion_margin: f64,
    pub margin_at: (f64, f64),
    pub rank_tol: f64,
    pub eps_space: f64,
    pub delta_param: f64,
    pub intersection_count: usize,
    pub intersections: Vec<IntersectionPair>,
}

/// Immersion and self-intersection check on a uniform parameter sample grid.
pub fn check_patch(
    grid: &ControlGrid,
    samples_per_axis: usize,
    opts: &CheckOptions,
) -> Result<ValidityReport> {
    if samples_per_axis < 4 {
        return Err(domain(format!(
            "samples_per_axis = {samples_per_axis}, need at least 4"
        )));
    }
    let diag = grid.bbox_diagonal();
    let rank_tol = opts.rank_tol_rel * diag;
    let eps_space = opts.eps_space_rel * diag;
    let step = 1.0 / (samples_per_axis - 1) as f64;
    let param = |i: usize| if i + 1 == samples_per_axis { 1.0 } else { i as f64 * step };

    let mut samples = Vec::with_capacity(samples_per_axis * samples_per_axis);
    let mut margin = f64::INFINITY;
    let mut margin_at = (0.0, 0.0);
    for i in 0..samples_per_axis {
        for j in 0..samples_per_axis {
            let (u, v) = (param(i), param(j));
            let jt = jet(grid, u, v, 1)?;
            let s = immersion_margin(jt.d(1, 0), jt.d(0, 1));
            if s < margin {
                margin = s;
                margin_at = (u, v);
            }
            samples.push((jt.position(), u, v));
        }
    }

    // sweep along x; only pairs within eps_space in x can be close
    samples.sort_by(|a, b| a.0[0].partial_cmp(&b.0[0]).unwrap_or(Ordering::Equal));
    let mut count = 0;
    let mut pairs = Vec::new();
    for i in 0..samples.len() {
        let (pi, ui, vi) = samples[i];
        for &(pj, uj, vj) in &samples[i + 1..] {
            if pj[0] - pi[0] >= eps_space {
                break;
            }
            let dist = (pj - pi).norm();
            let dpar = sqrt((ui - uj) * (ui - uj) + (vi - vj) * (vi - vj));
            if dist < eps_space && dpar > opts.delta_param {
                count += 1;
                if pairs.len() < MAX_REPORTED_PAIRS {
                    let (first, second) = if (ui, vi) <= (uj, vj) {
                        ((ui, vi), (uj, vj))
                    } else {
                        ((uj, vj), (ui, vi))
                    };
                    pairs.push(IntersectionPair { first, second, distance: dist });
                }
            }
        }
    }
    pairs.sort_by(|a, b| {
        (a.first, a.second)
            .partial_cmp(&(b.first, b.second))
            .unwrap_or(Ordering::Equal)
    });

    Ok(ValidityReport {
        patch: grid.patch,
        valid: margin >= rank_tol && count == 0,
        samples_per_axis,
        immersion_margin: margin,
        margin_at,
        rank_tol,
        eps_space,
        delta_param: opts.delta_param,
        intersection_count: count,
        intersections: pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchStatus {
    Unchecked,
    Valid,
    Invalid,
    /// Explicitly allowed without a check.
    Exempt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    UMin,
    UMax,
    VMin,
    VMax,
}

/// Two patches sharing a boundary edge. Recorded only; continuity is not
/// enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seam {
    pub first: (PatchId, Edge),
    pub second: (PatchId, Edge),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseManifold {
    patches: Vec<ControlGrid>,
    status: Vec<PatchStatus>,
    seams: Vec<Seam>,
}

impl PiecewiseManifold {
    pub fn new(patches: Vec<ControlGrid>) -> Result<Self> {
        for (i, p) in patches.iter().enumerate() {
            if patches[..i].iter().any(|q| q.patch == p.patch) {
                return Err(config(format!("duplicate patch id {}", p.patch)));
            }
        }
        let status = vec![PatchStatus::Unchecked; patches.len()];
        Ok(PiecewiseManifold { patches, status, seams: Vec::new() })
    }

    pub fn with_seams(mut self, seams: Vec<Seam>) -> Result<Self> {
        for s in &seams {
            self.index_of(s.first.0)?;
            self.index_of(s.second.0)?;
        }
        self.seams = seams;
        Ok(self)
    }

    pub fn patches(&self) -> &[ControlGrid] {
        &self.patches
    }

    pub fn seams(&self) -> &[Seam] {
        &self.seams
    }

    fn index_of(&self, id: PatchId) -> Result<usize> {
        self.patches
            .iter()
            .position(|p| p.patch == id)
            .ok_or(Error::UnknownPatch(id))
    }

    pub fn patch(&self, id: PatchId) -> Result<&ControlGrid> {
        Ok(&self.patches[self.index_of(id)?])
    }

    pub fn status(&self, id: PatchId) -> Result<PatchStatus> {
        Ok(self.status[self.index_of(id)?])
    }

    /// Runs [`check_patch`] on every patch and records the outcome.
    pub fn check_all(
        &mut self,
        samples_per_axis: usize,
        opts: &CheckOptions,
    ) -> Result<Vec<ValidityReport>> {
        let mut reports = Vec::with_capacity(self.patches.len());
        for (i, grid) in self.patches.iter().enumerate() {
            let report = check_patch(grid, samples_per_axis, opts)?;
            self.status[i] = if report.valid {
                PatchStatus::Valid
            } else {
                PatchStatus::Invalid
            };
            reports.push(report);
        }
        Ok(reports)
    }

    pub fn exempt(&mut self, id: PatchId) -> Result<()> {
        let i = self.index_of(id)?;
        self.status[i] = PatchStatus::Exempt;
        Ok(())
    }

    /// Marks every patch exempt. Intended for tests and trusted geometry.
    pub fn exempt_all(&mut self) {
        self.status.fill(PatchStatus::Exempt);
    }

    /// The grid of a patch that passed (or was exempted from) the check.
    pub fn validated_patch(&self, id: PatchId) -> Result<&ControlGrid> {
        let i = self.index_of(id)?;
        match self.status[i] {
            PatchStatus::Valid | PatchStatus::Exempt => Ok(&self.patches[i]),
            PatchStatus::Unchecked | PatchStatus::Invalid => {
                Err(Error::PatchNotValidated { patch: id })
            }
        }
    }

    pub fn eval(&self, p: &SurfacePoint) -> Result<Vec3> {
        eval_patch(self.patch(p.patch)?, p.u, p.v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> ControlGrid {
        ControlGrid::from_fn(PatchId(0), 2, 3, |a, b| {
            Vec3::new(a as f64 / 2.0, b as f64 / 3.0, 0.0)
        })
        .unwrap()
    }

    // F = (u, v, u^2 + v^2)
    fn paraboloid() -> ControlGrid {
        ControlGrid::from_monomials(
            PatchId(1),
            2,
            2,
            &[
                (1, 0, Vec3::new(1.0, 0.0, 0.0)),
                (0, 1, Vec3::new(0.0, 1.0, 0.0)),
                (2, 0, Vec3::new(0.0, 0.0, 1.0)),
                (0, 2, Vec3::new(0.0, 0.0, 1.0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn bernstein_values() {
        assert_eq!(bernstein(0, 2, 0.0).unwrap(), 1.0);
        assert_eq!(bernstein(1, 2, 0.5).unwrap(), 0.5);
        let sum: f64 = (0..=3).map(|a| bernstein(a, 3, 0.37).unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-15);
        assert!(matches!(bernstein(3, 2, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn eval_flat_and_paraboloid() {
        let g = flat();
        assert_eq!(eval_patch(&g, 0.0, 0.0).unwrap(), Vec3::ZERO);
        let mid = eval_patch(&g, 0.5, 0.5).unwrap();
        assert!((mid - Vec3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
        let p = eval_patch(&paraboloid(), 0.5, 0.0).unwrap();
        assert!((p - Vec3::new(0.5, 0.0, 0.25)).norm() < 1e-15);
        assert!(eval_patch(&g, 1.2, 0.0).is_err());
        assert!(eval_patch(&g, 0.2, -0.1).is_err());
    }

    #[test]
    fn jet_of_flat_and_paraboloid() {
        let j = jet(&flat(), 0.3, 0.8, 3).unwrap();
        assert!((j.d(1, 0) - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-14);
        assert_eq!(j.d(2, 0), Vec3::ZERO);

        let j = jet(&paraboloid(), 0.5, 0.0, 3).unwrap();
        assert!((j.d(1, 0) - Vec3::new(1.0, 0.0, 1.0)).norm() < 1e-14);
        assert!((j.d(0, 1) - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-14);
        assert!((j.d(2, 0) - Vec3::new(0.0, 0.0, 2.0)).norm() < 1e-14);
        assert_eq!(j.d(3, 0), Vec3::ZERO);
        assert_eq!(j.partial(&[1, 0, 1]), j.d(1, 2));
        assert!(jet(&flat(), 0.5, 0.5, 4).is_err());
        assert!(jet(&flat(), 0.5, 0.5, 0).is_err());
    }

    #[test]
    fn jet_position_matches_eval() {
        let g = paraboloid();
        let j = jet(&g, 0.31, 0.77, 2).unwrap();
        assert_eq!(j.position(), eval_patch(&g, 0.31, 0.77).unwrap());
    }

    #[test]
    fn grid_validation() {
        let pts = vec![Vec3::ZERO; 4];
        assert!(ControlGrid::new(PatchId(3), 1, 1, pts.clone()).is_ok());
        assert!(ControlGrid::new(PatchId(3), 0, 3, pts.clone()).is_err());
        assert!(ControlGrid::new(PatchId(3), 1, 2, pts).is_err());
        let mut bad = vec![Vec3::ZERO; 4];
        bad[2] = Vec3::new(f64::NAN, 0.0, 0.0);
        assert!(matches!(
            ControlGrid::new(PatchId(3), 1, 1, bad),
            Err(Error::InvalidGrid { .. })
        ));
    }

    #[test]
    fn flat_patch_is_valid_with_unit_margin() {
        let r = check_patch(&flat(), 16, &CheckOptions::default()).unwrap();
        assert!(r.valid);
        assert!((r.immersion_margin - 1.0).abs() < 1e-12);
        assert_eq!(r.intersection_count, 0);
        assert!(check_patch(&flat(), 3, &CheckOptions::default()).is_err());
    }

    #[test]
    fn collapsed_edge_fails_immersion() {
        // every control point on the v = 0 row coincides
        let g = ControlGrid::from_fn(PatchId(2), 3, 3, |a, b| {
            if b == 0 {
                Vec3::ZERO
            } else {
                Vec3::new(a as f64 / 3.0, b as f64 / 3.0, 0.1 * (a * b) as f64)
            }
        })
        .unwrap();
        let r = check_patch(&g, 16, &CheckOptions::default()).unwrap();
        assert!(!r.valid);
        assert!(r.immersion_margin < r.rank_tol);
        assert_eq!(r.margin_at.1, 0.0);
    }

    #[test]
    fn manifold_gates_unchecked_patches() {
        let mut m = PiecewiseManifold::new(vec![flat(), paraboloid()]).unwrap();
        assert!(matches!(
            m.validated_patch(PatchId(0)),
            Err(Error::PatchNotValidated { .. })
        ));
        m.check_all(8, &CheckOptions::default()).unwrap();
        assert!(m.validated_patch(PatchId(0)).is_ok());
        assert_eq!(m.patch(PatchId(9)).unwrap_err(), Error::UnknownPatch(PatchId(9)));
        assert!(PiecewiseManifold::new(vec![flat(), flat()]).is_err());
    }
}
