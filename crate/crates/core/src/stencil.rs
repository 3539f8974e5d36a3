//! 3x3 neighbourhoods at a target chord spacing `d`.
//!
//! Axial neighbours are placed along the parameter axes so that the 3D chord
//! to the centre equals `d`; diagonal neighbours combine the two axial
//! offsets. Stencils stay on the centre's patch and clamp at its boundary.

use alloc::format;
use serde::{Deserialize, Serialize};

use crate::bezier::{eval_patch, jet, ControlGrid, PiecewiseManifold, SurfacePoint, Vec3};
use crate::error::{config, domain, Error, Result};
use crate::geometry::{feature_bundle, Convention, RiemannianFeatures};
use crate::num::abs;

/// Spacings the harness accepts by default.
pub const DEFAULT_SPACINGS: [f64; 3] = [0.01, 0.005, 0.001];

/// Relative tolerance on an axial chord before a neighbour counts as off-target.
pub const SPACING_TOLERANCE: f64 = 0.01;

const MAX_BISECTIONS: usize = 80;

/// Slot of the centre point in the row-major 3x3 layout.
pub const CENTER_SLOT: usize = 4;

/// Row-major slot names: north is `+v`, east is `+u`.
pub const SLOT_NAMES: [&str; 9] = ["NW", "N", "NE", "W", "C", "E", "SW", "S", "SE"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    U,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Offset {
    /// Non-negative parameter step along the axis in the requested direction.
    pub delta: f64,
    pub clamped: bool,
    /// Chord distance actually realised.
    pub achieved: f64,
}

pub fn validate_spacing(d: f64, allowed: &[f64]) -> Result<()> {
    if allowed.iter().any(|&a| abs(a - d) <= 1e-12 * a) {
        Ok(())
    } else {
        Err(config(format!("stencil spacing {d} not in the configured set {allowed:?}")))
    }
}

fn shifted(point: &SurfacePoint, axis: Axis, t: f64) -> (f64, f64) {
    match axis {
        Axis::U => (t, point.v),
        Axis::V => (point.u, t),
    }
}

/// Parameter offset whose chord from `point` along `axis` is `d`.
///
/// `direction` is `+1` or `-1`. If the patch boundary comes first the offset
/// is clamped there and flagged.
pub fn calibrate_offset(
    grid: &ControlGrid,
    point: &SurfacePoint,
    axis: Axis,
    direction: i8,
    d: f64,
) -> Result<Offset> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(domain(format!("stencil spacing must be positive, got {d}")));
    }
    if direction != 1 && direction != -1 {
        return Err(domain(format!("direction must be +1 or -1, got {direction}")));
    }
    let t0 = match axis {
        Axis::U => point.u,
        Axis::V => point.v,
    };
    let origin = eval_patch(grid, point.u, point.v)?;
    let at = |t: f64| -> Result<Vec3> {
        let (u, v) = shifted(point, axis, t.clamp(0.0, 1.0));
        eval_patch(grid, u, v)
    };

    let extent = {
        let (u0, v0) = shifted(point, axis, 0.0);
        let (u1, v1) = shifted(point, axis, 1.0);
        (eval_patch(grid, u1, v1)? - eval_patch(grid, u0, v0)?).norm()
    };
    if d > extent {
        return Err(Error::StencilOutOfPatch { point: *point, d, extent });
    }

    let sign = direction as f64;
    let chord = |delta: f64| -> Result<f64> { Ok((at(t0 + sign * delta)? - origin).norm()) };
    let limit = if direction > 0 { 1.0 - t0 } else { t0 };
    let close_enough = |c: f64| abs(c - d) <= 1e-12 * d;

    let c_limit = chord(limit)?;
    if c_limit < d && !close_enough(c_limit) {
        return Ok(Offset { delta: limit, clamped: true, achieved: c_limit });
    }

    // bracket from the tangent estimate, doubling toward the boundary
    let jt = jet(grid, point.u, point.v, 1)?;
    let speed = match axis {
        Axis::U => jt.d(1, 0),
        Axis::V => jt.d(0, 1),
    }
    .norm();
    let mut lo = 0.0;
    let mut hi = if speed > 0.0 { (d / speed).min(limit) } else { limit };
    let mut c_hi = chord(hi)?;
    while c_hi < d && !close_enough(c_hi) {
        lo = hi;
        hi = (2.0 * hi).min(limit);
        c_hi = chord(hi)?;
    }
    if close_enough(c_hi) {
        return Ok(Offset { delta: hi, clamped: false, achieved: c_hi });
    }

    let mut best = (hi, c_hi);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let c = chord(mid)?;
        if abs(c - d) < abs(best.1 - d) {
            best = (mid, c);
        }
        if close_enough(c) {
            break;
        }
        if c < d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Offset { delta: best.0, clamped: false, achieved: best.1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stencil {
    pub center: SurfacePoint,
    /// Row-major `NW, N, NE, W, C, E, SW, S, SE`.
    pub points: [SurfacePoint; 9],
    pub d: f64,
    /// Chord distance of each slot to the centre (zero at the centre slot).
    pub achieved_spacings: [f64; 9],
    /// Slot depends on an offset clamped at the patch boundary, or its axial
    /// chord misses `d` by more than [`SPACING_TOLERANCE`].
    pub clamped: [bool; 9],
}

impl Stencil {
    pub fn any_clamped(&self) -> bool {
        self.clamped.iter().any(|&c| c)
    }
}

pub fn build_stencil(manifold: &PiecewiseManifold, center: &SurfacePoint, d: f64) -> Result<Stencil> {
    let grid = manifold.validated_patch(center.patch)?;
    let u_minus = calibrate_offset(grid, center, Axis::U, -1, d)?;
    let u_plus = calibrate_offset(grid, center, Axis::U, 1, d)?;
    let v_minus = calibrate_offset(grid, center, Axis::V, -1, d)?;
    let v_plus = calibrate_offset(grid, center, Axis::V, 1, d)?;

    // (u offset, v offset) per slot; None = no move on that axis
    let layout: [(Option<(i8, &Offset)>, Option<(i8, &Offset)>); 9] = [
        (Some((-1, &u_minus)), Some((1, &v_plus))),
        (None, Some((1, &v_plus))),
        (Some((1, &u_plus)), Some((1, &v_plus))),
        (Some((-1, &u_minus)), None),
        (None, None),
        (Some((1, &u_plus)), None),
        (Some((-1, &u_minus)), Some((-1, &v_minus))),
        (None, Some((-1, &v_minus))),
        (Some((1, &u_plus)), Some((-1, &v_minus))),
    ];

    let origin = eval_patch(grid, center.u, center.v)?;
    let mut points = [*center; 9];
    let mut achieved = [0.0; 9];
    let mut clamped = [false; 9];
    for (slot, (du, dv)) in layout.iter().enumerate() {
        if slot == CENTER_SLOT {
            continue;
        }
        let step = |base: f64, off: &Option<(i8, &Offset)>| match off {
            Some((s, o)) => (base + *s as f64 * o.delta).clamp(0.0, 1.0),
            None => base,
        };
        let u = step(center.u, du);
        let v = step(center.v, dv);
        points[slot] = SurfacePoint { patch: center.patch, u, v };
        achieved[slot] = (eval_patch(grid, u, v)? - origin).norm();
        let any_clamped = [du, dv].iter().any(|o| o.map(|(_, x)| x.clamped).unwrap_or(false));
        let axial = du.is_none() || dv.is_none();
        let off_target = axial && abs(achieved[slot] - d) > SPACING_TOLERANCE * d;
        clamped[slot] = any_clamped || off_target;
    }
    Ok(Stencil {
        center: *center,
        points,
        d,
        achieved_spacings: achieved,
        clamped,
    })
}

/// Features at all nine slots, in slot order.
pub fn stencil_features(
    manifold: &PiecewiseManifold,
    stencil: &Stencil,
    convention: Convention,
) -> Result<[RiemannianFeatures; 9]> {
    let mut out = [None; 9];
    for (slot, p) in stencil.points.iter().enumerate() {
        out[slot] = Some(feature_bundle(manifold, p, convention)?);
    }
    Ok(out.map(|f| f.expect("every slot filled")))
}
