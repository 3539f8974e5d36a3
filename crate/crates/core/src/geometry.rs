//! Intrinsic geometry of a surface patch from its derivative jet.
//!
//! Index conventions (0 = u, 1 = v), all arrays dense:
//!
//! - `g[i][j]`, `g_inv[k][l]`
//! - `dg[l][i][j] = ∂_l g_ij`, `ddg[m][l][i][j] = ∂_m ∂_l g_ij`
//! - `gamma[k][i][j] = Γ^k_ij`, `dgamma[m][k][i][j] = ∂_m Γ^k_ij`
//! - `riemann[s][i][j][k] = R^s_ijk`
//!
//! with `R^s_ijk = (Γ^l_ik Γ^s_jl − Γ^l_jk Γ^s_il) + ∂_j Γ^s_ik − ∂_i Γ^s_jk`.

use serde::{Deserialize, Serialize};

use crate::bezier::{jet, PiecewiseManifold, SurfaceJet, SurfacePoint};
use crate::error::{domain, Error, Result};
use crate::num::abs;

pub type Mat2 = [[f64; 2]; 2];
pub type Tensor3 = [[[f64; 2]; 2]; 2];
pub type Tensor4 = [[[[f64; 2]; 2]; 2]; 2];

/// Which index pair of `R^s_ijk` the Ricci contraction sums over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `R_ij = Σ_k R^k_ikj`: positive scalar curvature on spheres and
    /// elliptic paraboloids.
    #[default]
    PositiveSphere,
    /// `R_ij = Σ_k R^k_kij`, the literal contraction. Opposite sign in 2D.
    #[serde(alias = "paper")]
    Literal,
}

impl Convention {
    pub fn as_str(self) -> &'static str {
        match self {
            Convention::PositiveSphere => "positive-sphere",
            Convention::Literal => "literal",
        }
    }
}

impl core::str::FromStr for Convention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive-sphere" | "positive" | "default" => Ok(Convention::PositiveSphere),
            "literal" | "paper" => Ok(Convention::Literal),
            other => Err(crate::error::config(alloc::format!(
                "unknown curvature convention '{other}'"
            ))),
        }
    }
}

/// Metric with its first and second parameter derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricJet {
    pub g: Mat2,
    pub dg: Tensor3,
    pub ddg: Tensor4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Connection {
    pub g: Mat2,
    pub g_inv: Mat2,
    pub gamma: Tensor3,
    pub dgamma: Tensor4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannianFeatures {
    pub point: SurfacePoint,
    pub g: Mat2,
    pub g_inv: Mat2,
    pub det_g: f64,
    pub gamma: Tensor3,
    pub riemann: Tensor4,
    pub ricci: Mat2,
    pub scalar: f64,
}

/// `g_ij = ⟨∂_i F, ∂_j F⟩` and its derivatives up to second order.
///
/// Second derivatives of `g` are filled only for order-3 jets (zero otherwise).
pub fn metric(jet: &SurfaceJet) -> Result<MetricJet> {
    if jet.order < 2 {
        return Err(domain("metric derivatives need a jet of order >= 2"));
    }
    let f1 = |i: usize| jet.partial(&[i]);
    let f2 = |i: usize, j: usize| jet.partial(&[i, j]);
    let f3 = |i: usize, j: usize, k: usize| jet.partial(&[i, j, k]);

    let mut g = [[0.0; 2]; 2];
    let mut dg = [[[0.0; 2]; 2]; 2];
    let mut ddg = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for j in i..2 {
            g[i][j] = f1(i).dot(f1(j));
            g[j][i] = g[i][j];
            for l in 0..2 {
                dg[l][i][j] = f2(l, i).dot(f1(j)) + f1(i).dot(f2(l, j));
                dg[l][j][i] = dg[l][i][j];
                if jet.order >= 3 {
                    for m in 0..2 {
                        let v = f3(m, l, i).dot(f1(j))
                            + f2(l, i).dot(f2(m, j))
                            + f2(m, i).dot(f2(l, j))
                            + f1(i).dot(f3(m, l, j));
                        ddg[m][l][i][j] = v;
                        ddg[m][l][j][i] = v;
                    }
                }
            }
        }
    }
    Ok(MetricJet { g, dg, ddg })
}

/// Closed-form 2x2 inverse. Fails when `det g ≤ 1e-12 (tr g)^2`.
pub fn inverse_metric(g: &Mat2) -> Result<Mat2> {
    let det = det2(g);
    let tr = g[0][0] + g[1][1];
    if !(det > 1e-12 * tr * tr) {
        return Err(Error::DegenerateMetric { det, point: None });
    }
    Ok([
        [g[1][1] / det, -g[0][1] / det],
        [-g[1][0] / det, g[0][0] / det],
    ])
}

#[inline]
fn det2(g: &Mat2) -> f64 {
    g[0][0] * g[1][1] - g[0][1] * g[1][0]
}

/// Christoffel symbols of the second kind and their analytic first derivatives.
///
/// Requires an order-3 jet.
pub fn christoffel(jet: &SurfaceJet) -> Result<Connection> {
    if jet.order < 3 {
        return Err(domain("Christoffel derivatives need a jet of order 3"));
    }
    let MetricJet { g, dg, ddg } = metric(jet)?;
    let g_inv = inverse_metric(&g).map_err(|e| with_point(e, jet.point))?;

    // first kind: first[l][i][j] = ½ (∂_i g_jl + ∂_j g_li − ∂_l g_ij)
    let mut first = [[[0.0; 2]; 2]; 2];
    let mut dfirst = [[[[0.0; 2]; 2]; 2]; 2]; // [m][l][i][j]
    for l in 0..2 {
        for i in 0..2 {
            for j in i..2 {
                first[l][i][j] = 0.5 * (dg[i][j][l] + dg[j][l][i] - dg[l][i][j]);
                first[l][j][i] = first[l][i][j];
                for m in 0..2 {
                    let v = 0.5 * (ddg[m][i][j][l] + ddg[m][j][l][i] - ddg[m][l][i][j]);
                    dfirst[m][l][i][j] = v;
                    dfirst[m][l][j][i] = v;
                }
            }
        }
    }

    // ∂_m g^kl = −g^ka (∂_m g_ab) g^bl
    let mut dg_inv = [[[0.0; 2]; 2]; 2];
    for m in 0..2 {
        for k in 0..2 {
            for l in 0..2 {
                let mut acc = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        acc += g_inv[k][a] * dg[m][a][b] * g_inv[b][l];
                    }
                }
                dg_inv[m][k][l] = -acc;
            }
        }
    }

    let mut gamma = [[[0.0; 2]; 2]; 2];
    let mut dgamma = [[[[0.0; 2]; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in i..2 {
                let mut acc = 0.0;
                for l in 0..2 {
                    acc += g_inv[k][l] * first[l][i][j];
                }
                gamma[k][i][j] = acc;
                gamma[k][j][i] = acc;
                for m in 0..2 {
                    let mut d = 0.0;
                    for l in 0..2 {
                        d += dg_inv[m][k][l] * first[l][i][j] + g_inv[k][l] * dfirst[m][l][i][j];
                    }
                    dgamma[m][k][i][j] = d;
                    dgamma[m][k][j][i] = d;
                }
            }
        }
    }
    Ok(Connection { g, g_inv, gamma, dgamma })
}

/// Curvature coefficients `R^s_ijk` from `Γ` and `∂Γ` at one point.
pub fn riemann_tensor(gamma: &Tensor3, dgamma: &Tensor4) -> Tensor4 {
    let mut r = [[[[0.0; 2]; 2]; 2]; 2];
    for s in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut quad = 0.0;
                    for l in 0..2 {
                        quad += gamma[l][i][k] * gamma[s][j][l] - gamma[l][j][k] * gamma[s][i][l];
                    }
                    r[s][i][j][k] = quad + dgamma[j][s][i][k] - dgamma[i][s][j][k];
                }
            }
        }
    }
    r
}

/// Ricci tensor and scalar curvature `S = g^ij R_ij`.
pub fn contract(riemann: &Tensor4, g_inv: &Mat2, convention: Convention) -> (Mat2, f64) {
    let ricci_with = |conv: Convention| {
        let mut ricci = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                ricci[i][j] = (0..2)
                    .map(|k| match conv {
                        Convention::PositiveSphere => riemann[k][i][k][j],
                        Convention::Literal => riemann[k][k][i][j],
                    })
                    .sum();
            }
        }
        ricci
    };
    let ricci = ricci_with(convention);
    let scalar = scalar_of(&ricci, g_inv);

    #[cfg(debug_assertions)]
    {
        let other = match convention {
            Convention::PositiveSphere => Convention::Literal,
            Convention::Literal => Convention::PositiveSphere,
        };
        let s_other = scalar_of(&ricci_with(other), g_inv);
        let scale = 1.0 + abs(scalar);
        debug_assert!(
            abs(scalar + s_other) <= 1e-8 * scale,
            "curvature conventions disagree beyond a sign: {scalar} vs {s_other}"
        );
    }
    (ricci, scalar)
}

fn scalar_of(ricci: &Mat2, g_inv: &Mat2) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += g_inv[i][j] * ricci[i][j];
        }
    }
    s
}

fn with_point(e: Error, p: SurfacePoint) -> Error {
    match e {
        Error::DegenerateMetric { det, .. } => Error::DegenerateMetric { det, point: Some(p) },
        other => other,
    }
}

/// Full feature set at one point of a validated patch.
pub fn feature_bundle(
    manifold: &PiecewiseManifold,
    point: &SurfacePoint,
    convention: Convention,
) -> Result<RiemannianFeatures> {
    let grid = manifold.validated_patch(point.patch)?;
    let jt = jet(grid, point.u, point.v, 3)?;
    features_from_jet(&jt, convention)
}

pub fn features_from_jet(jt: &SurfaceJet, convention: Convention) -> Result<RiemannianFeatures> {
    let conn = christoffel(jt)?;
    let riemann = riemann_tensor(&conn.gamma, &conn.dgamma);
    let (ricci, scalar) = contract(&riemann, &conn.g_inv, convention);
    Ok(RiemannianFeatures {
        point: jt.point,
        g: conn.g,
        g_inv: conn.g_inv,
        det_g: det2(&conn.g),
        gamma: conn.gamma,
        riemann,
        ricci,
        scalar,
    })
}

impl RiemannianFeatures {
    /// Frobenius norm of the Christoffel array.
    pub fn gamma_norm(&self) -> f64 {
        let mut acc = 0.0;
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    acc += self.gamma[k][i][j] * self.gamma[k][i][j];
                }
            }
        }
        crate::num::sqrt(acc)
    }
}
