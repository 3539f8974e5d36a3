mod common;

use common::{affine_patch, graph_patch, perturbed_grid, rng, Poly};
use cpgeo_core::bezier::{eval_patch, ControlGrid, PiecewiseManifold, SurfacePoint, Vec3};
use cpgeo_core::geometry::{feature_bundle, Convention};
use cpgeo_core::stencil::{build_stencil, stencil_features, CENTER_SLOT, DEFAULT_SPACINGS};
use proptest::prelude::*;

const AXIAL: [usize; 4] = [1, 3, 5, 7];
const DIAGONAL: [usize; 4] = [0, 2, 6, 8];

fn manifold(grid: ControlGrid) -> PiecewiseManifold {
    let mut m = PiecewiseManifold::new(vec![grid]).unwrap();
    m.exempt_all();
    m
}

fn chord(m: &PiecewiseManifold, a: &SurfacePoint, b: &SurfacePoint) -> f64 {
    let grid = &m.patches()[0];
    (eval_patch(grid, a.u, a.v).unwrap() - eval_patch(grid, b.u, b.v).unwrap()).norm()
}

fn scalar_spread(m: &PiecewiseManifold, c: &SurfacePoint, d: f64) -> f64 {
    let st = build_stencil(m, c, d).unwrap();
    let s: Vec<f64> = stencil_features(m, &st, Convention::PositiveSphere)
        .unwrap()
        .iter()
        .map(|f| f.scalar)
        .collect();
    let mean = s.iter().sum::<f64>() / 9.0;
    (s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 9.0).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn axial_chords_hit_d(seed in any::<u64>(), u in 0.1..0.9f64, v in 0.1..0.9f64) {
        let mut r = rng(seed);
        let m = manifold(perturbed_grid(&mut r, 0, 4, 3, 0.15));
        let c = SurfacePoint::new(m.patches()[0].patch(), u, v).unwrap();
        for d in DEFAULT_SPACINGS {
            let st = build_stencil(&m, &c, d).unwrap();
            prop_assert!(!st.any_clamped());
            prop_assert_eq!(st.points[CENTER_SLOT], c);
            for slot in AXIAL {
                let got = chord(&m, &c, &st.points[slot]);
                prop_assert!((got - d).abs() <= 0.01 * d, "slot {} d {} chord {}", slot, d, got);
            }
        }
    }

    #[test]
    fn diagonals_in_sanity_band(seed in any::<u64>(), u in 0.1..0.9f64, v in 0.1..0.9f64) {
        // near-orthogonal tangents: the band only makes sense there
        let mut r = rng(seed);
        let m = manifold(perturbed_grid(&mut r, 0, 3, 3, 0.03));
        let c = SurfacePoint::new(m.patches()[0].patch(), u, v).unwrap();
        for d in DEFAULT_SPACINGS {
            let st = build_stencil(&m, &c, d).unwrap();
            for slot in DIAGONAL {
                let got = chord(&m, &c, &st.points[slot]);
                prop_assert!(got >= d && got <= 1.5 * d, "slot {} d {} chord {}", slot, d, got);
            }
        }
    }

    #[test]
    fn curvature_spread_shrinks_with_d(seed in any::<u64>(), u in 0.1..0.9f64, v in 0.1..0.9f64) {
        let mut r = rng(seed);
        let m = manifold(perturbed_grid(&mut r, 0, 4, 4, 0.15));
        let c = SurfacePoint::new(m.patches()[0].patch(), u, v).unwrap();
        let spreads: Vec<f64> = DEFAULT_SPACINGS.iter().map(|&d| scalar_spread(&m, &c, d)).collect();
        prop_assert!(spreads[0] > spreads[1] && spreads[1] > spreads[2], "{:?}", spreads);
    }

    #[test]
    fn centre_slot_reproduces_centre_features(seed in any::<u64>(), u in 0.0..=1.0f64, v in 0.0..=1.0f64) {
        let mut r = rng(seed);
        let m = manifold(perturbed_grid(&mut r, 0, 3, 3, 0.1));
        let c = SurfacePoint::new(m.patches()[0].patch(), u, v).unwrap();
        let st = build_stencil(&m, &c, 0.005).unwrap();
        let direct = feature_bundle(&m, &c, Convention::PositiveSphere).unwrap();
        let via = feature_bundle(&m, &st.points[CENTER_SLOT], Convention::PositiveSphere).unwrap();
        prop_assert_eq!(direct, via);
    }
}

#[test]
fn paraboloid_axial_spacing_at_half_percent_d() {
    let f = Poly { terms: vec![(2, 0, 1.0), (0, 2, 1.0)] };
    let m = manifold(graph_patch(0, &f, 2));
    let c = SurfacePoint::new(m.patches()[0].patch(), 0.5, 0.5).unwrap();
    let st = build_stencil(&m, &c, 0.005).unwrap();
    for slot in AXIAL {
        let got = chord(&m, &c, &st.points[slot]);
        assert!((got - 0.005).abs() <= 0.01 * 0.005, "slot {slot}: {got}");
    }
}

#[test]
fn flat_square_offsets_are_exact() {
    let m = manifold(affine_patch(0, 1, 1, Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)));
    let c = SurfacePoint::new(m.patches()[0].patch(), 0.5, 0.5).unwrap();
    let st = build_stencil(&m, &c, 0.01).unwrap();
    let expect = [(-1, 1), (0, 1), (1, 1), (-1, 0), (0, 0), (1, 0), (-1, -1), (0, -1), (1, -1)];
    for (p, (du, dv)) in st.points.iter().zip(expect) {
        assert!((p.u - (0.5 + 0.01 * du as f64)).abs() < 1e-12);
        assert!((p.v - (0.5 + 0.01 * dv as f64)).abs() < 1e-12);
    }
}
