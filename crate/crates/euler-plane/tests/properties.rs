//! Randomized invariants for the map algebra and the curve kernels.
//!
//! These complement the seeded unit tests: instead of pinning single
//! instances they assert the algebraic laws the rest of the library leans
//! on, over randomly generated primitive soups.

use proptest::prelude::*;

use euler_plane::curve::{random_smooth_arc, signed_intersections, turning_number, SampledCurve};
use euler_plane::geom::{point, vec2, Point};
use euler_plane::planemap::{self, differential, eval, MapExpr, PrimitiveMap};
use euler_plane::tol;

fn primitive() -> impl Strategy<Value = PrimitiveMap> {
    prop_oneof![
        (-3.0f64..3.0, -3.0f64..3.0)
            .prop_map(|(u, v)| planemap::translation(vec2(u, v)).unwrap()),
        (-2.0f64..2.0, -2.0f64..2.0, 0.3f64..2.5)
            .prop_map(|(x, y, f)| planemap::dilation(point(x, y), f).unwrap()),
        (-2.0f64..2.0, -2.0f64..2.0, -3.0f64..3.0)
            .prop_map(|(x, y, a)| planemap::rotation(point(x, y), a).unwrap()),
        (-2.0f64..2.0, -2.0f64..2.0, 0.3f64..1.0, 0.3f64..1.5, -3i32..=3)
            .prop_map(|(x, y, r0, dr, k)| {
                planemap::annulus_twist(point(x, y), r0, r0 + dr, k).unwrap()
            }),
        (-2.0f64..2.0, -2.0f64..2.0, 0.3f64..1.0, 0.3f64..1.5, -3.0f64..3.0)
            .prop_map(|(x, y, r0, dr, a)| {
                planemap::supported_rotation(point(x, y), r0, r0 + dr, a).unwrap()
            }),
        (-2.0f64..0.0, 0.5f64..2.0, -2.0f64..2.0, -0.1f64..0.1)
            .prop_map(|(lo, h, dx, dy)| planemap::strip_shear(lo, lo + h, dx, dy).unwrap()),
        (-0.2f64..2.0, -1.0f64..1.0, -2.0f64..0.0, 0.5f64..2.0)
            .prop_map(|(dx, dy, lo, w)| {
                planemap::step_translation(vec2(dx, dy), lo, lo + w).unwrap()
            }),
    ]
}

fn expression() -> impl Strategy<Value = MapExpr> {
    (
        prop::collection::vec(primitive(), 1..=3),
        any::<bool>(),
        prop::option::of(-2i32..=2),
    )
        .prop_map(|(prims, invert, pow)| {
            let mut e = MapExpr::compose(prims.into_iter().map(MapExpr::prim).collect());
            if invert {
                e = e.inverse();
            }
            if let Some(k) = pow {
                e = e.power(k);
            }
            e
        })
}

fn plane_point() -> impl Strategy<Value = Point> {
    (-4.0f64..4.0, -4.0f64..4.0).prop_map(|(x, y)| point(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// f^-1(f(p)) returns to p. The band primitives invert by a monotone
    /// solve, so the bound is loose relative to float epsilon.
    #[test]
    fn inverse_round_trips(e in expression(), p in plane_point()) {
        let q = eval(&e, p).unwrap();
        let back = eval(&e.clone().inverse(), q).unwrap();
        let scale = 1.0 + p.dist(point(0.0, 0.0));
        prop_assert!(
            back.dist(p) <= 1e-7 * scale,
            "p = ({}, {}), back = ({}, {})", p.x, p.y, back.x, back.y
        );
    }

    /// Composition applies the rightmost factor first: [f, g] acts as
    /// p -> f(g(p)).
    #[test]
    fn composition_applies_rightmost_first(
        f in expression(),
        g in expression(),
        p in plane_point(),
    ) {
        let composed = eval(&MapExpr::compose(vec![f.clone(), g.clone()]), p).unwrap();
        let nested = eval(&f, eval(&g, p).unwrap()).unwrap();
        prop_assert!(composed.dist(nested) <= 1e-12 * (1.0 + nested.dist(point(0.0, 0.0))));
    }

    /// expr^k agrees with k-fold iteration (inverse iteration for k < 0).
    #[test]
    fn power_matches_iteration(e in expression(), k in -3i32..=3, p in plane_point()) {
        let powered = eval(&e.clone().power(k), p).unwrap();
        let step = if k >= 0 { e.clone() } else { e.clone().inverse() };
        let mut q = p;
        for _ in 0..k.abs() {
            q = eval(&step, q).unwrap();
        }
        let scale = 1.0 + q.dist(point(0.0, 0.0));
        prop_assert!(powered.dist(q) <= 1e-7 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The analytic differential matches central finite differences away
    /// from the (measure-zero) non-smooth loci.
    #[test]
    fn differential_matches_finite_differences(e in expression(), p in plane_point()) {
        let jac = match differential(&e, p) {
            Ok(j) => j,
            Err(_) => return Ok(()), // non-smooth locus: nothing to compare
        };
        let h = tol::DIFFERENTIAL_STEP;
        let probe = |q: Point| eval(&e, q);
        let (xp, xm, yp, ym) = match (
            probe(point(p.x + h, p.y)),
            probe(point(p.x - h, p.y)),
            probe(point(p.x, p.y + h)),
            probe(point(p.x, p.y - h)),
        ) {
            (Ok(a), Ok(b), Ok(c), Ok(d)) => (a, b, c, d),
            _ => return Ok(()),
        };
        let fd = [
            (xp.x - xm.x) / (2.0 * h),
            (yp.x - ym.x) / (2.0 * h),
            (xp.y - xm.y) / (2.0 * h),
            (yp.y - ym.y) / (2.0 * h),
        ];
        let an = [jac.a, jac.b, jac.c, jac.d];
        let scale = an.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        let rel: f64 = an.iter().zip(fd.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>() / scale;
        prop_assert!(rel < 1e-4, "relative error {rel:.3e} at ({}, {})", p.x, p.y);
    }

    /// Round trips around a circle turn the tangent through exactly one
    /// revolution, with the sign of the orientation.
    #[test]
    fn circle_turning_is_one_revolution(
        cx in -3.0f64..3.0,
        cy in -3.0f64..3.0,
        r in 0.2f64..4.0,
        ccw in any::<bool>(),
    ) {
        let c = SampledCurve::circle(point(cx, cy), r, ccw).unwrap();
        let t = turning_number(&c).unwrap();
        prop_assert_eq!(t.value, if ccw { 1 } else { -1 });
        prop_assert!(t.residue < 0.05);
    }

    /// Swapping the two curves negates every crossing, hence the total.
    #[test]
    fn crossing_count_is_antisymmetric(
        s1 in 0u64..5000,
        s2 in 5000u64..10000,
        w1 in 0.3f64..0.8,
        w2 in 0.3f64..0.8,
    ) {
        let x = random_smooth_arc(s1, w1).unwrap();
        let quarter = MapExpr::prim(
            planemap::rotation(point(2.0, 0.2), std::f64::consts::FRAC_PI_2).unwrap(),
        );
        let y = euler_plane::curve::push_forward(&quarter, &random_smooth_arc(s2, w2).unwrap())
            .unwrap();
        let (xy, xy_events) = match signed_intersections(&x, &y) {
            Ok(v) => v,
            Err(_) => return Ok(()), // tangency at sample resolution: skip
        };
        let (yx, yx_events) = match signed_intersections(&y, &x) {
            Ok(v) => v,
            Err(_) => return Ok(()),
        };
        prop_assert_eq!(xy, -yx);
        prop_assert_eq!(xy_events.len(), yx_events.len());
        for ev in &xy_events {
            prop_assert!(ev.sign == 1 || ev.sign == -1);
        }
    }
}
