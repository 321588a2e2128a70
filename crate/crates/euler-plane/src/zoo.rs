//! Catalog of concrete surface-group actions on the plane, each packaged
//! with the basepoints, arcs, and windows its computation methods need.

use crate::curve::{CurveError, SampledCurve};
use crate::euler::{
    CommutingPairPlan, EulerError, GraphicalPlan, LiftPlan, NamedGenerator, PlanarAction,
};
use crate::geom::{point, unit, vec2};
use crate::planemap::{
    annulus_twist, dilation, lazy_twist_product, rotation, step_translation, strip_shear,
    translation, IndexSet, MapExpr,
};
use crate::profile::{bump, bump_prime};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Golden angle in radians: orbits of this rotation never return exactly.
const GOLDEN_ANGLE: f64 = 2.399963229728653;

fn named(name: &str, map: MapExpr) -> NamedGenerator {
    NamedGenerator {
        name: name.to_string(),
        map,
    }
}

/// Arc from (x0, 0) to (x1, 0) arched through height `height`, flat to all
/// orders at its endpoints so that translation transport is exact.
pub fn arched_arc(x0: f64, x1: f64, height: f64) -> Result<SampledCurve, CurveError> {
    let f = move |t: f64| Ok(point(x0 + (x1 - x0) * t, height * bump(t)));
    let df = move |t: f64| Ok(vec2(x1 - x0, height * bump_prime(t)));
    SampledCurve::from_parametric(f, df, false, &[])
}

/// Arc from (r0, 0) to r0*unit(theta) along radius r0 - dip*bump(t): the
/// endpoints ride the circle of radius r0 (so rotation transport is exact)
/// while the interior dips toward the center.
fn dipping_polar_arc(r0: f64, dip: f64, theta: f64) -> Result<SampledCurve, CurveError> {
    let f = move |t: f64| {
        let r = r0 - dip * bump(t);
        Ok(point(r * (theta * t).cos(), r * (theta * t).sin()))
    };
    let df = move |t: f64| {
        let r = r0 - dip * bump(t);
        let rp = -dip * bump_prime(t);
        let u = unit(theta * t);
        Ok(u * rp + u.perp() * (r * theta))
    };
    SampledCurve::from_parametric(f, df, false, &[])
}

/// Infinite equivariant twist family: the full bilateral product of
/// conjugates of a power-n twist under dilation by 2, against that dilation.
/// The commutator is the identity away from the origin where the twists
/// accumulate, and the Euler number is n.
pub fn bestvina(n: i32) -> Result<PlanarAction, EulerError> {
    let origin = point(0.0, 0.0);
    let core = MapExpr::prim(annulus_twist(origin, 0.9, 1.1, n)?);
    let beta = MapExpr::prim(dilation(origin, 2.0)?);
    let alpha = lazy_twist_product(core, beta.clone(), IndexSet::All)?;
    let p = point(1.4, 0.0);
    let tau = SampledCurve::segment(p, point(2.8, 0.0))?;
    Ok(PlanarAction {
        name: format!("bestvina({})", n),
        genus: 1,
        generators: vec![named("a1", alpha), named("b1", beta)],
        lift: Some(LiftPlan {
            center: origin,
            forbidden_radius: 0.0,
            basepoint: p,
        }),
        graphical: Some(GraphicalPlan {
            basepoint: p,
            loop_radius: 0.12,
        }),
        pair: Some(CommutingPairPlan {
            p,
            tau,
            window: 12,
        }),
        non_smooth_loci: vec![origin],
        expected_euler: Some(n as i64),
    })
}

/// Genus-two action that is C1 everywhere: one-sided twist products under a
/// dilation and under a step translation. Each commutator recovers the core
/// twist exactly, with opposite signs, so the genus-two relator holds while
/// the Euler number is n.
pub fn genus2_smooth(n: i32) -> Result<PlanarAction, EulerError> {
    let origin = point(0.0, 0.0);
    let core = MapExpr::prim(annulus_twist(origin, 0.9, 1.1, n)?);
    let beta = MapExpr::prim(dilation(origin, 2.0)?);
    let alpha = lazy_twist_product(core.clone(), beta.clone(), IndexSet::NonNegative)?;
    let gamma = MapExpr::prim(step_translation(vec2(3.0, 0.0), -3.0, -2.0)?);
    let delta = lazy_twist_product(core, gamma.clone(), IndexSet::NonNegative)?;
    Ok(PlanarAction {
        name: format!("genus2-smooth({})", n),
        genus: 2,
        generators: vec![
            named("a1", alpha),
            named("b1", beta),
            named("a2", gamma),
            named("b2", delta),
        ],
        lift: Some(LiftPlan {
            center: origin,
            forbidden_radius: 60.0,
            basepoint: point(150.0, 0.0),
        }),
        graphical: Some(GraphicalPlan {
            basepoint: point(-10.0, 0.0),
            loop_radius: 0.5,
        }),
        pair: None,
        non_smooth_loci: vec![],
        expected_euler: Some(n as i64),
    })
}

/// Commuting pair on the torus: a strip shear against the unit horizontal
/// translation. Euler number zero, computable by all four methods.
pub fn torus_shear() -> Result<PlanarAction, EulerError> {
    let alpha = MapExpr::prim(strip_shear(0.5, 1.5, 0.8, 0.0)?);
    let beta = MapExpr::prim(translation(vec2(1.0, 0.0))?);
    let p = point(0.0, 0.0);
    let tau = arched_arc(0.0, 1.0, 2.0)?;
    Ok(PlanarAction {
        name: "torus-shear".into(),
        genus: 1,
        generators: vec![named("a1", alpha), named("b1", beta)],
        lift: Some(LiftPlan {
            center: point(0.0, 0.0),
            forbidden_radius: 0.25,
            basepoint: point(3.0, 0.0),
        }),
        graphical: Some(GraphicalPlan {
            basepoint: point(0.3, 0.0),
            loop_radius: 0.15,
        }),
        pair: Some(CommutingPairPlan { p, tau, window: 12 }),
        non_smooth_loci: vec![],
        expected_euler: Some(0),
    })
}

/// Seeded C1 torus action: a composition of three strip shears with random
/// bands and strengths, against the unit horizontal translation.
pub fn randomized_torus(seed: u64) -> Result<PlanarAction, EulerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factors = Vec::new();
    for _ in 0..3 {
        let y_lo = rng.gen_range(0.3..2.0);
        let width = rng.gen_range(0.2..0.5);
        let magnitude = rng.gen_range(0.2..1.2);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        factors.push(MapExpr::prim(strip_shear(
            y_lo,
            (y_lo + width).min(2.5),
            sign * magnitude,
            0.0,
        )?));
    }
    let alpha = MapExpr::compose(factors);
    let beta = MapExpr::prim(translation(vec2(1.0, 0.0))?);
    let p = point(0.0, 0.0);
    let tau = arched_arc(0.0, 1.0, 2.6)?;
    Ok(PlanarAction {
        name: format!("randomized-torus({})", seed),
        genus: 1,
        generators: vec![named("a1", alpha), named("b1", beta)],
        lift: Some(LiftPlan {
            center: point(0.0, 0.0),
            forbidden_radius: 0.25,
            basepoint: point(4.0, 0.0),
        }),
        graphical: Some(GraphicalPlan {
            basepoint: point(0.3, 0.0),
            loop_radius: 0.15,
        }),
        pair: Some(CommutingPairPlan { p, tau, window: 14 }),
        non_smooth_loci: vec![],
        expected_euler: Some(0),
    })
}

/// An annulus twist against a rotation about the same center: they commute,
/// the Euler number is zero, but the rotation's orbits stay on circles so
/// the signed-sum properness probe must refuse to certify.
pub fn commuting_rotation_twist() -> Result<PlanarAction, EulerError> {
    let origin = point(0.0, 0.0);
    let alpha = MapExpr::prim(annulus_twist(origin, 1.0, 2.0, 1)?);
    let beta = MapExpr::prim(rotation(origin, GOLDEN_ANGLE)?);
    let p = point(3.0, 0.0);
    let tau = dipping_polar_arc(3.0, 2.5, GOLDEN_ANGLE)?;
    Ok(PlanarAction {
        name: "commuting-rotation-twist".into(),
        genus: 1,
        generators: vec![named("a1", alpha), named("b1", beta)],
        lift: Some(LiftPlan {
            center: origin,
            forbidden_radius: 0.0,
            basepoint: point(5.0, 0.0),
        }),
        graphical: Some(GraphicalPlan {
            basepoint: point(5.0, 0.0),
            loop_radius: 0.4,
        }),
        pair: Some(CommutingPairPlan { p, tau, window: 8 }),
        non_smooth_loci: vec![],
        expected_euler: Some(0),
    })
}

/// Two commuting translations: the free action underlying the flat torus.
/// No fixed points anywhere, so only the lift and graphical methods apply.
pub fn free_translations() -> Result<PlanarAction, EulerError> {
    let alpha = MapExpr::prim(translation(vec2(5.0, 0.0))?);
    let beta = MapExpr::prim(translation(vec2(0.0, 5.0))?);
    Ok(PlanarAction {
        name: "free-translations".into(),
        genus: 1,
        generators: vec![named("a1", alpha), named("b1", beta)],
        lift: Some(LiftPlan {
            center: point(0.0, 0.0),
            forbidden_radius: 2.0,
            basepoint: point(20.0, 0.0),
        }),
        graphical: Some(GraphicalPlan {
            basepoint: point(0.3, 0.0),
            loop_radius: 0.3,
        }),
        pair: None,
        non_smooth_loci: vec![],
        expected_euler: Some(0),
    })
}

/// Pull back the torus-shear action along the degree-one pinch map from a
/// genus-g surface: the first handle carries the torus action and every
/// other generator acts as the identity. The Euler number stays zero.
pub fn pullback_degree_one(genus: usize) -> Result<PlanarAction, EulerError> {
    let genus = genus.max(2);
    let base = torus_shear()?;
    let mut generators = base.generators.clone();
    for h in 2..=genus {
        generators.push(named(&format!("a{}", h), MapExpr::identity()));
        generators.push(named(&format!("b{}", h), MapExpr::identity()));
    }
    Ok(PlanarAction {
        name: format!("pullback-degree-one({})", genus),
        genus,
        generators,
        lift: base.lift,
        graphical: base.graphical,
        pair: base.pair,
        non_smooth_loci: vec![],
        expected_euler: Some(0),
    })
}

/// Catalog entry: a name, a one-line summary, and which parameter the
/// builder consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZooParam {
    None,
    TwistPower,
    Seed,
    Genus,
}

#[derive(Debug, Clone, Copy)]
pub struct ZooItem {
    pub name: &'static str,
    pub summary: &'static str,
    pub param: ZooParam,
}

pub fn list() -> Vec<ZooItem> {
    vec![
        ZooItem {
            name: "bestvina",
            summary: "bilateral twist product against dilation by 2; e = n",
            param: ZooParam::TwistPower,
        },
        ZooItem {
            name: "genus2-smooth",
            summary: "C1 genus-two action from one-sided twist products; e = n",
            param: ZooParam::TwistPower,
        },
        ZooItem {
            name: "torus-shear",
            summary: "strip shear against unit translation; e = 0",
            param: ZooParam::None,
        },
        ZooItem {
            name: "randomized-torus",
            summary: "seeded composition of strip shears against unit translation; e = 0",
            param: ZooParam::Seed,
        },
        ZooItem {
            name: "commuting-rotation-twist",
            summary: "annulus twist against golden-angle rotation; e = 0, orbit non-proper",
            param: ZooParam::None,
        },
        ZooItem {
            name: "free-translations",
            summary: "two commuting translations; e = 0, no fixed points",
            param: ZooParam::None,
        },
        ZooItem {
            name: "pullback-degree-one",
            summary: "torus shear pulled back over a higher-genus pinch map; e = 0",
            param: ZooParam::Genus,
        },
    ]
}

/// Build parameters for catalog entries. Each entry reads the field its
/// ZooParam names and ignores the rest.
#[derive(Debug, Clone, Copy)]
pub struct ZooParams {
    pub n: i32,
    pub seed: u64,
    pub genus: usize,
}

impl Default for ZooParams {
    fn default() -> Self {
        ZooParams {
            n: 1,
            seed: 1,
            genus: 2,
        }
    }
}

/// Build a catalog action by name. Returns None for unknown names.
pub fn build(name: &str, params: &ZooParams) -> Option<Result<PlanarAction, EulerError>> {
    match name {
        "bestvina" => Some(bestvina(params.n)),
        "genus2-smooth" => Some(genus2_smooth(params.n)),
        "torus-shear" => Some(torus_shear()),
        "randomized-torus" => Some(randomized_torus(params.seed)),
        "commuting-rotation-twist" => Some(commuting_rotation_twist()),
        "free-translations" => Some(free_translations()),
        "pullback-degree-one" => Some(pullback_degree_one(params.genus)),
        _ => None,
    }
}
