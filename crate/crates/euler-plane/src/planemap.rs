//! Symbolic orientation-preserving homeomorphisms of the plane.
//!
//! Maps are expression trees over a small set of primitives. Evaluation is
//! always on demand: expressions are never flattened into grids, so infinite
//! products of twists with pairwise disjoint supports stay exact. Every
//! primitive knows its analytic differential and its pointwise inverse
//! (closed form where possible, monotone root finding otherwise).

use crate::geom::{point, vec2, Jacobian, Point, Vec2, TAU};
use crate::profile::{bump, bump_max_slope, bump_prime, smooth_step, smooth_step_prime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlanemapError {
    #[error("invalid radii: need 0 < r_in < r_out, got r_in={r_in}, r_out={r_out}")]
    BadRadii { r_in: f64, r_out: f64 },
    #[error("invalid band: need lo < hi, got lo={lo}, hi={hi}")]
    BadBand { lo: f64, hi: f64 },
    #[error("map is not injective: {0}")]
    NotInjective(String),
    #[error("conjugate supports overlap: {0}")]
    OverlappingSupports(String),
    #[error("cannot build a support locator: {0}")]
    SupportUnresolvable(String),
    #[error("map is not differentiable at ({x}, {y}): declared non-smooth locus")]
    NotDifferentiableHere { x: f64, y: f64 },
    #[error("non-finite point encountered during evaluation")]
    NonFinitePoint,
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

/// Concrete generators for map expressions.
///
/// All primitives are C-infinity and orientation preserving, except that an
/// infinite twist product built from them may fail to be differentiable at
/// the accumulation point of its supports; callers declare such loci
/// explicitly at the action level.
#[derive(Debug, Clone, PartialEq)]
pub enum PrimitiveMap {
    /// p -> p + shift.
    Translation { shift: Vec2 },
    /// p -> center + factor * (p - center), factor > 0.
    Dilation { center: Point, factor: f64 },
    /// Rigid rotation about a center.
    Rotation { center: Point, angle: f64 },
    /// Dehn twist supported on the annulus r_in <= |p - center| <= r_out:
    /// in polar coordinates about the center,
    /// (r, theta) -> (r, theta + tau * power * s((r - r_in)/(r_out - r_in))).
    /// Pointwise it is the identity outside the open annulus.
    AnnulusTwist {
        center: Point,
        r_in: f64,
        r_out: f64,
        power: i32,
    },
    /// Rotation by `angle` inside r_in, decaying smoothly to the identity
    /// outside r_out. The fractional cousin of `AnnulusTwist`.
    SupportedRotation {
        center: Point,
        r_in: f64,
        r_out: f64,
        angle: f64,
    },
    /// p -> p + shift * s((x - x_lo)/(x_hi - x_lo)): the identity left of the
    /// band, the full translation right of it.
    StepTranslation { shift: Vec2, x_lo: f64, x_hi: f64 },
    /// (x, y) -> (x + dx * b(u), y + dy * b(u)) with u = (y - y_lo)/(y_hi - y_lo)
    /// and b the normalized bump; displacement supported in the horizontal
    /// band and depending on y only, so the map commutes with horizontal
    /// translations.
    StripShear {
        y_lo: f64,
        y_hi: f64,
        dx: f64,
        dy: f64,
    },
}

pub fn translation(shift: Vec2) -> Result<PrimitiveMap, PlanemapError> {
    if !shift.is_finite() {
        return Err(PlanemapError::BadParameter("non-finite shift".into()));
    }
    Ok(PrimitiveMap::Translation { shift })
}

pub fn dilation(center: Point, factor: f64) -> Result<PrimitiveMap, PlanemapError> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(PlanemapError::BadParameter(format!(
            "dilation factor must be positive and finite, got {factor}"
        )));
    }
    Ok(PrimitiveMap::Dilation { center, factor })
}

pub fn rotation(center: Point, angle: f64) -> Result<PrimitiveMap, PlanemapError> {
    if !angle.is_finite() {
        return Err(PlanemapError::BadParameter("non-finite angle".into()));
    }
    Ok(PrimitiveMap::Rotation { center, angle })
}

pub fn annulus_twist(
    center: Point,
    r_in: f64,
    r_out: f64,
    power: i32,
) -> Result<PrimitiveMap, PlanemapError> {
    if !(r_in.is_finite() && r_out.is_finite() && 0.0 < r_in && r_in < r_out) {
        return Err(PlanemapError::BadRadii { r_in, r_out });
    }
    Ok(PrimitiveMap::AnnulusTwist {
        center,
        r_in,
        r_out,
        power,
    })
}

pub fn supported_rotation(
    center: Point,
    r_in: f64,
    r_out: f64,
    angle: f64,
) -> Result<PrimitiveMap, PlanemapError> {
    if !(r_in.is_finite() && r_out.is_finite() && 0.0 < r_in && r_in < r_out) {
        return Err(PlanemapError::BadRadii { r_in, r_out });
    }
    if !angle.is_finite() {
        return Err(PlanemapError::BadParameter("non-finite angle".into()));
    }
    Ok(PrimitiveMap::SupportedRotation {
        center,
        r_in,
        r_out,
        angle,
    })
}

pub fn step_translation(shift: Vec2, x_lo: f64, x_hi: f64) -> Result<PrimitiveMap, PlanemapError> {
    if !(x_lo.is_finite() && x_hi.is_finite() && x_lo < x_hi) {
        return Err(PlanemapError::BadBand { lo: x_lo, hi: x_hi });
    }
    let width = x_hi - x_lo;
    // x -> x + dx * s(u) must stay monotone; the step profile has slope <= 2.
    if shift.x < 0.0 && shift.x.abs() * crate::profile::SMOOTH_STEP_MAX_SLOPE / width >= 1.0 {
        return Err(PlanemapError::NotInjective(format!(
            "step translation with dx={} over band width {width} folds the plane",
            shift.x
        )));
    }
    Ok(PrimitiveMap::StepTranslation { shift, x_lo, x_hi })
}

pub fn strip_shear(y_lo: f64, y_hi: f64, dx: f64, dy: f64) -> Result<PrimitiveMap, PlanemapError> {
    if !(y_lo.is_finite() && y_hi.is_finite() && y_lo < y_hi) {
        return Err(PlanemapError::BadBand { lo: y_lo, hi: y_hi });
    }
    let width = y_hi - y_lo;
    if dy != 0.0 && dy.abs() * bump_max_slope() / width >= 1.0 {
        return Err(PlanemapError::NotInjective(format!(
            "strip shear with dy={dy} over band width {width} folds the plane"
        )));
    }
    Ok(PrimitiveMap::StripShear { y_lo, y_hi, dx, dy })
}

impl PrimitiveMap {
    fn eval(&self, p: Point) -> Point {
        match *self {
            PrimitiveMap::Translation { shift } => p + shift,
            PrimitiveMap::Dilation { center, factor } => center + (p - center) * factor,
            PrimitiveMap::Rotation { center, angle } => center + (p - center).rotated(angle),
            PrimitiveMap::AnnulusTwist {
                center,
                r_in,
                r_out,
                power,
            } => {
                let q = p - center;
                let r = q.norm();
                if r <= r_in || r >= r_out {
                    return p;
                }
                let u = (r - r_in) / (r_out - r_in);
                let psi = TAU * power as f64 * smooth_step(u);
                center + q.rotated(psi)
            }
            PrimitiveMap::SupportedRotation {
                center,
                r_in,
                r_out,
                angle,
            } => {
                let q = p - center;
                let r = q.norm();
                if r >= r_out {
                    return p;
                }
                let psi = if r <= r_in {
                    angle
                } else {
                    angle * (1.0 - smooth_step((r - r_in) / (r_out - r_in)))
                };
                center + q.rotated(psi)
            }
            PrimitiveMap::StepTranslation { shift, x_lo, x_hi } => {
                let s = smooth_step((p.x - x_lo) / (x_hi - x_lo));
                p + shift * s
            }
            PrimitiveMap::StripShear { y_lo, y_hi, dx, dy } => {
                let b = bump((p.y - y_lo) / (y_hi - y_lo));
                p + vec2(dx * b, dy * b)
            }
        }
    }

    fn eval_inverse(&self, q: Point) -> Point {
        match *self {
            PrimitiveMap::Translation { shift } => q - shift,
            PrimitiveMap::Dilation { center, factor } => center + (q - center) * (1.0 / factor),
            PrimitiveMap::Rotation { center, angle } => center + (q - center).rotated(-angle),
            PrimitiveMap::AnnulusTwist {
                center,
                r_in,
                r_out,
                power,
            } => PrimitiveMap::AnnulusTwist {
                center,
                r_in,
                r_out,
                power: -power,
            }
            .eval(q),
            PrimitiveMap::SupportedRotation {
                center,
                r_in,
                r_out,
                angle,
            } => PrimitiveMap::SupportedRotation {
                center,
                r_in,
                r_out,
                angle: -angle,
            }
            .eval(q),
            PrimitiveMap::StepTranslation { shift, x_lo, x_hi } => {
                let width = x_hi - x_lo;
                let f = |x: f64| x + shift.x * smooth_step((x - x_lo) / width);
                let x = solve_monotone(f, q.x - shift.x.max(0.0), q.x - shift.x.min(0.0), q.x);
                let s = smooth_step((x - x_lo) / width);
                point(x, q.y - shift.y * s)
            }
            PrimitiveMap::StripShear { y_lo, y_hi, dx, dy } => {
                let width = y_hi - y_lo;
                let f = |y: f64| y + dy * bump((y - y_lo) / width);
                let y = solve_monotone(f, q.y - dy.max(0.0), q.y - dy.min(0.0), q.y);
                let b = bump((y - y_lo) / width);
                point(q.x - dx * b, y)
            }
        }
    }

    fn differential(&self, p: Point) -> Jacobian {
        match *self {
            PrimitiveMap::Translation { .. } => Jacobian::IDENTITY,
            PrimitiveMap::Dilation { factor, .. } => Jacobian::scaling(factor),
            PrimitiveMap::Rotation { angle, .. } => Jacobian::rotation(angle),
            PrimitiveMap::AnnulusTwist {
                center,
                r_in,
                r_out,
                power,
            } => {
                let q = p - center;
                let r = q.norm();
                if r <= r_in || r >= r_out {
                    return Jacobian::IDENTITY;
                }
                let width = r_out - r_in;
                let u = (r - r_in) / width;
                let psi = TAU * power as f64 * smooth_step(u);
                let dpsi = TAU * power as f64 * smooth_step_prime(u) / width;
                radial_angle_jacobian(q, r, psi, dpsi)
            }
            PrimitiveMap::SupportedRotation {
                center,
                r_in,
                r_out,
                angle,
            } => {
                let q = p - center;
                let r = q.norm();
                if r >= r_out {
                    return Jacobian::IDENTITY;
                }
                if r <= r_in {
                    return Jacobian::rotation(angle);
                }
                let width = r_out - r_in;
                let u = (r - r_in) / width;
                let psi = angle * (1.0 - smooth_step(u));
                let dpsi = -angle * smooth_step_prime(u) / width;
                radial_angle_jacobian(q, r, psi, dpsi)
            }
            PrimitiveMap::StepTranslation { shift, x_lo, x_hi } => {
                let width = x_hi - x_lo;
                let sp = smooth_step_prime((p.x - x_lo) / width) / width;
                Jacobian {
                    a: 1.0 + shift.x * sp,
                    b: 0.0,
                    c: shift.y * sp,
                    d: 1.0,
                }
            }
            PrimitiveMap::StripShear { y_lo, y_hi, dx, dy } => {
                let width = y_hi - y_lo;
                let bp = bump_prime((p.y - y_lo) / width) / width;
                Jacobian {
                    a: 1.0,
                    b: dx * bp,
                    c: 0.0,
                    d: 1.0 + dy * bp,
                }
            }
        }
    }
}

/// Differential of a map of the form p -> center + R(psi(r)) (p - center).
fn radial_angle_jacobian(q: Vec2, r: f64, psi: f64, dpsi: f64) -> Jacobian {
    let rot = Jacobian::rotation(psi);
    let rq_perp = rot.apply(q.perp());
    let qhat = q * (1.0 / r);
    Jacobian {
        a: rot.a + dpsi * rq_perp.x * qhat.x,
        b: rot.b + dpsi * rq_perp.x * qhat.y,
        c: rot.c + dpsi * rq_perp.y * qhat.x,
        d: rot.d + dpsi * rq_perp.y * qhat.y,
    }
}

/// Solve f(x) = target for strictly increasing `f` on [lo, hi] by bisection
/// followed by Newton polish via secant steps.
fn solve_monotone(f: impl Fn(f64) -> f64, lo: f64, hi: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
    // Widen slightly: the analytic bracket is tight and rounding can nudge
    // the root across it.
    let pad = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
    lo -= pad;
    hi += pad;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Which conjugate indices participate in a twist product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexSet {
    All,
    NonNegative,
}

impl IndexSet {
    pub fn allows(&self, n: i64) -> bool {
        match self {
            IndexSet::All => true,
            IndexSet::NonNegative => n >= 0,
        }
    }
}

/// Finite-support locator for conjugated twist products: given a point,
/// reports the unique index whose conjugate support contains it.
#[derive(Debug, Clone, PartialEq)]
pub enum SupportLocator {
    /// Supports are the annuli factor^n * [r_in, r_out] about the center.
    DilationAnnuli {
        center: Point,
        r_in: f64,
        r_out: f64,
        factor: f64,
    },
    /// Supports are the annuli [r_in, r_out] about center + n * shift.
    TranslatedAnnuli {
        center: Point,
        r_in: f64,
        r_out: f64,
        shift: Vec2,
    },
}

impl SupportLocator {
    pub fn active_index(&self, p: Point, indices: IndexSet) -> Option<i64> {
        match *self {
            SupportLocator::DilationAnnuli {
                center,
                r_in,
                r_out,
                factor,
            } => {
                let r = (p - center).norm();
                if r <= 0.0 {
                    return None;
                }
                let guess = ((r / (r_in * r_out).sqrt()).ln() / factor.ln()).round() as i64;
                for dn in -2..=2i64 {
                    let n = guess + dn;
                    if !indices.allows(n) || n.unsigned_abs() > 4000 {
                        continue;
                    }
                    let scale = factor.powi(n as i32);
                    if r > r_in * scale && r < r_out * scale {
                        return Some(n);
                    }
                }
                None
            }
            SupportLocator::TranslatedAnnuli {
                center,
                r_in,
                r_out,
                shift,
            } => {
                let d = p - center;
                let guess = (d.dot(shift) / shift.norm_sq()).round() as i64;
                for dn in -2..=2i64 {
                    let n = guess + dn;
                    if !indices.allows(n) || n.unsigned_abs() > 1_000_000 {
                        continue;
                    }
                    let c = center + shift * n as f64;
                    let r = (p - c).norm();
                    if r > r_in && r < r_out {
                        return Some(n);
                    }
                }
                None
            }
        }
    }
}

/// Symbolic homeomorphism of the plane.
///
/// `Compose` applies its factors right to left, matching the usual function
/// composition order: `Compose([f, g])` is the map p -> f(g(p)).
#[derive(Debug, Clone, PartialEq)]
pub enum MapExpr {
    Prim(PrimitiveMap),
    Compose(Vec<MapExpr>),
    Inverse(Box<MapExpr>),
    Power(Box<MapExpr>, i32),
    /// Product over `indices` of conjugator^n . core . conjugator^-n, for a
    /// core with compact support whose conjugates are pairwise disjoint.
    /// Evaluated lazily through the locator; never flattened.
    ConjProduct {
        core: Box<MapExpr>,
        conjugator: Box<MapExpr>,
        indices: IndexSet,
        locator: SupportLocator,
    },
}

impl MapExpr {
    pub fn identity() -> MapExpr {
        MapExpr::Compose(Vec::new())
    }

    pub fn prim(p: PrimitiveMap) -> MapExpr {
        MapExpr::Prim(p)
    }

    pub fn inverse(self) -> MapExpr {
        MapExpr::Inverse(Box::new(self))
    }

    pub fn power(self, k: i32) -> MapExpr {
        MapExpr::Power(Box::new(self), k)
    }

    pub fn compose(factors: Vec<MapExpr>) -> MapExpr {
        MapExpr::Compose(factors)
    }
}

/// a . b . a^-1 . b^-1 as a single expression.
pub fn commutator(a: &MapExpr, b: &MapExpr) -> MapExpr {
    MapExpr::Compose(vec![
        a.clone(),
        b.clone(),
        a.clone().inverse(),
        b.clone().inverse(),
    ])
}

/// Support bounds of a twist-like expression: all factors must be twists or
/// supported rotations about one common center. Returns (center, r_in, r_out).
fn twist_support(expr: &MapExpr) -> Option<(Point, f64, f64)> {
    match expr {
        MapExpr::Prim(PrimitiveMap::AnnulusTwist {
            center,
            r_in,
            r_out,
            ..
        }) => Some((*center, *r_in, *r_out)),
        MapExpr::Prim(PrimitiveMap::SupportedRotation {
            center,
            r_in: _,
            r_out,
            ..
        }) => Some((*center, 0.0, *r_out)),
        MapExpr::Inverse(e) => twist_support(e),
        MapExpr::Power(e, _) => twist_support(e),
        MapExpr::Compose(es) => {
            let mut acc: Option<(Point, f64, f64)> = None;
            for e in es {
                let (c, ri, ro) = twist_support(e)?;
                acc = Some(match acc {
                    None => (c, ri, ro),
                    Some((c0, ri0, ro0)) => {
                        if c0.dist(c) > 1e-12 {
                            return None;
                        }
                        (c0, ri0.min(ri), ro0.max(ro))
                    }
                });
            }
            acc
        }
        _ => None,
    }
}

/// Build the lazily evaluated product of conjugates
/// `prod_n conjugator^n . core . conjugator^-n`.
///
/// The core must have compact support (an annulus or disk about some center)
/// and the conjugator must move that support off itself: a dilation about
/// the same center, a translation, or a step translation that acts as an
/// exact translation on every nonnegative conjugate of the support.
pub fn lazy_twist_product(
    core: MapExpr,
    conjugator: MapExpr,
    indices: IndexSet,
) -> Result<MapExpr, PlanemapError> {
    let (center, r_in, r_out) = twist_support(&core).ok_or_else(|| {
        PlanemapError::SupportUnresolvable(
            "core must be a twist or a composition of twists about one center".into(),
        )
    })?;
    let locator = match &conjugator {
        MapExpr::Prim(PrimitiveMap::Dilation {
            center: c2,
            factor,
        }) => {
            if c2.dist(center) > 1e-12 {
                return Err(PlanemapError::SupportUnresolvable(
                    "dilation conjugator must share the twist center".into(),
                ));
            }
            if r_in <= 0.0 {
                return Err(PlanemapError::SupportUnresolvable(
                    "dilation conjugator needs an annular core support away from its center"
                        .into(),
                ));
            }
            let spread = factor.max(1.0 / factor);
            if r_out / r_in >= spread {
                return Err(PlanemapError::OverlappingSupports(format!(
                    "annulus ratio {} is not below the dilation spread {}",
                    r_out / r_in,
                    spread
                )));
            }
            SupportLocator::DilationAnnuli {
                center,
                r_in,
                r_out,
                factor: *factor,
            }
        }
        MapExpr::Prim(PrimitiveMap::Translation { shift }) => {
            if shift.norm() <= 2.0 * r_out {
                return Err(PlanemapError::OverlappingSupports(format!(
                    "translation step {} does not clear the support diameter {}",
                    shift.norm(),
                    2.0 * r_out
                )));
            }
            SupportLocator::TranslatedAnnuli {
                center,
                r_in,
                r_out,
                shift: *shift,
            }
        }
        MapExpr::Prim(PrimitiveMap::StepTranslation { shift, x_lo: _, x_hi }) => {
            if indices != IndexSet::NonNegative {
                return Err(PlanemapError::SupportUnresolvable(
                    "step-translation conjugators support nonnegative indices only".into(),
                ));
            }
            if center.x - r_out < *x_hi {
                return Err(PlanemapError::SupportUnresolvable(format!(
                    "core support must lie right of the step band (needs x >= {x_hi})"
                )));
            }
            if shift.x <= 0.0 {
                return Err(PlanemapError::SupportUnresolvable(
                    "step-translation conjugator must shift rightwards".into(),
                ));
            }
            if shift.norm() <= 2.0 * r_out {
                return Err(PlanemapError::OverlappingSupports(format!(
                    "translation step {} does not clear the support diameter {}",
                    shift.norm(),
                    2.0 * r_out
                )));
            }
            SupportLocator::TranslatedAnnuli {
                center,
                r_in,
                r_out,
                shift: *shift,
            }
        }
        _ => {
            return Err(PlanemapError::SupportUnresolvable(
                "conjugator must be a dilation, translation or step translation".into(),
            ))
        }
    };
    Ok(MapExpr::ConjProduct {
        core: Box::new(core),
        conjugator: Box::new(conjugator),
        indices,
        locator,
    })
}

fn apply_signed_power(
    expr: &MapExpr,
    n: i64,
    p: Point,
    inverse: bool,
) -> Result<Point, PlanemapError> {
    let forward = (n >= 0) != inverse;
    let mut q = p;
    for _ in 0..n.unsigned_abs() {
        q = if forward { eval(expr, q)? } else { eval_inverse(expr, q)? };
    }
    Ok(q)
}

/// Evaluate a map expression at a point.
pub fn eval(expr: &MapExpr, p: Point) -> Result<Point, PlanemapError> {
    if !p.is_finite() {
        return Err(PlanemapError::NonFinitePoint);
    }
    match expr {
        MapExpr::Prim(m) => Ok(m.eval(p)),
        MapExpr::Compose(es) => {
            let mut q = p;
            for e in es.iter().rev() {
                q = eval(e, q)?;
            }
            Ok(q)
        }
        MapExpr::Inverse(e) => eval_inverse(e, p),
        MapExpr::Power(e, k) => {
            let mut q = p;
            for _ in 0..k.unsigned_abs() {
                q = if *k >= 0 {
                    eval(e, q)?
                } else {
                    eval_inverse(e, q)?
                };
            }
            Ok(q)
        }
        MapExpr::ConjProduct {
            core,
            conjugator,
            indices,
            locator,
        } => match locator.active_index(p, *indices) {
            None => Ok(p),
            Some(n) => {
                let q = apply_signed_power(conjugator, n, p, true)?;
                let q = eval(core, q)?;
                apply_signed_power(conjugator, n, q, false)
            }
        },
    }
}

/// Evaluate the inverse of a map expression at a point.
pub fn eval_inverse(expr: &MapExpr, q: Point) -> Result<Point, PlanemapError> {
    if !q.is_finite() {
        return Err(PlanemapError::NonFinitePoint);
    }
    match expr {
        MapExpr::Prim(m) => Ok(m.eval_inverse(q)),
        MapExpr::Compose(es) => {
            let mut p = q;
            for e in es.iter() {
                p = eval_inverse(e, p)?;
            }
            Ok(p)
        }
        MapExpr::Inverse(e) => eval(e, q),
        MapExpr::Power(e, k) => {
            let mut p = q;
            for _ in 0..k.unsigned_abs() {
                p = if *k >= 0 {
                    eval_inverse(e, p)?
                } else {
                    eval(e, p)?
                };
            }
            Ok(p)
        }
        MapExpr::ConjProduct {
            core,
            conjugator,
            indices,
            locator,
        } => {
            // Each factor preserves its own support annulus, so the active
            // index of the image equals the active index of the preimage.
            match locator.active_index(q, *indices) {
                None => Ok(q),
                Some(n) => {
                    let p = apply_signed_power(conjugator, n, q, true)?;
                    let p = eval_inverse(core, p)?;
                    apply_signed_power(conjugator, n, p, false)
                }
            }
        }
    }
}

/// Analytic differential of a map expression at a point.
pub fn differential(expr: &MapExpr, p: Point) -> Result<Jacobian, PlanemapError> {
    if !p.is_finite() {
        return Err(PlanemapError::NonFinitePoint);
    }
    match expr {
        MapExpr::Prim(m) => Ok(m.differential(p)),
        MapExpr::Compose(es) => {
            let mut j = Jacobian::IDENTITY;
            let mut q = p;
            for e in es.iter().rev() {
                j = differential(e, q)?.compose(j);
                q = eval(e, q)?;
            }
            Ok(j)
        }
        MapExpr::Inverse(e) => {
            let pre = eval_inverse(e, p)?;
            Ok(differential(e, pre)?.inverse())
        }
        MapExpr::Power(e, k) => {
            let mut j = Jacobian::IDENTITY;
            let mut q = p;
            for _ in 0..k.unsigned_abs() {
                if *k >= 0 {
                    j = differential(e, q)?.compose(j);
                    q = eval(e, q)?;
                } else {
                    let pre = eval_inverse(e, q)?;
                    j = differential(e, pre)?.inverse().compose(j);
                    q = pre;
                }
            }
            Ok(j)
        }
        MapExpr::ConjProduct {
            core,
            conjugator,
            indices,
            locator,
        } => match locator.active_index(p, *indices) {
            None => Ok(Jacobian::IDENTITY),
            Some(n) => {
                let n32 = i32::try_from(n).map_err(|_| PlanemapError::NonFinitePoint)?;
                let factor = MapExpr::Compose(vec![
                    conjugator.as_ref().clone().power(n32),
                    core.as_ref().clone(),
                    conjugator.as_ref().clone().power(-n32),
                ]);
                differential(&factor, p)
            }
        },
    }
}

/// Differential with a guard for declared non-smooth loci (for example the
/// accumulation point of an infinite twist product).
pub fn differential_checked(
    expr: &MapExpr,
    p: Point,
    non_smooth_loci: &[Point],
    exclusion: f64,
) -> Result<Jacobian, PlanemapError> {
    for locus in non_smooth_loci {
        if locus.dist(p) <= exclusion {
            return Err(PlanemapError::NotDifferentiableHere { x: p.x, y: p.y });
        }
    }
    differential(expr, p)
}

/// Outcome of a relator identity check.
#[derive(Debug, Clone)]
pub struct RelatorReport {
    pub max_displacement: f64,
    pub worst_point: Point,
    pub samples: usize,
    pub tolerance: f64,
}

impl RelatorReport {
    pub fn passes(&self) -> bool {
        self.max_displacement < self.tolerance
    }
}

/// Evaluate a would-be identity word at sample points and report the largest
/// displacement.
pub fn relator_check(
    word: &MapExpr,
    samples: &[Point],
    tolerance: f64,
) -> Result<RelatorReport, PlanemapError> {
    let mut max_displacement: f64 = 0.0;
    let mut worst_point = point(0.0, 0.0);
    for &p in samples {
        let q = eval(word, p)?;
        let d = p.dist(q);
        if d > max_displacement {
            max_displacement = d;
            worst_point = p;
        }
    }
    Ok(RelatorReport {
        max_displacement,
        worst_point,
        samples: samples.len(),
        tolerance,
    })
}

/// Deterministic sample cloud for relator checks: points with radius in
/// [r_min, r_max] about the origin, drawn from a seeded generator.
pub fn sample_annulus_points(seed: u64, count: usize, r_min: f64, r_max: f64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = rng.gen_range(r_min..r_max);
            let a = rng.gen_range(0.0..TAU);
            point(r * a.cos(), r * a.sin())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::point;
    use crate::tol;

    fn fd_jacobian(expr: &MapExpr, p: Point) -> Jacobian {
        let h = tol::DIFFERENTIAL_STEP;
        let fxp = eval(expr, point(p.x + h, p.y)).unwrap();
        let fxm = eval(expr, point(p.x - h, p.y)).unwrap();
        let fyp = eval(expr, point(p.x, p.y + h)).unwrap();
        let fym = eval(expr, point(p.x, p.y - h)).unwrap();
        Jacobian {
            a: (fxp.x - fxm.x) / (2.0 * h),
            b: (fyp.x - fym.x) / (2.0 * h),
            c: (fxp.y - fxm.y) / (2.0 * h),
            d: (fyp.y - fym.y) / (2.0 * h),
        }
    }

    fn assert_jacobian_close(expr: &MapExpr, p: Point) {
        let an = differential(expr, p).unwrap();
        let fd = fd_jacobian(expr, p);
        let scale = 1.0f64
            .max(an.a.abs())
            .max(an.b.abs())
            .max(an.c.abs())
            .max(an.d.abs());
        assert!(
            an.max_abs_diff(fd) <= tol::DIFFERENTIAL_REL_TOL * scale,
            "analytic {an:?} vs finite-difference {fd:?} at {p}"
        );
    }

    fn bestvina_alpha(power: i32) -> MapExpr {
        let twist = annulus_twist(point(0.0, 0.0), 0.9, 1.1, power).unwrap();
        let dil = dilation(point(0.0, 0.0), 2.0).unwrap();
        lazy_twist_product(
            MapExpr::prim(twist),
            MapExpr::prim(dil),
            IndexSet::All,
        )
        .unwrap()
    }

    #[test]
    fn translation_moves_points() {
        let t = MapExpr::prim(translation(vec2(3.0, -1.0)).unwrap());
        let q = eval(&t, point(1.0, 1.0)).unwrap();
        assert!(q.dist(point(4.0, 0.0)) < 1e-15);
    }

    #[test]
    fn twist_is_identity_outside_annulus() {
        let tw = MapExpr::prim(annulus_twist(point(0.0, 0.0), 0.9, 1.1, 3).unwrap());
        for &p in &[point(0.5, 0.0), point(0.0, 0.89), point(1.2, 0.3), point(5.0, 5.0)] {
            assert_eq!(eval(&tw, p).unwrap(), p);
        }
    }

    #[test]
    fn twist_midline_rotates_by_half_the_full_turns() {
        // At the middle radius the profile is exactly 1/2, so a power-1
        // twist rotates by half a turn: (1, 0) lands on (-1, 0).
        let tw = MapExpr::prim(annulus_twist(point(0.0, 0.0), 0.9, 1.1, 1).unwrap());
        let q = eval(&tw, point(1.0, 0.0)).unwrap();
        assert!(q.dist(point(-1.0, 0.0)) < 1e-12, "got {q}");
    }

    #[test]
    fn twist_preserves_radii() {
        let tw = MapExpr::prim(annulus_twist(point(0.5, -0.25), 0.9, 1.1, 2).unwrap());
        for i in 0..50 {
            let r = 0.85 + 0.3 * (i as f64 / 49.0);
            let p = point(0.5 + r, -0.25);
            let q = eval(&tw, p).unwrap();
            let r2 = (q - point(0.5, -0.25)).norm();
            assert!((r - r2).abs() < 1e-12);
        }
    }

    #[test]
    fn infinite_twist_product_evaluates_through_locator() {
        let alpha = bestvina_alpha(1);
        // Radius 1 sits in the core annulus: rotated by pi.
        let q = eval(&alpha, point(1.0, 0.0)).unwrap();
        assert!(q.dist(point(-1.0, 0.0)) < 1e-12);
        // Radius 2 sits in the n=1 annulus: also rotated by pi about 0.
        let q = eval(&alpha, point(2.0, 0.0)).unwrap();
        assert!(q.dist(point(-2.0, 0.0)) < 1e-12);
        // Gap radii are fixed.
        for &p in &[point(0.7, 0.0), point(1.4, 0.0), point(-2.9, 0.1)] {
            assert_eq!(eval(&alpha, p).unwrap(), p);
        }
        // The origin, where supports accumulate, is still fixed pointwise.
        assert_eq!(eval(&alpha, point(0.0, 0.0)).unwrap(), point(0.0, 0.0));
    }

    #[test]
    fn locator_agrees_with_brute_force_scan() {
        let locator = SupportLocator::DilationAnnuli {
            center: point(0.0, 0.0),
            r_in: 0.9,
            r_out: 1.1,
            factor: 2.0,
        };
        let brute = |p: Point, indices: IndexSet| -> Option<i64> {
            let r = (p - point(0.0, 0.0)).norm();
            (-60..=60).find(|&n| {
                indices.allows(n)
                    && r > 0.9 * 2.0f64.powi(n as i32)
                    && r < 1.1 * 2.0f64.powi(n as i32)
            })
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let r = 10f64.powf(rng.gen_range(-6.0..6.0));
            let a = rng.gen_range(0.0..TAU);
            let p = point(r * a.cos(), r * a.sin());
            for indices in [IndexSet::All, IndexSet::NonNegative] {
                assert_eq!(
                    locator.active_index(p, indices),
                    brute(p, indices),
                    "at radius {r}"
                );
            }
        }
    }

    #[test]
    fn overlapping_supports_are_rejected() {
        let fat_twist = annulus_twist(point(0.0, 0.0), 0.9, 1.9, 1).unwrap();
        let dil = dilation(point(0.0, 0.0), 2.0).unwrap();
        let err = lazy_twist_product(
            MapExpr::prim(fat_twist),
            MapExpr::prim(dil),
            IndexSet::All,
        )
        .unwrap_err();
        assert!(matches!(err, PlanemapError::OverlappingSupports(_)));
    }

    #[test]
    fn step_translation_interpolates_across_band() {
        let g = MapExpr::prim(step_translation(vec2(3.0, 0.0), -3.0, -2.0).unwrap());
        // Left of the band: fixed. Right: full shift. Midpoint: half shift.
        assert_eq!(eval(&g, point(-5.0, 2.0)).unwrap(), point(-5.0, 2.0));
        assert!(eval(&g, point(0.0, 2.0)).unwrap().dist(point(3.0, 2.0)) < 1e-15);
        assert!(eval(&g, point(-2.5, 7.0)).unwrap().dist(point(-1.0, 7.0)) < 1e-15);
    }

    #[test]
    fn folding_step_translation_is_rejected() {
        // Slope bound: |dx| * 2 / width must stay below 1.
        assert!(step_translation(vec2(-0.6, 0.0), 0.0, 1.0).is_err());
        assert!(step_translation(vec2(-0.4, 0.0), 0.0, 1.0).is_ok());
    }

    #[test]
    fn inverse_of_each_primitive_round_trips() {
        let prims = vec![
            MapExpr::prim(translation(vec2(0.3, -0.7)).unwrap()),
            MapExpr::prim(dilation(point(1.0, 2.0), 1.7).unwrap()),
            MapExpr::prim(rotation(point(-1.0, 0.5), 2.2).unwrap()),
            MapExpr::prim(annulus_twist(point(0.2, 0.1), 0.8, 1.3, -2).unwrap()),
            MapExpr::prim(supported_rotation(point(0.0, 0.0), 0.5, 1.5, 1.1).unwrap()),
            MapExpr::prim(step_translation(vec2(2.0, 0.4), -1.0, 1.0).unwrap()),
            MapExpr::prim(strip_shear(0.5, 1.5, 0.8, 0.2).unwrap()),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for expr in &prims {
            for _ in 0..40 {
                let p = point(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                let q = eval(expr, p).unwrap();
                let back = eval_inverse(expr, q).unwrap();
                assert!(
                    back.dist(p) < 1e-9,
                    "roundtrip failed for {expr:?} at {p}: got {back}"
                );
            }
        }
    }

    #[test]
    fn word_inverse_round_trips() {
        let alpha = bestvina_alpha(2);
        let beta = MapExpr::prim(dilation(point(0.0, 0.0), 2.0).unwrap());
        let word = MapExpr::Compose(vec![
            alpha.clone(),
            beta.clone().power(2),
            alpha.clone().inverse(),
            beta.clone().power(-1),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..60 {
            let p = point(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let q = eval(&word, p).unwrap();
            let back = eval_inverse(&word, q).unwrap();
            assert!(back.dist(p) < 1e-9, "at {p}: got {back}");
        }
    }

    #[test]
    fn differentials_match_finite_differences() {
        let exprs = vec![
            MapExpr::prim(annulus_twist(point(0.0, 0.0), 0.9, 1.1, 1).unwrap()),
            MapExpr::prim(annulus_twist(point(0.0, 0.0), 0.9, 1.1, -3).unwrap()),
            MapExpr::prim(supported_rotation(point(0.0, 0.0), 0.5, 1.5, 0.8).unwrap()),
            MapExpr::prim(step_translation(vec2(3.0, 0.0), -3.0, -2.0).unwrap()),
            MapExpr::prim(strip_shear(0.5, 1.5, 0.8, 0.1).unwrap()),
            bestvina_alpha(1),
        ];
        let pts = [
            point(1.02, 0.1),
            point(0.3, 0.95),
            point(-2.4, 0.7),
            point(0.2, 1.12),
            point(2.03, -0.2),
        ];
        for expr in &exprs {
            for &p in &pts {
                assert_jacobian_close(expr, p);
            }
        }
    }

    #[test]
    fn chain_rule_through_compositions() {
        let alpha = bestvina_alpha(1);
        let beta = MapExpr::prim(dilation(point(0.0, 0.0), 2.0).unwrap());
        let word = MapExpr::Compose(vec![alpha, beta.power(-1)]);
        for &p in &[point(2.1, 0.3), point(0.5, 1.9), point(-1.7, -0.6)] {
            assert_jacobian_close(&word, p);
        }
    }

    #[test]
    fn twist_determinant_is_one() {
        let tw = MapExpr::prim(annulus_twist(point(0.0, 0.0), 0.9, 1.1, 4).unwrap());
        for i in 0..60 {
            let r = 0.9 + 0.2 * (i as f64 + 0.5) / 60.0;
            let p = point(r * 0.6, r * 0.8);
            let det = differential(&tw, p).unwrap().det();
            assert!((det - 1.0).abs() < 1e-9, "det {det} at radius {r}");
        }
    }

    #[test]
    fn declared_locus_blocks_differential() {
        let alpha = bestvina_alpha(1);
        let origin = point(0.0, 0.0);
        let err = differential_checked(&alpha, origin, &[origin], 1e-9).unwrap_err();
        assert!(matches!(err, PlanemapError::NotDifferentiableHere { .. }));
        assert!(differential_checked(&alpha, point(1.0, 0.0), &[origin], 1e-9).is_ok());
    }

    #[test]
    fn bilateral_product_commutes_with_its_dilation() {
        // Conjugating the two-sided product by the dilation only reindexes
        // its factors, so the commutator is an identity.
        let alpha = bestvina_alpha(1);
        let beta = MapExpr::prim(dilation(point(0.0, 0.0), 2.0).unwrap());
        let word = commutator(&alpha, &beta);
        let samples = sample_annulus_points(3, 200, 0.1, 50.0);
        let report = relator_check(&word, &samples, tol::RELATOR_TOL).unwrap();
        assert!(
            report.passes(),
            "max displacement {} at {}",
            report.max_displacement,
            report.worst_point
        );
    }

    #[test]
    fn one_sided_product_commutator_recovers_the_core() {
        // For the product over nonnegative indices only, conjugation by the
        // dilation shifts the factors by one, leaving exactly the core twist:
        // alpha . beta . alpha^-1 . beta^-1 = tau.
        let twist = annulus_twist(point(0.0, 0.0), 0.9, 1.1, 1).unwrap();
        let beta = MapExpr::prim(dilation(point(0.0, 0.0), 2.0).unwrap());
        let alpha = lazy_twist_product(
            MapExpr::prim(twist.clone()),
            beta.clone(),
            IndexSet::NonNegative,
        )
        .unwrap();
        let word = MapExpr::Compose(vec![
            commutator(&alpha, &beta),
            MapExpr::prim(twist).inverse(),
        ]);
        let samples = sample_annulus_points(7, 200, 0.1, 50.0);
        let report = relator_check(&word, &samples, tol::RELATOR_TOL).unwrap();
        assert!(
            report.passes(),
            "max displacement {} at {}",
            report.max_displacement,
            report.worst_point
        );
    }

    #[test]
    fn shear_translation_commutator_is_identity() {
        let shear = MapExpr::prim(strip_shear(0.5, 1.5, 0.8, 0.0).unwrap());
        let trans = MapExpr::prim(translation(vec2(1.0, 0.0)).unwrap());
        let word = commutator(&shear, &trans);
        let samples = sample_annulus_points(4, 200, 0.01, 20.0);
        let report = relator_check(&word, &samples, tol::RELATOR_TOL).unwrap();
        assert!(report.passes(), "max {}", report.max_displacement);
    }
}
