//! Lifts of plane maps to the universal cover of a punctured plane.
//!
//! A lifted point is a base point together with a continuous argument about
//! the puncture. Each generator is lifted by continuing the argument along a
//! fixed reference path from the basepoint to its image; the deck translation
//! of a relator word is then read off as a whole number of full turns.
//!
//! The same machinery serves germs at infinity: the puncture is replaced by
//! a forbidden disk that no path (or image of a path) may enter, and the
//! argument is tracked around that disk.

use crate::geom::{angle_between, vec2, Point, TAU};
use crate::planemap::{self, MapExpr, PlanemapError};
use thiserror::Error;

/// Per-step residue allowed when matching an incoming lift against the
/// standard lift of the same base point.
const LIFT_RESIDUE: f64 = 0.05;
/// Base point of a relator must return to the basepoint within this distance.
const RELATOR_BASE_TOL: f64 = 1e-6;
const MAX_SPLIT_DEPTH: u32 = 48;

#[derive(Debug, Error)]
pub enum CoverError {
    #[error("word is not a relator: base point returns {displacement:.3e} away")]
    NotARelator { displacement: f64 },
    #[error("deck angle residue {residue:.4} exceeds {bound}")]
    AngleResidue { residue: f64, bound: f64 },
    #[error("path or image point ({x:.4}, {y:.4}) enters the forbidden region (clearance {dist:.3e})")]
    ForbiddenRegionViolated { x: f64, y: f64, dist: f64 },
    #[error("incoming angle is not a lift of the base argument (residue {residue:.4})")]
    LiftMismatch { residue: f64 },
    #[error("argument continuation failed to converge near parameter {t}")]
    ContinuationDiverged { t: f64 },
    #[error(transparent)]
    Map(#[from] PlanemapError),
}

/// A point of the universal cover: base point plus continuous argument of
/// (base − center).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedPoint {
    pub base: Point,
    pub angle: f64,
}

/// One letter of a word: a generator or its inverse. Words are written
/// left-to-right and act as compositions, so they are applied right-to-left.
#[derive(Clone)]
pub struct Letter<'a> {
    pub map: &'a MapExpr,
    pub inverse: bool,
}

impl<'a> Letter<'a> {
    pub fn gen(map: &'a MapExpr) -> Letter<'a> {
        Letter {
            map,
            inverse: false,
        }
    }
    pub fn inv(map: &'a MapExpr) -> Letter<'a> {
        Letter { map, inverse: true }
    }
}

/// Outcome of a deck-translation computation with its certifying residues.
#[derive(Debug, Clone, Copy)]
pub struct DeckReport {
    pub translation: i64,
    pub base_return: f64,
    pub angle_residue: f64,
}

/// Covering data: the puncture (or center of the forbidden disk), the
/// basepoint, and a chosen lift of its argument.
#[derive(Debug, Clone, Copy)]
pub struct LiftContext {
    pub center: Point,
    pub forbidden_radius: f64,
    pub z0: Point,
    pub theta0: f64,
}

enum PathSpec {
    Straight {
        from: Point,
        to: Point,
    },
    Routed {
        from: Point,
        entry: Point,
        arc_center: Point,
        arc_radius: f64,
        arc_start: f64,
        arc_sweep: f64,
        exit: Point,
        to: Point,
    },
}

impl PathSpec {
    fn at(&self, t: f64) -> Point {
        match self {
            PathSpec::Straight { from, to } => *from + (*to - *from) * t,
            PathSpec::Routed {
                from,
                entry,
                arc_center,
                arc_radius,
                arc_start,
                arc_sweep,
                exit,
                to,
            } => {
                let l1 = from.dist(*entry);
                let la = arc_radius * arc_sweep.abs();
                let l2 = exit.dist(*to);
                let total = (l1 + la + l2).max(1e-15);
                let s = t * total;
                if s <= l1 {
                    let u = if l1 > 1e-15 { s / l1 } else { 0.0 };
                    *from + (*entry - *from) * u
                } else if s <= l1 + la {
                    let u = if la > 1e-15 { (s - l1) / la } else { 0.0 };
                    let th = arc_start + arc_sweep * u;
                    *arc_center + vec2(th.cos(), th.sin()) * *arc_radius
                } else {
                    let u = if l2 > 1e-15 { (s - l1 - la) / l2 } else { 1.0 };
                    *exit + (*to - *exit) * u
                }
            }
        }
    }
}

impl LiftContext {
    /// Cover of the plane punctured at `center`.
    pub fn puncture(center: Point, z0: Point) -> LiftContext {
        LiftContext {
            center,
            forbidden_radius: 0.0,
            z0,
            theta0: (z0 - center).angle(),
        }
    }

    /// Germ-at-infinity mode: track the argument around a forbidden disk.
    pub fn germ_at_infinity(center: Point, forbidden_radius: f64, z0: Point) -> LiftContext {
        LiftContext {
            center,
            forbidden_radius,
            z0,
            theta0: (z0 - center).angle(),
        }
    }

    /// Replace the chosen lift of the basepoint argument (must differ from
    /// the principal value by a multiple of 2π for the deck computation to
    /// make sense; this is the caller's choice of lift, not validated).
    pub fn with_theta0(mut self, theta0: f64) -> LiftContext {
        self.theta0 = theta0;
        self
    }

    pub fn base_lift(&self) -> LiftedPoint {
        LiftedPoint {
            base: self.z0,
            angle: self.theta0,
        }
    }

    fn clearance_floor(&self) -> f64 {
        self.forbidden_radius.max(1e-9)
    }

    fn check_clear(&self, p: Point) -> Result<(), CoverError> {
        self.check_clear_floor(p, self.clearance_floor())
    }

    fn check_clear_floor(&self, p: Point, floor: f64) -> Result<(), CoverError> {
        let dist = p.dist(self.center);
        if dist <= floor {
            return Err(CoverError::ForbiddenRegionViolated {
                x: p.x,
                y: p.y,
                dist,
            });
        }
        Ok(())
    }

    /// The standard path from the basepoint to `to`: a straight segment,
    /// re-routed around the forbidden region along a circular arc when the
    /// segment would pass too close to the center.
    fn standard_path(&self, to: Point) -> Result<PathSpec, CoverError> {
        self.check_clear(self.z0)?;
        self.check_clear(to)?;
        let from = self.z0;
        let d = to - from;
        let len_sq = d.norm_sq();
        if len_sq < 1e-30 {
            return Ok(PathSpec::Straight { from, to });
        }
        let t_star = ((self.center - from).dot(d) / len_sq).clamp(0.0, 1.0);
        let closest = from + d * t_star;
        let h = closest.dist(self.center);
        let scale = from.dist(self.center).max(to.dist(self.center));
        let want_route = if self.forbidden_radius > 0.0 {
            1.05 * self.forbidden_radius
        } else {
            1e-7 * scale
        };
        let route_r = want_route.min(0.999 * from.dist(self.center).min(to.dist(self.center)));
        if h >= route_r || route_r <= 0.0 {
            return Ok(PathSpec::Straight { from, to });
        }
        // Line-circle intersection at the routing radius.
        let fc = from - self.center;
        let a = len_sq;
        let b = 2.0 * fc.dot(d);
        let c = fc.norm_sq() - route_r * route_r;
        let disc = (b * b - 4.0 * a * c).max(0.0);
        let sq = disc.sqrt();
        let t_in = ((-b - sq) / (2.0 * a)).clamp(0.0, 1.0);
        let t_out = ((-b + sq) / (2.0 * a)).clamp(0.0, 1.0);
        let entry = from + d * t_in;
        let exit = from + d * t_out;
        let arc_start = (entry - self.center).angle();
        // Skirt the disk the short way; an exact diameter pass goes
        // counterclockwise by convention (angle_between returns +π there).
        let sweep = angle_between(entry - self.center, exit - self.center);
        Ok(PathSpec::Routed {
            from,
            entry,
            arc_center: self.center,
            arc_radius: route_r,
            arc_start,
            arc_sweep: sweep,
            exit,
            to,
        })
    }

    /// Continuous argument increment along a parametrized path. Splits the
    /// parameter until each step is short relative to its distance from the
    /// center, where the principal value is the true increment.
    /// Continuation along curves we construct ourselves (reference paths):
    /// these must respect the forbidden region.
    fn continue_arg<F>(&self, f: &F) -> Result<f64, CoverError>
    where
        F: Fn(f64) -> Result<Point, CoverError>,
    {
        self.continue_arg_floor(f, self.clearance_floor())
    }

    /// Continuation along image curves: the maps are plane homeomorphisms,
    /// so the argument about the center stays well defined as long as the
    /// image avoids the center itself, even if it dips inside the forbidden
    /// radius that constrains our own reference paths.
    fn continue_arg_free<F>(&self, f: &F) -> Result<f64, CoverError>
    where
        F: Fn(f64) -> Result<Point, CoverError>,
    {
        self.continue_arg_floor(f, 1e-9)
    }

    fn continue_arg_floor<F>(&self, f: &F, floor: f64) -> Result<f64, CoverError>
    where
        F: Fn(f64) -> Result<Point, CoverError>,
    {
        let p0 = f(0.0)?;
        let p1 = f(1.0)?;
        self.check_clear_floor(p0, floor)?;
        self.check_clear_floor(p1, floor)?;
        self.arg_rec(f, 0.0, p0, 1.0, p1, 0, floor)
    }

    #[allow(clippy::too_many_arguments)]
    fn arg_rec<F>(
        &self,
        f: &F,
        t0: f64,
        p0: Point,
        t1: f64,
        p1: Point,
        depth: u32,
        floor: f64,
    ) -> Result<f64, CoverError>
    where
        F: Fn(f64) -> Result<Point, CoverError>,
    {
        let tm = 0.5 * (t0 + t1);
        let pm = f(tm)?;
        self.check_clear_floor(pm, floor)?;
        // Accept an interval only below a minimum parameter grain, with both
        // half-chords short relative to the clearance, and with the two
        // half-increments consistent with the whole (a wrapped interval
        // betrays itself in at least one of these).
        let grain_ok = (t1 - t0) <= 1.0 / 128.0;
        let rm = pm.dist(self.center);
        let short = |p: Point, q: Point, rp: f64, rq: f64| {
            let chord = p.dist(q);
            chord <= 0.5 * rp && chord <= 0.5 * rq
        };
        let r0 = p0.dist(self.center);
        let r1 = p1.dist(self.center);
        let h1 = angle_between(p0 - self.center, pm - self.center);
        let h2 = angle_between(pm - self.center, p1 - self.center);
        let whole = angle_between(p0 - self.center, p1 - self.center);
        let consistent = (h1 + h2 - whole).abs() <= 1e-9;
        if grain_ok && short(p0, pm, r0, rm) && short(pm, p1, rm, r1) && consistent {
            return Ok(h1 + h2);
        }
        if depth >= MAX_SPLIT_DEPTH {
            return Err(CoverError::ContinuationDiverged { t: tm });
        }
        Ok(self.arg_rec(f, t0, p0, tm, pm, depth + 1, floor)?
            + self.arg_rec(f, tm, pm, t1, p1, depth + 1, floor)?)
    }

    /// Argument increment along an explicit polyline.
    pub fn arg_continuation(&self, points: &[Point]) -> Result<f64, CoverError> {
        let mut total = 0.0;
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            total += self.continue_arg(&|t: f64| Ok(a + (b - a) * t))?;
        }
        Ok(total)
    }

    /// Standard lift of the argument of `z` (continued from the basepoint
    /// along the standard path).
    fn standard_angle(&self, z: Point) -> Result<f64, CoverError> {
        let path = self.standard_path(z)?;
        let delta = self.continue_arg(&|t: f64| Ok(path.at(t)))?;
        Ok(self.theta0 + delta)
    }

    /// Argument increment along the image under `g` of the standard path
    /// from the basepoint to `z`.
    fn image_increment(&self, g: &MapExpr, z: Point) -> Result<f64, CoverError> {
        let path = self.standard_path(z)?;
        self.continue_arg_free(&|t: f64| Ok(planemap::eval(g, path.at(t))?))
    }

    /// Apply the chosen lift of `g` to a lifted point. The lift of `g` is
    /// the one sending the base lift of z0 to the continuation along the
    /// reference path to g(z0).
    pub fn lifted_apply(&self, g: &MapExpr, p: LiftedPoint) -> Result<LiftedPoint, CoverError> {
        self.check_clear(p.base)?;
        let theta_std = self.standard_angle(p.base)?;
        let offset = p.angle - theta_std;
        let m = (offset / TAU).round();
        let residue = (offset - TAU * m).abs();
        if residue > LIFT_RESIDUE {
            return Err(CoverError::LiftMismatch { residue });
        }
        let image = planemap::eval(g, p.base)?;
        self.check_clear(image)?;
        let ref_delta = {
            let gz0 = planemap::eval(g, self.z0)?;
            self.check_clear(gz0)?;
            let path = self.standard_path(gz0)?;
            self.continue_arg(&|t: f64| Ok(path.at(t)))?
        };
        let img_delta = self.image_increment(g, p.base)?;
        Ok(LiftedPoint {
            base: image,
            angle: self.theta0 + ref_delta + img_delta + TAU * m,
        })
    }

    /// Apply the inverse of the chosen lift of `g` (not an independently
    /// chosen lift of g⁻¹, so that relator words compose correctly).
    pub fn lifted_apply_inverse(
        &self,
        g: &MapExpr,
        p: LiftedPoint,
    ) -> Result<LiftedPoint, CoverError> {
        self.check_clear(p.base)?;
        let w = planemap::eval_inverse(g, p.base)?;
        self.check_clear(w)?;
        let theta_std_w = self.standard_angle(w)?;
        let ref_delta = {
            let gz0 = planemap::eval(g, self.z0)?;
            self.check_clear(gz0)?;
            let path = self.standard_path(gz0)?;
            self.continue_arg(&|t: f64| Ok(path.at(t)))?
        };
        let img_delta = self.image_increment(g, w)?;
        let theta_via = self.theta0 + ref_delta + img_delta;
        let offset = p.angle - theta_via;
        let m = (offset / TAU).round();
        let residue = (offset - TAU * m).abs();
        if residue > LIFT_RESIDUE {
            return Err(CoverError::LiftMismatch { residue });
        }
        Ok(LiftedPoint {
            base: w,
            angle: theta_std_w + TAU * m,
        })
    }

    pub fn apply_letter(&self, letter: &Letter, p: LiftedPoint) -> Result<LiftedPoint, CoverError> {
        if letter.inverse {
            self.lifted_apply_inverse(letter.map, p)
        } else {
            self.lifted_apply(letter.map, p)
        }
    }

    /// Deck translation of a relator word: lift the word letter by letter
    /// (rightmost first) starting at the base lift; the word must return the
    /// base point to the basepoint, and the angle must advance by a whole
    /// number of full turns.
    pub fn deck_translation(&self, word: &[Letter]) -> Result<DeckReport, CoverError> {
        let mut p = self.base_lift();
        for letter in word.iter().rev() {
            p = self.apply_letter(letter, p)?;
        }
        let base_return = p.base.dist(self.z0);
        if base_return > RELATOR_BASE_TOL {
            return Err(CoverError::NotARelator {
                displacement: base_return,
            });
        }
        let turns = (p.angle - self.theta0) / TAU;
        let translation = turns.round();
        let angle_residue = (turns - translation).abs();
        if angle_residue >= LIFT_RESIDUE {
            return Err(CoverError::AngleResidue {
                residue: angle_residue,
                bound: LIFT_RESIDUE,
            });
        }
        Ok(DeckReport {
            translation: translation as i64,
            base_return,
            angle_residue,
        })
    }
}

/// Letters of the commutator [a, b] = a b a⁻¹ b⁻¹ as a word.
pub fn commutator_word<'a>(a: &'a MapExpr, b: &'a MapExpr) -> Vec<Letter<'a>> {
    vec![Letter::gen(a), Letter::gen(b), Letter::inv(a), Letter::inv(b)]
}

/// Letters of the genus-g surface relator [a1,b1]···[ag,bg].
pub fn surface_relator_word<'a>(pairs: &[(&'a MapExpr, &'a MapExpr)]) -> Vec<Letter<'a>> {
    let mut word = Vec::with_capacity(4 * pairs.len());
    for (a, b) in pairs {
        word.extend(commutator_word(a, b));
    }
    word
}

/// Full turns of a closed polyline about a center (helper for cross-checks).
pub fn winding_of_polyline(center: Point, points: &[Point]) -> Result<i64, CoverError> {
    let ctx = LiftContext::puncture(center, points[0]);
    let mut pts = points.to_vec();
    if pts[0].dist(*pts.last().unwrap()) > 0.0 {
        pts.push(points[0]);
    }
    let delta = ctx.arg_continuation(&pts)?;
    let turns = delta / TAU;
    let value = turns.round();
    if (turns - value).abs() >= LIFT_RESIDUE {
        return Err(CoverError::AngleResidue {
            residue: (turns - value).abs(),
            bound: LIFT_RESIDUE,
        });
    }
    Ok(value as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{point, PI};
    use crate::planemap::{
        annulus_twist, dilation, lazy_twist_product, translation, IndexSet,
    };

    fn bestvina_pair(n: i32) -> (MapExpr, MapExpr) {
        let origin = point(0.0, 0.0);
        let core = MapExpr::prim(annulus_twist(origin, 0.9, 1.1, n).unwrap());
        let conj = MapExpr::prim(dilation(origin, 2.0).unwrap());
        let alpha = lazy_twist_product(core, conj.clone(), IndexSet::All).unwrap();
        (alpha, conj)
    }

    fn gap_context() -> LiftContext {
        LiftContext::puncture(point(0.0, 0.0), point(1.4, 0.0))
    }

    #[test]
    fn full_loop_continues_by_one_turn() {
        let ctx = gap_context();
        let delta = ctx
            .continue_arg(&|t: f64| {
                let a = TAU * t;
                Ok(point(1.4 * a.cos(), 1.4 * a.sin()))
            })
            .unwrap();
        assert!((delta - TAU).abs() < 1e-9);
    }

    #[test]
    fn rerouted_path_skirts_the_forbidden_disk() {
        let ctx = LiftContext::germ_at_infinity(point(0.0, 0.0), 60.0, point(150.0, 0.0));
        let path = ctx.standard_path(point(-150.0, 0.0)).unwrap();
        for i in 0..=400 {
            let p = path.at(i as f64 / 400.0);
            assert!(p.dist(point(0.0, 0.0)) > 60.0, "entered the disk at {p:?}");
        }
        // A straight pass through the disk must be an error only when a
        // required point is inside; the route itself is legal.
        let delta = ctx.continue_arg(&|t: f64| Ok(path.at(t))).unwrap();
        assert!((delta.abs() - PI).abs() < 1e-6);
    }

    #[test]
    fn commutator_of_twist_product_and_dilation_lifts_to_its_power() {
        for n in [-2i32, 1, 3] {
            let (alpha, beta) = bestvina_pair(n);
            let word = commutator_word(&alpha, &beta);
            let report = gap_context().deck_translation(&word).unwrap();
            assert_eq!(report.translation, n as i64, "power {n}");
            assert!(report.angle_residue < 1e-6);
            assert!(report.base_return < 1e-9);
        }
    }

    #[test]
    fn deck_translation_ignores_the_choice_of_base_angle() {
        let (alpha, beta) = bestvina_pair(2);
        let word = commutator_word(&alpha, &beta);
        let base = gap_context();
        let d0 = base.deck_translation(&word).unwrap().translation;
        for k in [-2.0, 1.0, 3.0] {
            let ctx = base.with_theta0(base.theta0 + TAU * k);
            assert_eq!(ctx.deck_translation(&word).unwrap().translation, d0);
        }
    }

    #[test]
    fn deck_translation_is_conjugation_invariant() {
        let (alpha, beta) = bestvina_pair(-1);
        let g = MapExpr::prim(dilation(point(0.0, 0.0), 1.7).unwrap());
        let mut word = vec![Letter::gen(&g)];
        word.extend(commutator_word(&alpha, &beta));
        word.push(Letter::inv(&g));
        let plain = gap_context()
            .deck_translation(&commutator_word(&alpha, &beta))
            .unwrap();
        let conjugated = gap_context().deck_translation(&word).unwrap();
        assert_eq!(conjugated.translation, plain.translation);
    }

    #[test]
    fn deck_translation_adds_over_concatenated_relators() {
        let (alpha, beta) = bestvina_pair(2);
        let single = commutator_word(&alpha, &beta);
        let mut double = single.clone();
        double.extend(commutator_word(&alpha, &beta));
        let ctx = gap_context();
        let d1 = ctx.deck_translation(&single).unwrap().translation;
        let d2 = ctx.deck_translation(&double).unwrap().translation;
        assert_eq!(d2, 2 * d1);
    }

    #[test]
    fn words_that_move_the_basepoint_are_rejected() {
        let (_, beta) = bestvina_pair(1);
        let word = vec![Letter::gen(&beta)];
        assert!(matches!(
            gap_context().deck_translation(&word),
            Err(CoverError::NotARelator { .. })
        ));
    }

    #[test]
    fn commuting_translations_have_zero_deck_translation() {
        let a = MapExpr::prim(translation(vec2(15.0, 0.0)).unwrap());
        let b = MapExpr::prim(translation(vec2(0.0, 15.0)).unwrap());
        let ctx = LiftContext::germ_at_infinity(point(0.0, 0.0), 4.0, point(20.0, 0.0));
        let report = ctx.deck_translation(&commutator_word(&a, &b)).unwrap();
        assert_eq!(report.translation, 0);
    }

    #[test]
    fn image_inside_forbidden_disk_is_an_error() {
        let a = MapExpr::prim(translation(vec2(-100.0, 0.0)).unwrap());
        let ctx = LiftContext::germ_at_infinity(point(0.0, 0.0), 60.0, point(150.0, 0.0));
        let word = vec![Letter::gen(&a)];
        assert!(matches!(
            ctx.deck_translation(&word),
            Err(CoverError::ForbiddenRegionViolated { .. })
        ));
    }

    #[test]
    fn lifted_apply_round_trips_with_its_inverse() {
        let (alpha, beta) = bestvina_pair(2);
        let ctx = gap_context();
        for (expr, pt, extra) in [
            (&alpha, point(1.3, 0.45), 0.0),
            (&beta, point(0.4, -0.9), TAU),
            (&alpha, point(-2.0, 1.1), -2.0 * TAU),
        ] {
            let start = LiftedPoint {
                base: pt,
                angle: (pt - ctx.center).angle() + extra,
            };
            let fwd = ctx.lifted_apply(expr, start).unwrap();
            let back = ctx.lifted_apply_inverse(expr, fwd).unwrap();
            assert!(back.base.dist(start.base) < 1e-9);
            assert!((back.angle - start.angle).abs() < 1e-6);
        }
    }

    #[test]
    fn winding_helper_counts_loops() {
        let mut pts = Vec::new();
        for i in 0..=720 {
            let a = TAU * (i as f64) / 360.0;
            pts.push(point(2.0 * a.cos(), 2.0 * a.sin()));
        }
        assert_eq!(winding_of_polyline(point(0.0, 0.0), &pts).unwrap(), 2);
        let reversed: Vec<Point> = pts.iter().rev().copied().collect();
        assert_eq!(winding_of_polyline(point(0.0, 0.0), &reversed).unwrap(), -2);
    }
}
