//! Oriented C1 plane curves as adaptive polylines with tangents.
//!
//! Curves carry enough data (points plus unit tangents, with bounded tangent
//! turn per step) to compute turning numbers, signed crossings and writhe
//! differences robustly. Between samples the curve is reconstructed by cubic
//! Hermite interpolation, which is what crossing refinement and trimming
//! operate on.

use crate::geom::{angle_between, point, vec2, Jacobian, Point, Vec2, PI, TAU};
use crate::planemap::{self, MapExpr, PlanemapError};
use crate::profile::{bump, bump_prime};
use crate::tol;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use thiserror::Error;

/// Tangent-turn budget used while refining (stays below the stored-curve
/// contract of `tol::MAX_TANGENT_STEP` so derived curves keep slack).
const REFINE_ANGLE: f64 = 0.08;
const MAX_REFINE_DEPTH: u32 = 26;
/// Crossings this close to an arc endpoint (in parameter or in the plane)
/// are endpoint contacts and never count.
const ENDPOINT_PARAM_EPS: f64 = 1e-6;
const ENDPOINT_BALL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("curve is not immersed: speed {speed:.3e} at parameter {t}")]
    NotImmersed { t: f64, speed: f64 },
    #[error("tangent-step contract cannot be met near parameter {t}")]
    ContractUnsatisfiable { t: f64 },
    #[error("turning-number residue {residue:.4} exceeds the bound {bound}")]
    ResidueTooLarge { residue: f64, bound: f64 },
    #[error("non-transverse contact near ({x:.6}, {y:.6}): |det| = {det:.3e}")]
    NonTransverseContact { x: f64, y: f64, det: f64 },
    #[error("cusp corner: incoming and outgoing tangents are antipodal")]
    CuspCorner,
    #[error("corner blend failed to realize the exterior angle at corner {corner}")]
    CornerBlendFailed { corner: usize },
    #[error("edge too short to trim and smooth (length {length:.4}, needs {needed:.4})")]
    DegenerateEdge { length: f64, needed: f64 },
    #[error("no free disk around the terminal endpoint for twist insertion")]
    NoFreeDisk,
    #[error("tangent alignment angle is a half turn; perturb one arc")]
    AntipodalTangents,
    #[error("arc endpoints are off the arc space by {off:.3e}")]
    EndpointMismatch { off: f64 },
    #[error("endpoint tangents violate the transport constraint (angle {angle:.3e})")]
    TransportViolated { angle: f64 },
    #[error("splice changed the writhe class (difference {difference})")]
    WritheChanged { difference: i64 },
    #[error("curves join discontinuously at a concatenation seam (gap {gap:.3e})")]
    SeamMismatch { gap: f64 },
    #[error("curve has a self-crossing but was required embedded")]
    NotEmbedded,
    #[error(transparent)]
    Map(#[from] PlanemapError),
}

/// One adaptive sample: parameter, position, and unit tangent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub t: f64,
    pub point: Point,
    pub tangent: Vec2,
}

/// An oriented C1 curve as adaptive samples. For closed curves the seam is
/// materialized: the last sample repeats the first point and tangent at t=1.
#[derive(Debug, Clone)]
pub struct SampledCurve {
    samples: Vec<CurveSample>,
    closed: bool,
    embedding_checked: bool,
}

/// The space of arcs from `a` to `b` whose terminal tangent is the transport
/// of the initial one: transport * x'(0) is parallel to x'(1).
#[derive(Debug, Clone, Copy)]
pub struct ArcSpace {
    pub a: Point,
    pub b: Point,
    pub transport: Jacobian,
}

/// A transverse crossing of two curves.
#[derive(Debug, Clone, Copy)]
pub struct CrossingEvent {
    pub t_first: f64,
    pub t_second: f64,
    pub location: Point,
    pub sign: i64,
}

/// Integer turning number plus the rounding residue that certifies it.
#[derive(Debug, Clone, Copy)]
pub struct TurningNumber {
    pub value: i64,
    pub residue: f64,
}

fn hermite_eval(p0: Point, m0: Vec2, p1: Point, m1: Vec2, s: f64) -> (Point, Vec2) {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let pos = point(
        h00 * p0.x + h10 * m0.x + h01 * p1.x + h11 * m1.x,
        h00 * p0.y + h10 * m0.y + h01 * p1.y + h11 * m1.y,
    );
    let d00 = 6.0 * s2 - 6.0 * s;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = -6.0 * s2 + 6.0 * s;
    let d11 = 3.0 * s2 - 2.0 * s;
    let vel = vec2(
        d00 * p0.x + d10 * m0.x + d01 * p1.x + d11 * m1.x,
        d00 * p0.y + d10 * m0.y + d01 * p1.y + d11 * m1.y,
    );
    (pos, vel)
}

impl SampledCurve {
    /// Build a curve from a parametrization on [0, 1] with its derivative,
    /// refining until consecutive tangents turn by less than the contract.
    /// `seeds` are parameter values that must appear as sample nodes.
    pub fn from_parametric<F, D>(
        f: F,
        df: D,
        closed: bool,
        seeds: &[f64],
    ) -> Result<SampledCurve, CurveError>
    where
        F: Fn(f64) -> Result<Point, CurveError>,
        D: Fn(f64) -> Result<Vec2, CurveError>,
    {
        let node = |t: f64| -> Result<CurveSample, CurveError> {
            let p = f(t)?;
            let v = df(t)?;
            let speed = v.norm();
            if !(speed > 1e-12 && p.is_finite() && v.is_finite()) {
                return Err(CurveError::NotImmersed { t, speed });
            }
            Ok(CurveSample {
                t,
                point: p,
                tangent: v * (1.0 / speed),
            })
        };

        let mut grid: Vec<f64> = Vec::with_capacity(seeds.len() + 18);
        grid.push(0.0);
        for i in 1..16 {
            grid.push(i as f64 / 16.0);
        }
        grid.extend(seeds.iter().copied().filter(|t| *t > 0.0 && *t < 1.0));
        grid.push(1.0);
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        fn refine(
            n0: &CurveSample,
            n1: &CurveSample,
            depth: u32,
            out: &mut Vec<CurveSample>,
            node: &dyn Fn(f64) -> Result<CurveSample, CurveError>,
        ) -> Result<(), CurveError> {
            let mid = node(0.5 * (n0.t + n1.t))?;
            // A second, incommensurate probe guards against features that a
            // single midpoint sample can alias over.
            let probe = node(n0.t + 0.381_966_011_250_105 * (n1.t - n0.t))?;
            let chord = n1.point - n0.point;
            let chord_len = chord.norm();
            let sag_bound = (4e-3 * chord_len).max(1e-6);
            let sagitta = |p: Point| -> f64 {
                if chord_len < 1e-12 {
                    (p - n0.point).norm()
                } else {
                    (chord.cross(p - n0.point)).abs() / chord_len
                }
            };
            let flat = angle_between(n0.tangent, n1.tangent).abs() <= REFINE_ANGLE
                && [&mid, &probe].iter().all(|q| {
                    angle_between(n0.tangent, q.tangent).abs() <= REFINE_ANGLE
                        && angle_between(q.tangent, n1.tangent).abs() <= REFINE_ANGLE
                        && sagitta(q.point) <= sag_bound
                });
            if flat {
                out.push(*n1);
                return Ok(());
            }
            if depth >= MAX_REFINE_DEPTH {
                return Err(CurveError::ContractUnsatisfiable { t: mid.t });
            }
            refine(n0, &mid, depth + 1, out, node)?;
            refine(&mid, n1, depth + 1, out, node)
        }

        let node_fn = |t: f64| node(t);
        let mut out: Vec<CurveSample> = Vec::new();
        out.push(node(grid[0])?);
        for w in grid.windows(2) {
            let n0 = *out.last().unwrap();
            let n1 = node(w[1])?;
            refine(&n0, &n1, 0, &mut out, &node_fn)?;
        }
        let curve = SampledCurve {
            samples: out,
            closed,
            embedding_checked: false,
        };
        curve.validate()?;
        Ok(curve)
    }

    /// Wrap existing samples; validates the tangent-step contract.
    pub fn from_samples(samples: Vec<CurveSample>, closed: bool) -> Result<SampledCurve, CurveError> {
        let curve = SampledCurve {
            samples,
            closed,
            embedding_checked: false,
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn segment(a: Point, b: Point) -> Result<SampledCurve, CurveError> {
        let d = b - a;
        SampledCurve::from_parametric(|t| Ok(a + d * t), |_| Ok(d), false, &[])
    }

    /// Counterclockwise circle (clockwise when `ccw` is false).
    pub fn circle(center: Point, radius: f64, ccw: bool) -> Result<SampledCurve, CurveError> {
        let sgn = if ccw { 1.0 } else { -1.0 };
        SampledCurve::from_parametric(
            |t| {
                let a = sgn * TAU * t;
                Ok(center + vec2(radius * a.cos(), radius * a.sin()))
            },
            |t| {
                let a = sgn * TAU * t;
                Ok(vec2(-radius * a.sin(), radius * a.cos()) * (sgn * TAU))
            },
            true,
            &[],
        )
    }

    fn validate(&self) -> Result<(), CurveError> {
        if self.samples.len() < 2 {
            return Err(CurveError::ContractUnsatisfiable { t: 0.0 });
        }
        for w in self.samples.windows(2) {
            let step = angle_between(w[0].tangent, w[1].tangent).abs();
            if step >= tol::MAX_TANGENT_STEP {
                return Err(CurveError::ContractUnsatisfiable { t: w[0].t });
            }
        }
        if self.closed {
            let first = self.samples.first().unwrap();
            let last = self.samples.last().unwrap();
            let gap = first.point.dist(last.point);
            if gap > 1e-6 {
                return Err(CurveError::SeamMismatch { gap });
            }
            let turn = angle_between(last.tangent, first.tangent).abs();
            if turn >= tol::MAX_TANGENT_STEP {
                return Err(CurveError::ContractUnsatisfiable { t: 1.0 });
            }
        }
        Ok(())
    }

    pub fn samples(&self) -> &[CurveSample] {
        &self.samples
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn embedding_checked(&self) -> bool {
        self.embedding_checked
    }

    pub fn start(&self) -> CurveSample {
        self.samples[0]
    }

    pub fn end(&self) -> CurveSample {
        *self.samples.last().unwrap()
    }

    /// Polyline length (chord sum).
    pub fn length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| w[0].point.dist(w[1].point))
            .sum()
    }

    pub fn max_dist_to(&self, p: Point) -> f64 {
        self.samples
            .iter()
            .map(|s| s.point.dist(p))
            .fold(0.0, f64::max)
    }

    pub fn min_dist_to(&self, p: Point) -> f64 {
        // Distance from p to the polyline (segment-accurate).
        let mut best = f64::INFINITY;
        for w in self.samples.windows(2) {
            best = best.min(segment_point_distance(w[0].point, w[1].point, p));
        }
        best
    }

    fn bracket(&self, t: f64) -> (usize, f64) {
        let n = self.samples.len();
        if t <= self.samples[0].t {
            return (0, 0.0);
        }
        if t >= self.samples[n - 1].t {
            return (n - 2, 1.0);
        }
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.samples[mid].t <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t0 = self.samples[lo].t;
        let t1 = self.samples[lo + 1].t;
        let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        (lo, s)
    }

    fn hermite_at(&self, t: f64) -> (Point, Vec2) {
        let (i, s) = self.bracket(t);
        let a = &self.samples[i];
        let b = &self.samples[i + 1];
        let chord = a.point.dist(b.point).max(1e-15);
        let (p, v) = hermite_eval(a.point, a.tangent * chord, b.point, b.tangent * chord, s);
        let dt = (b.t - a.t).max(1e-15);
        (p, v * (1.0 / dt))
    }

    /// Interpolated position at parameter t.
    pub fn point_at(&self, t: f64) -> Point {
        self.hermite_at(t).0
    }

    /// Interpolated (non-unit) velocity at parameter t.
    pub fn velocity_at(&self, t: f64) -> Vec2 {
        self.hermite_at(t).1
    }

    /// Interpolated unit tangent at parameter t.
    pub fn tangent_at(&self, t: f64) -> Vec2 {
        let v = self.velocity_at(t);
        let n = v.norm();
        if n > 1e-12 {
            v * (1.0 / n)
        } else {
            // Fall back to the nearest stored tangent; velocities can pinch
            // only at interpolation artifacts, never at stored nodes.
            let (i, s) = self.bracket(t);
            if s < 0.5 {
                self.samples[i].tangent
            } else {
                self.samples[i + 1].tangent
            }
        }
    }

    /// Reverse orientation.
    pub fn reverse(&self) -> SampledCurve {
        let samples = self
            .samples
            .iter()
            .rev()
            .map(|s| CurveSample {
                t: 1.0 - s.t,
                point: s.point,
                tangent: s.tangent * -1.0,
            })
            .collect();
        SampledCurve {
            samples,
            closed: self.closed,
            embedding_checked: self.embedding_checked,
        }
    }

    /// Drop `from_start` and `from_end` of arclength from the two ends.
    pub fn trim_by_arclength(
        &self,
        from_start: f64,
        from_end: f64,
    ) -> Result<SampledCurve, CurveError> {
        let total = self.length();
        let needed = from_start + from_end;
        if total <= needed + 1e-9 {
            return Err(CurveError::DegenerateEdge {
                length: total,
                needed,
            });
        }
        let t_lo = self.param_at_arclength(from_start);
        let t_hi = self.param_at_arclength(total - from_end);
        self.slice(t_lo, t_hi)
    }

    /// Parameter value at a given arclength along the polyline.
    pub fn param_at_arclength(&self, target: f64) -> f64 {
        if target <= 0.0 {
            return self.samples[0].t;
        }
        let mut acc = 0.0;
        for w in self.samples.windows(2) {
            let seg = w[0].point.dist(w[1].point);
            if acc + seg >= target {
                let s = if seg > 1e-15 { (target - acc) / seg } else { 0.0 };
                return w[0].t + s * (w[1].t - w[0].t);
            }
            acc += seg;
        }
        self.samples.last().unwrap().t
    }

    /// The sub-curve between parameters t_lo < t_hi, reparametrized to [0,1].
    pub fn slice(&self, t_lo: f64, t_hi: f64) -> Result<SampledCurve, CurveError> {
        let mut raw: Vec<CurveSample> = Vec::new();
        raw.push(CurveSample {
            t: t_lo,
            point: self.point_at(t_lo),
            tangent: self.tangent_at(t_lo),
        });
        for s in &self.samples {
            if s.t > t_lo + 1e-12 && s.t < t_hi - 1e-12 {
                raw.push(*s);
            }
        }
        raw.push(CurveSample {
            t: t_hi,
            point: self.point_at(t_hi),
            tangent: self.tangent_at(t_hi),
        });
        let span = (t_hi - t_lo).max(1e-15);
        for s in &mut raw {
            s.t = (s.t - t_lo) / span;
        }
        SampledCurve::from_samples(raw, false)
    }

    /// Join curve pieces end-to-start. Seams must match in position; the
    /// tangent contract across seams is revalidated.
    pub fn concat(parts: &[SampledCurve], closed: bool) -> Result<SampledCurve, CurveError> {
        let lengths: Vec<f64> = parts.iter().map(|p| p.length().max(1e-12)).collect();
        let total: f64 = lengths.iter().sum();
        let mut samples: Vec<CurveSample> = Vec::new();
        let mut offset = 0.0;
        for (k, part) in parts.iter().enumerate() {
            let w = lengths[k] / total;
            let mut iter = part.samples.iter();
            if k > 0 {
                let prev = samples.last().unwrap().point;
                let first = part.samples[0].point;
                let gap = prev.dist(first);
                if gap > 1e-6 {
                    return Err(CurveError::SeamMismatch { gap });
                }
                iter.next();
            }
            for s in iter {
                samples.push(CurveSample {
                    t: offset + s.t * w,
                    point: s.point,
                    tangent: s.tangent,
                });
            }
            offset += w;
        }
        if closed {
            let gap = samples.first().unwrap().point.dist(samples.last().unwrap().point);
            if gap > 1e-6 {
                return Err(CurveError::SeamMismatch { gap });
            }
        }
        SampledCurve::from_samples(samples, closed)
    }

    /// Scan for interior self-crossings and stamp the embedding flag.
    pub fn into_embedding_checked(mut self) -> Result<SampledCurve, CurveError> {
        if !self_intersections_exist(&self)? {
            self.embedding_checked = true;
            Ok(self)
        } else {
            Err(CurveError::NotEmbedded)
        }
    }
}

impl ArcSpace {
    /// The arc space 𝒞(p, g(p), dg) determined by a map and a basepoint.
    pub fn from_map(expr: &MapExpr, p: Point) -> Result<ArcSpace, CurveError> {
        Ok(ArcSpace {
            a: p,
            b: planemap::eval(expr, p)?,
            transport: planemap::differential(expr, p)?,
        })
    }

    /// Check endpoints and the tangent-transport constraint.
    pub fn contains(&self, arc: &SampledCurve) -> Result<(), CurveError> {
        let off = arc.start().point.dist(self.a).max(arc.end().point.dist(self.b));
        if off > tol::TRANSPORT_TOL {
            return Err(CurveError::EndpointMismatch { off });
        }
        let predicted = self.transport.apply(arc.start().tangent);
        let angle = angle_between(predicted, arc.end().tangent).abs();
        if angle > 1e-4 {
            return Err(CurveError::TransportViolated { angle });
        }
        Ok(())
    }
}

/// Map a curve through a plane homeomorphism: points by evaluation, tangents
/// by the differential; the sampling contract is re-established on the image.
pub fn push_forward(expr: &MapExpr, c: &SampledCurve) -> Result<SampledCurve, CurveError> {
    let seeds: Vec<f64> = c.samples.iter().map(|s| s.t).collect();
    SampledCurve::from_parametric(
        |t| Ok(planemap::eval(expr, c.point_at(t))?),
        |t| {
            let p = c.point_at(t);
            let j = planemap::differential(expr, p)?;
            Ok(j.apply(c.velocity_at(t)))
        },
        c.closed,
        &seeds,
    )
}

/// Whitney turning number of a closed C1 curve: total tangent rotation / 2π.
pub fn turning_number(c: &SampledCurve) -> Result<TurningNumber, CurveError> {
    assert!(c.is_closed(), "turning number needs a closed curve");
    let mut total = 0.0;
    for w in c.samples.windows(2) {
        total += angle_between(w[0].tangent, w[1].tangent);
    }
    // The seam sample repeats the start, so the window sum already covers
    // the full loop.
    let turns = total / TAU;
    let value = turns.round();
    let residue = (turns - value).abs();
    if residue >= tol::TURN_RESIDUE {
        return Err(CurveError::ResidueTooLarge {
            residue,
            bound: tol::TURN_RESIDUE,
        });
    }
    Ok(TurningNumber {
        value: value as i64,
        residue,
    })
}

fn segment_point_distance(a: Point, b: Point, p: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sq();
    if len2 < 1e-30 {
        return p.dist(a);
    }
    let s = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * s)
}

struct SegmentGrid {
    cell: f64,
    map: HashMap<(i64, i64), Vec<usize>>,
}

impl SegmentGrid {
    fn build(c: &SampledCurve, cell: f64) -> SegmentGrid {
        let mut map: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, w) in c.samples.windows(2).enumerate() {
            let (lo_x, hi_x) = ordered(w[0].point.x, w[1].point.x);
            let (lo_y, hi_y) = ordered(w[0].point.y, w[1].point.y);
            let x0 = (lo_x / cell).floor() as i64;
            let x1 = (hi_x / cell).floor() as i64;
            let y0 = (lo_y / cell).floor() as i64;
            let y1 = (hi_y / cell).floor() as i64;
            for cx in x0..=x1 {
                for cy in y0..=y1 {
                    map.entry((cx, cy)).or_default().push(i);
                }
            }
        }
        SegmentGrid { cell, map }
    }

    fn candidates(&self, a: Point, b: Point, out: &mut Vec<usize>) {
        out.clear();
        let (lo_x, hi_x) = ordered(a.x, b.x);
        let (lo_y, hi_y) = ordered(a.y, b.y);
        let x0 = (lo_x / self.cell).floor() as i64 - 1;
        let x1 = (hi_x / self.cell).floor() as i64 + 1;
        let y0 = (lo_y / self.cell).floor() as i64 - 1;
        let y1 = (hi_y / self.cell).floor() as i64 + 1;
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                if let Some(v) = self.map.get(&(cx, cy)) {
                    out.extend_from_slice(v);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
    }
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn max_segment_len(c: &SampledCurve) -> f64 {
    c.samples
        .windows(2)
        .map(|w| w[0].point.dist(w[1].point))
        .fold(0.0, f64::max)
}

/// Newton-refine a crossing of two Hermite-reconstructed curves starting
/// from a segment-level estimate. Returns global parameters and location.
fn polish_crossing(
    a: &SampledCurve,
    b: &SampledCurve,
    mut s: f64,
    mut t: f64,
) -> Option<(f64, f64, Point)> {
    for _ in 0..25 {
        let pa = a.point_at(s);
        let pb = b.point_at(t);
        let f = pa - pb;
        if f.norm() < 1e-12 {
            break;
        }
        let va = a.velocity_at(s);
        let vb = b.velocity_at(t);
        // Solve [va, -vb] (ds, dt)^T = -f.
        let det = va.x * (-vb.y) - (-vb.x) * va.y;
        if det.abs() < 1e-18 {
            return None;
        }
        let ds = (-f.x * (-vb.y) - (-vb.x) * -f.y) / det;
        let dt = (va.x * -f.y - -f.x * va.y) / det;
        s = (s + ds).clamp(0.0, 1.0);
        t = (t + dt).clamp(0.0, 1.0);
    }
    let pa = a.point_at(s);
    let pb = b.point_at(t);
    if pa.dist(pb) > 1e-7 {
        return None;
    }
    Some((s, t, point(0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y))))
}

fn near_endpoint(c: &SampledCurve, t: f64, location: Point) -> bool {
    if c.is_closed() {
        return false;
    }
    !(ENDPOINT_PARAM_EPS..=1.0 - ENDPOINT_PARAM_EPS).contains(&t)
        || location.dist(c.start().point) < ENDPOINT_BALL
        || location.dist(c.end().point) < ENDPOINT_BALL
}

/// Signed sum of transverse interior crossings of A with B, with the sign of
/// det(tangent of A, tangent of B) at each crossing; endpoint contacts are
/// excluded. Also returns the crossing events sorted by parameters.
pub fn signed_intersections(
    a: &SampledCurve,
    b: &SampledCurve,
) -> Result<(i64, Vec<CrossingEvent>), CurveError> {
    let events = crossings_filtered(a, b, |_, _| true)?;
    let sum = events.iter().map(|e| e.sign).sum();
    Ok((sum, events))
}

fn crossings_filtered(
    a: &SampledCurve,
    b: &SampledCurve,
    pair_allowed: impl Fn(usize, usize) -> bool,
) -> Result<Vec<CrossingEvent>, CurveError> {
    let cell = max_segment_len(a).max(max_segment_len(b)).max(1e-9);
    let grid = SegmentGrid::build(a, cell);
    let mut candidates: Vec<usize> = Vec::new();
    let mut found: Vec<(f64, f64)> = Vec::new();

    for (j, wb) in b.samples.windows(2).enumerate() {
        let (q1, q2) = (wb[0].point, wb[1].point);
        grid.candidates(q1, q2, &mut candidates);
        for &i in &candidates {
            if !pair_allowed(i, j) {
                continue;
            }
            let p1 = a.samples[i].point;
            let p2 = a.samples[i + 1].point;
            let r = p2 - p1;
            let s = q2 - q1;
            let denom = r.cross(s);
            let scale = r.norm() * s.norm();
            if scale < 1e-30 {
                continue;
            }
            if denom.abs() <= 1e-12 * scale {
                // Near-parallel segments: only a problem if they touch at
                // this resolution somewhere other than at an open-curve
                // endpoint (endpoint contacts never count). Probe densely so
                // an overlap interval is caught even when the segment
                // corners themselves sit on curve endpoints.
                let mut probes: Vec<Point> = Vec::with_capacity(18);
                for k in 0..=8 {
                    let s = k as f64 / 8.0;
                    probes.push(q1 + (q2 - q1) * s);
                    probes.push(p1 + (p2 - p1) * s);
                }
                for (k, loc) in probes.into_iter().enumerate() {
                    let d = if k % 2 == 0 {
                        segment_point_distance(p1, p2, loc)
                    } else {
                        segment_point_distance(q1, q2, loc)
                    };
                    if d < 1e-9
                        && !near_endpoint(a, 0.5, loc)
                        && !near_endpoint(b, 0.5, loc)
                    {
                        return Err(CurveError::NonTransverseContact {
                            x: loc.x,
                            y: loc.y,
                            det: denom.abs() / scale,
                        });
                    }
                }
                continue;
            }
            let qp = q1 - p1;
            let u = qp.cross(s) / denom;
            let v = qp.cross(r) / denom;
            let eps = 1e-9;
            if !((-eps..=1.0 + eps).contains(&u) && (-eps..=1.0 + eps).contains(&v)) {
                continue;
            }
            let s_est = a.samples[i].t + u.clamp(0.0, 1.0) * (a.samples[i + 1].t - a.samples[i].t);
            let t_est = b.samples[j].t + v.clamp(0.0, 1.0) * (b.samples[j + 1].t - b.samples[j].t);
            if let Some((ts, tt, _loc)) = polish_crossing(a, b, s_est, t_est) {
                found.push((ts, tt));
            }
        }
    }

    found.sort_by(|x, y| x.partial_cmp(y).unwrap());
    found.dedup_by(|x, y| (x.0 - y.0).abs() < 1e-6 && (x.1 - y.1).abs() < 1e-6);

    let mut events = Vec::new();
    for (ts, tt) in found {
        let location = point(
            0.5 * (a.point_at(ts).x + b.point_at(tt).x),
            0.5 * (a.point_at(ts).y + b.point_at(tt).y),
        );
        if near_endpoint(a, ts, location) || near_endpoint(b, tt, location) {
            continue;
        }
        let ua = a.tangent_at(ts);
        let ub = b.tangent_at(tt);
        let det = ua.cross(ub);
        if det.abs() <= tol::CROSSING_MARGIN {
            return Err(CurveError::NonTransverseContact {
                x: location.x,
                y: location.y,
                det: det.abs(),
            });
        }
        events.push(CrossingEvent {
            t_first: ts,
            t_second: tt,
            location,
            sign: if det > 0.0 { 1 } else { -1 },
        });
    }
    Ok(events)
}

fn self_intersections_exist(c: &SampledCurve) -> Result<bool, CurveError> {
    let n = c.samples.len() - 1;
    let adjacent = |i: usize, j: usize| -> bool {
        let d = i.abs_diff(j);
        d <= 1 || (c.is_closed() && d == n - 1)
    };
    let events = crossings_filtered(c, c, |i, j| !adjacent(i, j))?;
    Ok(!events.is_empty())
}

/// Insert `k` full positive twists near the terminal endpoint of an arc by
/// pushing it through an annulus twist centered there. The twist is the
/// identity at both endpoints and outside a free disk, so the arc stays in
/// its arc space while its writhe class shifts by k.
pub fn add_twist(x: &SampledCurve, k: i32) -> Result<SampledCurve, CurveError> {
    if k == 0 {
        return Ok(x.clone());
    }
    let a = x.start().point;
    let b = x.end().point;
    let mut rho = a.dist(b) / 3.0;
    'shrink: for _ in 0..9 {
        // The disk of radius rho about b must contain only the terminal
        // sub-arc: walk back from the end to the first exit, then require
        // everything earlier to stay clear.
        let mut exit_index = None;
        for i in (0..x.samples.len()).rev() {
            if x.samples[i].point.dist(b) > rho {
                exit_index = Some(i);
                break;
            }
        }
        let Some(exit) = exit_index else {
            rho *= 0.5;
            continue;
        };
        for w in x.samples[..=exit].windows(2) {
            if segment_point_distance(w[0].point, w[1].point, b) <= rho {
                rho *= 0.5;
                continue 'shrink;
            }
        }
        let twist = planemap::annulus_twist(b, 0.4 * rho, 0.8 * rho, k)?;
        let image = push_forward(&MapExpr::prim(twist), x)?;
        match image.into_embedding_checked() {
            Ok(curve) => return Ok(curve),
            // A denser or shallower wrap can still graze the arc at sample
            // resolution; a smaller loop separates the picture.
            Err(_) => {
                rho *= 0.5;
                continue 'shrink;
            }
        }
    }
    Err(CurveError::NoFreeDisk)
}

/// Counterclockwise circular arc from angle `theta0` sweeping by `sweep > 0`.
fn ccw_arc(center: Point, radius: f64, theta0: f64, sweep: f64) -> Result<SampledCurve, CurveError> {
    SampledCurve::from_parametric(
        |t| {
            let th = theta0 + sweep * t;
            Ok(center + vec2(radius * th.cos(), radius * th.sin()))
        },
        |t| {
            let th = theta0 + sweep * t;
            Ok(vec2(-th.sin(), th.cos()) * (radius * sweep))
        },
        false,
        &[],
    )
}

/// Deterministic cusp-free C1 path between prescribed endpoint germs: a
/// left-turning arc of the given radius, a straight tangent leg, and a
/// second left-turning arc. Works for every endpoint configuration.
pub fn guided_path(
    from: Point,
    from_dir: Vec2,
    to: Point,
    to_dir: Vec2,
    radius: f64,
) -> Result<SampledCurve, CurveError> {
    use crate::geom::wrap_angle_nonneg;
    let r = radius.max(1e-3);
    let c1 = from + from_dir.perp() * r;
    let c2 = to + to_dir.perp() * r;
    let theta_from = (from - c1).angle();
    let theta_to = (to - c2).angle();
    let mut pieces: Vec<SampledCurve> = Vec::new();
    if c1.dist(c2) < 1e-9 {
        let mut sweep = wrap_angle_nonneg(theta_to - theta_from);
        if sweep < 1e-9 {
            sweep = TAU;
        }
        pieces.push(ccw_arc(c1, r, theta_from, sweep)?);
    } else {
        let phi = (c2 - c1).angle();
        let theta_leave = phi - 0.5 * PI;
        let sweep1 = wrap_angle_nonneg(theta_leave - theta_from);
        if sweep1 > 1e-9 {
            pieces.push(ccw_arc(c1, r, theta_from, sweep1)?);
        }
        let p1 = c1 + vec2(r * theta_leave.cos(), r * theta_leave.sin());
        let p2 = c2 + vec2(r * theta_leave.cos(), r * theta_leave.sin());
        pieces.push(SampledCurve::segment(p1, p2)?);
        let sweep2 = wrap_angle_nonneg(theta_to - theta_leave);
        if sweep2 > 1e-9 {
            pieces.push(ccw_arc(c2, r, theta_leave, sweep2)?);
        }
    }
    SampledCurve::concat(&pieces, false)
}

fn return_path(
    b: Point,
    tan_b: Vec2,
    a: Point,
    tan_a: Vec2,
    radius: f64,
) -> Result<SampledCurve, CurveError> {
    guided_path(b, tan_b, a, tan_a, radius)
}

/// Writhe difference [x] − [y] of two arcs in the same space: align initial
/// tangents by the minimal supported rotation, close both arcs with one
/// shared smooth return path, and compare turning numbers.
pub fn writhe_difference(
    x: &SampledCurve,
    y: &SampledCurve,
    space: &ArcSpace,
) -> Result<i64, CurveError> {
    writhe_difference_with_lead(x, y, space, 0.5 * space.a.dist(space.b))
}

/// Same computation with an explicit turning radius for the return path;
/// the result must not depend on the routing.
pub fn writhe_difference_with_lead(
    x: &SampledCurve,
    y: &SampledCurve,
    space: &ArcSpace,
    lead: f64,
) -> Result<i64, CurveError> {
    space.contains(x)?;
    space.contains(y)?;
    let chi = angle_between(y.start().tangent, x.start().tangent);
    let y_aligned;
    let y_ref: &SampledCurve = if chi.abs() < 1e-12 {
        y
    } else {
        if PI - chi.abs() < 1e-6 {
            return Err(CurveError::AntipodalTangents);
        }
        let rho = space.a.dist(space.b) / 4.0;
        let rot = planemap::supported_rotation(space.a, 0.4 * rho, 0.8 * rho, chi)?;
        y_aligned = push_forward(&MapExpr::prim(rot), y)?;
        &y_aligned
    };
    let angle = angle_between(y_ref.end().tangent, x.end().tangent).abs();
    if angle > 1e-4 {
        return Err(CurveError::TransportViolated { angle });
    }
    let r = return_path(
        x.end().point,
        x.end().tangent,
        x.start().point,
        x.start().tangent,
        lead,
    )?;
    let closed_x = SampledCurve::concat(&[x.clone(), r.clone()], true)?;
    let closed_y = SampledCurve::concat(&[y_ref.clone(), r], true)?;
    let tx = turning_number(&closed_x)?;
    let ty = turning_number(&closed_y)?;
    // A positive twist inserts a clockwise loop around the terminal
    // endpoint, so the writhe coordinate runs opposite to the turning number.
    Ok(ty.value - tx.value)
}

/// Close a chain of arcs into one C1 loop by replacing each corner with a
/// short blend realizing the signed (short-way) exterior angle.
pub fn smooth_corners(arcs: &[SampledCurve], radius: f64) -> Result<SampledCurve, CurveError> {
    assert!(!arcs.is_empty());
    let n = arcs.len();
    let mut r = radius;
    'attempt: for _ in 0..7 {
        // Trim every arc at both ends.
        let mut trimmed = Vec::with_capacity(n);
        for arc in arcs {
            match arc.trim_by_arclength(r, r) {
                Ok(t) => trimmed.push(t),
                Err(CurveError::DegenerateEdge { length, needed }) => {
                    if r > 1e-6 {
                        r *= 0.5;
                        continue 'attempt;
                    }
                    return Err(CurveError::DegenerateEdge { length, needed });
                }
                Err(e) => return Err(e),
            }
        }
        let mut pieces: Vec<SampledCurve> = Vec::with_capacity(2 * n);
        for i in 0..n {
            let next = (i + 1) % n;
            let seam_gap = arcs[i].end().point.dist(arcs[next].start().point);
            if seam_gap > 1e-6 {
                return Err(CurveError::SeamMismatch { gap: seam_gap });
            }
            let from = trimmed[i].end();
            let to = trimmed[next].start();
            let ext = angle_between(from.tangent, to.tangent);
            if PI - ext.abs() < 1e-6 {
                return Err(CurveError::CuspCorner);
            }
            let chord = from.point.dist(to.point).max(1e-9);
            let blend = SampledCurve::from_parametric(
                |s| {
                    Ok(hermite_eval(
                        from.point,
                        from.tangent * chord,
                        to.point,
                        to.tangent * chord,
                        s,
                    )
                    .0)
                },
                |s| {
                    Ok(hermite_eval(
                        from.point,
                        from.tangent * chord,
                        to.point,
                        to.tangent * chord,
                        s,
                    )
                    .1)
                },
                false,
                &[],
            );
            let blend = match blend {
                Ok(b) => b,
                Err(_) => {
                    r *= 0.5;
                    continue 'attempt;
                }
            };
            let sweep: f64 = blend
                .samples()
                .windows(2)
                .map(|w| angle_between(w[0].tangent, w[1].tangent))
                .sum();
            if (sweep - ext).abs() > 1.0 {
                // The blend picked up an extra loop; a tighter corner fixes it.
                if r > 1e-6 {
                    r *= 0.5;
                    continue 'attempt;
                }
                return Err(CurveError::CornerBlendFailed { corner: i });
            }
            pieces.push(trimmed[i].clone());
            pieces.push(blend);
        }
        // Rotate so the loop starts at a trimmed-arc sample, then close.
        return SampledCurve::concat(&pieces, true);
    }
    Err(CurveError::CornerBlendFailed { corner: 0 })
}

/// Replace the initial and terminal pieces of `arc` (inside balls of the
/// given radius around its endpoints) by the corresponding pieces of
/// `template`, blending C1 in the shells between the half-radius and full
/// balls. The writhe class must not change; verified, with shrinking retries.
pub fn splice_near_endpoints(
    arc: &SampledCurve,
    template: &SampledCurve,
    radius: f64,
    space: &ArcSpace,
) -> Result<SampledCurve, CurveError> {
    let mut r = radius;
    let mut last_diff = 0i64;
    for _ in 0..6 {
        match try_splice(arc, template, r) {
            Ok(spliced) => match writhe_difference(arc, &spliced, space) {
                Ok(0) => return Ok(spliced),
                Ok(d) => {
                    last_diff = d;
                    r *= 0.5;
                }
                Err(_) => r *= 0.5,
            },
            Err(_) => r *= 0.5,
        }
    }
    Err(CurveError::WritheChanged {
        difference: last_diff,
    })
}

fn try_splice(
    arc: &SampledCurve,
    template: &SampledCurve,
    radius: f64,
) -> Result<SampledCurve, CurveError> {
    let a = template.start().point;
    let b = template.end().point;
    let inner = 0.5 * radius;

    // First exit of a ball, scanning forward from the start.
    let first_exit = |c: &SampledCurve, center: Point, rad: f64| -> Option<f64> {
        c.samples()
            .iter()
            .find(|s| s.point.dist(center) > rad)
            .map(|s| s.t)
    };
    // Last entry into a ball, scanning back from the end.
    let last_entry = |c: &SampledCurve, center: Point, rad: f64| -> Option<f64> {
        c.samples()
            .iter()
            .rev()
            .find(|s| s.point.dist(center) > rad)
            .map(|s| s.t)
    };

    let t_tpl_a = first_exit(template, a, inner).ok_or(CurveError::NoFreeDisk)?;
    let t_tpl_b = last_entry(template, b, inner).ok_or(CurveError::NoFreeDisk)?;
    let t_arc_a = first_exit(arc, a, radius).ok_or(CurveError::NoFreeDisk)?;
    let t_arc_b = last_entry(arc, b, radius).ok_or(CurveError::NoFreeDisk)?;
    if t_tpl_a >= t_tpl_b || t_arc_a >= t_arc_b {
        return Err(CurveError::NoFreeDisk);
    }

    let head = template.slice(0.0, t_tpl_a)?;
    let body = arc.slice(t_arc_a, t_arc_b)?;
    let tail = template.slice(t_tpl_b, 1.0)?;

    let bridge = |from: CurveSample, to: CurveSample| -> Result<SampledCurve, CurveError> {
        let chord = from.point.dist(to.point).max(1e-9);
        SampledCurve::from_parametric(
            |s| Ok(hermite_eval(from.point, from.tangent * chord, to.point, to.tangent * chord, s).0),
            |s| Ok(hermite_eval(from.point, from.tangent * chord, to.point, to.tangent * chord, s).1),
            false,
            &[],
        )
    };
    let bridge_in = bridge(head.end(), body.start())?;
    let bridge_out = bridge(body.end(), tail.start())?;
    SampledCurve::concat(&[head, bridge_in, body, bridge_out, tail], false)
}

/// Deterministically perturb an arc by smooth parameter-space bumps that
/// vanish (to all orders) near the endpoints, preserving the arc space.
pub fn perturb_arc(
    x: &SampledCurve,
    seed: u64,
    amplitude: f64,
) -> Result<SampledCurve, CurveError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_bumps = 3;
    let mut bumps = Vec::with_capacity(n_bumps);
    for _ in 0..n_bumps {
        let center = rng.gen_range(0.25..0.75);
        let width = rng.gen_range(0.12..0.3);
        let dir = {
            let a = rng.gen_range(0.0..TAU);
            vec2(a.cos(), a.sin())
        };
        let amp = amplitude * rng.gen_range(0.4..1.0);
        bumps.push((center, width, dir, amp));
    }
    let displacement = |t: f64| -> Vec2 {
        let mut d = vec2(0.0, 0.0);
        for &(c, w, dir, amp) in &bumps {
            d = d + dir * (amp * bump((t - c) / w + 0.5));
        }
        d
    };
    let displacement_dt = |t: f64| -> Vec2 {
        let mut d = vec2(0.0, 0.0);
        for &(c, w, dir, amp) in &bumps {
            d = d + dir * (amp * bump_prime((t - c) / w + 0.5) / w);
        }
        d
    };
    let seeds: Vec<f64> = x.samples().iter().map(|s| s.t).collect();
    SampledCurve::from_parametric(
        |t| Ok(x.point_at(t) + displacement(t)),
        |t| Ok(x.velocity_at(t) + displacement_dt(t)),
        x.is_closed(),
        &seeds,
    )
}

/// Seeded generator of embedded smooth arcs from (0,0) to (4,0) with
/// horizontal end tangents (the identity-transport arc space).
pub fn random_smooth_arc(seed: u64, wiggle: f64) -> Result<SampledCurve, CurveError> {
    let base = SampledCurve::segment(point(0.0, 0.0), point(4.0, 0.0))?;
    for attempt in 0..10u64 {
        let candidate = perturb_arc(&base, seed.wrapping_add(attempt.wrapping_mul(0x9e37)), wiggle)?;
        match candidate.into_embedding_checked() {
            Ok(c) => return Ok(c),
            Err(CurveError::NotEmbedded) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(CurveError::NotEmbedded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::unit;
    use crate::planemap::{annulus_twist, dilation, rotation, translation};

    fn unit_circle() -> SampledCurve {
        SampledCurve::circle(point(0.0, 0.0), 1.0, true).unwrap()
    }

    #[test]
    fn circle_turning_number_is_one() {
        let tn = turning_number(&unit_circle()).unwrap();
        assert_eq!(tn.value, 1);
        assert!(tn.residue < 1e-6);
        let cw = SampledCurve::circle(point(0.0, 0.0), 2.0, false).unwrap();
        assert_eq!(turning_number(&cw).unwrap().value, -1);
    }

    #[test]
    fn figure_eight_turning_number_is_zero() {
        let c = SampledCurve::from_parametric(
            |t| Ok(point((TAU * t).sin(), 0.5 * (2.0 * TAU * t).sin())),
            |t| {
                Ok(vec2(
                    TAU * (TAU * t).cos(),
                    TAU * (2.0 * TAU * t).cos(),
                ))
            },
            true,
            &[],
        )
        .unwrap();
        assert_eq!(turning_number(&c).unwrap().value, 0);
    }

    #[test]
    fn turning_number_survives_rigid_motion_and_resampling() {
        let c = unit_circle();
        let moved = push_forward(
            &MapExpr::prim(rotation(point(3.0, -1.0), 1.234).unwrap()),
            &c,
        )
        .unwrap();
        assert_eq!(turning_number(&moved).unwrap().value, 1);
        // Doubled sampling density: insert midpoints through the interpolant.
        let mut dense = Vec::new();
        for w in c.samples().windows(2) {
            dense.push(w[0]);
            let tm = 0.5 * (w[0].t + w[1].t);
            dense.push(CurveSample {
                t: tm,
                point: c.point_at(tm),
                tangent: c.tangent_at(tm),
            });
        }
        dense.push(c.end());
        let dense = SampledCurve::from_samples(dense, true).unwrap();
        assert_eq!(turning_number(&dense).unwrap().value, 1);
    }

    #[test]
    fn push_forward_by_dilation_scales_the_circle() {
        let c = unit_circle();
        let image = push_forward(&MapExpr::prim(dilation(point(0.0, 0.0), 2.0).unwrap()), &c)
            .unwrap();
        for s in image.samples() {
            assert!((s.point.dist(point(0.0, 0.0)) - 2.0).abs() < 1e-9);
        }
        assert_eq!(turning_number(&image).unwrap().value, 1);
    }

    #[test]
    fn crossing_sign_convention() {
        let east = SampledCurve::segment(point(-1.0, 0.0), point(1.0, 0.0)).unwrap();
        let north = SampledCurve::segment(point(0.0, -1.0), point(0.0, 1.0)).unwrap();
        let (sum, events) = signed_intersections(&east, &north).unwrap();
        assert_eq!(sum, 1);
        assert_eq!(events.len(), 1);
        assert!(events[0].location.dist(point(0.0, 0.0)) < 1e-9);
        let (swapped, _) = signed_intersections(&north, &east).unwrap();
        assert_eq!(swapped, -1);
    }

    #[test]
    fn disjoint_curves_do_not_cross() {
        let a = SampledCurve::segment(point(0.0, 0.0), point(1.0, 0.0)).unwrap();
        let b = SampledCurve::segment(point(0.0, 1.0), point(1.0, 1.0)).unwrap();
        let (sum, events) = signed_intersections(&a, &b).unwrap();
        assert_eq!(sum, 0);
        assert!(events.is_empty());
    }

    #[test]
    fn shared_endpoint_contact_is_excluded() {
        let a = SampledCurve::segment(point(0.0, 0.0), point(1.0, 0.0)).unwrap();
        let b = SampledCurve::segment(point(1.0, 0.0), point(2.0, 1.0)).unwrap();
        let (sum, events) = signed_intersections(&a, &b).unwrap();
        assert_eq!(sum, 0);
        assert!(events.is_empty());
    }

    #[test]
    fn overlapping_segments_report_non_transverse_contact() {
        let a = SampledCurve::segment(point(0.0, 0.0), point(1.0, 0.0)).unwrap();
        let b = SampledCurve::segment(point(0.25, 0.0), point(1.25, 0.0)).unwrap();
        assert!(matches!(
            signed_intersections(&a, &b),
            Err(CurveError::NonTransverseContact { .. })
        ));
    }

    #[test]
    fn intersection_count_is_antisymmetric_on_random_arcs() {
        for seed in 0..30u64 {
            let a = random_smooth_arc(seed, 0.8).unwrap();
            let b = push_forward(
                &MapExpr::prim(translation(vec2(0.013, 0.4)).unwrap()),
                &random_smooth_arc(seed + 1000, 0.8).unwrap(),
            )
            .unwrap();
            let (ab, _) = signed_intersections(&a, &b).unwrap();
            let (ba, _) = signed_intersections(&b, &a).unwrap();
            assert_eq!(ab, -ba, "seed {seed}");
        }
    }

    #[test]
    fn intersections_are_invariant_under_push_forward() {
        let word = MapExpr::Compose(vec![
            MapExpr::prim(rotation(point(0.3, 0.2), 0.9).unwrap()),
            MapExpr::prim(annulus_twist(point(2.0, 1.0), 1.0, 2.5, 1).unwrap()),
        ]);
        for seed in [3u64, 11, 42] {
            let a = random_smooth_arc(seed, 0.9).unwrap();
            let b = push_forward(
                &MapExpr::prim(translation(vec2(0.017, 0.55)).unwrap()),
                &random_smooth_arc(seed + 500, 0.9).unwrap(),
            )
            .unwrap();
            let (before, _) = signed_intersections(&a, &b).unwrap();
            let fa = push_forward(&word, &a).unwrap();
            let fb = push_forward(&word, &b).unwrap();
            let (after, _) = signed_intersections(&fa, &fb).unwrap();
            assert_eq!(before, after, "seed {seed}");
        }
    }

    #[test]
    fn square_smooths_to_index_one() {
        let corners = [
            point(0.0, 0.0),
            point(1.0, 0.0),
            point(1.0, 1.0),
            point(0.0, 1.0),
        ];
        let edges: Vec<SampledCurve> = (0..4)
            .map(|i| SampledCurve::segment(corners[i], corners[(i + 1) % 4]).unwrap())
            .collect();
        let loop_ccw = smooth_corners(&edges, 0.1).unwrap();
        assert_eq!(turning_number(&loop_ccw).unwrap().value, 1);

        let edges_cw: Vec<SampledCurve> = (0..4)
            .rev()
            .map(|i| SampledCurve::segment(corners[(i + 1) % 4], corners[i]).unwrap())
            .collect();
        let loop_cw = smooth_corners(&edges_cw, 0.1).unwrap();
        assert_eq!(turning_number(&loop_cw).unwrap().value, -1);
    }

    #[test]
    fn smoothed_square_agrees_with_edges_away_from_corners() {
        let corners = [
            point(0.0, 0.0),
            point(2.0, 0.0),
            point(2.0, 2.0),
            point(0.0, 2.0),
        ];
        let edges: Vec<SampledCurve> = (0..4)
            .map(|i| SampledCurve::segment(corners[i], corners[(i + 1) % 4]).unwrap())
            .collect();
        let smoothed = smooth_corners(&edges, 0.2).unwrap();
        // The bottom edge midpoint is far from every corner: the smoothed
        // loop must pass through it.
        let mut best = f64::INFINITY;
        for s in smoothed.samples() {
            best = best.min(s.point.dist(point(1.0, 0.0)));
        }
        assert!(best < 1e-6, "smoothed loop strayed {best}");
    }

    #[test]
    fn cusp_corner_is_detected() {
        let go = SampledCurve::segment(point(0.0, 0.0), point(1.0, 0.0)).unwrap();
        let back = SampledCurve::segment(point(1.0, 0.0), point(0.0, 0.0)).unwrap();
        assert!(matches!(
            smooth_corners(&[go, back], 0.1),
            Err(CurveError::CuspCorner)
        ));
    }

    #[test]
    fn add_twist_shifts_writhe_by_k() {
        let space = ArcSpace {
            a: point(0.0, 0.0),
            b: point(4.0, 0.0),
            transport: Jacobian::IDENTITY,
        };
        let x = random_smooth_arc(7, 0.6).unwrap();
        for k in -2..=2 {
            let twisted = add_twist(&x, k).unwrap();
            assert_eq!(
                writhe_difference(&twisted, &x, &space).unwrap(),
                k as i64,
                "k={k}"
            );
        }
    }

    #[test]
    fn writhe_difference_vanishes_on_equal_arcs_and_round_trips() {
        let space = ArcSpace {
            a: point(0.0, 0.0),
            b: point(4.0, 0.0),
            transport: Jacobian::IDENTITY,
        };
        let x = random_smooth_arc(21, 0.7).unwrap();
        assert_eq!(writhe_difference(&x, &x, &space).unwrap(), 0);
        let up_down = add_twist(&add_twist(&x, 1).unwrap(), -1).unwrap();
        assert_eq!(writhe_difference(&up_down, &x, &space).unwrap(), 0);
    }

    #[test]
    fn writhe_difference_is_additive() {
        let space = ArcSpace {
            a: point(0.0, 0.0),
            b: point(4.0, 0.0),
            transport: Jacobian::IDENTITY,
        };
        for seed in [5u64, 9, 33] {
            let x = random_smooth_arc(seed, 0.5).unwrap();
            let y = add_twist(&x, 2).unwrap();
            let z = add_twist(&y, -3).unwrap();
            let xy = writhe_difference(&x, &y, &space).unwrap();
            let yz = writhe_difference(&y, &z, &space).unwrap();
            let xz = writhe_difference(&x, &z, &space).unwrap();
            assert_eq!(xz, xy + yz, "seed {seed}");
        }
    }

    #[test]
    fn writhe_difference_ignores_return_path_routing() {
        let space = ArcSpace {
            a: point(0.0, 0.0),
            b: point(4.0, 0.0),
            transport: Jacobian::IDENTITY,
        };
        for seed in 0..12u64 {
            let x = random_smooth_arc(seed, 0.6).unwrap();
            let y = add_twist(&x, if seed % 2 == 0 { 1 } else { -2 }).unwrap();
            let short = writhe_difference_with_lead(&x, &y, &space, 0.7).unwrap();
            let long = writhe_difference_with_lead(&x, &y, &space, 6.0).unwrap();
            assert_eq!(short, long, "seed {seed}");
        }
    }

    #[test]
    fn alignment_rotation_handles_mismatched_start_tangents() {
        let space = ArcSpace {
            a: point(0.0, 0.0),
            b: point(4.0, 0.0),
            transport: Jacobian::IDENTITY,
        };
        // A quarter-turn start: leaves upward, arrives horizontally is not
        // allowed by identity transport, so build an arc leaving at an angle
        // and returning to horizontal via a symmetric bend, then rotate the
        // whole arc rigidly to break the tangent match.
        let x = random_smooth_arc(3, 0.5).unwrap();
        let y = {
            // Rotate about the midpoint of the chord: endpoints move, so
            // instead rotate tangents by pushing through a supported
            // rotation at the start only; this models an arc of the same
            // space built with a different initial germ.
            let rot = planemap::supported_rotation(point(0.0, 0.0), 0.3, 0.9, 0.8).unwrap();
            let bent = push_forward(&MapExpr::prim(rot), &x).unwrap();
            // Terminal tangent unchanged; initial tangent rotated by 0.8:
            // not a member of the identity-transport space anymore, so undo
            // at the far end too.
            let rot_b = planemap::supported_rotation(point(4.0, 0.0), 0.3, 0.9, -0.8).unwrap();
            push_forward(&MapExpr::prim(rot_b), &bent).unwrap()
        };
        // y has start tangent at +0.8 rad and end tangent at -0.8 rad; that
        // is transport-consistent only for a rotation transport, so compare
        // within the appropriate space.
        let rot_space = ArcSpace {
            a: point(0.0, 0.0),
            b: point(4.0, 0.0),
            transport: Jacobian::rotation(-1.6),
        };
        assert!(rot_space.contains(&y).is_ok());
        // x is not in rot_space; this mainly exercises the alignment path
        // inside writhe_difference for arcs whose start tangents differ.
        let y2 = add_twist(&y, 1).unwrap();
        assert_eq!(writhe_difference(&y2, &y, &rot_space).unwrap(), 1);
        let _ = space;
    }

    #[test]
    fn splice_preserves_writhe() {
        let space = ArcSpace {
            a: point(0.0, 0.0),
            b: point(4.0, 0.0),
            transport: Jacobian::IDENTITY,
        };
        let template = random_smooth_arc(101, 0.4).unwrap();
        // Same-arc splice: must return an arc writhe-equivalent to the input.
        let same = splice_near_endpoints(&template, &template, 0.5, &space).unwrap();
        assert_eq!(writhe_difference(&template, &same, &space).unwrap(), 0);
        // Generic arc against a different template sharing the endpoints.
        let arc = random_smooth_arc(55, 0.7).unwrap();
        let spliced = splice_near_endpoints(&arc, &template, 0.5, &space).unwrap();
        assert_eq!(writhe_difference(&arc, &spliced, &space).unwrap(), 0);
        // Near the endpoints the spliced arc follows the template.
        let d0 = spliced.start().tangent;
        assert!(angle_between(d0, template.start().tangent).abs() < 1e-9);
    }

    #[test]
    fn perturbation_preserves_endpoints_and_tangents() {
        let x = random_smooth_arc(13, 0.5).unwrap();
        let y = perturb_arc(&x, 99, 1e-3).unwrap();
        assert!(y.start().point.dist(x.start().point) < 1e-12);
        assert!(y.end().point.dist(x.end().point) < 1e-12);
        assert!(angle_between(y.start().tangent, x.start().tangent).abs() < 1e-9);
        assert!(angle_between(y.end().tangent, x.end().tangent).abs() < 1e-9);
    }

    #[test]
    fn twisted_arc_stays_embedded() {
        for seed in [2u64, 17, 29] {
            let x = random_smooth_arc(seed, 0.5).unwrap();
            for k in [-3, 2, 3] {
                let tw = add_twist(&x, k).unwrap();
                assert!(tw.embedding_checked(), "seed {seed} k {k}");
            }
        }
    }

    #[test]
    fn trim_and_slice_are_consistent() {
        let c = unit_circle();
        let trimmed = c.trim_by_arclength(1.0, 1.0).unwrap();
        let expected = TAU - 2.0;
        assert!((trimmed.length() - expected).abs() < 1e-3);
        let s = trimmed.start();
        assert!((s.point.dist(point(0.0, 0.0)) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn tangent_step_contract_is_enforced() {
        let bad = vec![
            CurveSample {
                t: 0.0,
                point: point(0.0, 0.0),
                tangent: unit(0.0),
            },
            CurveSample {
                t: 1.0,
                point: point(1.0, 0.0),
                tangent: unit(1.0),
            },
        ];
        assert!(matches!(
            SampledCurve::from_samples(bad, false),
            Err(CurveError::ContractUnsatisfiable { .. })
        ));
    }
}
