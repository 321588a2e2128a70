//! Euler numbers of surface-group actions on the plane, computed four
//! independent ways: deck translation of the lifted relator, turning number
//! of the developed polygon boundary, signed sums of crossing coefficients,
//! and writhe differences of translation arcs.

use crate::cover::{self, CoverError, DeckReport, Letter, LiftContext};
use crate::curve::{
    guided_path, perturb_arc, push_forward, signed_intersections, splice_near_endpoints,
    ArcSpace, CurveError, SampledCurve,
};
use crate::geom::{angle_between, unit, Jacobian, Point, Vec2, PI, TAU};
use crate::planemap::{self, MapExpr, PlanemapError};
use crate::profile::smooth_step;
use crate::tol;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EulerError {
    #[error("method not applicable: {0}")]
    NotApplicable(String),
    #[error("coefficient tail has not vanished inside the window (nonzero at index {index})")]
    TailNotVanished { index: i64 },
    #[error("orbit of the arc endpoint may fail to be proper: {detail}")]
    OrbitMaybeNonProper { detail: String },
    #[error("covering identity violated at sheet index {j}: direct {direct} vs convolved {convolved}")]
    IdentityViolated { j: i64, direct: i64, convolved: i64 },
    #[error("weighted covering identity violated: weighted sum {weighted} vs {sheets} x e = {expected}")]
    WeightedIdentityViolated {
        weighted: i64,
        sheets: i64,
        expected: i64,
    },
    #[error("crossing total {total} has odd parity; no integer writhe")]
    OddParity { total: i64 },
    #[error("corner {vertex} is not direction-rigid (defect {defect:.3e})")]
    CornerNotRigid { vertex: usize, defect: f64 },
    #[error("turning total residue {residue:.4} exceeds the bound {bound}")]
    WindingResidue { residue: f64, bound: f64 },
    #[error("orbit point at index {i} is not finite")]
    NonFiniteOrbit { i: i64 },
    #[error("degenerate crossings persisted through {0} seeded perturbations")]
    DegenerateAfterRetries(u32),
    #[error(transparent)]
    Map(#[from] PlanemapError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Cover(#[from] CoverError),
}

/// The four computation methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Lift,
    Graphical,
    SignedSum,
    WritheDifference,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Lift => "lift",
            Method::Graphical => "graphical",
            Method::SignedSum => "signed-sum",
            Method::WritheDifference => "writhe-diff",
        }
    }

    pub fn all() -> [Method; 4] {
        [
            Method::Lift,
            Method::Graphical,
            Method::SignedSum,
            Method::WritheDifference,
        ]
    }
}

/// Result of one Euler-number computation, with method-specific diagnostics.
#[derive(Debug, Clone)]
pub struct EulerReport {
    pub method: Method,
    pub value: i64,
    pub notes: Vec<String>,
}

/// One named generator of an action.
#[derive(Debug, Clone)]
pub struct NamedGenerator {
    pub name: String,
    pub map: MapExpr,
}

/// Where to base the lifted-relator computation.
#[derive(Debug, Clone, Copy)]
pub struct LiftPlan {
    pub center: Point,
    /// Zero selects puncture mode (all generators fix the center); positive
    /// selects germ-at-infinity mode around the disk of this radius.
    pub forbidden_radius: f64,
    pub basepoint: Point,
}

/// Basepoint for developing the polygon boundary.
#[derive(Debug, Clone, Copy)]
pub struct GraphicalPlan {
    pub basepoint: Point,
    /// Radius for the loop arcs of generators that fix the basepoint.
    pub loop_radius: f64,
}

/// Data for the crossing-coefficient and writhe methods: a point fixed by
/// the first generator and moved by the second, and a translation arc from
/// p to b1(p) inside the compatible arc space.
#[derive(Debug, Clone)]
pub struct CommutingPairPlan {
    pub p: Point,
    pub tau: SampledCurve,
    /// Default summation window for the coefficient table.
    pub window: i64,
}

/// A surface-group action on the plane: 2g named generators a1, b1, ..,
/// ag, bg subject to the product-of-commutators relator, plus per-method
/// plans for where and how each computation should run.
#[derive(Debug, Clone)]
pub struct PlanarAction {
    pub name: String,
    pub genus: usize,
    pub generators: Vec<NamedGenerator>,
    pub lift: Option<LiftPlan>,
    pub graphical: Option<GraphicalPlan>,
    pub pair: Option<CommutingPairPlan>,
    pub non_smooth_loci: Vec<Point>,
    pub expected_euler: Option<i64>,
}

impl PlanarAction {
    /// The relator as a word of letters over borrowed generator maps.
    pub fn relator_word(&self) -> Vec<Letter<'_>> {
        let pairs: Vec<(&MapExpr, &MapExpr)> = (0..self.genus)
            .map(|h| (&self.generators[2 * h].map, &self.generators[2 * h + 1].map))
            .collect();
        cover::surface_relator_word(&pairs)
    }

    /// The relator as a single composable expression.
    pub fn relator_expr(&self) -> MapExpr {
        let mut factors = Vec::with_capacity(4 * self.genus);
        for h in 0..self.genus {
            let a = self.generators[2 * h].map.clone();
            let b = self.generators[2 * h + 1].map.clone();
            factors.push(a.clone());
            factors.push(b.clone());
            factors.push(a.inverse());
            factors.push(b.inverse());
        }
        MapExpr::compose(factors)
    }

    /// Evaluate the relator on a seeded point cloud and report the largest
    /// displacement from the identity.
    pub fn check_relator(
        &self,
        seed: u64,
        samples: usize,
        r_min: f64,
        r_max: f64,
        tolerance: f64,
    ) -> Result<planemap::RelatorReport, EulerError> {
        let pts = planemap::sample_annulus_points(seed, samples, r_min, r_max);
        let word = self.relator_expr();
        Ok(planemap::relator_check(&word, &pts, tolerance)?)
    }
}

// ---------------------------------------------------------------------------
// Lift method
// ---------------------------------------------------------------------------

/// Euler number as the deck translation of the lifted relator.
pub fn euler_via_lift(action: &PlanarAction) -> Result<EulerReport, EulerError> {
    let plan = action
        .lift
        .ok_or_else(|| EulerError::NotApplicable(format!("{}: no lift plan", action.name)))?;
    let report = deck_of_relator(action, &plan)?;
    Ok(EulerReport {
        method: Method::Lift,
        value: report.translation,
        notes: vec![
            format!("base return residue {:.3e}", report.base_return),
            format!("angle residue {:.3e}", report.angle_residue),
        ],
    })
}

fn deck_of_relator(action: &PlanarAction, plan: &LiftPlan) -> Result<DeckReport, EulerError> {
    let ctx = if plan.forbidden_radius > 0.0 {
        LiftContext::germ_at_infinity(plan.center, plan.forbidden_radius, plan.basepoint)
    } else {
        LiftContext::puncture(plan.center, plan.basepoint)
    };
    let word = action.relator_word();
    Ok(ctx.deck_translation(&word)?)
}

// ---------------------------------------------------------------------------
// Graphical method
// ---------------------------------------------------------------------------

/// The relator letters for a genus-g surface group, as (generator index,
/// inverted) pairs over the list [a1, b1, .., ag, bg].
fn relator_letters(genus: usize) -> Vec<(usize, bool)> {
    let mut v = Vec::with_capacity(4 * genus);
    for h in 0..genus {
        v.push((2 * h, false));
        v.push((2 * h + 1, false));
        v.push((2 * h, true));
        v.push((2 * h + 1, true));
    }
    v
}

/// Germ-ray slots at the basepoint. Each generator owns two of the 4g
/// evenly spaced rays: the outgoing direction of its reference arc and the
/// pulled-back approach direction into its endpoint. Consecutive polygon
/// edges must satisfy slot(start of next) = slot(end of previous) - 1
/// (mod 4g) so that every corner of the developed boundary turns by
/// pi - 2*pi/4g; this fixes the assignment up to a global rotation.
fn germ_slots(genus: usize) -> (Vec<usize>, Vec<usize>) {
    let letters = relator_letters(genus);
    let n = letters.len();
    let unset = usize::MAX;
    let mut o = vec![unset; 2 * genus];
    let mut m = vec![unset; 2 * genus];
    // start slot of a letter: O for a generator, M for its inverse.
    // end slot of a letter: M for a generator, O for its inverse.
    o[letters[0].0] = 0;
    loop {
        let mut progressed = false;
        for j in 0..n {
            let (gj, ij) = letters[j];
            let (gk, ik) = letters[(j + 1) % n];
            let start_k = if ik { m[gk] } else { o[gk] };
            let end_j = if ij { o[gj] } else { m[gj] };
            if start_k != unset && end_j == unset {
                let v = (start_k + 1) % n;
                if ij {
                    o[gj] = v;
                } else {
                    m[gj] = v;
                }
                progressed = true;
            } else if end_j != unset && start_k == unset {
                let v = (end_j + n - 1) % n;
                if ik {
                    m[gk] = v;
                } else {
                    o[gk] = v;
                }
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    debug_assert!(o.iter().chain(m.iter()).all(|&s| s != unset));
    let mut seen = vec![false; n];
    for &s in o.iter().chain(m.iter()) {
        debug_assert!(!seen[s]);
        seen[s] = true;
    }
    (o, m)
}

/// Reference arc data for one relator letter: an arc from z0 to letter(z0)
/// plus the two chart rays used for corner bookkeeping.
struct LetterGerm {
    arc: SampledCurve,
    /// Chart direction in which the arc leaves z0.
    start_chart: Vec2,
    /// Chart direction of the pulled-back approach: (d letter at z0)^-1
    /// applied to the reversed end tangent points along this ray.
    end_chart: Vec2,
}

/// A loop at z0 leaving along angle `phi0` and returning from the ray at
/// angle `phi1`, swept as a single petal r = R sin(pi t). Immersed for any
/// angle change bounded away from zero; when the requested change is too
/// small we add a full turn, which the paired inverse occurrence cancels.
fn petal_arc(z0: Point, radius: f64, phi0: f64, phi1: f64) -> Result<SampledCurve, CurveError> {
    let mut dphi = crate::geom::wrap_angle(phi1 - phi0);
    if dphi.abs() < 0.1 {
        dphi -= TAU;
    }
    let f = move |t: f64| {
        let r = radius * (PI * t).sin();
        let phi = phi0 + dphi * smooth_step(t);
        Ok(z0 + unit(phi) * r)
    };
    let df = move |t: f64| {
        let s = (PI * t).sin();
        let c = (PI * t).cos();
        let phi = phi0 + dphi * smooth_step(t);
        let phip = dphi * 6.0 * t * (1.0 - t);
        let u = unit(phi);
        Ok(u * (radius * PI * c) + u.perp() * (radius * s * phip))
    };
    SampledCurve::from_parametric(f, df, false, &[])
}

fn positive_letter_germ(
    map: &MapExpr,
    z0: Point,
    o_dir: Vec2,
    m_dir: Vec2,
    loop_radius: f64,
) -> Result<LetterGerm, EulerError> {
    let image = planemap::eval(map, z0)?;
    let j = planemap::differential(map, z0)?;
    let jm = j.apply(m_dir);
    if jm.norm() < 1e-12 {
        return Err(EulerError::Map(PlanemapError::NotDifferentiableHere {
            x: z0.x,
            y: z0.y,
        }));
    }
    let arc = if image.dist(z0) < 1e-9 {
        // Loop case: leave along o_dir and return from the ray along j*m.
        petal_arc(z0, loop_radius, o_dir.angle(), jm.angle())?
    } else {
        let end_dir = jm.normalized() * -1.0;
        guided_path(z0, o_dir, image, end_dir, 0.35 * image.dist(z0))?
    };
    Ok(LetterGerm {
        arc,
        start_chart: o_dir,
        end_chart: m_dir,
    })
}

fn inverse_letter_germ(
    map: &MapExpr,
    positive: &LetterGerm,
) -> Result<LetterGerm, EulerError> {
    let reversed = positive.arc.reverse();
    let arc = push_forward(&map.clone().inverse(), &reversed)?;
    Ok(LetterGerm {
        arc,
        start_chart: positive.end_chart,
        end_chart: positive.start_chart,
    })
}

/// Total tangent sweep along a sampled curve (sum of successive principal
/// tangent-angle increments; the sampling contract keeps each below 0.1).
fn tangent_sweep(c: &SampledCurve) -> f64 {
    c.samples()
        .windows(2)
        .map(|w| angle_between(w[0].tangent, w[1].tangent))
        .sum()
}

/// Angle swept by j applied to a ray rotating from `start` through
/// `chart_turn`. This is the canonical corner turn: the turn realized by a
/// corner blend built in the basepoint chart and pushed through the
/// development. Subdivides until every increment is small.
fn jacobian_direction_sweep(j: &Jacobian, start: Vec2, chart_turn: f64) -> Result<f64, EulerError> {
    let mut steps = 512usize;
    loop {
        let mut total = 0.0;
        let mut prev = j.apply(start);
        let mut coarse = false;
        for k in 1..=steps {
            let s = chart_turn * (k as f64) / (steps as f64);
            let cur = j.apply(start.rotated(s));
            let inc = angle_between(prev, cur);
            if inc.abs() > 0.3 {
                coarse = true;
                break;
            }
            total += inc;
            prev = cur;
        }
        if !coarse {
            return Ok(total);
        }
        steps *= 2;
        if steps > 1 << 16 {
            return Err(EulerError::CornerNotRigid {
                vertex: usize::MAX,
                defect: f64::INFINITY,
            });
        }
    }
}

/// The developed boundary data shared by the winding computation and the
/// diagnostic renderer: one reference germ per relator letter, the prefix
/// maps, and the developed edges (prefix pushforwards of the germ arcs).
struct Development {
    germs: Vec<LetterGerm>,
    prefixes: Vec<MapExpr>,
    edges: Vec<SampledCurve>,
}

/// Developed edges of the fundamental polygon boundary, in relator order.
/// This is the curve whose corner-smoothed turning number enters the
/// graphical formula; exposed for rendering.
pub fn developed_edges(action: &PlanarAction) -> Result<Vec<SampledCurve>, EulerError> {
    Ok(develop(action)?.edges)
}

fn develop(action: &PlanarAction) -> Result<Development, EulerError> {
    let plan = action.graphical.ok_or_else(|| {
        EulerError::NotApplicable(format!("{}: no graphical plan", action.name))
    })?;
    let g = action.genus;
    let z0 = plan.basepoint;
    let letters = relator_letters(g);
    let n = letters.len();
    let (o_slots, m_slots) = germ_slots(g);
    let ray = |slot: usize| unit(TAU * slot as f64 / n as f64);

    // Reference germs, positive letters first.
    let mut positive: Vec<LetterGerm> = Vec::with_capacity(2 * g);
    for i in 0..2 * g {
        positive.push(positive_letter_germ(
            &action.generators[i].map,
            z0,
            ray(o_slots[i]),
            ray(m_slots[i]),
            plan.loop_radius,
        )?);
    }
    let mut germs: Vec<LetterGerm> = Vec::with_capacity(n);
    for &(gi, inv) in &letters {
        if inv {
            germs.push(inverse_letter_germ(
                &action.generators[gi].map,
                &positive[gi],
            )?);
        } else {
            let p = &positive[gi];
            germs.push(LetterGerm {
                arc: p.arc.clone(),
                start_chart: p.start_chart,
                end_chart: p.end_chart,
            });
        }
    }

    // Sanity: each germ leaves z0 along its chart ray.
    for (j, germ) in germs.iter().enumerate() {
        let defect = angle_between(germ.arc.start().tangent, germ.start_chart).abs();
        if defect > 1e-3 {
            return Err(EulerError::CornerNotRigid { vertex: j, defect });
        }
    }

    // Prefix maps V_j = x_1 ∘ .. ∘ x_j and the developed edges
    // V_{j-1} ∘ (reference arc of x_j).
    let letter_expr = |&(gi, inv): &(usize, bool)| -> MapExpr {
        let e = action.generators[gi].map.clone();
        if inv {
            e.inverse()
        } else {
            e
        }
    };
    let mut prefixes: Vec<MapExpr> = Vec::with_capacity(n + 1);
    prefixes.push(MapExpr::identity());
    for j in 0..n {
        let mut factors: Vec<MapExpr> = letters[..=j].iter().map(letter_expr).collect();
        if factors.len() == 1 {
            prefixes.push(factors.pop().unwrap());
        } else {
            prefixes.push(MapExpr::compose(factors));
        }
    }
    // The development must close up: V_n(z0) = z0.
    let back = planemap::eval(&prefixes[n], z0)?;
    if back.dist(z0) > 1e-6 {
        return Err(EulerError::NotApplicable(format!(
            "development does not close: relator moves the basepoint by {:.3e}",
            back.dist(z0)
        )));
    }

    let mut edges: Vec<SampledCurve> = Vec::with_capacity(n);
    for j in 0..n {
        edges.push(push_forward(&prefixes[j], &germs[j].arc)?);
    }

    Ok(Development {
        germs,
        prefixes,
        edges,
    })
}

/// Euler number from the turning number of the corner-smoothed developed
/// boundary: e = wind(delta) + 1 - 2g.
pub fn euler_via_graphical(action: &PlanarAction) -> Result<EulerReport, EulerError> {
    let g = action.genus;
    let z0 = action
        .graphical
        .ok_or_else(|| {
            EulerError::NotApplicable(format!("{}: no graphical plan", action.name))
        })?
        .basepoint;
    let Development {
        germs,
        prefixes,
        edges,
    } = develop(action)?;
    let n = edges.len();

    let mut total = 0.0;
    let mut corner_notes: Vec<f64> = Vec::with_capacity(n);
    for edge in &edges {
        total += tangent_sweep(edge);
    }
    for j in 0..n {
        let next = (j + 1) % n;
        let chart_in = germs[j].end_chart * -1.0;
        let chart_out = germs[next].start_chart;
        let chi = angle_between(chart_in, chart_out);
        let dvj = planemap::differential(&prefixes[j + 1], z0)?;
        // Consistency: the chart ray mapped by the prefix differential must
        // agree with the incoming tangent of the developed edge.
        let mapped_in = dvj.apply(chart_in);
        let defect_in = angle_between(mapped_in, edges[j].end().tangent).abs();
        if defect_in > 1e-3 {
            return Err(EulerError::CornerNotRigid {
                vertex: j,
                defect: defect_in,
            });
        }
        let canonical = jacobian_direction_sweep(&dvj, chart_in, chi)?;
        let short = angle_between(edges[j].end().tangent, edges[next].start().tangent);
        let defect = (canonical - short).abs();
        if defect > 1e-3 {
            return Err(EulerError::CornerNotRigid { vertex: j, defect });
        }
        if canonical.abs() > PI - 0.02 {
            return Err(EulerError::CornerNotRigid {
                vertex: j,
                defect: canonical.abs(),
            });
        }
        corner_notes.push(canonical);
        total += canonical;
    }

    let wind = (total / TAU).round();
    let residue = (total / TAU - wind).abs();
    if residue > tol::TURN_RESIDUE {
        return Err(EulerError::WindingResidue {
            residue,
            bound: tol::TURN_RESIDUE,
        });
    }
    let value = wind as i64 + 1 - 2 * g as i64;
    Ok(EulerReport {
        method: Method::Graphical,
        value,
        notes: vec![
            format!("boundary turning number {}", wind as i64),
            format!("turning residue {:.3e}", residue),
            format!(
                "corner turns [{}]",
                corner_notes
                    .iter()
                    .map(|c| format!("{:.3}", c))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        ],
    })
}

// ---------------------------------------------------------------------------
// Crossing coefficients and signed sums
// ---------------------------------------------------------------------------

/// Table of crossing coefficients a_i for -window <= i <= window, a_0 = 0.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    window: i64,
    values: Vec<i64>,
}

impl CoefficientTable {
    pub fn window(&self) -> i64 {
        self.window
    }

    pub fn get(&self, i: i64) -> i64 {
        if i.abs() > self.window {
            0
        } else {
            self.values[(i + self.window) as usize]
        }
    }

    /// Largest |i| with a_i nonzero (zero when the table vanishes).
    pub fn support_radius(&self) -> i64 {
        (1..=self.window)
            .rev()
            .find(|&i| self.get(i) != 0 || self.get(-i) != 0)
            .unwrap_or(0)
    }

    /// sum_{i>0} a_i - sum_{i<0} a_i.
    pub fn signed_sum(&self) -> i64 {
        (1..=self.window)
            .map(|i| self.get(i) - self.get(-i))
            .sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (-self.window..=self.window).map(move |i| (i, self.get(i)))
    }
}

fn coefficients_once(
    alpha: &MapExpr,
    beta: &MapExpr,
    p: Point,
    tau: &SampledCurve,
    window: i64,
) -> Result<CoefficientTable, EulerError> {
    let space = ArcSpace::from_map(beta, p)?;
    space.contains(tau)?;
    let alpha_tau = push_forward(alpha, tau)?;
    let splice_radius = 0.25 * space.a.dist(space.b);
    let delta = splice_near_endpoints(&alpha_tau, tau, splice_radius, &space)?;
    let mut values = vec![0i64; (2 * window + 1) as usize];
    let beta_inv = beta.clone().inverse();
    for dir in [1i64, -1] {
        let step = if dir > 0 { beta } else { &beta_inv };
        let mut cur = tau.clone();
        for k in 1..=window {
            cur = push_forward(step, &cur)?;
            let i = dir * k;
            // The splice replaces alpha(tau) in the two adjacent terms,
            // where alpha(tau) and the translate share an endpoint germ.
            let first: &SampledCurve = if k == 1 { &delta } else { &alpha_tau };
            let ca = signed_intersections(first, &cur)?.0;
            let cb = signed_intersections(tau, &cur)?.0;
            values[(i + window) as usize] = ca - cb;
        }
    }
    Ok(CoefficientTable { window, values })
}

/// Crossing coefficients with seeded perturbation retries on degenerate
/// (non-transverse) contacts.
fn coefficients_with_retries(
    alpha: &MapExpr,
    beta: &MapExpr,
    p: Point,
    tau: &SampledCurve,
    window: i64,
) -> Result<CoefficientTable, EulerError> {
    let mut attempt: u32 = 0;
    loop {
        let trial;
        let arc = if attempt == 0 {
            tau
        } else {
            trial = perturb_arc(tau, 7000 + attempt as u64, tol::PERTURBATION_AMPLITUDE)?;
            &trial
        };
        match coefficients_once(alpha, beta, p, arc, window) {
            Err(EulerError::Curve(CurveError::NonTransverseContact { .. }))
                if (attempt as usize) < tol::PERTURBATION_RETRIES =>
            {
                attempt += 1;
            }
            Err(EulerError::Curve(CurveError::NonTransverseContact { .. })) => {
                return Err(EulerError::DegenerateAfterRetries(attempt));
            }
            other => return other,
        }
    }
}

fn pair_plan(
    action: &PlanarAction,
) -> Result<(&CommutingPairPlan, &MapExpr, &MapExpr), EulerError> {
    let plan = action.pair.as_ref().ok_or_else(|| {
        EulerError::NotApplicable(format!("{}: no commuting-pair plan", action.name))
    })?;
    Ok((plan, &action.generators[0].map, &action.generators[1].map))
}

/// The curves a coefficient run compares at the first translate: the arc
/// tau, the spliced image delta (alpha(tau) with its terminal germ replaced
/// by tau's), and the translate beta(tau). Exposed for rendering; the
/// crossings of delta against beta(tau) are the events behind a_1.
pub fn pair_picture(
    action: &PlanarAction,
) -> Result<(SampledCurve, SampledCurve, SampledCurve), EulerError> {
    let (plan, alpha, beta) = pair_plan(action)?;
    let space = ArcSpace::from_map(beta, plan.p)?;
    space.contains(&plan.tau)?;
    let alpha_tau = push_forward(alpha, &plan.tau)?;
    let splice_radius = 0.25 * space.a.dist(space.b);
    let delta = splice_near_endpoints(&alpha_tau, &plan.tau, splice_radius, &space)?;
    let translate = push_forward(beta, &plan.tau)?;
    Ok((plan.tau.clone(), delta, translate))
}

/// Crossing coefficients of the action's commuting pair over the given
/// window (defaulting to the plan's window when `window` is None).
pub fn coefficients_a(
    action: &PlanarAction,
    window: Option<i64>,
) -> Result<CoefficientTable, EulerError> {
    let (plan, alpha, beta) = pair_plan(action)?;
    let w = window.unwrap_or(plan.window).max(1);
    coefficients_with_retries(alpha, beta, plan.p, &plan.tau, w)
}

/// How confident the probe is that the forward/backward orbit of a point
/// leaves every compact set.
#[derive(Debug, Clone, PartialEq)]
pub enum OrbitVerdict {
    ProperLike,
    ReturnsDetected { i: i64, j: i64, dist: f64 },
    Inconclusive,
}

/// Probe the orbit beta^i(p) for -n <= i <= n: detect near-returns between
/// non-adjacent indices, and call the orbit proper-like only when all orbit
/// points stay apart and the extremes escape far beyond the first step.
pub fn orbit_properness_probe(
    beta: &MapExpr,
    p: Point,
    n: i64,
) -> Result<OrbitVerdict, EulerError> {
    let n = n.max(1);
    let count = (2 * n + 1) as usize;
    let mut pts: Vec<Point> = Vec::with_capacity(count);
    let mut cur = p;
    for i in 1..=n {
        cur = planemap::eval_inverse(beta, cur)?;
        if !cur.is_finite() {
            return Err(EulerError::NonFiniteOrbit { i: -i });
        }
        pts.push(cur);
    }
    pts.reverse();
    pts.push(p);
    cur = p;
    for i in 1..=n {
        cur = planemap::eval(beta, cur)?;
        if !cur.is_finite() {
            return Err(EulerError::NonFiniteOrbit { i });
        }
        pts.push(cur);
    }
    let idx = |k: usize| k as i64 - n;
    let mut min_gap = f64::INFINITY;
    for a in 0..count {
        for b in (a + 1)..count {
            let d = pts[a].dist(pts[b]);
            min_gap = min_gap.min(d);
            if b - a > 1 && d < 1e-3 {
                return Ok(OrbitVerdict::ReturnsDetected {
                    i: idx(a),
                    j: idx(b),
                    dist: d,
                });
            }
        }
    }
    let step = pts[n as usize].dist(pts[n as usize + 1]);
    let reach = pts
        .iter()
        .map(|q| q.dist(p))
        .fold(0.0f64, f64::max);
    if min_gap > 1e-3 && reach >= 10.0 * step {
        Ok(OrbitVerdict::ProperLike)
    } else {
        Ok(OrbitVerdict::Inconclusive)
    }
}

/// A windowed signed sum with its certification status.
#[derive(Debug, Clone)]
pub struct WindowedSum {
    pub value: i64,
    pub table: CoefficientTable,
    pub certified: bool,
    pub caveats: Vec<String>,
}

/// Signed sum over a finite window, reporting (rather than enforcing) the
/// properness and tail conditions. Certified only when the orbit probe is
/// satisfied and the coefficient tail vanished strictly inside the window.
pub fn windowed_signed_sum(
    action: &PlanarAction,
    window: Option<i64>,
) -> Result<WindowedSum, EulerError> {
    let (plan, _, beta) = pair_plan(action)?;
    let w = window.unwrap_or(plan.window).max(1);
    let verdict = orbit_properness_probe(beta, plan.p, w.max(30))?;
    let table = coefficients_a(action, Some(w))?;
    let mut caveats = Vec::new();
    match &verdict {
        OrbitVerdict::ProperLike => {}
        OrbitVerdict::ReturnsDetected { i, j, dist } => {
            caveats.push(format!(
                "orbit returns: indices {} and {} are {:.3e} apart",
                i, j, dist
            ));
        }
        OrbitVerdict::Inconclusive => {
            caveats.push("orbit properness probe inconclusive".into());
        }
    }
    if table.support_radius() > w - 2 {
        caveats.push(format!(
            "coefficient tail still nonzero at |i| = {} (window {})",
            table.support_radius(),
            w
        ));
    }
    Ok(WindowedSum {
        value: table.signed_sum(),
        table,
        certified: caveats.is_empty(),
        caveats,
    })
}

/// Euler number as the certified signed sum of crossing coefficients.
pub fn euler_via_signed_sum(action: &PlanarAction) -> Result<EulerReport, EulerError> {
    let (plan, _, beta) = pair_plan(action)?;
    let w = plan.window.max(1);
    match orbit_properness_probe(beta, plan.p, w.max(30))? {
        OrbitVerdict::ProperLike => {}
        OrbitVerdict::ReturnsDetected { i, j, dist } => {
            return Err(EulerError::OrbitMaybeNonProper {
                detail: format!("indices {} and {} are {:.3e} apart", i, j, dist),
            });
        }
        OrbitVerdict::Inconclusive => {
            return Err(EulerError::OrbitMaybeNonProper {
                detail: "probe inconclusive: orbit neither returns nor escapes clearly".into(),
            });
        }
    }
    let table = coefficients_a(action, Some(w))?;
    let support = table.support_radius();
    if support > w - 2 {
        return Err(EulerError::TailNotVanished { index: support });
    }
    Ok(EulerReport {
        method: Method::SignedSum,
        value: table.signed_sum(),
        notes: vec![
            format!("window {}", w),
            format!("coefficient support radius {}", support),
        ],
    })
}

// ---------------------------------------------------------------------------
// Writhe difference
// ---------------------------------------------------------------------------

/// Euler number as the writhe difference between the image arc and the arc:
/// e = [alpha(tau)] - [tau] in the arc space of (p, beta(p), d beta).
///
/// The equality needs the translates of tau to assemble into a proper line,
/// so an orbit with detected returns is refused: the writhe difference would
/// still be a well-defined integer, just not the Euler number.
pub fn euler_via_writhe_difference(action: &PlanarAction) -> Result<EulerReport, EulerError> {
    let (plan, alpha, beta) = pair_plan(action)?;
    let mut notes = Vec::new();
    match orbit_properness_probe(beta, plan.p, plan.window.max(30))? {
        OrbitVerdict::ReturnsDetected { i, j, dist } => {
            return Err(EulerError::OrbitMaybeNonProper {
                detail: format!(
                    "orbit returns: indices {} and {} are {:.3e} apart",
                    i, j, dist
                ),
            })
        }
        OrbitVerdict::Inconclusive => {
            notes.push("orbit properness not certified by the probe".to_string());
        }
        OrbitVerdict::ProperLike => {}
    }
    let space = ArcSpace::from_map(beta, plan.p)?;
    space.contains(&plan.tau)?;
    let image = push_forward(alpha, &plan.tau)?;
    let value = crate::curve::writhe_difference(&image, &plan.tau, &space)?;
    notes.push(format!(
        "arc space from ({:.3},{:.3}) to ({:.3},{:.3})",
        space.a.x, space.a.y, space.b.x, space.b.y
    ));
    Ok(EulerReport {
        method: Method::WritheDifference,
        value,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Covering trick
// ---------------------------------------------------------------------------

/// Weight sequence of the degree-(2n+1) covering: X_n(i) clamps i to
/// [-(2n+1), 2n+1].
pub fn covering_weight(n: i64, i: i64) -> i64 {
    i.clamp(-(2 * n + 1), 2 * n + 1)
}

/// Result of the covering-trick consistency check.
#[derive(Debug, Clone)]
pub struct CoveringTrickReport {
    pub n: i64,
    pub sheets: i64,
    pub base_window: i64,
    /// (j, direct A_j, convolved A_j) for |j| <= 2.
    pub sheets_coefficients: Vec<(i64, i64, i64)>,
    pub weighted_sum: i64,
    pub euler: i64,
}

/// Check the two identities furnished by passing to the degree-(2n+1)
/// cyclic cover: the coefficients of the induced pair (alpha, beta^(2n+1))
/// with the concatenated arc T = U beta^i(tau) equal the (2n+1-|i|)-weighted
/// convolution of the base coefficients, and the X_n-weighted sum of the
/// base coefficients equals (2n+1) times the Euler number.
pub fn covering_trick_check(
    action: &PlanarAction,
    n: i64,
) -> Result<CoveringTrickReport, EulerError> {
    let (plan, alpha, beta) = pair_plan(action)?;
    let n = n.max(1);
    let sheets = 2 * n + 1;
    let base_window = 6 * n + 4;
    let table = coefficients_with_retries(alpha, beta, plan.p, &plan.tau, base_window)?;

    // T = beta^{-n}(tau) .. beta^{n}(tau) concatenated, C1 at the seams
    // because tau lives in the compatible arc space.
    let beta_inv = beta.clone().inverse();
    let mut cur = plan.tau.clone();
    for _ in 0..n {
        cur = push_forward(&beta_inv, &cur)?;
    }
    let mut pieces = vec![cur.clone()];
    for _ in 0..2 * n {
        cur = push_forward(beta, &cur)?;
        pieces.push(cur.clone());
    }
    let t_arc = SampledCurve::concat(&pieces, false)?;
    let big_beta = beta.clone().power(sheets as i32);
    let mut p_prime = plan.p;
    for _ in 0..n {
        p_prime = planemap::eval_inverse(beta, p_prime)?;
    }
    let direct = coefficients_with_retries(alpha, &big_beta, p_prime, &t_arc, 2)?;

    let mut sheets_coefficients = Vec::new();
    for j in -2i64..=2 {
        let mut conv = 0i64;
        for i in -(2 * n)..=(2 * n) {
            conv += (sheets - i.abs()) * table.get(j * sheets + i);
        }
        let d = direct.get(j);
        if j != 0 && d != conv {
            return Err(EulerError::IdentityViolated {
                j,
                direct: d,
                convolved: conv,
            });
        }
        sheets_coefficients.push((j, d, conv));
    }

    let weighted: i64 = (-base_window..=base_window)
        .map(|i| covering_weight(n, i) * table.get(i))
        .sum();
    let euler = table.signed_sum();
    if weighted != sheets * euler {
        return Err(EulerError::WeightedIdentityViolated {
            weighted,
            sheets,
            expected: sheets * euler,
        });
    }
    Ok(CoveringTrickReport {
        n,
        sheets,
        base_window,
        sheets_coefficients,
        weighted_sum: weighted,
        euler,
    })
}

// ---------------------------------------------------------------------------
// Canonical writhe and free arcs
// ---------------------------------------------------------------------------

/// Canonical writhe of an arc relative to the translates mover^i: half of
/// sum_{i>=0} b_i - sum_{i<=0} b_i where b_i counts signed crossings with
/// the i-th translate (b_0 cancels between the sums). Errors on odd parity.
pub fn canonical_writhe(
    delta: &SampledCurve,
    mover: &MapExpr,
    window: i64,
) -> Result<i64, EulerError> {
    let window = window.max(1);
    let mover_inv = mover.clone().inverse();
    let mut attempt: u32 = 0;
    loop {
        let trial;
        let arc = if attempt == 0 {
            delta
        } else {
            trial = perturb_arc(delta, 9100 + attempt as u64, tol::PERTURBATION_AMPLITUDE)?;
            &trial
        };
        let mut total = 0i64;
        let mut failed = false;
        'dirs: for dir in [1i64, -1] {
            let step = if dir > 0 { mover } else { &mover_inv };
            let mut cur = arc.clone();
            for _ in 1..=window {
                cur = push_forward(step, &cur)?;
                match signed_intersections(arc, &cur) {
                    Ok((s, _)) => total += dir * s,
                    Err(CurveError::NonTransverseContact { .. }) => {
                        failed = true;
                        break 'dirs;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        if failed {
            if (attempt as usize) < tol::PERTURBATION_RETRIES {
                attempt += 1;
                continue;
            }
            return Err(EulerError::DegenerateAfterRetries(attempt));
        }
        if total % 2 != 0 {
            return Err(EulerError::OddParity { total });
        }
        return Ok(total / 2);
    }
}

/// Brown's freeness criterion for a translation arc: tau and beta(tau) may
/// share only the endpoint germ, with no interior crossings or tangential
/// contacts.
pub fn is_free_arc(tau: &SampledCurve, beta: &MapExpr) -> Result<bool, EulerError> {
    let image = push_forward(beta, tau)?;
    match signed_intersections(tau, &image) {
        Ok((_, events)) => Ok(events.is_empty()),
        Err(CurveError::NonTransverseContact { .. }) => Ok(false),
        Err(e) => Err(e.into()),
    }
}

// ---------------------------------------------------------------------------
// Convenience dispatch
// ---------------------------------------------------------------------------

/// Run one method on an action.
pub fn compute(action: &PlanarAction, method: Method) -> Result<EulerReport, EulerError> {
    match method {
        Method::Lift => euler_via_lift(action),
        Method::Graphical => euler_via_graphical(action),
        Method::SignedSum => euler_via_signed_sum(action),
        Method::WritheDifference => euler_via_writhe_difference(action),
    }
}
