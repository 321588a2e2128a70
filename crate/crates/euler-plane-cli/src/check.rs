//! The built-in property suite behind `euler-plane check`.
//!
//! Each check re-verifies one pillar of the computation at desk scale:
//! numerical kernels against finite differences, catalog relators as exact
//! identities, cross-method agreement on the zero-Euler trio and the twist
//! families, the writhe calculus, coefficient tails, covering identities and
//! perturbation invariance. Failures are classified so the binary can exit
//! 3 for a numerical failure and 4 for a violated identity.

use euler_plane::curve::{
    add_twist, perturb_arc, random_smooth_arc, turning_number, ArcSpace, SampledCurve,
};
use euler_plane::euler::{
    canonical_writhe, coefficients_a, compute, covering_trick_check, euler_via_graphical,
    euler_via_lift, euler_via_signed_sum, euler_via_writhe_difference, Method, PlanarAction,
};
use euler_plane::geom::{point, vec2, Jacobian};
use euler_plane::planemap::{self, differential, eval, sample_annulus_points, MapExpr};
use euler_plane::curve::writhe_difference;
use euler_plane::zoo;
use euler_plane::tol;

/// Whether a failed check is a tolerance problem or a broken identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureClass {
    Numerical,
    Identity,
}

#[derive(Debug)]
pub struct CheckFailure {
    pub class: FailureClass,
    pub detail: String,
}

pub struct CheckOutcome {
    pub name: &'static str,
    pub result: Result<String, CheckFailure>,
}

fn numerical(detail: impl Into<String>) -> CheckFailure {
    CheckFailure {
        class: FailureClass::Numerical,
        detail: detail.into(),
    }
}

fn identity(detail: impl Into<String>) -> CheckFailure {
    CheckFailure {
        class: FailureClass::Identity,
        detail: detail.into(),
    }
}

fn catalog() -> Result<Vec<PlanarAction>, CheckFailure> {
    let actions = vec![
        zoo::bestvina(1),
        zoo::bestvina(-2),
        zoo::genus2_smooth(1),
        zoo::torus_shear(),
        zoo::randomized_torus(1),
        zoo::commuting_rotation_twist(),
        zoo::free_translations(),
        zoo::pullback_degree_one(2),
    ];
    actions
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| numerical(format!("catalog construction failed: {}", e)))
}

/// Differentials against central finite differences on 1000 (map, point)
/// pairs drawn from the catalog generators.
fn check_differentials() -> Result<String, CheckFailure> {
    let actions = catalog()?;
    let mut exprs: Vec<&MapExpr> = Vec::new();
    for a in &actions {
        for g in &a.generators {
            exprs.push(&g.map);
        }
    }
    let points = sample_annulus_points(101, 1200 / exprs.len() + 1, 0.3, 6.0);
    let h = tol::DIFFERENTIAL_STEP;
    let mut used = 0usize;
    let mut worst: f64 = 0.0;
    for expr in &exprs {
        for &p in &points {
            if used >= 1000 {
                break;
            }
            let jac = match differential(expr, p) {
                Ok(j) => j,
                Err(_) => continue,
            };
            let fx = |q| eval(expr, q);
            let (xp, xm) = match (fx(point(p.x + h, p.y)), fx(point(p.x - h, p.y))) {
                (Ok(a), Ok(b)) => (a, b),
                _ => continue,
            };
            let (yp, ym) = match (fx(point(p.x, p.y + h)), fx(point(p.x, p.y - h))) {
                (Ok(a), Ok(b)) => (a, b),
                _ => continue,
            };
            let fd = Jacobian {
                a: (xp.x - xm.x) / (2.0 * h),
                c: (xp.y - xm.y) / (2.0 * h),
                b: (yp.x - ym.x) / (2.0 * h),
                d: (yp.y - ym.y) / (2.0 * h),
            };
            let scale = (jac.a.abs() + jac.b.abs() + jac.c.abs() + jac.d.abs()).max(1.0);
            let diff = (jac.a - fd.a).abs()
                + (jac.b - fd.b).abs()
                + (jac.c - fd.c).abs()
                + (jac.d - fd.d).abs();
            let rel = diff / scale;
            worst = worst.max(rel);
            if rel >= tol::DIFFERENTIAL_REL_TOL {
                return Err(numerical(format!(
                    "differential off by {:.2e} at ({:.3},{:.3})",
                    rel, p.x, p.y
                )));
            }
            used += 1;
        }
    }
    if used < 900 {
        return Err(numerical(format!(
            "only {} differentiable samples found",
            used
        )));
    }
    Ok(format!("{} pairs, worst relative error {:.2e}", used, worst))
}

/// Every catalog action satisfies its surface-group relator exactly.
fn check_relators() -> Result<String, CheckFailure> {
    let actions = catalog()?;
    let mut worst: f64 = 0.0;
    for action in &actions {
        let report = action
            .check_relator(11, 120, 0.2, 40.0, tol::RELATOR_TOL)
            .map_err(|e| numerical(format!("{}: {}", action.name, e)))?;
        worst = worst.max(report.max_displacement);
        if !report.passes() {
            return Err(identity(format!(
                "{}: relator moves a point by {:.3e}",
                action.name, report.max_displacement
            )));
        }
    }
    Ok(format!(
        "{} actions, worst displacement {:.2e}",
        actions.len(),
        worst
    ))
}

/// The zero-Euler trio returns 0 by every applicable method.
fn check_zero_trio() -> Result<String, CheckFailure> {
    let mut runs = 0;
    let shear = zoo::torus_shear().map_err(|e| numerical(e.to_string()))?;
    for m in Method::all() {
        let r = compute(&shear, m)
            .map_err(|e| numerical(format!("torus-shear {}: {}", m.name(), e)))?;
        if r.value != 0 {
            return Err(identity(format!(
                "torus-shear {} returned {}",
                m.name(),
                r.value
            )));
        }
        runs += 1;
    }
    let rot = zoo::commuting_rotation_twist().map_err(|e| numerical(e.to_string()))?;
    for m in [Method::Lift, Method::Graphical, Method::WritheDifference] {
        let r = compute(&rot, m)
            .map_err(|e| numerical(format!("rotation-twist {}: {}", m.name(), e)))?;
        if r.value != 0 {
            return Err(identity(format!(
                "rotation-twist {} returned {}",
                m.name(),
                r.value
            )));
        }
        runs += 1;
    }
    let free = zoo::free_translations().map_err(|e| numerical(e.to_string()))?;
    for m in [Method::Lift, Method::Graphical] {
        let r = compute(&free, m)
            .map_err(|e| numerical(format!("free-translations {}: {}", m.name(), e)))?;
        if r.value != 0 {
            return Err(identity(format!(
                "free-translations {} returned {}",
                m.name(),
                r.value
            )));
        }
        runs += 1;
    }
    Ok(format!("{} method runs, all zero", runs))
}

/// Twist families hit their twist power under both the lift and the
/// development.
fn check_twist_families() -> Result<String, CheckFailure> {
    for n in -3..=3 {
        let action = zoo::bestvina(n).map_err(|e| numerical(e.to_string()))?;
        let v = euler_via_lift(&action)
            .map_err(|e| numerical(format!("bestvina({}) lift: {}", n, e)))?
            .value;
        if v != n as i64 {
            return Err(identity(format!("bestvina({}) lift returned {}", n, v)));
        }
    }
    for n in [-1, 2] {
        let action = zoo::bestvina(n).map_err(|e| numerical(e.to_string()))?;
        let v = euler_via_graphical(&action)
            .map_err(|e| numerical(format!("bestvina({}) graphical: {}", n, e)))?
            .value;
        if v != n as i64 {
            return Err(identity(format!(
                "bestvina({}) graphical returned {}",
                n, v
            )));
        }
    }
    for n in [-1, 1] {
        let action = zoo::genus2_smooth(n).map_err(|e| numerical(e.to_string()))?;
        let lift = euler_via_lift(&action)
            .map_err(|e| numerical(format!("genus2({}) lift: {}", n, e)))?
            .value;
        let dev = euler_via_graphical(&action)
            .map_err(|e| numerical(format!("genus2({}) graphical: {}", n, e)))?
            .value;
        if lift != n as i64 || dev != lift {
            return Err(identity(format!(
                "genus2({}) lift {} development {}",
                n, lift, dev
            )));
        }
    }
    Ok("bestvina n in -3..=3, genus2 n in {-1,1}".to_string())
}

/// Twist insertion shifts the writhe coordinate by exactly k, and the shift
/// is additive.
fn check_writhe_calculus() -> Result<String, CheckFailure> {
    let space = ArcSpace {
        a: point(0.0, 0.0),
        b: point(4.0, 0.0),
        transport: Jacobian::IDENTITY,
    };
    let mut comparisons = 0;
    for seed in 0..12u64 {
        let x = random_smooth_arc(seed, 0.5 + 0.03 * seed as f64)
            .map_err(|e| numerical(format!("arc {}: {}", seed, e)))?;
        for k in -3..=3 {
            let twisted =
                add_twist(&x, k).map_err(|e| numerical(format!("twist {}: {}", k, e)))?;
            let wd = writhe_difference(&twisted, &x, &space)
                .map_err(|e| numerical(format!("difference {}: {}", k, e)))?;
            if wd != k as i64 {
                return Err(identity(format!(
                    "seed {} twist {} measured {}",
                    seed, k, wd
                )));
            }
            comparisons += 1;
        }
        // Additivity on a triple.
        let j = (seed as i32 % 3) - 1;
        let k = 2 - (seed as i32 % 5);
        let a = add_twist(&x, j).map_err(|e| numerical(e.to_string()))?;
        let b = add_twist(&a, k).map_err(|e| numerical(e.to_string()))?;
        let direct = writhe_difference(&b, &x, &space)
            .map_err(|e| numerical(e.to_string()))?;
        if direct != (j + k) as i64 {
            return Err(identity(format!(
                "twists {}+{} compose to {}",
                j, k, direct
            )));
        }
        comparisons += 1;
    }
    Ok(format!("{} comparisons", comparisons))
}

/// Segment writhe is 0, twisted segments measure k, and the crossing total
/// is always even.
fn check_canonical_writhe() -> Result<String, CheckFailure> {
    let mover = MapExpr::prim(
        planemap::translation(vec2(1.0, 0.0)).map_err(|e| numerical(e.to_string()))?,
    );
    let segment = SampledCurve::segment(point(0.0, 0.0), point(1.0, 0.0))
        .map_err(|e| numerical(e.to_string()))?;
    let w = canonical_writhe(&segment, &mover, 6).map_err(|e| numerical(e.to_string()))?;
    if w != 0 {
        return Err(identity(format!("segment writhe {}", w)));
    }
    for k in -3..=3 {
        let twisted = add_twist(&segment, k).map_err(|e| numerical(e.to_string()))?;
        let w = canonical_writhe(&twisted, &mover, 6)
            .map_err(|e| numerical(format!("twist {}: {}", k, e)))?;
        if w != k as i64 {
            return Err(identity(format!("twist {} measured {}", k, w)));
        }
    }
    Ok("segment 0, twists -3..=3 exact, parity clean".to_string())
}

/// The shear coefficient table is supported in a bounded window and its
/// signed sum is the Euler number 0.
fn check_coefficient_tail() -> Result<String, CheckFailure> {
    let action = zoo::torus_shear().map_err(|e| numerical(e.to_string()))?;
    let table =
        coefficients_a(&action, Some(25)).map_err(|e| numerical(e.to_string()))?;
    let support = table.support_radius();
    if support > 10 {
        return Err(numerical(format!("support radius {}", support)));
    }
    if table.signed_sum() != 0 {
        return Err(identity(format!("signed sum {}", table.signed_sum())));
    }
    Ok(format!(
        "support radius {} inside window 25, signed sum 0",
        support
    ))
}

/// Weighted covering identity and sheet convolution on the shear and a
/// seeded C1 torus.
fn check_covering_identities() -> Result<String, CheckFailure> {
    let mut runs = 0;
    let shear = zoo::torus_shear().map_err(|e| numerical(e.to_string()))?;
    for n in 1..=2 {
        let report = covering_trick_check(&shear, n).map_err(|e| match e {
            euler_plane::euler::EulerError::IdentityViolated { .. }
            | euler_plane::euler::EulerError::WeightedIdentityViolated { .. } => {
                identity(format!("torus-shear n={}: {}", n, e))
            }
            other => numerical(format!("torus-shear n={}: {}", n, other)),
        })?;
        if report.euler != 0 {
            return Err(identity(format!(
                "torus-shear n={} reported e={}",
                n, report.euler
            )));
        }
        runs += 1;
    }
    let random = zoo::randomized_torus(1).map_err(|e| numerical(e.to_string()))?;
    let report = covering_trick_check(&random, 1).map_err(|e| numerical(e.to_string()))?;
    if report.euler != 0 {
        return Err(identity(format!(
            "randomized-torus seed 1 reported e={}",
            report.euler
        )));
    }
    runs += 1;
    Ok(format!("{} covering runs, identities exact", runs))
}

/// Perturbing the pair arc does not change the signed sum.
fn check_perturbation_invariance() -> Result<String, CheckFailure> {
    let action = zoo::torus_shear().map_err(|e| numerical(e.to_string()))?;
    let base = euler_via_signed_sum(&action)
        .map_err(|e| numerical(e.to_string()))?
        .value;
    let plan = action.pair.clone().ok_or_else(|| numerical("no pair plan"))?;
    let mut action = action;
    for seed in 0..10u64 {
        let moved = perturb_arc(&plan.tau, 5000 + seed, 0.02)
            .map_err(|e| numerical(format!("seed {}: {}", seed, e)))?;
        action.pair = Some(euler_plane::euler::CommutingPairPlan {
            p: plan.p,
            tau: moved,
            window: plan.window,
        });
        let v = euler_via_signed_sum(&action)
            .map_err(|e| numerical(format!("seed {}: {}", seed, e)))?
            .value;
        if v != base {
            return Err(identity(format!("seed {} measured {}", seed, v)));
        }
    }
    Ok(format!("10 perturbations, signed sum stayed {}", base))
}

/// Turning numbers certify themselves with small residues, and the
/// writhe-difference route agrees with the signed-sum route on the shear.
fn check_turning_residues() -> Result<String, CheckFailure> {
    let ccw = SampledCurve::circle(point(0.0, 0.0), 1.0, true)
        .map_err(|e| numerical(e.to_string()))?;
    let cw = SampledCurve::circle(point(0.0, 0.0), 1.5, false)
        .map_err(|e| numerical(e.to_string()))?;
    let mut worst: f64 = 0.0;
    for (curve, expected) in [(&ccw, 1i64), (&cw, -1)] {
        let t = turning_number(curve).map_err(|e| numerical(e.to_string()))?;
        worst = worst.max(t.residue);
        if t.value != expected {
            return Err(identity(format!(
                "circle turning {} expected {}",
                t.value, expected
            )));
        }
        if t.residue >= tol::TURN_RESIDUE {
            return Err(numerical(format!("residue {:.3}", t.residue)));
        }
    }
    let shear = zoo::torus_shear().map_err(|e| numerical(e.to_string()))?;
    let wd = euler_via_writhe_difference(&shear)
        .map_err(|e| numerical(e.to_string()))?
        .value;
    let ss = euler_via_signed_sum(&shear)
        .map_err(|e| numerical(e.to_string()))?
        .value;
    if wd != ss {
        return Err(identity(format!("writhe {} vs signed sum {}", wd, ss)));
    }
    Ok(format!("worst circle residue {:.2e}", worst))
}

/// Run the whole suite in order. Returns the outcomes and the process exit
/// code: 0 clean, 3 for a numerical failure, 4 if any identity failed.
pub fn run_all() -> (Vec<CheckOutcome>, i32) {
    type Check = (&'static str, fn() -> Result<String, CheckFailure>);
    let checks: Vec<Check> = vec![
        ("differentials vs finite differences", check_differentials),
        ("catalog relators are identities", check_relators),
        ("zero-Euler trio agrees", check_zero_trio),
        ("twist families hit their power", check_twist_families),
        ("writhe twist calculus", check_writhe_calculus),
        ("canonical writhe and parity", check_canonical_writhe),
        ("coefficient tail vanishes", check_coefficient_tail),
        ("covering identities", check_covering_identities),
        ("perturbation invariance", check_perturbation_invariance),
        ("turning residues and cross-checks", check_turning_residues),
    ];
    let mut outcomes = Vec::with_capacity(checks.len());
    let mut exit = 0;
    for (name, f) in checks {
        let result = f();
        if let Err(failure) = &result {
            match failure.class {
                FailureClass::Identity => exit = 4,
                FailureClass::Numerical => {
                    if exit != 4 {
                        exit = 3;
                    }
                }
            }
        }
        outcomes.push(CheckOutcome { name, result });
    }
    (outcomes, exit)
}
