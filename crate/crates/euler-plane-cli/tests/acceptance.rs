//! Acceptance suite: one test per criterion, each printing a single
//! "[PASS]"/"[FAIL]" line. Tolerances and time budgets are pinned here and
//! are part of the artifact's contract.

use std::process::Command;
use std::time::{Duration, Instant};

use euler_plane::curve::{
    add_twist, perturb_arc, random_smooth_arc, ArcSpace, SampledCurve,
    writhe_difference,
};
use euler_plane::euler::{
    canonical_writhe, coefficients_a, compute, covering_trick_check, euler_via_graphical,
    euler_via_lift, euler_via_signed_sum, euler_via_writhe_difference, EulerError, Method,
    PlanarAction,
};
use euler_plane::geom::{point, vec2, Jacobian};
use euler_plane::planemap::{self, differential, eval, sample_annulus_points, MapExpr};
use euler_plane::zoo;
use euler_plane::tol;

fn finish(criterion: u32, ok: bool, detail: &str) {
    if ok {
        println!("[PASS] criterion {}: {}", criterion, detail);
    } else {
        println!("[FAIL] criterion {}: {}", criterion, detail);
        panic!("criterion {} failed: {}", criterion, detail);
    }
}

/// The bilateral twist product lifts to Euler number n for n in -3..=3,
/// each run under 5 seconds.
#[test]
fn criterion_1_bestvina_reproduction() {
    let budget = Duration::from_secs(5);
    let mut worst = Duration::ZERO;
    for n in -3..=3 {
        let start = Instant::now();
        let action = zoo::bestvina(n).expect("construction");
        let value = euler_via_lift(&action).expect("lift").value;
        let elapsed = start.elapsed();
        worst = worst.max(elapsed);
        if value != n as i64 || elapsed >= budget {
            finish(
                1,
                false,
                &format!("n={} gave {} in {:?}", n, value, elapsed),
            );
        }
    }
    finish(
        1,
        true,
        &format!("lift = n for n in -3..=3, slowest run {:?}", worst),
    );
}

/// The genus-two action lifts and develops to Euler number n for
/// n in -2..=2, in exact agreement, each run under 30 seconds.
#[test]
fn criterion_2_genus_two_reproduction() {
    let budget = Duration::from_secs(30);
    let mut worst = Duration::ZERO;
    for n in -2..=2 {
        let start = Instant::now();
        let action = zoo::genus2_smooth(n).expect("construction");
        let lift = euler_via_lift(&action).expect("lift").value;
        let dev = euler_via_graphical(&action).expect("development").value;
        let elapsed = start.elapsed();
        worst = worst.max(elapsed);
        if lift != n as i64 || dev != lift || elapsed >= budget {
            finish(
                2,
                false,
                &format!("n={} gave lift {} dev {} in {:?}", n, lift, dev, elapsed),
            );
        }
    }
    finish(
        2,
        true,
        &format!(
            "lift = development = n for n in -2..=2, slowest run {:?}",
            worst
        ),
    );
}

fn applicable_methods(action: &PlanarAction) -> Vec<Method> {
    let mut out = Vec::new();
    if action.lift.is_some() {
        out.push(Method::Lift);
    }
    if action.graphical.is_some() {
        out.push(Method::Graphical);
    }
    if action.pair.is_some() {
        out.push(Method::SignedSum);
        out.push(Method::WritheDifference);
    }
    out
}

/// The zero-Euler trio returns 0 by every applicable method, in exact
/// integer agreement. Methods whose preconditions fail must refuse loudly
/// rather than disagree; on this trio only the strict signed sum of the
/// rotation-twist pair declines (its orbit properness cannot be certified).
#[test]
fn criterion_3_zero_euler_trio() {
    let actions = [
        zoo::torus_shear().unwrap(),
        zoo::commuting_rotation_twist().unwrap(),
        zoo::free_translations().unwrap(),
    ];
    let mut runs = 0;
    let mut declined = Vec::new();
    for action in &actions {
        for method in applicable_methods(action) {
            match compute(action, method) {
                Ok(report) => {
                    if report.value != 0 {
                        finish(
                            3,
                            false,
                            &format!("{} {} returned {}", action.name, method.name(), report.value),
                        );
                    }
                    runs += 1;
                }
                Err(EulerError::OrbitMaybeNonProper { .. }) => {
                    declined.push(format!("{} {}", action.name, method.name()));
                }
                Err(e) => {
                    finish(3, false, &format!("{} {}: {}", action.name, method.name(), e));
                }
            }
        }
    }
    let ok = runs == 9 && declined == vec!["commuting-rotation-twist signed-sum".to_string()];
    finish(
        3,
        ok,
        &format!(
            "{} method runs all zero; declined: [{}]",
            runs,
            declined.join(", ")
        ),
    );
}

/// Shear coefficients vanish beyond the geometric diameter bound,
/// verified on the full window N = 50.
#[test]
fn criterion_4_coefficient_tail() {
    let action = zoo::torus_shear().unwrap();
    let table = coefficients_a(&action, Some(50)).expect("coefficients");
    // The pair translates by (1,0); the x-extents of tau and alpha(tau)
    // bound which translates can still intersect either curve.
    let pair = action.pair.as_ref().unwrap();
    let alpha = &action.generators[0].map;
    let image = euler_plane::curve::push_forward(alpha, &pair.tau).unwrap();
    let span = |c: &SampledCurve| {
        let xs: Vec<f64> = c.samples().iter().map(|s| s.point.x).collect();
        let lo = xs.iter().cloned().fold(f64::MAX, f64::min);
        let hi = xs.iter().cloned().fold(f64::MIN, f64::max);
        (lo, hi)
    };
    let (tau_lo, tau_hi) = span(&pair.tau);
    let (img_lo, img_hi) = span(&image);
    let bound = ((img_hi.max(tau_hi) - img_lo.min(tau_lo)).ceil() as i64) + 1;
    let mut ok = table.support_radius() <= bound;
    for i in -50i64..=50 {
        if i.abs() > bound && table.get(i) != 0 {
            ok = false;
        }
    }
    finish(
        4,
        ok,
        &format!(
            "a_i = 0 for |i| > {} (support radius {}), window 50",
            bound,
            table.support_radius()
        ),
    );
}

/// The clamped-weight covering identity and the sheet convolution hold
/// exactly for n in {1,2,3} on the shear and on 5 seeded C1 torus actions.
#[test]
fn criterion_5_covering_identity() {
    let mut actions = vec![zoo::torus_shear().unwrap()];
    for seed in [3u64, 11, 28, 64, 905] {
        actions.push(zoo::randomized_torus(seed).unwrap());
    }
    let mut runs = 0;
    for action in &actions {
        for n in 1..=3 {
            match covering_trick_check(action, n) {
                Ok(report) => {
                    if report.euler != 0 || report.weighted_sum != 0 {
                        finish(
                            5,
                            false,
                            &format!(
                                "{} n={} weighted {} euler {}",
                                action.name, n, report.weighted_sum, report.euler
                            ),
                        );
                    }
                    runs += 1;
                }
                Err(e) => finish(5, false, &format!("{} n={}: {}", action.name, n, e)),
            }
        }
    }
    finish(
        5,
        runs == 18,
        &format!("{} covering runs, weighted and convolution identities exact", runs),
    );
}

/// Twist insertion shifts the writhe coordinate by exactly k for
/// k in -3..=3 over 100 seeded arcs, and the shift is additive on triples.
#[test]
fn criterion_6_writhe_calculus() {
    let space = ArcSpace {
        a: point(0.0, 0.0),
        b: point(4.0, 0.0),
        transport: Jacobian::IDENTITY,
    };
    let mut comparisons = 0;
    for seed in 0..100u64 {
        let wiggle = 0.4 + 0.004 * seed as f64;
        let x = random_smooth_arc(seed, wiggle).expect("arc");
        for k in -3..=3 {
            let twisted = add_twist(&x, k).expect("twist");
            let wd = writhe_difference(&twisted, &x, &space).expect("difference");
            if wd != k as i64 {
                finish(6, false, &format!("seed {} twist {} measured {}", seed, k, wd));
            }
            comparisons += 1;
        }
        // Additivity on a triple x, y = x+j twists, z = y+k twists.
        let j = (seed as i32 % 5) - 2;
        let k = 2 - (seed as i32 % 7);
        let y = add_twist(&x, j).unwrap();
        let z = add_twist(&y, k).unwrap();
        let xy = writhe_difference(&y, &x, &space).unwrap();
        let yz = writhe_difference(&z, &y, &space).unwrap();
        let xz = writhe_difference(&z, &x, &space).unwrap();
        if xy + yz != xz || xz != (j + k) as i64 {
            finish(
                6,
                false,
                &format!("seed {}: {} + {} != {} (j={}, k={})", seed, xy, yz, xz, j, k),
            );
        }
        comparisons += 1;
    }
    finish(6, true, &format!("{} exact comparisons", comparisons));
}

/// Canonical writhe: straight segment 0, twisted segment k for k in
/// -3..=3, and the crossing-count parity check never fires.
#[test]
fn criterion_7_canonical_writhe() {
    let mover = MapExpr::prim(planemap::translation(vec2(1.0, 0.0)).unwrap());
    let segment = SampledCurve::segment(point(0.0, 0.0), point(1.0, 0.0)).unwrap();
    match canonical_writhe(&segment, &mover, 6) {
        Ok(0) => {}
        Ok(w) => finish(7, false, &format!("segment measured {}", w)),
        Err(e) => finish(7, false, &format!("segment: {}", e)),
    }
    for k in -3..=3 {
        let twisted = add_twist(&segment, k).unwrap();
        match canonical_writhe(&twisted, &mover, 6) {
            Ok(w) if w == k as i64 => {}
            Ok(w) => finish(7, false, &format!("twist {} measured {}", k, w)),
            Err(e) => finish(7, false, &format!("twist {}: {} (parity?)", k, e)),
        }
    }
    finish(7, true, "segment 0, twists -3..=3 exact, parity clean");
}

/// 50 seeded C1 perturbations of the pair arc leave the signed sum of
/// the shear unchanged.
#[test]
fn criterion_8_homotopy_invariance() {
    let action = zoo::torus_shear().unwrap();
    let base = euler_via_signed_sum(&action).expect("signed sum").value;
    let plan = action.pair.clone().unwrap();
    let mut action = action;
    for seed in 0..50u64 {
        let moved = perturb_arc(&plan.tau, 40_000 + seed, 0.02).expect("perturbation");
        action.pair = Some(euler_plane::euler::CommutingPairPlan {
            p: plan.p,
            tau: moved,
            window: plan.window,
        });
        match euler_via_signed_sum(&action) {
            Ok(r) if r.value == base => {}
            Ok(r) => finish(8, false, &format!("seed {} measured {}", seed, r.value)),
            Err(e) => finish(8, false, &format!("seed {}: {}", seed, e)),
        }
    }
    finish(8, true, &format!("50 perturbations, signed sum stayed {}", base));
}

/// Numerical kernels: differentials against central finite differences
/// on 1000 pairs (relative error < 1e-5), turning-number residues bounded
/// by 0.05 across the suite (enforced inside every method call), and the
/// full built-in check suite under 5 minutes.
#[test]
fn criterion_9_numerical_kernels() {
    // Differentials on 1000 (map, point) pairs from the catalog generators.
    let actions = vec![
        zoo::bestvina(1).unwrap(),
        zoo::bestvina(-2).unwrap(),
        zoo::genus2_smooth(1).unwrap(),
        zoo::torus_shear().unwrap(),
        zoo::randomized_torus(1).unwrap(),
        zoo::commuting_rotation_twist().unwrap(),
        zoo::free_translations().unwrap(),
    ];
    let mut exprs: Vec<&MapExpr> = Vec::new();
    for a in &actions {
        for g in &a.generators {
            exprs.push(&g.map);
        }
    }
    let points = sample_annulus_points(77, 1200 / exprs.len() + 1, 0.3, 6.0);
    let h = tol::DIFFERENTIAL_STEP;
    let mut used = 0;
    let mut worst: f64 = 0.0;
    'outer: for expr in &exprs {
        for &p in &points {
            if used >= 1000 {
                break 'outer;
            }
            let jac = match differential(expr, p) {
                Ok(j) => j,
                Err(_) => continue,
            };
            let f = |q| eval(expr, q);
            let (xp, xm, yp, ym) = match (
                f(point(p.x + h, p.y)),
                f(point(p.x - h, p.y)),
                f(point(p.x, p.y + h)),
                f(point(p.x, p.y - h)),
            ) {
                (Ok(a), Ok(b), Ok(c), Ok(d)) => (a, b, c, d),
                _ => continue,
            };
            let fd = [
                (xp.x - xm.x) / (2.0 * h),
                (yp.x - ym.x) / (2.0 * h),
                (xp.y - xm.y) / (2.0 * h),
                (yp.y - ym.y) / (2.0 * h),
            ];
            let an = [jac.a, jac.b, jac.c, jac.d];
            let scale = an.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            let rel = an
                .iter()
                .zip(fd.iter())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / scale;
            worst = worst.max(rel);
            if rel >= tol::DIFFERENTIAL_REL_TOL {
                finish(
                    9,
                    false,
                    &format!("differential off by {:.2e} at ({:.3},{:.3})", rel, p.x, p.y),
                );
            }
            used += 1;
        }
    }
    if used < 1000 {
        finish(9, false, &format!("only {} differentiable pairs", used));
    }

    // Turning residues: every turning-number consumer in the library
    // enforces the 0.05 bound internally (it errors otherwise), so running
    // the methods is the residue check; spot-check the reported residues.
    let shear = zoo::torus_shear().unwrap();
    let report = euler_via_graphical(&shear).unwrap();
    let residue_note = report
        .notes
        .iter()
        .find(|n| n.contains("turning residue"))
        .cloned()
        .unwrap_or_default();

    // The full binary check suite, timed.
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_euler-plane"))
        .arg("check")
        .output()
        .expect("check should run");
    let elapsed = start.elapsed();
    if !out.status.success() || elapsed >= Duration::from_secs(300) {
        finish(
            9,
            false,
            &format!("`euler-plane check` exit {:?} in {:?}", out.status.code(), elapsed),
        );
    }
    finish(
        9,
        true,
        &format!(
            "1000 pairs worst {:.2e}; {}; `euler-plane check` clean in {:?}",
            worst, residue_note, elapsed
        ),
    );
}

/// The artifact verifies instances and identities only; universal
/// claims over all actions are not certified by running finitely many
/// cases, and the property suites above stand in for them.
#[test]
fn criterion_10_instances_only() {
    // Nothing to compute: this criterion pins the scope of the whole suite.
    // The strict methods refusing to certify (see criterion 3 and the
    // non-certified windowed sums) are the mechanism that keeps instance
    // verification honest.
    let shear_wd = euler_via_writhe_difference(&zoo::torus_shear().unwrap())
        .unwrap()
        .value;
    finish(
        10,
        shear_wd == 0,
        "instance-level verification only; universal claims are out of scope",
    );
}
