//! `euler-plane`: compute Euler numbers of surface-group actions on the
//! plane from scene files, with deterministic reports and SVG diagnostics.

use std::env;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use euler_plane::euler::{
    compute, windowed_signed_sum, coefficients_a, EulerError, EulerReport, Method,
};
use euler_plane::geom::fnv1a;
use euler_plane::zoo;
use euler_plane_cli::report::{render_report, write_atomic, RunOutcome};
use euler_plane_cli::scene::{
    build_scene, parse_scene, print_scene, recipe_scene, MethodChoice, SceneFile,
};
use euler_plane_cli::{check, svg};

const USAGE: &str = "usage:
  euler-plane run <scene> [--report PATH] [--svg PATH] [--seed U64]
                  [--method lift|graphical|signed-sum|writhe-diff|all] [--verbose]
  euler-plane zoo list
  euler-plane check
  euler-plane help

<scene> is a scene file path, or a catalog name from `euler-plane zoo list`.
Exit codes: 0 success, 2 parse/usage error, 3 numerical failure, 4 identity
violation.";

fn main() -> ExitCode {
    let args: Vec<String> = env::args().skip(1).collect();
    ExitCode::from(dispatch(&args))
}

fn dispatch(args: &[String]) -> u8 {
    match args.first().map(String::as_str) {
        Some("run") => cmd_run(&args[1..]),
        Some("zoo") => cmd_zoo(&args[1..]),
        Some("check") => cmd_check(),
        Some("help") | Some("--help") | Some("-h") => {
            println!("{}", USAGE);
            0
        }
        Some(other) => {
            eprintln!("unknown command `{}`\n{}", other, USAGE);
            2
        }
        None => {
            eprintln!("{}", USAGE);
            2
        }
    }
}

// ---------------------------------------------------------------------------
// zoo / check
// ---------------------------------------------------------------------------

fn cmd_zoo(args: &[String]) -> u8 {
    if args.len() != 1 || args[0] != "list" {
        eprintln!("usage: euler-plane zoo list");
        return 2;
    }
    for item in zoo::list() {
        let param = match item.param {
            zoo::ZooParam::None => "-",
            zoo::ZooParam::TwistPower => "n",
            zoo::ZooParam::Seed => "seed",
            zoo::ZooParam::Genus => "genus",
        };
        println!("{:<26} {:<6} {}", item.name, param, item.summary);
    }
    0
}

fn cmd_check() -> u8 {
    let started = Instant::now();
    let (outcomes, exit) = check::run_all();
    for o in &outcomes {
        match &o.result {
            Ok(detail) => println!("[ ok ] {}: {}", o.name, detail),
            Err(f) => println!("[FAIL] {}: {}", o.name, f.detail),
        }
    }
    let failed = outcomes.iter().filter(|o| o.result.is_err()).count();
    println!(
        "{} checks, {} failed, {} ms",
        outcomes.len(),
        failed,
        started.elapsed().as_millis()
    );
    exit as u8
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunFlags {
    scene: String,
    report: Option<String>,
    svg: Option<String>,
    seed: Option<u64>,
    method: Option<MethodChoice>,
    verbose: bool,
}

fn parse_run_flags(args: &[String]) -> Result<RunFlags, String> {
    let mut scene: Option<String> = None;
    let mut flags = RunFlags {
        scene: String::new(),
        report: None,
        svg: None,
        seed: None,
        method: None,
        verbose: false,
    };
    let mut i = 0;
    let take_value = |args: &[String], i: &mut usize, flag: &str| -> Result<String, String> {
        *i += 1;
        args.get(*i)
            .cloned()
            .ok_or_else(|| format!("{} requires a value", flag))
    };
    while i < args.len() {
        match args[i].as_str() {
            "--report" => flags.report = Some(take_value(args, &mut i, "--report")?),
            "--svg" => flags.svg = Some(take_value(args, &mut i, "--svg")?),
            "--seed" => {
                let v = take_value(args, &mut i, "--seed")?;
                flags.seed =
                    Some(v.parse().map_err(|_| format!("`{}` is not a seed", v))?);
            }
            "--method" => {
                let v = take_value(args, &mut i, "--method")?;
                flags.method = Some(
                    MethodChoice::parse(&v)
                        .ok_or_else(|| format!("`{}` is not a method", v))?,
                );
            }
            "--verbose" => flags.verbose = true,
            other if other.starts_with("--") => {
                return Err(format!("unknown flag `{}`", other));
            }
            other => {
                if scene.is_some() {
                    return Err(format!("unexpected argument `{}`", other));
                }
                scene = Some(other.to_string());
            }
        }
        i += 1;
    }
    flags.scene = scene.ok_or_else(|| "run needs a scene".to_string())?;
    Ok(flags)
}

/// Default genus when a catalog name is used directly as the scene.
fn recipe_default_genus(name: &str) -> usize {
    match name {
        "genus2-smooth" | "pullback-degree-one" => 2,
        _ => 1,
    }
}

fn load_scene(flags: &RunFlags) -> Result<SceneFile, (u8, String)> {
    let path = Path::new(&flags.scene);
    if path.exists() {
        let text = fs::read_to_string(path)
            .map_err(|e| (2u8, format!("cannot read {}: {}", flags.scene, e)))?;
        parse_scene(&text).map_err(|e| (2u8, format!("{}: {}", flags.scene, e)))
    } else if zoo::list().iter().any(|item| item.name == flags.scene) {
        Ok(recipe_scene(
            &flags.scene,
            recipe_default_genus(&flags.scene),
        ))
    } else {
        Err((
            2u8,
            format!(
                "`{}` is neither a scene file nor a catalog name; run `euler-plane zoo list`",
                flags.scene
            ),
        ))
    }
}

/// Remediation hint for an error, when one exists.
fn hint(e: &EulerError) -> Option<&'static str> {
    match e {
        EulerError::Cover(_) => {
            Some("increase R or move the lift basepoint farther from the center")
        }
        EulerError::WindingResidue { .. } => {
            Some("move the development basepoint or shrink loop_radius")
        }
        EulerError::CornerNotRigid { .. } => Some(
            "choose dev_basepoint where the generators are locally similarities (away from twist supports)",
        ),
        EulerError::DegenerateAfterRetries(_) => {
            Some("choose a different tau; its crossings must be transverse")
        }
        EulerError::TailNotVanished { .. } => Some("increase the window N"),
        EulerError::OrbitMaybeNonProper { .. } => Some(
            "the moving generator may not act properly; `--method signed-sum` reports a windowed, non-certified sum",
        ),
        EulerError::Map(_) => Some("keep curves and basepoints off the non-smooth loci"),
        _ => None,
    }
}

fn exit_for(e: &EulerError) -> u8 {
    match e {
        EulerError::IdentityViolated { .. } | EulerError::WeightedIdentityViolated { .. } => 4,
        _ => 3,
    }
}

fn methods_for(choice: MethodChoice) -> Vec<Method> {
    match choice {
        MethodChoice::Lift => vec![Method::Lift],
        MethodChoice::Graphical => vec![Method::Graphical],
        MethodChoice::SignedSum => vec![Method::SignedSum],
        MethodChoice::WritheDiff => vec![Method::WritheDifference],
        MethodChoice::All => Method::all().to_vec(),
    }
}

fn cmd_run(args: &[String]) -> u8 {
    let flags = match parse_run_flags(args) {
        Ok(f) => f,
        Err(msg) => {
            eprintln!("{}\n{}", msg, USAGE);
            return 2;
        }
    };
    let mut scene = match load_scene(&flags) {
        Ok(s) => s,
        Err((code, msg)) => {
            eprintln!("{}", msg);
            return code;
        }
    };
    if let Some(m) = flags.method {
        scene.method.name = m;
    }
    if let Some(seed) = flags.seed {
        scene.method.seed = Some(seed);
    }
    let canonical = print_scene(&scene);
    let scene_digest = fnv1a(canonical.as_bytes());
    if flags.verbose {
        print!("{}", canonical);
        println!();
    }

    let total_start = Instant::now();
    let built = match build_scene(&scene) {
        Ok(b) => b,
        Err(msg) => {
            eprintln!("{}", msg);
            return 2;
        }
    };
    let action = built.action;
    let mut timings: Vec<(String, u128)> = Vec::new();

    // The relator must hold before any Euler number means anything.
    let relator_start = Instant::now();
    let relator = match action.check_relator(built.seed, 200, 0.2, 40.0, built.relator_tolerance)
    {
        Ok(r) => r,
        Err(e) => {
            eprintln!("relator check failed to run: {}", e);
            return 3;
        }
    };
    timings.push(("relator".to_string(), relator_start.elapsed().as_millis()));
    if !relator.passes() {
        eprintln!(
            "relator violation: the generator word moves ({:.3},{:.3}) by {:.3e} (tolerance {:.1e})",
            relator.worst_point.x,
            relator.worst_point.y,
            relator.max_displacement,
            relator.tolerance
        );
        return 4;
    }
    println!(
        "relator ok: max displacement {:.3e} over {} samples",
        relator.max_displacement, relator.samples
    );

    let requested = scene.method.name;
    let all_mode = requested == MethodChoice::All;
    let mut results: Vec<EulerReport> = Vec::new();
    let mut skipped: Vec<(Method, String)> = Vec::new();
    let mut coefficients = None;

    for method in methods_for(requested) {
        let applicable = match method {
            Method::Lift => action.lift.is_some(),
            Method::Graphical => action.graphical.is_some(),
            Method::SignedSum | Method::WritheDifference => action.pair.is_some(),
        };
        if !applicable {
            let reason = "the scene provides no plan for this method".to_string();
            if all_mode {
                skipped.push((method, reason));
                continue;
            }
            eprintln!("{}: {}", method.name(), reason);
            return 2;
        }
        let start = Instant::now();
        match compute(&action, method) {
            Ok(report) => {
                timings.push((method.name().to_string(), start.elapsed().as_millis()));
                println!("{}: {}", method.name(), report.value);
                if flags.verbose {
                    for note in &report.notes {
                        println!("  {}", note);
                    }
                }
                if method == Method::SignedSum {
                    if let Ok(table) = coefficients_a(&action, None) {
                        coefficients = Some(table);
                    }
                }
                results.push(report);
            }
            Err(e @ (EulerError::OrbitMaybeNonProper { .. } | EulerError::TailNotVanished { .. }))
                if method == Method::SignedSum =>
            {
                timings.push((method.name().to_string(), start.elapsed().as_millis()));
                // Exploratory fallback: a windowed sum, clearly non-certified.
                match windowed_signed_sum(&action, None) {
                    Ok(w) => {
                        let mut reason = format!(
                            "non-certified windowed sum {} — {}",
                            w.value,
                            w.caveats.join("; ")
                        );
                        if all_mode {
                            println!("{} skipped: {}", method.name(), reason);
                            skipped.push((method, reason));
                        } else {
                            println!(
                                "{}: {} (NON-CERTIFIED: {})",
                                method.name(),
                                w.value,
                                w.caveats.join("; ")
                            );
                            reason = format!("windowed, non-certified: {}", w.caveats.join("; "));
                            results.push(EulerReport {
                                method,
                                value: w.value,
                                notes: vec![reason],
                            });
                            coefficients = Some(w.table);
                        }
                    }
                    Err(inner) => {
                        eprintln!("{}: {}", method.name(), inner);
                        if let Some(h) = hint(&inner) {
                            eprintln!("hint: {}", h);
                        }
                        return exit_for(&inner);
                    }
                }
                let _ = e;
            }
            Err(e @ (EulerError::OrbitMaybeNonProper { .. } | EulerError::NotApplicable(_)))
                if all_mode =>
            {
                timings.push((method.name().to_string(), start.elapsed().as_millis()));
                let reason = e.to_string();
                println!("{} skipped: {}", method.name(), reason);
                skipped.push((method, reason));
            }
            Err(e) => {
                eprintln!("{}: {}", method.name(), e);
                if let Some(h) = hint(&e) {
                    eprintln!("hint: {}", h);
                }
                return exit_for(&e);
            }
        }
    }

    // Cross-method agreement. Non-certified fallbacks never enter it.
    let certified: Vec<&EulerReport> = results
        .iter()
        .filter(|r| !r.notes.iter().any(|n| n.contains("non-certified")))
        .collect();
    let agreement = if certified.is_empty() {
        None
    } else {
        let value = certified[0].value;
        let agree = certified.iter().all(|r| r.value == value);
        Some((value, agree))
    };
    if let Some((value, agree)) = agreement {
        if agree {
            println!("agreement: {} ({} methods)", value, certified.len());
        } else {
            eprintln!(
                "methods disagree: {}",
                certified
                    .iter()
                    .map(|r| format!("{}={}", r.method.name(), r.value))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
        }
    }
    timings.push(("total".to_string(), total_start.elapsed().as_millis()));

    let outcome = RunOutcome {
        action_name: action.name.clone(),
        genus: action.genus,
        seed: built.seed,
        requested,
        scene_digest,
        relator,
        results,
        skipped,
        coefficients,
        agreement,
        timings_ms: timings,
    };
    let rendered = render_report(&outcome);
    let report_target = flags.report.or_else(|| scene.output.report.clone());
    match report_target {
        Some(path) => {
            if let Err(e) = write_atomic(Path::new(&path), &rendered) {
                eprintln!("cannot write report {}: {}", path, e);
                return 1;
            }
            println!("report written to {}", path);
        }
        None => {
            println!();
            print!("{}", rendered);
        }
    }

    let svg_target = flags.svg.or_else(|| scene.output.svg.clone());
    if let Some(path) = svg_target {
        let weight_n = scene.method.n.unwrap_or(3).max(1) as i64;
        let picture = svg::render(&svg::scene_for_action(&action, weight_n));
        if let Err(e) = write_atomic(Path::new(&path), &picture) {
            eprintln!("cannot write svg {}: {}", path, e);
            return 1;
        }
        println!("svg written to {}", path);
    }

    if let Some((_, agree)) = agreement {
        if !agree {
            return 4;
        }
    }
    0
}
