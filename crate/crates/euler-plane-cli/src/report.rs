//! Deterministic structured reports.
//!
//! A report is a versioned, key-ordered text document. Everything above the
//! `[digest]` line is the hashed body: two runs with equal scenes and seeds
//! produce byte-identical bodies. Wall-clock timings are written after the
//! digest and are deliberately outside the hashed region.

use std::fs;
use std::io;
use std::path::Path;

use euler_plane::euler::{CoefficientTable, EulerReport, Method};
use euler_plane::geom::fnv1a;
use euler_plane::planemap::RelatorReport;

use crate::scene::MethodChoice;

/// Everything a run produced, ready to render.
pub struct RunOutcome {
    pub action_name: String,
    pub genus: usize,
    pub seed: u64,
    pub requested: MethodChoice,
    /// Digest of the canonical scene text.
    pub scene_digest: u64,
    pub relator: RelatorReport,
    pub results: Vec<EulerReport>,
    /// Methods that were requested under `all` but declined to certify a
    /// value, with the reason.
    pub skipped: Vec<(Method, String)>,
    /// Coefficient table when the signed-sum pipeline ran.
    pub coefficients: Option<CoefficientTable>,
    /// Cross-method agreement: common value and whether all agreed.
    pub agreement: Option<(i64, bool)>,
    /// Label, milliseconds. Rendered outside the digest.
    pub timings_ms: Vec<(String, u128)>,
}

/// Render the full report: body, digest line, then timings.
pub fn render_report(out: &RunOutcome) -> String {
    let mut body = String::new();
    body.push_str("euler-plane report v1\n");
    body.push_str("\n[scene]\n");
    body.push_str(&format!("name = {}\n", out.action_name));
    body.push_str(&format!("genus = {}\n", out.genus));
    body.push_str(&format!("method = {}\n", out.requested.name()));
    body.push_str(&format!("seed = {}\n", out.seed));
    body.push_str(&format!("digest = fnv1a:{:016x}\n", out.scene_digest));

    body.push_str("\n[relator]\n");
    body.push_str(&format!(
        "max_displacement = {:.3e}\n",
        out.relator.max_displacement
    ));
    body.push_str(&format!("samples = {}\n", out.relator.samples));
    body.push_str(&format!("tolerance = {:.3e}\n", out.relator.tolerance));
    body.push_str(&format!("passes = {}\n", out.relator.passes()));

    for r in &out.results {
        body.push_str(&format!("\n[result {}]\n", r.method.name()));
        body.push_str(&format!("value = {}\n", r.value));
        for note in &r.notes {
            body.push_str(&format!("note = {}\n", note));
        }
    }
    for (method, reason) in &out.skipped {
        body.push_str(&format!("\n[skipped {}]\n", method.name()));
        body.push_str(&format!("reason = {}\n", reason));
    }
    if let Some(table) = &out.coefficients {
        body.push_str("\n[coefficients]\n");
        body.push_str(&format!("window = {}\n", table.window()));
        body.push_str(&format!("support = {}\n", table.support_radius()));
        body.push_str(&format!("sum = {}\n", table.signed_sum()));
        for (i, a) in table.entries() {
            if a != 0 {
                body.push_str(&format!("a({}) = {}\n", i, a));
            }
        }
        body.push_str("remaining = 0\n");
    }
    if let Some((value, agree)) = out.agreement {
        body.push_str("\n[agreement]\n");
        body.push_str(&format!("value = {}\n", value));
        body.push_str(&format!(
            "methods = {}\n",
            out.results
                .iter()
                .map(|r| r.method.name())
                .collect::<Vec<_>>()
                .join(" ")
        ));
        body.push_str(&format!("agree = {}\n", agree));
    }

    let digest = fnv1a(body.as_bytes());
    let mut full = body;
    full.push_str(&format!("\n[digest]\nbody = fnv1a:{:016x}\n", digest));
    full.push_str("\n[timings]\n");
    for (label, ms) in &out.timings_ms {
        full.push_str(&format!("{}_ms = {}\n", label, ms));
    }
    full
}

/// The hashed region of a rendered report: everything before `[digest]`.
pub fn report_body(rendered: &str) -> &str {
    match rendered.find("\n[digest]\n") {
        Some(pos) => &rendered[..pos],
        None => rendered,
    }
}

/// Write atomically: to a dot-prefixed temporary in the target directory,
/// then rename over the destination.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = match dir {
        Some(d) => d.join(&tmp_name),
        None => Path::new(&tmp_name).to_path_buf(),
    };
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
