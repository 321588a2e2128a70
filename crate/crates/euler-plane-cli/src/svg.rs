//! Deterministic SVG rendering of run diagnostics.
//!
//! The picture shows the geometric objects the computation actually used:
//! the pair arc and its image with orientation arrowheads, annulus supports
//! of twist primitives shaded as rings, signed crossing marks, the developed
//! boundary edges when a development plan exists, and the clamped weight
//! graph used by the covering identity, drawn as a polyline with its plateau
//! at "+/-(2n+1)". Output bytes depend only on the inputs.

use euler_plane::curve::{signed_intersections, SampledCurve};
use euler_plane::euler::{covering_weight, developed_edges, pair_picture, PlanarAction};
use euler_plane::geom::Point;
use euler_plane::planemap::{MapExpr, PrimitiveMap};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 800.0;
const MARGIN: f64 = 50.0;

/// A drawable curve with a stroke color and a label.
struct Drawn {
    curve: SampledCurve,
    color: &'static str,
    label: String,
}

/// Everything selected for one picture.
pub struct SvgScene {
    curves: Vec<Drawn>,
    /// (center, inner radius, outer radius) of shaded annulus supports.
    annuli: Vec<(Point, f64, f64)>,
    /// (location, sign) of crossing marks.
    marks: Vec<(Point, i64)>,
    /// Clamp parameter n of the weight graph inset, if drawn.
    weight_n: Option<i64>,
}

impl SvgScene {
    pub fn empty() -> SvgScene {
        SvgScene {
            curves: Vec::new(),
            annuli: Vec::new(),
            marks: Vec::new(),
            weight_n: None,
        }
    }

    pub fn crossing_marks(&self) -> usize {
        self.marks.len()
    }
}

/// Collect the annulus supports appearing anywhere in an expression.
fn collect_annuli(expr: &MapExpr, out: &mut Vec<(Point, f64, f64)>) {
    match expr {
        MapExpr::Prim(PrimitiveMap::AnnulusTwist {
            center,
            r_in,
            r_out,
            ..
        })
        | MapExpr::Prim(PrimitiveMap::SupportedRotation {
            center,
            r_in,
            r_out,
            ..
        }) => {
            let entry = (*center, *r_in, *r_out);
            if !out.contains(&entry) {
                out.push(entry);
            }
        }
        MapExpr::Prim(_) => {}
        MapExpr::Compose(es) => {
            for e in es {
                collect_annuli(e, out);
            }
        }
        MapExpr::Inverse(e) | MapExpr::Power(e, _) => collect_annuli(e, out),
        MapExpr::ConjProduct {
            core, conjugator, ..
        } => {
            collect_annuli(core, out);
            collect_annuli(conjugator, out);
        }
    }
}

/// Select the drawable contents for an action. Marks are best-effort: if the
/// pair curves only touch tangentially the crossing list is left empty.
pub fn scene_for_action(action: &PlanarAction, weight_n: i64) -> SvgScene {
    let mut scene = SvgScene::empty();
    scene.weight_n = Some(weight_n.max(1));
    for g in &action.generators {
        collect_annuli(&g.map, &mut scene.annuli);
    }
    if action.pair.is_some() {
        if let Ok((tau, delta, translate)) = pair_picture(action) {
            if let Ok((_, events)) = signed_intersections(&delta, &translate) {
                for e in events {
                    scene.marks.push((e.location, e.sign));
                }
            }
            scene.curves.push(Drawn {
                curve: tau,
                color: "#1f77b4",
                label: "tau".to_string(),
            });
            scene.curves.push(Drawn {
                curve: delta,
                color: "#d62728",
                label: "delta".to_string(),
            });
            scene.curves.push(Drawn {
                curve: translate,
                color: "#7f7f7f",
                label: "beta(tau)".to_string(),
            });
        }
    }
    if action.graphical.is_some() {
        if let Ok(edges) = developed_edges(action) {
            for (j, edge) in edges.into_iter().enumerate() {
                scene.curves.push(Drawn {
                    curve: edge,
                    color: "#2ca02c",
                    label: if j == 0 {
                        "developed boundary".to_string()
                    } else {
                        String::new()
                    },
                });
            }
        }
    }
    scene
}

/// Integer profile of the clamped weight sequence on a window just wider
/// than its plateau.
pub fn weight_points(n: i64) -> Vec<(i64, i64)> {
    let span = 3 * n + 4;
    (-span..=span).map(|i| (i, covering_weight(n, i))).collect()
}

struct Frame {
    min: Point,
    scale: f64,
    min_y: f64,
}

impl Frame {
    fn to_px(&self, p: Point) -> (f64, f64) {
        (
            MARGIN + (p.x - self.min.x) * self.scale,
            HEIGHT - MARGIN - (p.y - self.min_y) * self.scale,
        )
    }
}

fn fmt(v: f64) -> String {
    format!("{:.3}", v)
}

fn circle_path(cx: f64, cy: f64, r: f64) -> String {
    format!(
        "M {} {} A {} {} 0 1 0 {} {} A {} {} 0 1 0 {} {} Z",
        fmt(cx + r),
        fmt(cy),
        fmt(r),
        fmt(r),
        fmt(cx - r),
        fmt(cy),
        fmt(r),
        fmt(r),
        fmt(cx + r),
        fmt(cy)
    )
}

/// Render the scene to SVG text.
pub fn render(scene: &SvgScene) -> String {
    let mut min = Point { x: f64::MAX, y: f64::MAX };
    let mut max = Point { x: f64::MIN, y: f64::MIN };
    let mut grow = |p: Point| {
        min.x = min.x.min(p.x);
        min.y = min.y.min(p.y);
        max.x = max.x.max(p.x);
        max.y = max.y.max(p.y);
    };
    for d in &scene.curves {
        for s in d.curve.samples() {
            grow(s.point);
        }
    }
    for &(c, _, r_out) in &scene.annuli {
        grow(Point { x: c.x - r_out, y: c.y - r_out });
        grow(Point { x: c.x + r_out, y: c.y + r_out });
    }
    for &(p, _) in &scene.marks {
        grow(p);
    }
    let empty = min.x > max.x;
    if empty {
        min = Point { x: -1.0, y: -1.0 };
        max = Point { x: 1.0, y: 1.0 };
    }
    let w = (max.x - min.x).max(1e-6);
    let h = (max.y - min.y).max(1e-6);
    let scale = ((WIDTH - 2.0 * MARGIN) / w).min((HEIGHT - 2.0 * MARGIN) / h);
    let frame = Frame {
        min,
        scale,
        min_y: min.y,
    };

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        WIDTH as i64, HEIGHT as i64, WIDTH as i64, HEIGHT as i64
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#fcfcfa\"/>\n");

    for &(c, r_in, r_out) in &scene.annuli {
        let (cx, cy) = frame.to_px(c);
        out.push_str(&format!(
            "<path fill-rule=\"evenodd\" d=\"{} {}\" fill=\"#9ecae1\" fill-opacity=\"0.35\" stroke=\"#6baed6\" stroke-width=\"1\"/>\n",
            circle_path(cx, cy, r_out * frame.scale),
            circle_path(cx, cy, r_in * frame.scale)
        ));
    }

    for d in &scene.curves {
        let samples = d.curve.samples();
        if samples.is_empty() {
            continue;
        }
        let stride = (samples.len() / 400).max(1);
        let mut path = String::new();
        let mut first = true;
        for (k, s) in samples.iter().enumerate() {
            if k % stride != 0 && k != samples.len() - 1 {
                continue;
            }
            let (x, y) = frame.to_px(s.point);
            path.push_str(&format!(
                "{}{} {}",
                if first { "M " } else { " L " },
                fmt(x),
                fmt(y)
            ));
            first = false;
        }
        out.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"/>\n",
            path, d.color
        ));
        // Orientation arrowhead at the middle sample.
        let mid = &samples[samples.len() / 2];
        let (px, py) = frame.to_px(mid.point);
        let t = mid.tangent;
        let (dx, dy) = (t.x, -t.y);
        let norm = (dx * dx + dy * dy).sqrt().max(1e-12);
        let (dx, dy) = (dx / norm, dy / norm);
        let (nx, ny) = (-dy, dx);
        out.push_str(&format!(
            "<path d=\"M {} {} L {} {} L {} {} Z\" fill=\"{}\"/>\n",
            fmt(px + 9.0 * dx),
            fmt(py + 9.0 * dy),
            fmt(px - 4.0 * dx + 4.5 * nx),
            fmt(py - 4.0 * dy + 4.5 * ny),
            fmt(px - 4.0 * dx - 4.5 * nx),
            fmt(py - 4.0 * dy - 4.5 * ny),
            d.color
        ));
        if !d.label.is_empty() {
            let (sx, sy) = frame.to_px(samples[0].point);
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{}\">{}</text>\n",
                fmt(sx + 6.0),
                fmt(sy - 6.0),
                d.color,
                d.label
            ));
        }
    }

    for &(p, sign) in &scene.marks {
        let (x, y) = frame.to_px(p);
        let (color, glyph) = if sign > 0 {
            ("#2ca02c", "+")
        } else {
            ("#d62728", "-")
        };
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"6\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            fmt(x),
            fmt(y),
            color
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" fill=\"{}\">{}</text>\n",
            fmt(x),
            fmt(y + 4.0),
            color,
            glyph
        ));
    }

    if let Some(n) = scene.weight_n {
        out.push_str(&render_weight_inset(n));
    }

    out.push_str("</svg>\n");
    out
}

/// Inset axes with the clamped weight polyline. The plateau sits at
/// "+/-(2n+1)".
fn render_weight_inset(n: i64) -> String {
    let pts = weight_points(n);
    let span = 3 * n + 4;
    let plateau = 2 * n + 1;
    let (x0, y0, w, h) = (20.0, 20.0, 240.0, 130.0);
    let sx = w / (2.0 * span as f64);
    let sy = (h / 2.0 - 10.0) / plateau as f64;
    let px = |i: i64| x0 + w / 2.0 + i as f64 * sx;
    let py = |v: i64| y0 + h / 2.0 - v as f64 * sy;
    let mut out = String::new();
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#ffffff\" fill-opacity=\"0.85\" stroke=\"#bbbbbb\"/>\n",
        fmt(x0), fmt(y0), fmt(w), fmt(h)
    ));
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999999\" stroke-width=\"0.7\"/>\n",
        fmt(x0),
        fmt(py(0)),
        fmt(x0 + w),
        fmt(py(0))
    ));
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999999\" stroke-width=\"0.7\"/>\n",
        fmt(px(0)),
        fmt(y0),
        fmt(px(0)),
        fmt(y0 + h)
    ));
    let poly: Vec<String> = pts
        .iter()
        .map(|&(i, v)| format!("{},{}", fmt(px(i)), fmt(py(v))))
        .collect();
    out.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#9467bd\" stroke-width=\"1.6\"/>\n",
        poly.join(" ")
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"#9467bd\">X_{} (plateau at {})</text>\n",
        fmt(x0 + 6.0),
        fmt(y0 + 14.0),
        n,
        plateau
    ));
    out
}
