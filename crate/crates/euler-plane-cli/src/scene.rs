//! Scene files: a restricted, line-oriented key-block text format with an
//! explicit version header.
//!
//! A scene describes one surface-group action on the plane, either by
//! referencing a catalog recipe or by declaring primitive maps and generator
//! words explicitly, together with the method to run and where to write the
//! outputs. The format is deliberately small so that printing a parsed scene
//! and parsing it again is the identity on the parsed structure, and so that
//! every parse error carries an exact line and column.
//!
//! ```text
//! euler-plane scene v1
//!
//! [group]
//! genus = 1
//!
//! [primitives]
//! s = strip_shear y_lo=0.5 y_hi=1.5 dx=0.8 dy=0
//! t = translation dx=1 dy=0
//!
//! [generators]
//! a1 = s
//! b1 = t
//!
//! [method]
//! name = all
//! basepoint = (3,0)
//! R = 0.25
//! dev_basepoint = (0.3,0)
//! loop_radius = 0.15
//! p = (0,0)
//! tau = arch 0 1 2
//!
//! [output]
//! report = out/report.txt
//! ```
//!
//! Generator words are products over previously declared names: `*` composes
//! left-to-right in function order (the rightmost factor acts first), `^k`
//! raises to an integer power, and a postfix `'` inverts. A scene that names
//! a recipe in `[group]` must not declare primitives or generators; the
//! recipe's parameters are read from the `[method]` block (`n`, `seed`) and
//! from `genus`.

use std::collections::HashMap;
use std::fmt;

use euler_plane::curve::SampledCurve;
use euler_plane::euler::{
    CommutingPairPlan, GraphicalPlan, LiftPlan, NamedGenerator, PlanarAction,
};
use euler_plane::geom::{point, vec2, Point};
use euler_plane::planemap::{self, MapExpr, PrimitiveMap};
use euler_plane::zoo::{self, ZooParams};
use euler_plane::tol;

/// Exact first line of every scene file.
pub const SCENE_HEADER: &str = "euler-plane scene v1";

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneErrorKind {
    /// Malformed line, unknown block or key, duplicate declaration.
    Syntax,
    /// A primitive definition names a kind that does not exist.
    UnknownPrimitive,
    /// A generator word references a name that has not been declared.
    UndeclaredGenerator,
    /// A value failed validation (type, range, or map-constructor contract).
    BadParameter,
}

/// First error found while parsing, with its 1-based line and column and an
/// expected-token hint where one makes sense.
#[derive(Debug, Clone)]
pub struct SceneError {
    pub line: usize,
    pub col: usize,
    pub kind: SceneErrorKind,
    pub message: String,
    pub expected: Option<String>,
}

impl fmt::Display for SceneError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}",
            self.line, self.col, self.message
        )?;
        if let Some(e) = &self.expected {
            write!(f, " (expected {})", e)?;
        }
        Ok(())
    }
}

impl std::error::Error for SceneError {}

fn err(
    line: usize,
    col: usize,
    kind: SceneErrorKind,
    message: impl Into<String>,
    expected: Option<&str>,
) -> SceneError {
    SceneError {
        line,
        col,
        kind,
        message: message.into(),
        expected: expected.map(str::to_string),
    }
}

// ---------------------------------------------------------------------------
// Parsed structure
// ---------------------------------------------------------------------------

/// One postfix operation on a word factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorOp {
    Inverse,
    Power(i32),
}

/// A named factor with its postfix operations, in source order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub name: String,
    pub ops: Vec<FactorOp>,
}

/// A product of factors; the rightmost factor acts first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word(pub Vec<Factor>);

/// Which Euler-number method(s) to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MethodChoice {
    Lift,
    Graphical,
    SignedSum,
    WritheDiff,
    #[default]
    All,
}

impl MethodChoice {
    pub fn parse(s: &str) -> Option<MethodChoice> {
        match s {
            "lift" => Some(MethodChoice::Lift),
            "graphical" => Some(MethodChoice::Graphical),
            "signed-sum" => Some(MethodChoice::SignedSum),
            "writhe-diff" => Some(MethodChoice::WritheDiff),
            "all" => Some(MethodChoice::All),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MethodChoice::Lift => "lift",
            MethodChoice::Graphical => "graphical",
            MethodChoice::SignedSum => "signed-sum",
            MethodChoice::WritheDiff => "writhe-diff",
            MethodChoice::All => "all",
        }
    }
}

/// A curve literal for the pair arc.
#[derive(Debug, Clone, PartialEq)]
pub enum CurveLiteral {
    Segment { a: Point, b: Point },
    Arch { x0: f64, x1: f64, height: f64 },
}

/// The `[method]` block: method name plus numeric and geometric parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MethodBlock {
    pub name: MethodChoice,
    /// Twist power for recipes that take one.
    pub n: Option<i32>,
    /// Signed-sum window (key `N`).
    pub cap: Option<i64>,
    pub seed: Option<u64>,
    /// Forbidden radius for the lift (key `R`); 0 means puncture mode.
    pub radius: Option<f64>,
    pub center: Option<Point>,
    pub basepoint: Option<Point>,
    pub dev_basepoint: Option<Point>,
    pub loop_radius: Option<f64>,
    pub p: Option<Point>,
    pub tau: Option<CurveLiteral>,
    pub tolerance: Option<f64>,
}

/// The `[output]` block.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OutputBlock {
    pub report: Option<String>,
    pub svg: Option<String>,
}

/// A fully validated scene file.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFile {
    pub genus: usize,
    pub recipe: Option<String>,
    pub primitives: Vec<(String, PrimitiveMap)>,
    pub generators: Vec<(String, Word)>,
    pub method: MethodBlock,
    pub output: OutputBlock,
}

// ---------------------------------------------------------------------------
// Tokenizing helpers
// ---------------------------------------------------------------------------

/// Split on ASCII whitespace, keeping the 1-based column of each token.
fn split_tokens(s: &str, base_col: usize) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        out.push((base_col + start, &s[start..i]));
    }
    out
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_f64(line: usize, col: usize, s: &str) -> Result<f64, SceneError> {
    let v: f64 = s.parse().map_err(|_| {
        err(
            line,
            col,
            SceneErrorKind::BadParameter,
            format!("`{}` is not a number", s),
            Some("a finite decimal number"),
        )
    })?;
    if !v.is_finite() {
        return Err(err(
            line,
            col,
            SceneErrorKind::BadParameter,
            format!("`{}` is not finite", s),
            Some("a finite decimal number"),
        ));
    }
    Ok(v)
}

fn parse_i32(line: usize, col: usize, s: &str) -> Result<i32, SceneError> {
    s.parse().map_err(|_| {
        err(
            line,
            col,
            SceneErrorKind::BadParameter,
            format!("`{}` is not an integer", s),
            Some("an integer"),
        )
    })
}

fn parse_i64(line: usize, col: usize, s: &str) -> Result<i64, SceneError> {
    s.parse().map_err(|_| {
        err(
            line,
            col,
            SceneErrorKind::BadParameter,
            format!("`{}` is not an integer", s),
            Some("an integer"),
        )
    })
}

fn parse_u64(line: usize, col: usize, s: &str) -> Result<u64, SceneError> {
    s.parse().map_err(|_| {
        err(
            line,
            col,
            SceneErrorKind::BadParameter,
            format!("`{}` is not a non-negative integer", s),
            Some("a non-negative integer"),
        )
    })
}

/// Parse `(x,y)` with optional internal spaces.
fn parse_point(line: usize, col: usize, s: &str) -> Result<Point, SceneError> {
    let t = s.trim();
    let inner = t
        .strip_prefix('(')
        .and_then(|u| u.strip_suffix(')'))
        .ok_or_else(|| {
            err(
                line,
                col,
                SceneErrorKind::BadParameter,
                format!("`{}` is not a point", s),
                Some("(x,y)"),
            )
        })?;
    let mut parts = inner.splitn(2, ',');
    let (xs, ys) = match (parts.next(), parts.next()) {
        (Some(a), Some(b)) => (a.trim(), b.trim()),
        _ => {
            return Err(err(
                line,
                col,
                SceneErrorKind::BadParameter,
                format!("`{}` is not a point", s),
                Some("(x,y)"),
            ))
        }
    };
    Ok(point(
        parse_f64(line, col, xs)?,
        parse_f64(line, col, ys)?,
    ))
}

// ---------------------------------------------------------------------------
// Word grammar
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokKind {
    Ident,
    Star,
    Caret,
    Tick,
    Int,
}

struct Tok<'a> {
    kind: TokKind,
    text: &'a str,
    col: usize,
}

fn lex_word(line: usize, s: &str, base_col: usize) -> Result<Vec<Tok<'_>>, SceneError> {
    let bytes = s.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let col = base_col + i;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            toks.push(Tok {
                kind: TokKind::Ident,
                text: &s[start..i],
                col,
            });
        } else if c == '*' {
            toks.push(Tok {
                kind: TokKind::Star,
                text: &s[i..i + 1],
                col,
            });
            i += 1;
        } else if c == '^' {
            toks.push(Tok {
                kind: TokKind::Caret,
                text: &s[i..i + 1],
                col,
            });
            i += 1;
        } else if c == '\'' {
            toks.push(Tok {
                kind: TokKind::Tick,
                text: &s[i..i + 1],
                col,
            });
            i += 1;
        } else if c.is_ascii_digit()
            || (c == '-' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit())
        {
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            toks.push(Tok {
                kind: TokKind::Int,
                text: &s[start..i],
                col,
            });
        } else {
            return Err(err(
                line,
                col,
                SceneErrorKind::Syntax,
                format!("unexpected character `{}` in word", c),
                Some("a name, `*`, `^`, `'` or an integer exponent"),
            ));
        }
    }
    Ok(toks)
}

/// Parse a word over declared names; `declared` is consulted so that a
/// reference to an unknown name is reported at its exact position.
fn parse_word(
    line: usize,
    s: &str,
    base_col: usize,
    declared: &HashMap<String, MapExpr>,
) -> Result<Word, SceneError> {
    let toks = lex_word(line, s, base_col)?;
    let mut factors = Vec::new();
    let mut i = 0;
    loop {
        let tok = toks.get(i).ok_or_else(|| {
            err(
                line,
                base_col + s.len(),
                SceneErrorKind::Syntax,
                "word ends where a factor was required",
                Some("a declared name"),
            )
        })?;
        if tok.kind != TokKind::Ident {
            return Err(err(
                line,
                tok.col,
                SceneErrorKind::Syntax,
                format!("`{}` cannot start a factor", tok.text),
                Some("a declared name"),
            ));
        }
        if !declared.contains_key(tok.text) {
            return Err(err(
                line,
                tok.col,
                SceneErrorKind::UndeclaredGenerator,
                format!("`{}` has not been declared", tok.text),
                Some("a name from [primitives] or an earlier generator"),
            ));
        }
        let mut factor = Factor {
            name: tok.text.to_string(),
            ops: Vec::new(),
        };
        i += 1;
        while let Some(tok) = toks.get(i) {
            match tok.kind {
                TokKind::Tick => {
                    factor.ops.push(FactorOp::Inverse);
                    i += 1;
                }
                TokKind::Caret => {
                    i += 1;
                    let exp = toks.get(i).ok_or_else(|| {
                        err(
                            line,
                            tok.col + 1,
                            SceneErrorKind::Syntax,
                            "`^` must be followed by an integer",
                            Some("an integer exponent"),
                        )
                    })?;
                    if exp.kind != TokKind::Int {
                        return Err(err(
                            line,
                            exp.col,
                            SceneErrorKind::Syntax,
                            format!("`{}` is not an integer exponent", exp.text),
                            Some("an integer exponent"),
                        ));
                    }
                    factor
                        .ops
                        .push(FactorOp::Power(parse_i32(line, exp.col, exp.text)?));
                    i += 1;
                }
                _ => break,
            }
        }
        factors.push(factor);
        match toks.get(i) {
            None => break,
            Some(tok) if tok.kind == TokKind::Star => {
                i += 1;
            }
            Some(tok) => {
                return Err(err(
                    line,
                    tok.col,
                    SceneErrorKind::Syntax,
                    format!("`{}` cannot follow a factor", tok.text),
                    Some("`*` or end of line"),
                ));
            }
        }
    }
    Ok(Word(factors))
}

/// Resolve a word to a map expression against an environment of declared
/// names. Single-factor words resolve without a wrapping composition.
pub fn word_to_expr(word: &Word, env: &HashMap<String, MapExpr>) -> MapExpr {
    let factor_expr = |f: &Factor| -> MapExpr {
        let mut e = env
            .get(&f.name)
            .expect("word was validated against declarations")
            .clone();
        for op in &f.ops {
            e = match op {
                FactorOp::Inverse => e.inverse(),
                FactorOp::Power(k) => e.power(*k),
            };
        }
        e
    };
    let mut exprs: Vec<MapExpr> = word.0.iter().map(factor_expr).collect();
    if exprs.len() == 1 {
        exprs.pop().unwrap()
    } else {
        MapExpr::compose(exprs)
    }
}

// ---------------------------------------------------------------------------
// Primitive definitions
// ---------------------------------------------------------------------------

const PRIMITIVE_KINDS: &str =
    "translation, dilation, rotation, annulus_twist, supported_rotation, step_translation, strip_shear";

/// Parse the value of a `[primitives]` entry: a kind followed by `key=value`
/// parameters, validated against the map constructors.
fn parse_primitive(line: usize, s: &str, base_col: usize) -> Result<PrimitiveMap, SceneError> {
    let toks = split_tokens(s, base_col);
    let (kind_col, kind) = *toks.first().ok_or_else(|| {
        err(
            line,
            base_col,
            SceneErrorKind::Syntax,
            "empty primitive definition",
            Some(PRIMITIVE_KINDS),
        )
    })?;
    let mut params: HashMap<&str, (usize, &str)> = HashMap::new();
    for &(col, tok) in &toks[1..] {
        let eq = tok.find('=').ok_or_else(|| {
            err(
                line,
                col,
                SceneErrorKind::Syntax,
                format!("`{}` is not a key=value parameter", tok),
                Some("key=value"),
            )
        })?;
        let key = &tok[..eq];
        let val = &tok[eq + 1..];
        if params.insert(key, (col + eq + 1, val)).is_some() {
            return Err(err(
                line,
                col,
                SceneErrorKind::Syntax,
                format!("parameter `{}` given twice", key),
                None,
            ));
        }
    }
    let mut take_f64 = |key: &str| -> Result<f64, SceneError> {
        let (col, val) = params.remove(key).ok_or_else(|| {
            err(
                line,
                kind_col,
                SceneErrorKind::BadParameter,
                format!("`{}` requires parameter `{}`", kind, key),
                None,
            )
        })?;
        parse_f64(line, col, val)
    };
    let result = match kind {
        "translation" => {
            let dx = take_f64("dx")?;
            let dy = take_f64("dy")?;
            planemap::translation(vec2(dx, dy))
        }
        "dilation" => {
            let cx = take_f64("cx")?;
            let cy = take_f64("cy")?;
            let factor = take_f64("factor")?;
            planemap::dilation(point(cx, cy), factor)
        }
        "rotation" => {
            let cx = take_f64("cx")?;
            let cy = take_f64("cy")?;
            let angle = take_f64("angle")?;
            planemap::rotation(point(cx, cy), angle)
        }
        "annulus_twist" => {
            let cx = take_f64("cx")?;
            let cy = take_f64("cy")?;
            let r_in = take_f64("r_in")?;
            let r_out = take_f64("r_out")?;
            let (pcol, pval) = params.remove("power").ok_or_else(|| {
                err(
                    line,
                    kind_col,
                    SceneErrorKind::BadParameter,
                    "`annulus_twist` requires parameter `power`",
                    None,
                )
            })?;
            let power = parse_i32(line, pcol, pval)?;
            planemap::annulus_twist(point(cx, cy), r_in, r_out, power)
        }
        "supported_rotation" => {
            let cx = take_f64("cx")?;
            let cy = take_f64("cy")?;
            let r_in = take_f64("r_in")?;
            let r_out = take_f64("r_out")?;
            let angle = take_f64("angle")?;
            planemap::supported_rotation(point(cx, cy), r_in, r_out, angle)
        }
        "step_translation" => {
            let dx = take_f64("dx")?;
            let dy = take_f64("dy")?;
            let x_lo = take_f64("x_lo")?;
            let x_hi = take_f64("x_hi")?;
            planemap::step_translation(vec2(dx, dy), x_lo, x_hi)
        }
        "strip_shear" => {
            let y_lo = take_f64("y_lo")?;
            let y_hi = take_f64("y_hi")?;
            let dx = take_f64("dx")?;
            let dy = take_f64("dy")?;
            planemap::strip_shear(y_lo, y_hi, dx, dy)
        }
        other => {
            return Err(err(
                line,
                kind_col,
                SceneErrorKind::UnknownPrimitive,
                format!("`{}` is not a primitive map kind", other),
                Some(PRIMITIVE_KINDS),
            ))
        }
    };
    if let Some((&key, &(col, _))) = params.iter().next() {
        return Err(err(
            line,
            col,
            SceneErrorKind::Syntax,
            format!("`{}` does not take parameter `{}`", kind, key),
            None,
        ));
    }
    result.map_err(|e| {
        err(
            line,
            kind_col,
            SceneErrorKind::BadParameter,
            e.to_string(),
            None,
        )
    })
}

/// Parse a curve literal: `segment (x,y) (x,y)` or `arch x0 x1 height`.
fn parse_curve(line: usize, s: &str, base_col: usize) -> Result<CurveLiteral, SceneError> {
    let toks = split_tokens(s, base_col);
    let (kind_col, kind) = *toks.first().ok_or_else(|| {
        err(
            line,
            base_col,
            SceneErrorKind::Syntax,
            "empty curve",
            Some("segment or arch"),
        )
    })?;
    match kind {
        "segment" => {
            if toks.len() != 3 {
                return Err(err(
                    line,
                    kind_col,
                    SceneErrorKind::BadParameter,
                    "segment takes two points",
                    Some("segment (x,y) (x,y)"),
                ));
            }
            let a = parse_point(line, toks[1].0, toks[1].1)?;
            let b = parse_point(line, toks[2].0, toks[2].1)?;
            Ok(CurveLiteral::Segment { a, b })
        }
        "arch" => {
            if toks.len() != 4 {
                return Err(err(
                    line,
                    kind_col,
                    SceneErrorKind::BadParameter,
                    "arch takes x0, x1 and a height",
                    Some("arch x0 x1 height"),
                ));
            }
            Ok(CurveLiteral::Arch {
                x0: parse_f64(line, toks[1].0, toks[1].1)?,
                x1: parse_f64(line, toks[2].0, toks[2].1)?,
                height: parse_f64(line, toks[3].0, toks[3].1)?,
            })
        }
        other => Err(err(
            line,
            kind_col,
            SceneErrorKind::Syntax,
            format!("`{}` is not a curve kind", other),
            Some("segment or arch"),
        )),
    }
}

// ---------------------------------------------------------------------------
// Scene parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    Group,
    Primitives,
    Generators,
    Method,
    Output,
}

/// Parse a scene file. The first error is returned with its position.
pub fn parse_scene(text: &str) -> Result<SceneFile, SceneError> {
    let mut genus: Option<usize> = None;
    let mut recipe: Option<String> = None;
    let mut primitives: Vec<(String, PrimitiveMap)> = Vec::new();
    let mut generators: Vec<(String, Word)> = Vec::new();
    let mut method = MethodBlock::default();
    let mut output = OutputBlock::default();

    // Names visible to generator words, with their resolved expressions.
    let mut env: HashMap<String, MapExpr> = HashMap::new();
    let mut seen_blocks: Vec<Block> = Vec::new();
    let mut block: Option<Block> = None;
    let mut seen_keys: Vec<(Block, String)> = Vec::new();
    let mut primitives_line = 0usize;
    let mut generators_line = 0usize;
    let mut recipe_line = 0usize;
    let mut header_seen = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !header_seen {
            if trimmed != SCENE_HEADER {
                return Err(err(
                    line_no,
                    1,
                    SceneErrorKind::Syntax,
                    "missing or wrong version header",
                    Some(&format!("`{}` as the first line", SCENE_HEADER)),
                ));
            }
            header_seen = true;
            continue;
        }
        let indent = raw.len() - raw.trim_start().len();
        let col0 = indent + 1;
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| {
                err(
                    line_no,
                    col0,
                    SceneErrorKind::Syntax,
                    "unterminated block header",
                    Some("[group], [primitives], [generators], [method] or [output]"),
                )
            })?;
            let b = match name {
                "group" => Block::Group,
                "primitives" => {
                    primitives_line = line_no;
                    Block::Primitives
                }
                "generators" => {
                    generators_line = line_no;
                    Block::Generators
                }
                "method" => Block::Method,
                "output" => Block::Output,
                other => {
                    return Err(err(
                        line_no,
                        col0,
                        SceneErrorKind::Syntax,
                        format!("unknown block `[{}]`", other),
                        Some("[group], [primitives], [generators], [method] or [output]"),
                    ))
                }
            };
            if seen_blocks.contains(&b) {
                return Err(err(
                    line_no,
                    col0,
                    SceneErrorKind::Syntax,
                    format!("block `[{}]` given twice", name),
                    None,
                ));
            }
            seen_blocks.push(b);
            block = Some(b);
            continue;
        }
        let b = block.ok_or_else(|| {
            err(
                line_no,
                col0,
                SceneErrorKind::Syntax,
                "entry outside any block",
                Some("a block header like [group]"),
            )
        })?;
        let eq = raw.find('=').ok_or_else(|| {
            err(
                line_no,
                col0,
                SceneErrorKind::Syntax,
                "entry is not of the form key = value",
                Some("key = value"),
            )
        })?;
        let key = raw[..eq].trim();
        let key_col = raw.find(key).map_or(col0, |p| p + 1);
        if !is_ident(key) && key != "N" && key != "R" {
            return Err(err(
                line_no,
                key_col,
                SceneErrorKind::Syntax,
                format!("`{}` is not a valid key", key),
                None,
            ));
        }
        let val_region = &raw[eq + 1..];
        let val = val_region.trim();
        let val_col = eq + 2 + (val_region.len() - val_region.trim_start().len());
        if val.is_empty() {
            return Err(err(
                line_no,
                val_col,
                SceneErrorKind::Syntax,
                format!("`{}` has an empty value", key),
                None,
            ));
        }
        // Primitives and generators may repeat keys across blocks but not
        // within; scalar blocks reject duplicates outright.
        if matches!(b, Block::Group | Block::Method | Block::Output) {
            let owned = (b, key.to_string());
            if seen_keys.contains(&owned) {
                return Err(err(
                    line_no,
                    key_col,
                    SceneErrorKind::Syntax,
                    format!("key `{}` given twice", key),
                    None,
                ));
            }
            seen_keys.push(owned);
        }
        match b {
            Block::Group => match key {
                "genus" => {
                    let g = parse_u64(line_no, val_col, val)? as usize;
                    if g == 0 {
                        return Err(err(
                            line_no,
                            val_col,
                            SceneErrorKind::BadParameter,
                            "genus must be at least 1",
                            None,
                        ));
                    }
                    genus = Some(g);
                }
                "recipe" => {
                    if !val
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                    {
                        return Err(err(
                            line_no,
                            val_col,
                            SceneErrorKind::BadParameter,
                            format!("`{}` is not a recipe name", val),
                            None,
                        ));
                    }
                    recipe = Some(val.to_string());
                    recipe_line = line_no;
                }
                other => {
                    return Err(err(
                        line_no,
                        key_col,
                        SceneErrorKind::Syntax,
                        format!("unknown key `{}` in [group]", other),
                        Some("genus or recipe"),
                    ))
                }
            },
            Block::Primitives => {
                if !is_ident(key) {
                    return Err(err(
                        line_no,
                        key_col,
                        SceneErrorKind::Syntax,
                        format!("`{}` is not a valid primitive name", key),
                        None,
                    ));
                }
                if env.contains_key(key) {
                    return Err(err(
                        line_no,
                        key_col,
                        SceneErrorKind::Syntax,
                        format!("`{}` declared twice", key),
                        None,
                    ));
                }
                let prim = parse_primitive(line_no, val, val_col)?;
                env.insert(key.to_string(), MapExpr::prim(prim.clone()));
                primitives.push((key.to_string(), prim));
            }
            Block::Generators => {
                if !is_ident(key) {
                    return Err(err(
                        line_no,
                        key_col,
                        SceneErrorKind::Syntax,
                        format!("`{}` is not a valid generator name", key),
                        None,
                    ));
                }
                if env.contains_key(key) {
                    return Err(err(
                        line_no,
                        key_col,
                        SceneErrorKind::Syntax,
                        format!("`{}` declared twice", key),
                        None,
                    ));
                }
                let word = parse_word(line_no, val, val_col, &env)?;
                let expr = word_to_expr(&word, &env);
                env.insert(key.to_string(), expr);
                generators.push((key.to_string(), word));
            }
            Block::Method => match key {
                "name" => {
                    method.name = MethodChoice::parse(val).ok_or_else(|| {
                        err(
                            line_no,
                            val_col,
                            SceneErrorKind::BadParameter,
                            format!("`{}` is not a method", val),
                            Some("lift, graphical, signed-sum, writhe-diff or all"),
                        )
                    })?;
                }
                "n" => method.n = Some(parse_i32(line_no, val_col, val)?),
                "N" => {
                    let cap = parse_i64(line_no, val_col, val)?;
                    if cap < 1 {
                        return Err(err(
                            line_no,
                            val_col,
                            SceneErrorKind::BadParameter,
                            "window N must be at least 1",
                            None,
                        ));
                    }
                    method.cap = Some(cap);
                }
                "seed" => method.seed = Some(parse_u64(line_no, val_col, val)?),
                "R" => {
                    let r = parse_f64(line_no, val_col, val)?;
                    if r < 0.0 {
                        return Err(err(
                            line_no,
                            val_col,
                            SceneErrorKind::BadParameter,
                            "R must be non-negative (0 selects puncture mode)",
                            None,
                        ));
                    }
                    method.radius = Some(r);
                }
                "center" => method.center = Some(parse_point(line_no, val_col, val)?),
                "basepoint" => method.basepoint = Some(parse_point(line_no, val_col, val)?),
                "dev_basepoint" => {
                    method.dev_basepoint = Some(parse_point(line_no, val_col, val)?)
                }
                "loop_radius" => {
                    let r = parse_f64(line_no, val_col, val)?;
                    if r <= 0.0 {
                        return Err(err(
                            line_no,
                            val_col,
                            SceneErrorKind::BadParameter,
                            "loop_radius must be positive",
                            None,
                        ));
                    }
                    method.loop_radius = Some(r);
                }
                "p" => method.p = Some(parse_point(line_no, val_col, val)?),
                "tau" => method.tau = Some(parse_curve(line_no, val, val_col)?),
                "tolerance" => {
                    let t = parse_f64(line_no, val_col, val)?;
                    if t <= 0.0 {
                        return Err(err(
                            line_no,
                            val_col,
                            SceneErrorKind::BadParameter,
                            "tolerance must be positive",
                            None,
                        ));
                    }
                    method.tolerance = Some(t);
                }
                other => {
                    return Err(err(
                        line_no,
                        key_col,
                        SceneErrorKind::Syntax,
                        format!("unknown key `{}` in [method]", other),
                        Some("name, n, N, seed, R, center, basepoint, dev_basepoint, loop_radius, p, tau or tolerance"),
                    ))
                }
            },
            Block::Output => match key {
                "report" => output.report = Some(val.to_string()),
                "svg" => output.svg = Some(val.to_string()),
                other => {
                    return Err(err(
                        line_no,
                        key_col,
                        SceneErrorKind::Syntax,
                        format!("unknown key `{}` in [output]", other),
                        Some("report or svg"),
                    ))
                }
            },
        }
    }

    if !header_seen {
        return Err(err(
            1,
            1,
            SceneErrorKind::Syntax,
            "empty scene",
            Some(&format!("`{}` as the first line", SCENE_HEADER)),
        ));
    }
    let genus = genus.ok_or_else(|| {
        err(
            1,
            1,
            SceneErrorKind::BadParameter,
            "scene does not declare a genus",
            Some("a [group] block with `genus = g`"),
        )
    })?;
    if recipe.is_some() {
        if !primitives.is_empty() {
            return Err(err(
                primitives_line,
                1,
                SceneErrorKind::Syntax,
                "a recipe scene must not declare primitives",
                None,
            ));
        }
        if !generators.is_empty() {
            return Err(err(
                generators_line,
                1,
                SceneErrorKind::Syntax,
                "a recipe scene must not declare generators",
                None,
            ));
        }
    } else if generators.is_empty() {
        return Err(err(
            recipe_line.max(1),
            1,
            SceneErrorKind::BadParameter,
            "scene declares neither a recipe nor generators",
            Some("`recipe = name` in [group] or a [generators] block"),
        ));
    }

    Ok(SceneFile {
        genus,
        recipe,
        primitives,
        generators,
        method,
        output,
    })
}

// ---------------------------------------------------------------------------
// Canonical printing
// ---------------------------------------------------------------------------

fn fmt_f64(v: f64) -> String {
    format!("{}", v)
}

fn fmt_point(p: Point) -> String {
    format!("({},{})", fmt_f64(p.x), fmt_f64(p.y))
}

fn fmt_primitive(p: &PrimitiveMap) -> String {
    match p {
        PrimitiveMap::Translation { shift } => {
            format!("translation dx={} dy={}", fmt_f64(shift.x), fmt_f64(shift.y))
        }
        PrimitiveMap::Dilation { center, factor } => format!(
            "dilation cx={} cy={} factor={}",
            fmt_f64(center.x),
            fmt_f64(center.y),
            fmt_f64(*factor)
        ),
        PrimitiveMap::Rotation { center, angle } => format!(
            "rotation cx={} cy={} angle={}",
            fmt_f64(center.x),
            fmt_f64(center.y),
            fmt_f64(*angle)
        ),
        PrimitiveMap::AnnulusTwist {
            center,
            r_in,
            r_out,
            power,
        } => format!(
            "annulus_twist cx={} cy={} r_in={} r_out={} power={}",
            fmt_f64(center.x),
            fmt_f64(center.y),
            fmt_f64(*r_in),
            fmt_f64(*r_out),
            power
        ),
        PrimitiveMap::SupportedRotation {
            center,
            r_in,
            r_out,
            angle,
        } => format!(
            "supported_rotation cx={} cy={} r_in={} r_out={} angle={}",
            fmt_f64(center.x),
            fmt_f64(center.y),
            fmt_f64(*r_in),
            fmt_f64(*r_out),
            fmt_f64(*angle)
        ),
        PrimitiveMap::StepTranslation { shift, x_lo, x_hi } => format!(
            "step_translation dx={} dy={} x_lo={} x_hi={}",
            fmt_f64(shift.x),
            fmt_f64(shift.y),
            fmt_f64(*x_lo),
            fmt_f64(*x_hi)
        ),
        PrimitiveMap::StripShear { y_lo, y_hi, dx, dy } => format!(
            "strip_shear y_lo={} y_hi={} dx={} dy={}",
            fmt_f64(*y_lo),
            fmt_f64(*y_hi),
            fmt_f64(*dx),
            fmt_f64(*dy)
        ),
    }
}

pub fn fmt_word(w: &Word) -> String {
    w.0.iter()
        .map(|f| {
            let mut s = f.name.clone();
            for op in &f.ops {
                match op {
                    FactorOp::Inverse => s.push('\''),
                    FactorOp::Power(k) => s.push_str(&format!("^{}", k)),
                }
            }
            s
        })
        .collect::<Vec<_>>()
        .join(" * ")
}

fn fmt_curve(c: &CurveLiteral) -> String {
    match c {
        CurveLiteral::Segment { a, b } => format!("segment {} {}", fmt_point(*a), fmt_point(*b)),
        CurveLiteral::Arch { x0, x1, height } => format!(
            "arch {} {} {}",
            fmt_f64(*x0),
            fmt_f64(*x1),
            fmt_f64(*height)
        ),
    }
}

/// Print a scene canonically. Parsing the output yields a structure equal to
/// the one printed.
pub fn print_scene(s: &SceneFile) -> String {
    let mut out = String::new();
    out.push_str(SCENE_HEADER);
    out.push_str("\n\n[group]\n");
    out.push_str(&format!("genus = {}\n", s.genus));
    if let Some(r) = &s.recipe {
        out.push_str(&format!("recipe = {}\n", r));
    }
    if !s.primitives.is_empty() {
        out.push_str("\n[primitives]\n");
        for (name, prim) in &s.primitives {
            out.push_str(&format!("{} = {}\n", name, fmt_primitive(prim)));
        }
    }
    if !s.generators.is_empty() {
        out.push_str("\n[generators]\n");
        for (name, word) in &s.generators {
            out.push_str(&format!("{} = {}\n", name, fmt_word(word)));
        }
    }
    out.push_str("\n[method]\n");
    out.push_str(&format!("name = {}\n", s.method.name.name()));
    if let Some(n) = s.method.n {
        out.push_str(&format!("n = {}\n", n));
    }
    if let Some(cap) = s.method.cap {
        out.push_str(&format!("N = {}\n", cap));
    }
    if let Some(seed) = s.method.seed {
        out.push_str(&format!("seed = {}\n", seed));
    }
    if let Some(r) = s.method.radius {
        out.push_str(&format!("R = {}\n", fmt_f64(r)));
    }
    if let Some(c) = s.method.center {
        out.push_str(&format!("center = {}\n", fmt_point(c)));
    }
    if let Some(b) = s.method.basepoint {
        out.push_str(&format!("basepoint = {}\n", fmt_point(b)));
    }
    if let Some(b) = s.method.dev_basepoint {
        out.push_str(&format!("dev_basepoint = {}\n", fmt_point(b)));
    }
    if let Some(r) = s.method.loop_radius {
        out.push_str(&format!("loop_radius = {}\n", fmt_f64(r)));
    }
    if let Some(p) = s.method.p {
        out.push_str(&format!("p = {}\n", fmt_point(p)));
    }
    if let Some(t) = &s.method.tau {
        out.push_str(&format!("tau = {}\n", fmt_curve(t)));
    }
    if let Some(t) = s.method.tolerance {
        out.push_str(&format!("tolerance = {}\n", fmt_f64(t)));
    }
    if s.output.report.is_some() || s.output.svg.is_some() {
        out.push_str("\n[output]\n");
        if let Some(r) = &s.output.report {
            out.push_str(&format!("report = {}\n", r));
        }
        if let Some(v) = &s.output.svg {
            out.push_str(&format!("svg = {}\n", v));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Building the action
// ---------------------------------------------------------------------------

/// The action plus the run parameters the scene pinned.
#[derive(Debug)]
pub struct BuiltScene {
    pub action: PlanarAction,
    pub relator_tolerance: f64,
    pub seed: u64,
}

fn curve_from_literal(lit: &CurveLiteral) -> Result<SampledCurve, String> {
    match lit {
        CurveLiteral::Segment { a, b } => {
            SampledCurve::segment(*a, *b).map_err(|e| format!("tau: {}", e))
        }
        CurveLiteral::Arch { x0, x1, height } => {
            zoo::arched_arc(*x0, *x1, *height).map_err(|e| format!("tau: {}", e))
        }
    }
}

/// Instantiate the action a validated scene describes. Errors are plain
/// strings with remediation hints; they carry no position because they are
/// not positional.
pub fn build_scene(scene: &SceneFile) -> Result<BuiltScene, String> {
    let seed = scene.method.seed.unwrap_or(1);
    let relator_tolerance = scene.method.tolerance.unwrap_or(tol::RELATOR_TOL);
    if let Some(recipe) = &scene.recipe {
        let params = ZooParams {
            n: scene.method.n.unwrap_or(1),
            seed,
            genus: scene.genus,
        };
        let action = zoo::build(recipe, &params)
            .ok_or_else(|| {
                format!(
                    "unknown recipe `{}`; run `euler-plane zoo list` for the catalog",
                    recipe
                )
            })?
            .map_err(|e| format!("recipe `{}`: {}", recipe, e))?;
        if action.genus != scene.genus {
            return Err(format!(
                "recipe `{}` builds a genus-{} action but the scene declares genus {}",
                recipe, action.genus, scene.genus
            ));
        }
        let mut action = action;
        if let Some(cap) = scene.method.cap {
            if let Some(pair) = &mut action.pair {
                pair.window = cap;
            }
        }
        return Ok(BuiltScene {
            action,
            relator_tolerance,
            seed,
        });
    }

    let mut env: HashMap<String, MapExpr> = HashMap::new();
    for (name, prim) in &scene.primitives {
        env.insert(name.clone(), MapExpr::prim(prim.clone()));
    }
    for (name, word) in &scene.generators {
        let expr = word_to_expr(word, &env);
        env.insert(name.clone(), expr);
    }
    let mut generators = Vec::with_capacity(2 * scene.genus);
    for i in 1..=scene.genus {
        for prefix in ["a", "b"] {
            let name = format!("{}{}", prefix, i);
            let expr = env.get(&name).ok_or_else(|| {
                format!(
                    "genus {} needs generator `{}`; declare it in [generators]",
                    scene.genus, name
                )
            })?;
            generators.push(NamedGenerator {
                name: name.clone(),
                map: expr.clone(),
            });
        }
    }
    let lift = scene.method.basepoint.map(|basepoint| LiftPlan {
        center: scene.method.center.unwrap_or(point(0.0, 0.0)),
        forbidden_radius: scene.method.radius.unwrap_or(0.0),
        basepoint,
    });
    let graphical = scene.method.dev_basepoint.map(|basepoint| GraphicalPlan {
        basepoint,
        loop_radius: scene.method.loop_radius.unwrap_or(0.2),
    });
    let pair = match (scene.method.p, &scene.method.tau) {
        (Some(p), Some(tau)) => Some(CommutingPairPlan {
            p,
            tau: curve_from_literal(tau)?,
            window: scene.method.cap.unwrap_or(12),
        }),
        _ => None,
    };
    Ok(BuiltScene {
        action: PlanarAction {
            name: "inline".to_string(),
            genus: scene.genus,
            generators,
            lift,
            graphical,
            pair,
            non_smooth_loci: Vec::new(),
            expected_euler: None,
        },
        relator_tolerance,
        seed,
    })
}

/// A synthetic scene that runs a catalog recipe with default parameters,
/// used when the command line names a recipe instead of a file.
pub fn recipe_scene(name: &str, genus: usize) -> SceneFile {
    SceneFile {
        genus,
        recipe: Some(name.to_string()),
        primitives: Vec::new(),
        generators: Vec::new(),
        method: MethodBlock::default(),
        output: OutputBlock::default(),
    }
}
