//! Command-line front end for the Euler-number library.
//!
//! The binary reads line-oriented scene files describing a surface-group
//! action on the plane (either a named catalog recipe or explicit primitive
//! maps and generator words), runs the requested Euler-number methods,
//! writes a deterministic structured report, and optionally renders an SVG
//! with the curves, annulus supports, crossing signs and weight graphs that
//! the computation used.

pub mod check;
pub mod report;
pub mod scene;
pub mod svg;
