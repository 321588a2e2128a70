//! Euler numbers of surface-group actions on the plane.
//!
//! The library builds finitely many orientation-preserving homeomorphisms of
//! the plane out of symbolic primitives (translations, dilations, rotations,
//! annulus twists, step translations, strip shears), checks surface-group
//! relators on them, and evaluates the Euler number of the resulting action
//! by several independent routes:
//!
//! - deck translation of the lifted relator in the universal cover of a
//!   punctured plane (or of a neighbourhood of infinity),
//! - turning number of the corner-smoothed developed boundary of the
//!   fundamental polygon,
//! - signed intersection sums of an arc against its orbit translates,
//! - writhe difference of an arc and its image.
//!
//! All curve data is sampled with an adaptive tangent-step contract so that
//! turning numbers, crossing signs and argument continuations are
//! unambiguous at the stored resolution.

pub mod cover;
pub mod curve;
pub mod euler;
pub mod geom;
pub mod planemap;
pub mod profile;
pub mod zoo;

/// Numerical tolerances shared across the crate.
///
/// These are part of the external contract: tests and the acceptance suite
/// pin behaviour at exactly these margins.
pub mod tol {
    /// Maximum tangent direction change between consecutive curve samples.
    pub const MAX_TANGENT_STEP: f64 = 0.1;
    /// Residue allowed when rounding a turning number or a deck angle to an
    /// integer multiple of a full turn.
    pub const TURN_RESIDUE: f64 = 0.05;
    /// Transversality margin for crossing signs and embedding scans.
    pub const CROSSING_MARGIN: f64 = 1e-9;
    /// Endpoint/tangent matching tolerance for arcs in a fixed endpoint class.
    pub const TRANSPORT_TOL: f64 = 1e-6;
    /// Relative error allowed between analytic differentials and central
    /// finite differences.
    pub const DIFFERENTIAL_REL_TOL: f64 = 1e-5;
    /// Step used for central finite differences.
    pub const DIFFERENTIAL_STEP: f64 = 1e-6;
    /// Displacement bound for relator identity checks.
    pub const RELATOR_TOL: f64 = 1e-9;
    /// Amplitude of deterministic perturbation bumps.
    pub const PERTURBATION_AMPLITUDE: f64 = 1e-4;
    /// Retry budget for perturbation-based repair of degenerate contacts.
    pub const PERTURBATION_RETRIES: usize = 5;
}
