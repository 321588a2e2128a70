//! Smooth transition and bump profiles.
//!
//! Every compactly supported primitive in this crate interpolates through the
//! same C-infinity step `s`, built from `sigma(t) = exp(-1/t)`:
//!
//! * `s(t) = sigma(t) / (sigma(t) + sigma(1-t))`
//! * `s(t) = 0` for `t <= 0`, `s(t) = 1` for `t >= 1`, `s(1/2) = 1/2`
//! * all derivatives vanish at 0 and 1, so maps glued with `s` are smooth
//!   across support boundaries.

/// `exp(-1/t)` for `t > 0`, zero otherwise. C-infinity on the whole line.
pub fn sigma(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn sigma_prime(t: f64) -> f64 {
    if t > 0.0 {
        let s = (-1.0 / t).exp();
        s / (t * t)
    } else {
        0.0
    }
}

/// Smooth monotone step: 0 below 0, 1 above 1.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = sigma(t);
        let b = sigma(1.0 - t);
        a / (a + b)
    }
}

/// Derivative of `smooth_step`. Its maximum over [0,1] is 2, attained at 1/2.
pub fn smooth_step_prime(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let a = sigma(t);
        let b = sigma(1.0 - t);
        let ap = sigma_prime(t);
        let bp = sigma_prime(1.0 - t);
        (ap * b + a * bp) / ((a + b) * (a + b))
    }
}

/// Largest slope of `smooth_step`; used by injectivity checks.
pub const SMOOTH_STEP_MAX_SLOPE: f64 = 2.0;

/// Smooth bump supported on (0, 1), normalized to peak value 1 at 1/2.
pub fn bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (4.0 - 1.0 / (t * (1.0 - t))).exp()
    }
}

/// Derivative of `bump`.
pub fn bump_prime(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let q = t * (1.0 - t);
        bump(t) * (1.0 - 2.0 * t) / (q * q)
    }
}

/// Largest absolute slope of `bump`, computed once by a dense scan.
pub fn bump_max_slope() -> f64 {
    use std::sync::OnceLock;
    static MAX: OnceLock<f64> = OnceLock::new();
    *MAX.get_or_init(|| {
        let mut best: f64 = 0.0;
        let n = 20_000;
        for i in 1..n {
            let t = i as f64 / n as f64;
            best = best.max(bump_prime(t).abs());
        }
        best
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_midpoint_is_exactly_half() {
        assert_eq!(smooth_step(0.5), 0.5);
    }

    #[test]
    fn step_is_flat_outside_unit_interval() {
        assert_eq!(smooth_step(-0.2), 0.0);
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert_eq!(smooth_step(7.0), 1.0);
        assert_eq!(smooth_step_prime(0.0), 0.0);
        assert_eq!(smooth_step_prime(1.0), 0.0);
    }

    #[test]
    fn step_is_symmetric() {
        for &t in &[0.1, 0.25, 0.4, 0.47] {
            let lhs = smooth_step(t) + smooth_step(1.0 - t);
            assert!((lhs - 1.0).abs() < 1e-15, "s(t)+s(1-t)=1 failed at {t}");
        }
    }

    #[test]
    fn step_derivative_matches_finite_differences() {
        let h = 1e-6;
        for &t in &[0.1, 0.3, 0.5, 0.68, 0.9] {
            let fd = (smooth_step(t + h) - smooth_step(t - h)) / (2.0 * h);
            let an = smooth_step_prime(t);
            assert!(
                (fd - an).abs() <= 1e-5 * an.abs().max(1.0),
                "at {t}: fd={fd}, analytic={an}"
            );
        }
    }

    #[test]
    fn step_max_slope_is_two_at_midpoint() {
        assert!((smooth_step_prime(0.5) - 2.0).abs() < 1e-12);
        let mut best: f64 = 0.0;
        for i in 1..2000 {
            best = best.max(smooth_step_prime(i as f64 / 2000.0));
        }
        assert!(best <= SMOOTH_STEP_MAX_SLOPE + 1e-9);
    }

    #[test]
    fn bump_peaks_at_one() {
        assert_eq!(bump(0.5), 1.0);
        assert_eq!(bump(0.0), 0.0);
        assert_eq!(bump(1.0), 0.0);
        assert!(bump(0.25) > 0.0 && bump(0.25) < 1.0);
    }

    #[test]
    fn bump_derivative_matches_finite_differences() {
        let h = 1e-6;
        for &t in &[0.08, 0.2, 0.45, 0.5, 0.62, 0.9] {
            let fd = (bump(t + h) - bump(t - h)) / (2.0 * h);
            let an = bump_prime(t);
            assert!(
                (fd - an).abs() <= 1e-4 * an.abs().max(1.0),
                "at {t}: fd={fd}, analytic={an}"
            );
        }
    }

    #[test]
    fn bump_slope_bound_is_sane() {
        let m = bump_max_slope();
        // Frozen bracket from an independent dense scan of the closed form.
        assert!(m > 4.2 && m < 4.3, "bump max slope {m}");
    }
}
