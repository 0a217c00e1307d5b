//! Trapezoidal quadrature error of the Fourier-space integrand: exact
//! identity in 1D, heuristic in 2D.
//!
//! The adaptive transform stage replaces the continuous `kappa`
//! integrals by trapezoidal sums with spacing set by the oversampling
//! factors. How fast those sums converge is governed by a model
//! integrand with the same analytic structure,
//!
//! ```text
//! f(x) = e^{-alpha (x^2 + k3^2)} / (x^2 + k3^2),
//! ```
//!
//! whose poles at `x = +-i k3` control everything. In 1D the
//! trapezoidal error has a closed form: with `T_h` the spacing-`h`
//! trapezoidal sum and `F = (pi/k3) erfc(sqrt(alpha) k3)` the exact
//! integral,
//!
//! ```text
//! T_h - F = (2 pi / k3) / (e^{2 pi k3 / h} - 1),
//! ```
//!
//! which decays faster than any power of `h` and improves
//! exponentially with `|k3|`; large `|k3|` planes therefore need no
//! oversampling at all. In 2D (integral `F = pi E1(alpha k3^2)`) no
//! closed form is available and the module carries the heuristic
//! `2 pi C e^{-2 pi k3 / h}` with `C = 1`, which tracks measurements
//! to within a small factor. Substituting the mode spacing
//! `h = 2 pi / (L s_l)` of the padded planes and the first nonzero
//! mode `k3 = 2 pi / L` turns the heuristic into the pad-selection
//! rule `e^{-2 pi s_l} < tol`.
//!
//! Measuring these errors means resolving cancellations down to
//! 1e-27 between O(1) quantities, far beyond `f64`; sums and closed
//! forms are evaluated in double-double precision and the error is
//! returned as `f64` (tiny, hence representable). Truncation of the
//! lattice sums is left to the caller via `n`; [`suggested_n`] puts
//! the Gaussian tail below 1e-17. Fixed truncation keeps results
//! reproducible.

use crate::dd::{self, Dd};
use crate::error::{Result, SeError};
use crate::real::Real;

/// Truncation index with `(n h)^2 alpha >= 81`: the Gaussian tail
/// beyond it is below 1e-17 of the leading term.
pub fn suggested_n(alpha: f64, h: f64) -> usize {
    (9.0 / alpha.sqrt() / h).ceil() as usize + 2
}

fn validate(k3: f64, alpha: f64, h: f64) -> Result<()> {
    if !(k3 > 0.0) || !k3.is_finite() {
        return Err(SeError::InvalidParams(format!(
            "k3 must be positive, got {k3}"
        )));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(SeError::InvalidParams(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(SeError::InvalidParams(format!(
            "spacing h must be positive, got {h}"
        )));
    }
    Ok(())
}

/// `e^{-alpha (j h)^2}` for `j = 0..=n`, evaluated once per lattice.
fn gauss_table(alpha: Dd, h: Dd, n: usize) -> Vec<Dd> {
    (0..=n)
        .map(|j| (-(alpha * (h * Dd::from(j as f64)).sqr())).exp())
        .collect()
}

/// Measured and closed-form 1D trapezoidal error
/// `(T_h - F, (2 pi / k3) / (e^{2 pi k3 / h} - 1))`.
pub fn trapz_error_1d<T: Real>(k3: T, alpha: T, h: T, n: usize) -> Result<(T, T)> {
    let (k3, alpha, h) = (k3.as_f64(), alpha.as_f64(), h.as_f64());
    validate(k3, alpha, h)?;
    let (k3d, alphad, hd) = (Dd::from(k3), Dd::from(alpha), Dd::from(h));
    let k3sq = k3d.sqr();
    let gauss = gauss_table(alphad, hd, n);
    let damp = (-(alphad * k3sq)).exp();

    // smallest terms first so the accumulated roundoff scales with the
    // final adds only
    let mut sum = Dd::ZERO;
    for j in (1..=n).rev() {
        let x2 = (hd * Dd::from(j as f64)).sqr();
        sum = sum + gauss[j] / (x2 + k3sq);
    }
    sum = sum.mul_pwr2(2.0) + gauss[0] / k3sq;
    let trap = hd * damp * sum;

    let exact = Dd::PI / k3d * dd::erfc(alphad.sqrt() * k3d);
    let measured = trap - exact;

    // (2 pi / k3) t / (1 - t) with t = e^{-2 pi k3 / h} avoids overflow
    let t = (-(Dd::PI.mul_pwr2(2.0) * k3d / hd)).exp();
    let closed = Dd::PI.mul_pwr2(2.0) / k3d * t / (Dd::ONE - t);
    Ok((T::of(measured.to_f64()), T::of(closed.to_f64())))
}

/// Measured 2D trapezoidal error and the `C = 1` heuristic
/// `(T_h - pi E1(alpha k3^2), 2 pi e^{-2 pi k3 / h})`.
pub fn trapz_error_2d<T: Real>(k3: T, alpha: T, h: T, n: usize) -> Result<(T, T)> {
    let (k3, alpha, h) = (k3.as_f64(), alpha.as_f64(), h.as_f64());
    validate(k3, alpha, h)?;
    let (k3d, alphad, hd) = (Dd::from(k3), Dd::from(alpha), Dd::from(h));
    let k3sq = k3d.sqr();
    let gauss = gauss_table(alphad, hd, n);
    let damp = (-(alphad * k3sq)).exp();

    // octant folding: (0,0) once, (j,0) classes four times (the axis
    // pairs (+-j, 0) and (0, +-j) coincide by symmetry), (j,l) with
    // j,l >= 1 four times; rows shrink with j, so accumulate outside in
    let mut rows = Dd::ZERO;
    for j in (1..=n).rev() {
        let xj2 = (hd * Dd::from(j as f64)).sqr();
        let mut row = Dd::ZERO;
        for l in (1..=n).rev() {
            let xl2 = (hd * Dd::from(l as f64)).sqr();
            row = row + gauss[j] * gauss[l] / (xj2 + xl2 + k3sq);
        }
        rows = rows + row + gauss[j] / (xj2 + k3sq);
    }
    let total = rows.mul_pwr2(4.0) + gauss[0] / k3sq;
    let trap = hd.sqr() * damp * total;

    let exact = Dd::PI * dd::e1(alphad * k3sq);
    let measured = trap - exact;

    let heuristic = Dd::PI.mul_pwr2(2.0) * (-(Dd::PI.mul_pwr2(2.0) * k3d / hd)).exp();
    Ok((T::of(measured.to_f64()), T::of(heuristic.to_f64())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::select_params;
    use crate::vec3::Vec3;
    use approx::assert_relative_eq;

    const ALPHA: f64 = 0.1;

    fn meas_1d(k3: f64, h: f64) -> (f64, f64) {
        trapz_error_1d(k3, ALPHA, h, suggested_n(ALPHA, h)).unwrap()
    }

    fn meas_2d(k3: f64, h: f64) -> (f64, f64) {
        trapz_error_2d(k3, ALPHA, h, suggested_n(ALPHA, h)).unwrap()
    }

    #[test]
    fn identity_fixed_point() {
        let (measured, closed) = meas_1d(1.0, 1.0);
        let want = 2.0 * std::f64::consts::PI / ((2.0 * std::f64::consts::PI).exp() - 1.0);
        assert_relative_eq!(closed, want, max_relative = 1e-14);
        assert_relative_eq!(measured, want, max_relative = 1e-8);
        assert!((measured - 1.1755e-2).abs() < 1e-6);
    }

    /// The identity holds to 1e-8 relative wherever the error is large
    /// enough to resolve; far below that the double-double floor
    /// (~1e-28 here) takes over.
    #[test]
    fn identity_across_grid() {
        for k3 in [1.0, 2.0, 3.0] {
            for h in [0.3, 0.5, 1.0] {
                let (measured, closed) = meas_1d(k3, h);
                assert!(closed > 0.0);
                assert!(
                    (measured - closed).abs() <= 1e-8 * closed + 1e-28,
                    "k3={k3}, h={h}: measured {measured:e} vs closed {closed:e}"
                );
                if closed >= 1e-12 {
                    assert_relative_eq!(measured, closed, max_relative = 1e-8);
                }
            }
        }
        // the hardest cell pinned: closed = 2 pi / (3 (e^{20 pi} - 1))
        let (_, closed) = meas_1d(3.0, 0.3);
        assert_relative_eq!(closed, 1.080268062962328e-27, max_relative = 1e-12);
    }

    /// Halving h squares (rather than scales) the error: decay faster
    /// than any fixed power.
    #[test]
    fn superalgebraic_decay_in_h() {
        let e1 = meas_1d(1.0, 1.0).0;
        let e2 = meas_1d(1.0, 0.5).0;
        let e3 = meas_1d(1.0, 0.25).0;
        let (r1, r2) = (e1 / e2, e2 / e3);
        assert!(r1 > 2f64.powi(8), "first halving gained only {r1}");
        assert!(r2 > 10.0 * r1, "not superalgebraic: ratios {r1}, {r2}");
    }

    /// Large |k3| planes meet any practical tolerance without
    /// oversampling.
    #[test]
    fn large_k3_needs_no_oversampling() {
        let (measured, closed) = meas_1d(3.0, 1.0);
        assert!(measured.abs() < 1e-7, "measured {measured:e}");
        assert!(closed < 1e-7);
    }

    #[test]
    fn invalid_arguments_are_rejected() {
        assert!(trapz_error_1d(0.0, ALPHA, 0.5, 10).is_err());
        assert!(trapz_error_1d(-1.0, ALPHA, 0.5, 10).is_err());
        assert!(trapz_error_1d(1.0, 0.0, 0.5, 10).is_err());
        assert!(trapz_error_1d(1.0, ALPHA, 0.0, 10).is_err());
        assert!(trapz_error_2d(1.0, ALPHA, -0.5, 10).is_err());
        assert!(trapz_error_2d(1.0, f64::NAN, 0.5, 10).is_err());
    }

    #[test]
    fn heuristic_tracks_2d_measurement() {
        for k3 in [1.0, 2.0, 3.0] {
            for h in [0.3, 0.65, 1.0] {
                let (measured, heuristic) = meas_2d(k3, h);
                assert!(
                    measured > heuristic / 5.0 && measured < heuristic * 5.0,
                    "k3={k3}, h={h}: measured {measured:e} vs heuristic {heuristic:e}"
                );
            }
        }
    }

    #[test]
    fn error_monotone_in_k3_and_vanishes_with_h() {
        for h in [0.3, 0.65, 1.0] {
            let (m1, _) = meas_2d(1.0, h);
            let (m2, _) = meas_2d(2.0, h);
            let (m3, _) = meas_2d(3.0, h);
            assert!(m1 > m2 && m2 > m3, "h={h}: {m1:e}, {m2:e}, {m3:e}");
        }
        let coarse = meas_2d(1.0, 1.0).0;
        let mid = meas_2d(1.0, 0.5).0;
        let fine = meas_2d(1.0, 0.2).0;
        assert!(coarse > mid && mid > fine);
        assert!(fine < 1e-10);
    }

    /// With h = 2 pi / (L s_l) and k3 = 2 pi / L the heuristic becomes
    /// e^{-2 pi s_l} < tol, which the parameter recipe honors.
    #[test]
    fn selection_rule_respects_heuristic() {
        for tol in [1e-4, 1e-6, 1e-8] {
            let pr = select_params(tol, 12.0, 10.0, Vec3::new(1.0, 1.0, 1.0)).unwrap();
            let bound = (-2.0 * std::f64::consts::PI * pr.sl).exp();
            assert!(
                bound <= tol * (1.0 + 1e-12),
                "tol {tol:e}: sl = {} leaves heuristic {bound:e}",
                pr.sl
            );
        }
    }
}
