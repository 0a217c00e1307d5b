//! Truncation and approximation error estimates, and parameter selection.
//!
//! The Ewald sum is controlled by a handful of coupled parameters: the
//! splitting parameter `xi` divides work between the real-space sum
//! (truncated at `rc`) and the Fourier-space sum (resolved by an `M`
//! point grid up to wave number `kinf = M/2`), while the gridding window
//! support `P`, the local oversampling factor `sl`, the zero-mode
//! oversampling factor `s0` and the local pad size `nl` control the
//! approximation errors of the spectral evaluation.
//!
//! This module provides root-mean-square truncation error estimates for
//! the real and Fourier sums, the one-term shape estimate for the window
//! approximation error, and [`select_params`], which inverts the
//! estimates through the Lambert W function to pick all parameters from
//! an error tolerance.
//!
//! Grid sizes are rounded up to FFT-friendly values (`2^a` or `3*2^a`);
//! besides transform speed this keeps the window shape parameter `eta`
//! below one, which the spectral scaling step requires.

use crate::error::{Result, SeError};
use crate::real::Real;
use crate::specfun::lambert_w0;
use crate::vec3::Vec3;

/// Gaussian window shape constant.
pub const SHAPE_C: f64 = 0.95;

/// Zero-mode oversampling lower bound (practical value, slightly below
/// the asymptotic `1 + sqrt(2)` bound; the grid-size adjustment can land
/// marginally under it).
pub const S0_MIN: f64 = 2.4;

/// Complete parameter set for the spectral Ewald solver on a cubic box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverParams<T> {
    /// Ewald splitting parameter.
    pub xi: T,
    /// Real-space cutoff radius.
    pub rc: T,
    /// Grid points along the periodic direction (even).
    pub m: usize,
    /// Gaussian window support points per direction (even, at most `m`).
    pub p: usize,
    /// Number of local-pad wave numbers on each side of zero.
    pub nl: usize,
    /// Local oversampling factor (`sl * mtilde` integer).
    pub sl: T,
    /// Zero-mode oversampling factor (`s0 * mtilde` integer).
    pub s0: T,
    /// Cubic box side.
    pub l: T,
}

impl<T: Real> SolverParams<T> {
    /// Validates and builds a parameter set.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        xi: T,
        rc: T,
        m: usize,
        p: usize,
        nl: usize,
        sl: T,
        s0: T,
        l: T,
    ) -> Result<Self> {
        let params = SolverParams {
            xi,
            rc,
            m,
            p,
            nl,
            sl,
            s0,
            l,
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SeError::InvalidParams(msg));
        if !(self.xi > T::zero()) || !self.xi.is_finite() {
            return fail(format!("xi must be positive, got {}", self.xi));
        }
        if !(self.l > T::zero()) || !self.l.is_finite() {
            return fail(format!("box side must be positive, got {}", self.l));
        }
        if !(self.rc > T::zero()) || self.rc > self.l * T::of(0.5) {
            return fail(format!(
                "rc must lie in (0, L/2] for the periodic minimum image, got {} with L = {}",
                self.rc, self.l
            ));
        }
        if self.m < 2 || self.m % 2 != 0 {
            return fail(format!("grid size M must be even and >= 2, got {}", self.m));
        }
        if self.p < 2 || self.p % 2 != 0 || self.p > self.m {
            return fail(format!(
                "window support P must be even with 2 <= P <= M, got P = {} with M = {}",
                self.p, self.m
            ));
        }
        if self.nl < 1 || self.nl > self.m / 2 {
            return fail(format!(
                "local pad size nl must satisfy 1 <= nl <= M/2, got {} with M = {}",
                self.nl, self.m
            ));
        }
        if !(self.sl >= T::one()) {
            return fail(format!("oversampling sl must be >= 1, got {}", self.sl));
        }
        if self.s0.as_f64() < S0_MIN - 1e-12 {
            return fail(format!(
                "zero-mode oversampling s0 must be >= {S0_MIN}, got {}",
                self.s0
            ));
        }
        let mt = self.mtilde() as f64;
        // representation slack: an exact ratio like 106/44 stored in the
        // scalar type lands within a few ulps of the true rational
        let int_tol = 1e-6f64.max(mt * 16.0 * T::epsilon().as_f64());
        for (name, v) in [("sl", self.sl), ("s0", self.s0)] {
            let planes = v.as_f64() * mt;
            if (planes - planes.round()).abs() > int_tol {
                return fail(format!(
                    "{name} * Mtilde must be an integer, got {name} = {} with Mtilde = {mt}",
                    v.as_f64()
                ));
            }
        }
        if self.eta() >= T::one() {
            return fail(format!(
                "window shape eta = {} must stay below 1; increase M or decrease xi/P",
                self.eta()
            ));
        }
        Ok(())
    }

    /// Grid spacing `h = L/M`.
    pub fn h(&self) -> T {
        self.l / T::of_usize(self.m)
    }

    /// Extended grid size `Mtilde = M + P` in the free directions.
    pub fn mtilde(&self) -> usize {
        self.m + self.p
    }

    /// Extended box side `Ltilde = L + P h = h Mtilde`.
    pub fn ltilde(&self) -> T {
        self.h() * T::of_usize(self.mtilde())
    }

    /// Green's function truncation radius `R = sqrt(2) Ltilde`.
    pub fn r_trunc(&self) -> T {
        self.ltilde() * T::SQRT_2()
    }

    /// Window half-support `w = P h / 2`.
    pub fn w(&self) -> T {
        self.h() * T::of_usize(self.p) * T::of(0.5)
    }

    /// Gaussian window shape `eta = P (xi h)^2 / (c^2 pi)`.
    pub fn eta(&self) -> T {
        let xh = self.xi * self.h();
        T::of_usize(self.p) * xh * xh / T::of(SHAPE_C * SHAPE_C * std::f64::consts::PI)
    }

    /// Oversampled plane size `sl * Mtilde` for locally padded modes.
    pub fn sl_planes(&self) -> usize {
        (self.sl.as_f64() * self.mtilde() as f64).round() as usize
    }

    /// Oversampled plane size `s0 * Mtilde` for the zero mode.
    pub fn s0_planes(&self) -> usize {
        (self.s0.as_f64() * self.mtilde() as f64).round() as usize
    }
}

/// Root-mean-square error between `values` and `reference`.
///
/// With `relative` set, the result is divided by the RMS of the
/// reference.
pub fn rms_error<T: Real>(values: &[T], reference: &[T], relative: bool) -> Result<T> {
    if values.len() != reference.len() || values.is_empty() {
        return Err(SeError::InvalidParams(format!(
            "rms_error needs equal nonempty lengths, got {} and {}",
            values.len(),
            reference.len()
        )));
    }
    let n = T::of_usize(values.len());
    let dev: T = values
        .iter()
        .zip(reference)
        .map(|(&v, &r)| (v - r) * (v - r))
        .sum();
    let rms = (dev / n).sqrt();
    if !relative {
        return Ok(rms);
    }
    let norm: T = reference.iter().map(|&r| r * r).sum();
    let norm = (norm / n).sqrt();
    if norm == T::zero() {
        return Err(SeError::Numerical(
            "relative rms error with a zero-norm reference".into(),
        ));
    }
    Ok(rms / norm)
}

/// RMS truncation error estimate for the real-space sum cut at `rc`.
///
/// `q` is the sum of squared charges.
pub fn est_real_trunc<T: Real>(xi: T, rc: T, q: T, l: T) -> T {
    let u = xi * rc;
    (q * rc / (T::of(2.0) * l * l * l)).sqrt() / (u * u) * (-u * u).exp()
}

/// RMS truncation error estimate for the Fourier sum cut at wave number
/// index `kinf`.
pub fn est_fourier_trunc<T: Real>(xi: T, kinf: usize, q: T, l: T) -> T {
    est_fourier_trunc_frac(xi, T::of_usize(kinf), q, l)
}

fn est_fourier_trunc_frac<T: Real>(xi: T, kinf: T, q: T, l: T) -> T {
    let pi = T::PI();
    let arg = pi * kinf / (xi * l);
    xi / (pi * pi) * kinf.powf(T::of(-1.5)) * q.sqrt() * (-arg * arg).exp()
}

/// One-term shape estimate `exp(-c^2 pi P / 2)` for the window
/// approximation error with support `P`.
///
/// Callers scale by `sqrt(Q xi L)/L` for potentials or `Q sqrt(xi L)/L`
/// for forces.
pub fn est_approx<T: Real>(p: usize) -> T {
    assert!(p >= 1, "window support must be positive");
    T::of((-SHAPE_C * SHAPE_C * std::f64::consts::PI * p as f64 / 2.0).exp())
}

/// Inverts [`est_real_trunc`] for `rc` at fixed `xi`.
fn invert_real(tol: f64, xi: f64, q: f64, l: f64) -> Result<f64> {
    let c = q / (2.0 * l.powi(3) * xi * tol * tol);
    let w: f64 = lambert_w0(4.0 / 3.0 * c.powf(2.0 / 3.0))?;
    Ok((0.75 * w).sqrt() / xi)
}

/// Inverts [`est_fourier_trunc`] for `kinf` at fixed `xi`.
fn invert_fourier(tol: f64, xi: f64, q: f64, l: f64) -> Result<f64> {
    let c = q / (std::f64::consts::PI * xi * l.powi(3) * tol * tol);
    let w: f64 = lambert_w0(4.0 / 3.0 * c.powf(2.0 / 3.0))?;
    Ok(xi * l * (0.75 * w).sqrt() / std::f64::consts::PI)
}

/// Smallest FFT-friendly even size (`2^a` or `3 * 2^a`) at least `n`.
fn next_grid_size(n: usize) -> usize {
    let mut pow2 = 2usize;
    while pow2 < n {
        pow2 *= 2;
    }
    let mut three = 6usize;
    while three < n {
        three *= 2;
    }
    pow2.min(three)
}

/// Selects all solver parameters from an RMS error tolerance.
///
/// `q` is the sum of squared charges and `l` the (cubic) box. The cutoff
/// `rc` and the grid resolution follow from Lambert W inversions of the
/// truncation estimates; the window support from the shape estimate; the
/// oversampling factors from the worst-mode quadrature requirement
/// (`sl >= -ln(tol)/2pi`) and the zero-mode bound (`s0 >= 2.4`), both
/// adjusted upward so the padded plane sizes are integers.
pub fn select_params<T: Real>(tol: T, xi: T, q: T, l: Vec3<T>) -> Result<SolverParams<T>> {
    let tolf = tol.as_f64();
    if !(tolf > 0.0 && tolf <= 1.0) {
        return Err(SeError::InvalidParams(format!(
            "tolerance must lie in (0, 1], got {tolf}"
        )));
    }
    let (l1, l2, l3) = (l.x.as_f64(), l.y.as_f64(), l.z.as_f64());
    if !(l1 > 0.0) || (l1 - l2).abs() > 1e-12 * l1 || (l1 - l3).abs() > 1e-12 * l1 {
        return Err(SeError::InvalidParams(format!(
            "the spectral solver requires a cubic box, got ({l1}, {l2}, {l3})"
        )));
    }
    let xif = xi.as_f64();
    if !(xif > 0.0) {
        return Err(SeError::InvalidParams(format!(
            "xi must be positive, got {xif}"
        )));
    }
    let qf = q.as_f64().max(f64::MIN_POSITIVE);

    let rc = invert_real(tolf, xif, qf, l1)?;
    if rc > 0.5 * l1 {
        return Err(SeError::InvalidParams(format!(
            "tolerance {tolf} needs real-space cutoff {rc:.3} > L/2 = {:.3}; increase xi",
            0.5 * l1
        )));
    }

    let p = (2.0 * (1.0 / tolf).log10().ceil()).max(2.0) as usize;

    let kinf = invert_fourier(tolf, xif, qf, l1)?;
    let mut m = next_grid_size(((2.0 * kinf.ceil()) as usize).max(4));
    // grow the grid until the window shape parameter is comfortably
    // below one
    loop {
        let h = l1 / m as f64;
        let eta = p as f64 * (xif * h).powi(2) / (SHAPE_C * SHAPE_C * std::f64::consts::PI);
        if eta <= 0.95 {
            break;
        }
        m = next_grid_size(m + 1);
    }
    if p > m {
        return Err(SeError::InvalidParams(format!(
            "tolerance {tolf} needs window support P = {p} > M = {m}; the grid resolved by \
             xi = {xif} cannot carry it"
        )));
    }

    let mtilde = (m + p) as f64;
    let sl_target = (-tolf.ln() / (2.0 * std::f64::consts::PI)).max(1.0);
    let sl = (sl_target * mtilde - 1e-9).ceil() / mtilde;
    let s0 = (S0_MIN * mtilde - 1e-9).ceil() / mtilde;
    let nl = (m as f64 / 10.0).ceil() as usize;

    SolverParams::new(
        xi,
        T::of(rc),
        m,
        p,
        nl,
        T::of(sl),
        T::of(s0),
        T::of(l1),
    )
}
