//! Special functions used by the Ewald decomposition and its estimates.
//!
//! The periodic Green's function splits into terms that need `erfc`, the
//! exponential integral `E1`, Bessel functions `J0`/`J1`, the complete
//! modified Bessel function `K0` and the incomplete modified Bessel
//! function
//!
//! ```text
//! K0(a, b) = int_0^1 exp(-a/t - b t) / t dt .
//! ```
//!
//! Parameter selection additionally needs the principal Lambert W branch.
//!
//! # Implementation notes
//!
//! All kernels evaluate in `f64` and round to the caller's scalar type;
//! the generic pipeline only requires results at the precision of its own
//! scalar. `erfc`, `J0` and `J1` delegate to `libm` and are validated
//! against high-precision fixtures. `K0(a,b)` follows the quadrature
//! scheme with two Gauss-Legendre panels split at `v`, combined with the
//! symmetry identity `K0(a,b) = 2 k0(2 sqrt(ab)) - K0(b,a)` when `a < b`.
//! The companion kernel `G(a,b) = int_0^1 exp(-a/t - b t) dt`, the
//! derivative `-dK0/db`, drives the high-precision force reference.

use std::sync::OnceLock;

use crate::error::{Result, SeError};
use crate::real::Real;

/// Arguments above which `E1(x)` (and `exp(-x)` based kernels) underflow
/// below double precision and are returned as zero.
const E1_UNDERFLOW: f64 = 34.0;

/// A quadrature rule: nodes and weights on some interval.
#[derive(Clone, Debug)]
pub struct QuadratureRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    /// Applies the rule to `f`.
    pub fn integrate(&self, mut f: impl FnMut(T) -> T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Complementary error function.
pub fn erfc<T: Real>(x: T) -> T {
    T::of(libm::erfc(x.as_f64()))
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0<T: Real>(x: T) -> T {
    T::of(libm::j0(x.as_f64()))
}

/// Bessel function of the first kind, order one.
pub fn bessel_j1<T: Real>(x: T) -> T {
    T::of(libm::j1(x.as_f64()))
}

/// Exponential integral `E1(x)` for `x > 0`.
///
/// Uses the ascending series below `x = 1` and a continued fraction above;
/// for `x > 34` the value is below double-precision resolution and zero is
/// returned.
pub fn exp_int_e1<T: Real>(x: T) -> T {
    T::of(e1_f64(x.as_f64()))
}

fn e1_f64(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires a positive argument, got {x}");
    if x > E1_UNDERFLOW {
        return 0.0;
    }
    // The continued fraction needs ~170 terms at x = 2 and degrades
    // quickly below, while the alternating series stays benign there.
    if x < 2.0 {
        e1_series(x)
    } else {
        e1_cont_frac(x)
    }
}

/// Ascending series `E1(x) = -gamma - ln x + sum_{m>=1} (-1)^{m+1} x^m / (m! m)`.
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for m in 1..=80 {
        term *= -x / m as f64;
        let add = -term / m as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs().max(1.0) {
            break;
        }
    }
    -f64::euler_gamma() - x.ln() + sum
}

/// Continued fraction `E1(x) = e^-x / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))`
/// with partial numerators `-(k-1)^2`, evaluated by the modified Lentz scheme.
fn e1_cont_frac(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x + 1.0;
    if f == 0.0 {
        f = tiny;
    }
    let mut c = f;
    let mut d = 0.0;
    for k in 2..=400u32 {
        let a = -(((k - 1) * (k - 1)) as f64);
        let b = x + (2 * k - 1) as f64;
        d = b + a * d;
        if d == 0.0 {
            d = tiny;
        }
        c = b + a / c;
        if c == 0.0 {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x).exp() / f
}

/// The combination `gamma + ln(u) + E1(u)`, which tends to zero as `u -> 0+`.
///
/// Evaluated through its own series for small `u` to avoid the cancellation
/// between the logarithm and `E1`.
pub fn gamma_log_e1<T: Real>(u: T) -> T {
    T::of(gamma_log_e1_f64(u.as_f64()))
}

fn gamma_log_e1_f64(u: f64) -> f64 {
    assert!(u > 0.0);
    if u < 0.1 {
        // gamma + ln u + E1(u) = sum_{m>=1} (-1)^{m+1} u^m / (m! m)
        let mut sum = 0.0;
        let mut term = 1.0;
        for m in 1..=30 {
            term *= -u / m as f64;
            sum -= term / m as f64;
            if term.abs() < 1e-20 {
                break;
            }
        }
        sum
    } else {
        f64::euler_gamma() + u.ln() + e1_f64(u)
    }
}

/// Principal branch of the Lambert W function for `x >= 0`.
///
/// Solved by Halley iteration from a logarithmic initial guess; converges
/// to full double precision in a handful of steps.
pub fn lambert_w0<T: Real>(x: T) -> Result<T> {
    let xf = x.as_f64();
    if !(xf >= 0.0) {
        return Err(SeError::Numerical(format!(
            "lambert_w0 requires a non-negative argument, got {xf}"
        )));
    }
    if xf == 0.0 {
        return Ok(T::zero());
    }
    let mut w = if xf < 3.0 {
        let l = (1.0 + xf).ln();
        l * (1.0 - l.ln() / (2.0 + l))
    } else {
        let l = xf.ln();
        l - l.ln() * l / (1.0 + l)
    };
    for _ in 0..50 {
        let e = w.exp();
        let r = w * e - xf;
        let denom = e * (w + 1.0) - (w + 2.0) * r / (2.0 * w + 2.0);
        let dw = r / denom;
        w -= dw;
        if dw.abs() <= 1e-16 * w.abs().max(1e-300) {
            break;
        }
    }
    Ok(T::of(w))
}

/// Gauss-Legendre rule with `n` points on `[a, b]`.
///
/// Nodes are found by Newton iteration on the Legendre polynomial with the
/// classical cosine initial guesses; weights follow from the derivative.
pub fn gauss_legendre<T: Real>(n: usize, a: T, b: T) -> QuadratureRule<T> {
    assert!(n >= 1, "quadrature order must be positive");
    let (af, bf) = (a.as_f64(), b.as_f64());
    let mid = 0.5 * (af + bf);
    let half = 0.5 * (bf - af);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pair(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (p, d) = legendre_pair(n, x);
                dp = d;
                x -= p / d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = T::of(mid - half * x);
        weights[i] = T::of(half * w);
        nodes[n - 1 - i] = T::of(mid + half * x);
        weights[n - 1 - i] = T::of(half * w);
    }
    QuadratureRule { nodes, weights }
}

/// Legendre polynomial `P_n(x)` and its derivative via the three-term
/// recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Complete modified Bessel function of the second kind, `k0(x)`, `x > 0`.
///
/// Ascending series for `x <= 2`. Above that the asymptotic expansion
/// cannot reach full double precision, so the integral representation
/// `k0(x) = int_0^inf exp(-x cosh t) dt` is evaluated by the trapezoidal
/// rule, which is spectrally accurate for this integrand.
pub fn bessel_k0<T: Real>(x: T) -> T {
    T::of(k0_f64(x.as_f64()))
}

fn k0_f64(x: f64) -> f64 {
    assert!(x > 0.0, "k0 requires a positive argument, got {x}");
    if x <= 2.0 {
        k0_series(x)
    } else {
        k0_quadrature(x)
    }
}

/// `K0 = -(ln(x/2) + gamma) I0(x) + sum_{k>=1} (x^2/4)^k / (k!)^2 H_k`.
fn k0_series(x: f64) -> f64 {
    let u = 0.25 * x * x;
    let mut i0 = 1.0;
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut h = 0.0;
    for k in 1..=40 {
        let kf = k as f64;
        term *= u / (kf * kf);
        h += 1.0 / kf;
        i0 += term;
        sum += term * h;
        if term * h.max(1.0) < 1e-19 {
            break;
        }
    }
    -(0.5 * x).ln().mul_add(i0, f64::euler_gamma() * i0) + sum
}

/// Trapezoidal rule on `int_0^inf exp(-x cosh t) dt`.
///
/// The discretization error relative to `k0(x) ~ e^-x` behaves like
/// `exp(x - pi^2/delta)`, so the step shrinks with the argument.
fn k0_quadrature(x: f64) -> f64 {
    let delta = (std::f64::consts::PI.powi(2) / (x + 40.0)).min(0.2);
    // e^-745 underflows; integrate until the integrand vanishes.
    let tmax = (745.0 / x).acosh();
    let steps = (tmax / delta).ceil() as usize + 1;
    let mut acc = 0.5 * (-x).exp();
    for j in 1..=steps {
        acc += (-x * (delta * j as f64).cosh()).exp();
    }
    acc * delta
}

fn gl64() -> &'static QuadratureRule<f64> {
    static RULE: OnceLock<QuadratureRule<f64>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(64, -1.0, 1.0))
}

/// Integrates `f` over `[a, b]` with the shared 64-point rule.
fn gl64_panel(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let rule = gl64();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Incomplete modified Bessel function `K0(a, b) = int_0^1 e^{-a/t - bt}/t dt`.
///
/// Requires `a > 0` and `b >= 0`. For `b = 0` the integral reduces to
/// `E1(a)`. For `a >= b` two Gauss-Legendre panels split at
/// `v = min(sqrt b, 1)` suffice; for `a < b` the symmetry identity
/// `K0(a,b) = 2 k0(2 sqrt(ab)) - K0(b,a)` is applied, with the swapped
/// integral split at `v = min(b sqrt(b/a), 1)`.
pub fn incomplete_k0<T: Real>(a: T, b: T) -> T {
    T::of(inc_k0_f64(a.as_f64(), b.as_f64()))
}

fn inc_k0_f64(a: f64, b: f64) -> f64 {
    assert!(a > 0.0, "incomplete_k0 requires a > 0, got {a}");
    assert!(b >= 0.0, "incomplete_k0 requires b >= 0, got {b}");
    if b == 0.0 {
        return e1_f64_or_zero(a);
    }
    if a >= b {
        inc_k0_panels(a, b, b.sqrt().min(1.0))
    } else {
        let cross = 2.0 * k0_or_zero(2.0 * (a * b).sqrt());
        let v = (b * (b / a).sqrt()).min(1.0);
        cross - inc_k0_panels(b, a, v)
    }
}

fn e1_f64_or_zero(x: f64) -> f64 {
    if x > E1_UNDERFLOW {
        0.0
    } else {
        e1_f64(x)
    }
}

fn k0_or_zero(x: f64) -> f64 {
    if x > 710.0 {
        0.0
    } else {
        k0_f64(x)
    }
}

/// Quadrature of `e^{-a/t - bt}/t` on `[0, v]` and `[v, 1]`.
///
/// The split at `v` keeps the `1/t` variation confined to the second
/// panel. When the boundary layer of `e^{-a/t}` at `t ~ a` sits deep
/// inside `[0, v]`, that panel is additionally subdivided geometrically
/// so every subpanel sees a bounded range of scales.
fn inc_k0_panels(a: f64, b: f64, v: f64) -> f64 {
    let f = |t: f64| {
        let e = -a / t - b * t;
        if e < -745.0 {
            0.0
        } else {
            e.exp() / t
        }
    };
    let mut acc = gl64_panel(v, 1.0, f);
    let mut hi = v;
    while hi > a {
        let lo = hi * 0.25;
        acc += gl64_panel(lo, hi, f);
        hi = lo;
    }
    acc + gl64_panel(0.0, hi, f)
}

/// Companion kernel `G(a, b) = int_0^1 e^{-a/t - bt} dt = -dK0(a,b)/db`.
///
/// Used by the analytic force reference. Evaluated with adaptive
/// Gauss-Legendre panels split at the integrand's peak `t = sqrt(a/b)`.
pub fn incomplete_k0_deriv<T: Real>(a: T, b: T) -> T {
    T::of(inc_g_f64(a.as_f64(), b.as_f64()))
}

fn inc_g_f64(a: f64, b: f64) -> f64 {
    assert!(a > 0.0, "incomplete_k0_deriv requires a > 0, got {a}");
    assert!(b >= 0.0, "incomplete_k0_deriv requires b >= 0, got {b}");
    let f = |t: f64| {
        let e = -a / t - b * t;
        if e < -745.0 {
            0.0
        } else {
            e.exp()
        }
    };
    // The integrand is bounded by one, so a fixed absolute target per
    // panel suffices. Panels are bisected until two half-panel rules
    // agree with the parent rule.
    let mut stack = vec![(0.0, 1.0, gl64_panel(0.0, 1.0, f), 0u32)];
    let mut acc = 0.0;
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = gl64_panel(lo, mid, f);
        let right = gl64_panel(mid, hi, f);
        if (left + right - whole).abs() <= 5e-17 || depth >= 30 {
            acc += left + right;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    acc
}
