//! Double-double arithmetic for quadrature-theory measurements.
//!
//! The quadrature error of the Fourier-space integrand is measured by
//! subtracting a closed-form limit from a slowly assembled lattice sum.
//! The interesting regimes sit at relative cancellations of 1e-25 and
//! below, far outside what `f64` can resolve, so the theory module does
//! its bookkeeping in double-double precision: an unevaluated sum of two
//! doubles giving roughly 32 significant digits.
//!
//! Only the operations that the theory functions actually need are
//! provided: field arithmetic, square root, `exp`, `ln`, `erfc` and the
//! exponential integral `E1`. Algorithms follow the classical
//! error-free-transformation constructions (two-sum, two-product with a
//! fused multiply-add) with elementary functions built from argument
//! reduction plus Taylor series, Newton iterations or continued
//! fractions.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

/// A double-double value `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

/// Error-free sum: returns `(s, e)` with `s = fl(a+b)` and `a+b = s+e`.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Error-free sum assuming `|a| >= |b|`.
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

/// Error-free product via fused multiply-add.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const PI: Dd = Dd {
        hi: 3.141592653589793,
        lo: 1.2246467991473532e-16,
    };
    pub const GAMMA: Dd = Dd {
        hi: 0.5772156649015329,
        lo: -4.942915152430645e-18,
    };
    pub const LN2: Dd = Dd {
        hi: 0.6931471805599453,
        lo: 2.3190468138462996e-17,
    };
    const TWO_OVER_SQRT_PI: Dd = Dd {
        hi: 1.1283791670955126,
        lo: 1.533545961316588e-17,
    };

    #[cfg(test)]
    pub fn new(hi: f64, lo: f64) -> Dd {
        let (s, e) = quick_two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    #[inline]
    pub fn sqr(self) -> Dd {
        let (p1, mut p2) = two_prod(self.hi, self.hi);
        p2 += 2.0 * self.hi * self.lo;
        p2 += self.lo * self.lo;
        let (s, e) = quick_two_sum(p1, p2);
        Dd { hi: s, lo: e }
    }

    /// Exact scaling by a power of two.
    #[inline]
    pub(crate) fn mul_pwr2(self, k: f64) -> Dd {
        Dd {
            hi: self.hi * k,
            lo: self.lo * k,
        }
    }

    /// Square root by Newton iteration on an `f64` seed.
    pub fn sqrt(self) -> Dd {
        assert!(self.hi >= 0.0, "dd sqrt of a negative value");
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        let mut s = Dd::from(self.hi.sqrt());
        for _ in 0..2 {
            s = (s + self / s).mul_pwr2(0.5);
        }
        s
    }

    /// Exponential by argument reduction `x = m ln2 + 512 r`, a Taylor
    /// series in `r`, nine squarings and a final scaling by `2^m`.
    pub fn exp(self) -> Dd {
        if self.hi < -709.0 {
            return Dd::ZERO;
        }
        assert!(self.hi < 709.0, "dd exp overflow: {}", self.hi);
        let m = (self.hi / Dd::LN2.hi + 0.5).floor();
        let r = (self - Dd::LN2 * Dd::from(m)).mul_pwr2(1.0 / 512.0);
        let inv_fact = inv_factorials();
        let mut p = r.sqr();
        let mut s = r + p.mul_pwr2(0.5);
        p = p * r;
        for (k, &f) in inv_fact.iter().enumerate() {
            let t = p * f;
            s = s + t;
            if t.hi.abs() < 1e-37 {
                break;
            }
            assert!(k + 1 < inv_fact.len(), "dd exp series did not converge");
            p = p * r;
        }
        for _ in 0..9 {
            s = s.mul_pwr2(2.0) + s.sqr();
        }
        s = s + Dd::ONE;
        let scale = 2f64.powi(m as i32);
        Dd {
            hi: s.hi * scale,
            lo: s.lo * scale,
        }
    }

    /// Natural logarithm by Newton iteration `y <- y + x e^-y - 1`.
    pub fn ln(self) -> Dd {
        assert!(self.hi > 0.0, "dd ln of a non-positive value");
        let mut y = Dd::from(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }
}

/// `1/k!` for `k = 3..=18` (the factorials are exact in `f64`).
fn inv_factorials() -> &'static [Dd; 16] {
    static TABLE: OnceLock<[Dd; 16]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut fact = 2.0f64;
        std::array::from_fn(|i| {
            fact *= (i + 3) as f64;
            Dd::ONE / Dd::from(fact)
        })
    })
}

impl From<f64> for Dd {
    #[inline]
    fn from(v: f64) -> Dd {
        Dd { hi: v, lo: 0.0 }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, rhs: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, rhs.hi);
        let (t1, t2) = two_sum(self.lo, rhs.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (s1, s2) = quick_two_sum(s1, s2 + t2);
        Dd { hi: s1, lo: s2 }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, rhs: Dd) -> Dd {
        let (p1, mut p2) = two_prod(self.hi, rhs.hi);
        p2 += self.hi * rhs.lo;
        p2 += self.lo * rhs.hi;
        let (s, e) = quick_two_sum(p1, p2);
        Dd { hi: s, lo: e }
    }
}

impl Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, rhs: Dd) -> Dd {
        assert!(rhs.hi != 0.0, "dd division by zero");
        let q1 = self.hi / rhs.hi;
        let mut r = self - rhs * Dd::from(q1);
        let q2 = r.hi / rhs.hi;
        r = r - rhs * Dd::from(q2);
        let q3 = r.hi / rhs.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd { hi: s, lo: e } + Dd::from(q3)
    }
}

impl Add<f64> for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, rhs: f64) -> Dd {
        self + Dd::from(rhs)
    }
}

impl Sub<f64> for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, rhs: f64) -> Dd {
        self - Dd::from(rhs)
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, rhs: f64) -> Dd {
        self * Dd::from(rhs)
    }
}

impl Div<f64> for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, rhs: f64) -> Dd {
        self / Dd::from(rhs)
    }
}

/// Complementary error function in double-double precision.
///
/// Taylor series of `erf` up to `x = 2.5`, a continued fraction beyond.
pub(crate) fn erfc(x: Dd) -> Dd {
    if x.hi < 0.0 {
        return Dd::from(2.0) - erfc(-x);
    }
    if x.hi == 0.0 && x.lo == 0.0 {
        return Dd::ONE;
    }
    if x.hi <= 2.5 {
        let x2 = x.sqr();
        let mut term = x;
        let mut sum = x;
        for n in 1..=120 {
            term = term * x2 / (-(n as f64));
            let add = term / (2 * n + 1) as f64;
            sum = sum + add;
            if add.hi.abs() < 1e-36 * sum.hi.abs() {
                return Dd::ONE - sum * Dd::TWO_OVER_SQRT_PI;
            }
        }
        panic!("dd erf series did not converge at {}", x.hi);
    }
    // erfc(x) = exp(-x^2)/sqrt(pi) / F,
    // F = x + (1/2)/(x + 1/(x + (3/2)/(x + 2/(x + ...))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = f;
    let mut d = Dd::ZERO;
    for k in 1..=400u32 {
        let a = 0.5 * k as f64;
        d = x + d * a;
        if d.hi == 0.0 {
            d = Dd::from(tiny);
        }
        c = x + Dd::from(a) / c;
        if c.hi == 0.0 {
            c = Dd::from(tiny);
        }
        d = Dd::ONE / d;
        let delta = c * d;
        f = f * delta;
        if (delta - Dd::ONE).abs().hi < 1e-34 {
            let pref = (-x.sqr()).exp() * Dd::TWO_OVER_SQRT_PI.mul_pwr2(0.5);
            return pref / f;
        }
    }
    panic!("dd erfc continued fraction did not converge at {}", x.hi);
}

/// Exponential integral `E1` in double-double precision.
///
/// Ascending series up to `x = 4`, a continued fraction beyond.
pub(crate) fn e1(x: Dd) -> Dd {
    assert!(x.hi > 0.0, "dd e1 requires a positive argument");
    if x.hi <= 4.0 {
        let mut p = Dd::ONE;
        let mut sum = Dd::ZERO;
        for m in 1..=160 {
            p = p * x / (-(m as f64));
            let add = p / (-(m as f64));
            sum = sum + add;
            if add.hi.abs() < 1e-36 * sum.hi.abs().max(1e-30) {
                return sum - Dd::GAMMA - x.ln();
            }
        }
        panic!("dd e1 series did not converge at {}", x.hi);
    }
    // E1(x) = e^-x / (x+1 - 1/(x+3 - 4/(x+5 - 9/(x+7 - ...))))
    let tiny = 1e-300;
    let mut f = x + 1.0;
    let mut c = f;
    let mut d = Dd::ZERO;
    for k in 2..=2000u32 {
        let a = -((((k - 1) * (k - 1)) as f64));
        let b = x + (2 * k - 1) as f64;
        d = b + d * a;
        if d.hi == 0.0 {
            d = Dd::from(tiny);
        }
        c = b + Dd::from(a) / c;
        if c.hi == 0.0 {
            c = Dd::from(tiny);
        }
        d = Dd::ONE / d;
        let delta = c * d;
        f = f * delta;
        if (delta - Dd::ONE).abs().hi < 1e-34 {
            return (-x).exp() / f;
        }
    }
    panic!("dd e1 continued fraction did not converge at {}", x.hi);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_dd(got: Dd, hi: f64, lo: f64, tol: f64) {
        let want = Dd::new(hi, lo);
        let diff = (got - want).abs().to_f64();
        let scale = want.abs().to_f64().max(1e-300);
        assert!(
            diff <= tol * scale,
            "dd mismatch: got ({:e}, {:e}), want ({hi:e}, {lo:e}), rel {:e}",
            got.hi,
            got.lo,
            diff / scale
        );
    }

    #[test]
    fn representation_keeps_tiny_addends() {
        let a = Dd::from(1.0) + Dd::from(1e-25);
        assert_eq!(a.hi, 1.0);
        assert_eq!(a.lo, 1e-25);
        assert_eq!((a - Dd::ONE).to_f64(), 1e-25);
    }

    #[test]
    fn constants_are_correctly_split() {
        assert_eq!(Dd::PI.hi, std::f64::consts::PI);
        assert!(Dd::PI.lo != 0.0);
        assert_eq!(Dd::LN2.hi, std::f64::consts::LN_2);
        // gamma + something known: 2*gamma at full precision
        let two_gamma = Dd::GAMMA + Dd::GAMMA;
        assert_dd(two_gamma, 1.1544313298030657, -9.88583030486129e-18, 1e-31);
    }

    proptest! {
        #[test]
        fn field_identities(a in -1e8..1e8f64, b in -1e8..1e8f64) {
            let (x, y) = (Dd::from(a), Dd::from(b));
            let sum = x + y;
            prop_assert!(((sum - y) - x).abs().to_f64() <= 1e-30 * a.abs().max(b.abs()).max(1.0));
            if b != 0.0 {
                let q = x * y / y;
                prop_assert!((q - x).abs().to_f64() <= 1e-28 * a.abs().max(1.0));
            }
        }

        #[test]
        fn sqrt_round_trip(a in 1e-6..1e12f64) {
            let x = Dd::from(a);
            let r = x.sqrt().sqr() - x;
            prop_assert!(r.abs().to_f64() <= 1e-29 * a);
        }

        #[test]
        fn exp_ln_round_trip(a in 1e-5..1e5f64) {
            let x = Dd::from(a);
            let r = x.ln().exp() - x;
            prop_assert!(r.abs().to_f64() <= 1e-28 * a);
        }
    }

    #[test]
    fn exp_fixed_points() {
        assert_dd(Dd::from(0.3).exp(), 1.3498588075760032, -9.447314673432387e-17, 1e-30);
        assert_dd(Dd::from(1.7).exp(), 5.4739473917272, -3.893534160478951e-16, 1e-30);
        assert_dd(
            Dd::from(-5.25).exp(),
            0.005247518399181385,
            -3.461602049984131e-19,
            1e-30,
        );
        assert_dd(Dd::from(20.0).exp(), 485165195.4097903, 4.880277289790406e-10, 1e-30);
        assert_dd(
            Dd::from(-30.0).exp(),
            9.357622968840175e-14,
            -2.1170146272646406e-30,
            1e-30,
        );
        assert_dd(
            Dd::from(62.832).exp(),
            1.9390583897927282e27,
            44109285915.47921,
            1e-30,
        );
        assert_eq!(Dd::from(-800.0).exp(), Dd::ZERO);
    }

    #[test]
    fn ln_fixed_points() {
        assert_dd(Dd::from(0.7).ln(), -0.35667494393873245, 4.82556379937662e-18, 1e-30);
        assert_dd(Dd::from(3.0).ln(), 1.0986122886681098, -9.07129723500153e-17, 1e-30);
        assert_dd(
            Dd::from(123.456).ln(),
            4.815884817283264,
            1.2224723590869397e-16,
            1e-30,
        );
    }

    #[test]
    fn erfc_fixed_points() {
        // x = sqrt(1/10) at dd precision
        let x = (Dd::ONE / Dd::from(10.0)).sqrt();
        assert_dd(erfc(x), 0.654720846018577, -2.2369288626054836e-17, 1e-28);
        assert_dd(
            erfc(Dd::from(2.0)),
            0.004677734981047266,
            -3.8794238326641256e-19,
            1e-27,
        );
        assert_dd(
            erfc(Dd::from(4.5)),
            1.9661604415428876e-10,
            -1.0512550512761318e-26,
            1e-28,
        );
        // reflection
        let r = erfc(Dd::from(-2.0)) + erfc(Dd::from(2.0)) - Dd::from(2.0);
        assert!(r.abs().to_f64() < 1e-30);
    }

    #[test]
    fn e1_fixed_points() {
        assert_dd(
            e1(Dd::from(0.4)),
            0.7023801188656624,
            1.3010407383155245e-17,
            1e-29,
        );
        assert_dd(
            e1(Dd::from(2.5)),
            0.024914917870269736,
            -9.53956373421134e-19,
            1e-27,
        );
        assert_dd(
            e1(Dd::from(15.0)),
            1.918627892147867e-8,
            2.6732802675378064e-25,
            1e-28,
        );
    }

    #[test]
    fn division_accuracy_demo() {
        // 355/113 differs from pi by 2.7e-7; the dd quotient must carry
        // ~32 digits so the difference is resolved far below f64 ulps.
        let q = Dd::from(355.0) / Dd::from(113.0);
        let diff = (q - Dd::PI).to_f64();
        assert!((diff - 2.667641890624223e-7).abs() < 1e-21);
    }
}
