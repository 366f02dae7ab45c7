//! Scalar abstraction shared by the evaluation pipeline.
//!
//! Every numeric path from trainable parameters to a loss value is written
//! over [`Real`], so the same code runs on plain `f64` and on the
//! forward-mode [`Dual`] numbers used for exact gradients.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};

use num_complex::Complex;
use num_traits::{Num, One, Zero};

pub type C64 = Complex<f64>;

/// Real scalar field used by the engine.
pub trait Real:
    Copy
    + Debug
    + Send
    + Sync
    + 'static
    + Num
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + RemAssign
{
    fn from_f64(x: f64) -> Self;
    /// Primal value, dropping any derivative information.
    fn value(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn sqrt(self) -> Self;

    fn abs(self) -> Self {
        if self.value() < 0.0 {
            -self
        } else {
            self
        }
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    #[inline]
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

/// Lift a real scalar into a complex number with zero imaginary part.
#[inline]
pub fn cr<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// Complex constant from `f64` parts.
#[inline]
pub fn cc<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::from_f64(re), T::from_f64(im))
}

/// `e^{i phi}` for a real phase.
#[inline]
pub fn cis<T: Real>(phi: T) -> Complex<T> {
    Complex::new(phi.cos(), phi.sin())
}

/// Drop derivative parts of a complex scalar.
#[inline]
pub fn cvalue<T: Real>(z: Complex<T>) -> C64 {
    Complex::new(z.re.value(), z.im.value())
}

/// Forward-mode dual number carrying `W` directional derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const W: usize> {
    pub v: f64,
    pub d: [f64; W],
}

impl<const W: usize> Dual<W> {
    pub fn constant(v: f64) -> Self {
        Dual { v, d: [0.0; W] }
    }

    /// Independent variable seeded along direction `slot`.
    pub fn variable(v: f64, slot: usize) -> Self {
        let mut d = [0.0; W];
        d[slot] = 1.0;
        Dual { v, d }
    }

    #[inline]
    fn chain(self, f: f64, df: f64) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x *= df;
        }
        Dual { v: f, d }
    }
}

impl<const W: usize> Add for Dual<W> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: Self) -> Self {
        self.v += o.v;
        for (a, b) in self.d.iter_mut().zip(o.d.iter()) {
            *a += *b;
        }
        self
    }
}

impl<const W: usize> Sub for Dual<W> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: Self) -> Self {
        self.v -= o.v;
        for (a, b) in self.d.iter_mut().zip(o.d.iter()) {
            *a -= *b;
        }
        self
    }
}

impl<const W: usize> Mul for Dual<W> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut d = [0.0; W];
        for i in 0..W {
            d[i] = self.d[i] * o.v + self.v * o.d[i];
        }
        Dual { v: self.v * o.v, d }
    }
}

impl<const W: usize> Div for Dual<W> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        let q = self.v * inv;
        let mut d = [0.0; W];
        for i in 0..W {
            d[i] = (self.d[i] - q * o.d[i]) * inv;
        }
        Dual { v: q, d }
    }
}

impl<const W: usize> Rem for Dual<W> {
    type Output = Self;
    fn rem(self, o: Self) -> Self {
        // d(a mod b) = da - trunc(a/b) db
        let k = (self.v / o.v).trunc();
        self - o * Dual::constant(k)
    }
}

impl<const W: usize> Neg for Dual<W> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.v = -self.v;
        for x in self.d.iter_mut() {
            *x = -*x;
        }
        self
    }
}

macro_rules! assign_ops {
    ($($tr:ident $m:ident $op:tt),*) => {$(
        impl<const W: usize> $tr for Dual<W> {
            #[inline]
            fn $m(&mut self, o: Self) {
                *self = *self $op o;
            }
        }
    )*};
}
assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /, RemAssign rem_assign %);

impl<const W: usize> Zero for Dual<W> {
    fn zero() -> Self {
        Dual::constant(0.0)
    }
    fn is_zero(&self) -> bool {
        self.v == 0.0 && self.d.iter().all(|x| *x == 0.0)
    }
}

impl<const W: usize> One for Dual<W> {
    fn one() -> Self {
        Dual::constant(1.0)
    }
}

impl<const W: usize> Num for Dual<W> {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Dual::constant)
    }
}

impl<const W: usize> Real for Dual<W> {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Dual::constant(x)
    }
    #[inline]
    fn value(self) -> f64 {
        self.v
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v)
    }
    fn sinh(self) -> Self {
        self.chain(self.v.sinh(), self.v.cosh())
    }
    fn cosh(self) -> Self {
        self.chain(self.v.cosh(), self.v.sinh())
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type D = Dual<2>;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn elementary_derivatives_match_finite_differences() {
        let x = 0.37;
        type Check = (fn(D) -> D, fn(f64) -> f64);
        let checks: [Check; 7] = [
            (|v| v.sin(), f64::sin),
            (|v| v.cos(), f64::cos),
            (|v| v.exp(), f64::exp),
            (|v| v.ln(), f64::ln),
            (|v| v.sinh(), f64::sinh),
            (|v| v.cosh(), f64::cosh),
            (|v| v.sqrt(), f64::sqrt),
        ];
        for (dual_f, real_f) in checks {
            let y = dual_f(D::variable(x, 0));
            assert!((y.v - real_f(x)).abs() < 1e-15);
            assert!((y.d[0] - fd(real_f, x)).abs() < 1e-8);
            assert_eq!(y.d[1], 0.0);
        }
    }

    #[test]
    fn quotient_rule_through_complex_division() {
        let a = D::variable(1.3, 0);
        let b = D::variable(-0.4, 1);
        let z = Complex::new(a, b) / Complex::new(b * b + D::constant(1.0), a);
        let f = |a: f64, b: f64| (Complex::new(a, b) / Complex::new(b * b + 1.0, a)).re;
        let h = 1e-6;
        let da = (f(1.3 + h, -0.4) - f(1.3 - h, -0.4)) / (2.0 * h);
        let db = (f(1.3, -0.4 + h) - f(1.3, -0.4 - h)) / (2.0 * h);
        assert!((z.re.d[0] - da).abs() < 1e-8);
        assert!((z.re.d[1] - db).abs() < 1e-8);
    }
}
