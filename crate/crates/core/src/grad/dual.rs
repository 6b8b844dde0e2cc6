use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DualError {
    #[error("division by a zero-valued dual number")]
    DivisionByZero,
}

/// Scalar interface shared by `f64` and [`Dual`], so geometry and loss kernels
/// are written once and evaluated either plainly or with derivatives.
pub trait Real:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
{
    /// Constant (zero tangent).
    fn cst(v: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    /// `abs'(0) = 0`.
    fn abs(self) -> Self;

    /// First-order lift of an externally evaluated function: returns a scalar
    /// with the given value whose tangent is `slope · arg'`.
    fn lift(value: f64, slope: f64, arg: Self) -> Self;

    /// `lift` with two arguments.
    fn lift2(value: f64, slope: [f64; 2], args: [Self; 2]) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    /// Minimum by value; ties return `self`.
    fn min_tie_first(self, other: Self) -> Self {
        if other.value() < self.value() {
            other
        } else {
            self
        }
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
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
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn lift(value: f64, _slope: f64, _arg: Self) -> Self {
        value
    }
    #[inline]
    fn lift2(value: f64, _slope: [f64; 2], _args: [Self; 2]) -> Self {
        value
    }
}

/// Forward-mode dual number with `N` tangent directions.
#[derive(Clone, Copy, PartialEq)]
pub struct Dual<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(v: f64) -> Self {
        Dual { v, d: [0.0; N] }
    }

    /// Independent variable seeded in tangent slot `slot`.
    pub fn variable(v: f64, slot: usize) -> Self {
        let mut d = [0.0; N];
        d[slot] = 1.0;
        Dual { v, d }
    }

    #[inline]
    fn chain(self, value: f64, slope: f64) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x *= slope;
        }
        Dual { v: value, d }
    }

    pub fn checked_div(self, rhs: Self) -> Result<Self, DualError> {
        if rhs.v == 0.0 {
            return Err(DualError::DivisionByZero);
        }
        Ok(self / rhs)
    }

    /// Minimum by value; on ties the first argument (`self`) is kept.
    pub fn min(self, other: Self) -> Self {
        self.min_tie_first(other)
    }
}

impl<const N: usize> fmt::Debug for Dual<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dual({} + {:?}ε)", self.v, self.d)
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.v += rhs.v;
        for (a, b) in self.d.iter_mut().zip(rhs.d.iter()) {
            *a += b;
        }
        self
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.v -= rhs.v;
        for (a, b) in self.d.iter_mut().zip(rhs.d.iter()) {
            *a -= b;
        }
        self
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = self.d[i] * rhs.v + self.v * rhs.d[i];
        }
        Dual { v: self.v * rhs.v, d }
    }
}

/// IEEE semantics on a zero divisor (non-finite result); use
/// [`Dual::checked_div`] to get an error instead.
impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        // a true quotient, so that x / x is exactly 1
        let v = self.v / rhs.v;
        let inv = 1.0 / rhs.v;
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = (self.d[i] - v * rhs.d[i]) * inv;
        }
        Dual { v, d }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.chain(-self.v, -1.0)
    }
}

impl<const N: usize> AddAssign for Dual<N> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const N: usize> SubAssign for Dual<N> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<const N: usize> MulAssign for Dual<N> {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<const N: usize> Real for Dual<N> {
    #[inline]
    fn cst(v: f64) -> Self {
        Dual::constant(v)
    }
    #[inline]
    fn value(&self) -> f64 {
        self.v
    }
    #[inline]
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }
    #[inline]
    fn abs(self) -> Self {
        let slope = if self.v > 0.0 {
            1.0
        } else if self.v < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.chain(self.v.abs(), slope)
    }
    #[inline]
    fn lift(value: f64, slope: f64, arg: Self) -> Self {
        arg.chain(value, slope)
    }
    #[inline]
    fn lift2(value: f64, slope: [f64; 2], args: [Self; 2]) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = slope[0] * args[0].d[i] + slope[1] * args[1].d[i];
        }
        Dual { v: value, d }
    }
}
