//! Scalar types threaded through model evaluators.
//!
//! Every model evaluator is generic over [`Scalar`]. Plain `f64` gives
//! values, [`Jet1`] carries a gradient, [`Jet2`] carries gradient and
//! Hessian, and [`Dual`] carries a single directional derivative on top of
//! any other scalar (the lift engine uses `Dual<S>` to form `r^k ∂_k f`).
//!
//! Jets have a fixed capacity of [`MAX_VARS`] independent variables so that
//! they stay `Copy` and never allocate.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Maximum number of independent variables a jet can track.
pub const MAX_VARS: usize = 8;

/// Arithmetic needed by model evaluators.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
{
    fn constant(v: f64) -> Self;
    /// The plain value (zeroth-order part).
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn recip(self) -> Self;

    fn zero() -> Self {
        Self::constant(0.0)
    }
    fn one() -> Self {
        Self::constant(1.0)
    }
    fn is_finite(&self) -> bool {
        self.value().is_finite()
    }
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn recip(self) -> Self {
        1.0 / self
    }
}

/// A scalar that carries partial derivatives with respect to the chart
/// coordinates. `Lower` is the same quantity with one derivative order
/// removed, so that `partial(i)` of a `Jet2` is itself a `Jet1`.
pub trait Jet: Scalar {
    type Lower: Scalar;

    /// Seed the `index`-th of `nvars` independent variables at `value`.
    fn variable(value: f64, index: usize, nvars: usize) -> Self;
    /// Drop the highest derivative order.
    fn truncate(&self) -> Self::Lower;
    /// `∂/∂q^i` of this quantity, one order lower.
    fn partial(&self, i: usize) -> Self::Lower;
}

// ---------------------------------------------------------------------------
// Jet1
// ---------------------------------------------------------------------------

/// First-order truncated Taylor value: `f` and `∂f/∂q^i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet1 {
    pub val: f64,
    pub grad: [f64; MAX_VARS],
    nvars: usize,
}

impl Jet1 {
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    fn chain(self, f0: f64, f1: f64) -> Self {
        let mut out = Jet1 {
            val: f0,
            grad: [0.0; MAX_VARS],
            nvars: self.nvars,
        };
        for i in 0..self.nvars {
            out.grad[i] = f1 * self.grad[i];
        }
        out
    }
}

impl Scalar for Jet1 {
    fn constant(v: f64) -> Self {
        Jet1 {
            val: v,
            grad: [0.0; MAX_VARS],
            nvars: 0,
        }
    }
    fn value(&self) -> f64 {
        self.val
    }
    fn sin(self) -> Self {
        let (s, c) = self.val.sin_cos();
        self.chain(s, c)
    }
    fn cos(self) -> Self {
        let (s, c) = self.val.sin_cos();
        self.chain(c, -s)
    }
    fn sqrt(self) -> Self {
        let r = self.val.sqrt();
        self.chain(r, 0.5 / r)
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.val;
        self.chain(r, -r * r)
    }
}

impl Jet for Jet1 {
    type Lower = f64;

    fn variable(value: f64, index: usize, nvars: usize) -> Self {
        assert!(nvars <= MAX_VARS && index < nvars, "jet capacity exceeded");
        let mut j = Jet1 {
            val: value,
            grad: [0.0; MAX_VARS],
            nvars,
        };
        j.grad[index] = 1.0;
        j
    }
    fn truncate(&self) -> f64 {
        self.val
    }
    fn partial(&self, i: usize) -> f64 {
        self.grad[i]
    }
}

impl Add for Jet1 {
    type Output = Jet1;
    fn add(mut self, rhs: Jet1) -> Jet1 {
        let n = self.nvars.max(rhs.nvars);
        self.val += rhs.val;
        for i in 0..n {
            self.grad[i] += rhs.grad[i];
        }
        self.nvars = n;
        self
    }
}

impl Sub for Jet1 {
    type Output = Jet1;
    fn sub(mut self, rhs: Jet1) -> Jet1 {
        let n = self.nvars.max(rhs.nvars);
        self.val -= rhs.val;
        for i in 0..n {
            self.grad[i] -= rhs.grad[i];
        }
        self.nvars = n;
        self
    }
}

impl Mul for Jet1 {
    type Output = Jet1;
    fn mul(self, rhs: Jet1) -> Jet1 {
        let n = self.nvars.max(rhs.nvars);
        let mut out = Jet1 {
            val: self.val * rhs.val,
            grad: [0.0; MAX_VARS],
            nvars: n,
        };
        for i in 0..n {
            out.grad[i] = self.grad[i] * rhs.val + self.val * rhs.grad[i];
        }
        out
    }
}

impl Div for Jet1 {
    type Output = Jet1;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet1) -> Jet1 {
        let mut out = self * rhs.recip();
        out.val = self.val / rhs.val;
        out
    }
}

impl Neg for Jet1 {
    type Output = Jet1;
    fn neg(mut self) -> Jet1 {
        self.val = -self.val;
        for g in self.grad.iter_mut().take(self.nvars) {
            *g = -*g;
        }
        self
    }
}

// ---------------------------------------------------------------------------
// Jet2
// ---------------------------------------------------------------------------

/// Second-order truncated Taylor value: value, gradient and (symmetric)
/// Hessian with respect to the chart coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub val: f64,
    pub grad: [f64; MAX_VARS],
    pub hess: [[f64; MAX_VARS]; MAX_VARS],
    nvars: usize,
}

impl Jet2 {
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    fn empty(val: f64, nvars: usize) -> Self {
        Jet2 {
            val,
            grad: [0.0; MAX_VARS],
            hess: [[0.0; MAX_VARS]; MAX_VARS],
            nvars,
        }
    }

    /// Unary chain rule for `f(self)` given `f`, `f'` and `f''` at the value.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let n = self.nvars;
        let mut out = Jet2::empty(f0, n);
        for i in 0..n {
            out.grad[i] = f1 * self.grad[i];
            for j in 0..=i {
                let h = f1 * self.hess[i][j] + f2 * self.grad[i] * self.grad[j];
                out.hess[i][j] = h;
                out.hess[j][i] = h;
            }
        }
        out
    }
}

impl Scalar for Jet2 {
    fn constant(v: f64) -> Self {
        Jet2::empty(v, 0)
    }
    fn value(&self) -> f64 {
        self.val
    }
    fn sin(self) -> Self {
        let (s, c) = self.val.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.val.sin_cos();
        self.chain(c, -s, -c)
    }
    fn sqrt(self) -> Self {
        let r = self.val.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * r * r))
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.val;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
}

impl Jet for Jet2 {
    type Lower = Jet1;

    fn variable(value: f64, index: usize, nvars: usize) -> Self {
        assert!(nvars <= MAX_VARS && index < nvars, "jet capacity exceeded");
        let mut j = Jet2::empty(value, nvars);
        j.grad[index] = 1.0;
        j
    }
    fn truncate(&self) -> Jet1 {
        Jet1 {
            val: self.val,
            grad: self.grad,
            nvars: self.nvars,
        }
    }
    fn partial(&self, i: usize) -> Jet1 {
        let mut grad = [0.0; MAX_VARS];
        grad[..self.nvars].copy_from_slice(&self.hess[i][..self.nvars]);
        Jet1 {
            val: self.grad[i],
            grad,
            nvars: self.nvars,
        }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(mut self, rhs: Jet2) -> Jet2 {
        let n = self.nvars.max(rhs.nvars);
        self.val += rhs.val;
        for i in 0..n {
            self.grad[i] += rhs.grad[i];
            for j in 0..n {
                self.hess[i][j] += rhs.hess[i][j];
            }
        }
        self.nvars = n;
        self
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(mut self, rhs: Jet2) -> Jet2 {
        let n = self.nvars.max(rhs.nvars);
        self.val -= rhs.val;
        for i in 0..n {
            self.grad[i] -= rhs.grad[i];
            for j in 0..n {
                self.hess[i][j] -= rhs.hess[i][j];
            }
        }
        self.nvars = n;
        self
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        let n = self.nvars.max(rhs.nvars);
        let (a, b) = (self.val, rhs.val);
        let mut out = Jet2::empty(a * b, n);
        for i in 0..n {
            out.grad[i] = self.grad[i] * b + a * rhs.grad[i];
            for j in 0..=i {
                let h = self.hess[i][j] * b
                    + a * rhs.hess[i][j]
                    + self.grad[i] * rhs.grad[j]
                    + self.grad[j] * rhs.grad[i];
                out.hess[i][j] = h;
                out.hess[j][i] = h;
            }
        }
        out
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet2) -> Jet2 {
        let mut out = self * rhs.recip();
        out.val = self.val / rhs.val;
        out
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(mut self) -> Jet2 {
        let n = self.nvars;
        self.val = -self.val;
        for i in 0..n {
            self.grad[i] = -self.grad[i];
            for j in 0..n {
                self.hess[i][j] = -self.hess[i][j];
            }
        }
        self
    }
}

// ---------------------------------------------------------------------------
// Dual
// ---------------------------------------------------------------------------

/// `re + ε·eps` with `ε² = 0`, over any scalar.
///
/// Evaluating `f(q + ε r)` yields `f(q)` in `re` and the directional
/// derivative `r^k ∂_k f(q)` in `eps`, which is exactly the fiber part of a
/// complete lift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<S> {
    pub re: S,
    pub eps: S,
}

impl<S: Scalar> Dual<S> {
    pub fn new(re: S, eps: S) -> Self {
        Dual { re, eps }
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    fn constant(v: f64) -> Self {
        Dual {
            re: S::constant(v),
            eps: S::zero(),
        }
    }
    fn value(&self) -> f64 {
        self.re.value()
    }
    fn sin(self) -> Self {
        Dual {
            re: self.re.sin(),
            eps: self.eps * self.re.cos(),
        }
    }
    fn cos(self) -> Self {
        Dual {
            re: self.re.cos(),
            eps: -(self.eps * self.re.sin()),
        }
    }
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        Dual {
            re: r,
            eps: self.eps * (r * 2.0).recip(),
        }
    }
    fn recip(self) -> Self {
        let r = self.re.recip();
        Dual {
            re: r,
            eps: -(self.eps * r * r),
        }
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual {
            re: self.re + rhs.re,
            eps: self.eps + rhs.eps,
        }
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual {
            re: self.re - rhs.re,
            eps: self.eps - rhs.eps,
        }
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Dual {
            re: self.re * rhs.re,
            eps: self.re * rhs.eps + self.eps * rhs.re,
        }
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        let re = self.re / rhs.re;
        Dual {
            re,
            eps: (self.eps - re * rhs.eps) / rhs.re,
        }
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            re: -self.re,
            eps: -self.eps,
        }
    }
}

// Mixed arithmetic with plain f64 and compound assignment, shared by all
// three scalar types.
macro_rules! scalar_f64_ops {
    ($t:ty $(, $g:ident)?) => {
        impl$(<$g: Scalar>)? Add<f64> for $t {
            type Output = $t;
            fn add(self, rhs: f64) -> $t {
                self + <$t as Scalar>::constant(rhs)
            }
        }
        impl$(<$g: Scalar>)? Sub<f64> for $t {
            type Output = $t;
            fn sub(self, rhs: f64) -> $t {
                self - <$t as Scalar>::constant(rhs)
            }
        }
        impl$(<$g: Scalar>)? Mul<f64> for $t {
            type Output = $t;
            fn mul(self, rhs: f64) -> $t {
                self * <$t as Scalar>::constant(rhs)
            }
        }
        impl$(<$g: Scalar>)? Div<f64> for $t {
            type Output = $t;
            fn div(self, rhs: f64) -> $t {
                self / <$t as Scalar>::constant(rhs)
            }
        }
        impl$(<$g: Scalar>)? AddAssign for $t {
            fn add_assign(&mut self, rhs: $t) {
                *self = *self + rhs;
            }
        }
        impl$(<$g: Scalar>)? SubAssign for $t {
            fn sub_assign(&mut self, rhs: $t) {
                *self = *self - rhs;
            }
        }
    };
}

scalar_f64_ops!(Jet1);
scalar_f64_ops!(Jet2);
scalar_f64_ops!(Dual<S>, S);

/// Seed every coordinate of `q` as an independent jet variable.
pub fn seed<J: Jet>(q: &[f64]) -> Vec<J> {
    let n = q.len();
    q.iter()
        .enumerate()
        .map(|(i, &v)| J::variable(v, i, n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<S: Scalar>(x: S, y: S) -> S {
        (x * y).sin() + x.sqrt() / (y * y + 1.0) - x.cos() * 3.0
    }

    #[test]
    fn jet2_matches_finite_differences() {
        let (x0, y0) = (0.7, -0.4);
        let v = seed::<Jet2>(&[x0, y0]);
        let j = f(v[0], v[1]);
        let h = 1e-4;
        let fx = |x: f64, y: f64| f::<f64>(x, y);
        let gx = (fx(x0 + h, y0) - fx(x0 - h, y0)) / (2.0 * h);
        let gy = (fx(x0, y0 + h) - fx(x0, y0 - h)) / (2.0 * h);
        assert!((j.val - fx(x0, y0)).abs() < 1e-15);
        assert!((j.grad[0] - gx).abs() < 1e-7);
        assert!((j.grad[1] - gy).abs() < 1e-7);
        let hxy = (fx(x0 + h, y0 + h) - fx(x0 + h, y0 - h) - fx(x0 - h, y0 + h)
            + fx(x0 - h, y0 - h))
            / (4.0 * h * h);
        let hxx = (fx(x0 + h, y0) - 2.0 * fx(x0, y0) + fx(x0 - h, y0)) / (h * h);
        assert!((j.hess[0][1] - hxy).abs() < 1e-6);
        assert!((j.hess[0][0] - hxx).abs() < 1e-6);
        assert_eq!(j.hess[0][1], j.hess[1][0]);
    }

    #[test]
    fn partial_of_jet2_is_gradient_row() {
        let v = seed::<Jet2>(&[1.3, 0.2]);
        let j = v[0] * v[0] * v[1];
        let d0 = j.partial(0);
        // d/dx (x^2 y) = 2xy, and its gradient is (2y, 2x)
        assert!((d0.val - 2.0 * 1.3 * 0.2).abs() < 1e-15);
        assert!((d0.grad[0] - 0.4).abs() < 1e-15);
        assert!((d0.grad[1] - 2.6).abs() < 1e-15);
        assert_eq!(j.truncate().val, j.val);
    }

    #[test]
    fn dual_gives_directional_derivative() {
        let q = [0.3, 1.1];
        let r = [2.0, -1.0];
        let d: Vec<Dual<f64>> = q.iter().zip(r).map(|(&a, b)| Dual::new(a, b)).collect();
        let out = f(d[0], d[1]);
        let j = {
            let v = seed::<Jet1>(&q);
            f(v[0], v[1])
        };
        let expected = j.grad[0] * r[0] + j.grad[1] * r[1];
        assert!((out.eps - expected).abs() < 1e-14);
        assert_eq!(out.re, f::<f64>(q[0], q[1]));
    }

    #[test]
    fn values_agree_with_plain_scalars() {
        let v = seed::<Jet2>(&[0.9, 0.5]);
        let w = seed::<Jet1>(&[0.9, 0.5]);
        assert_eq!(f(v[0], v[1]).val, f(w[0], w[1]).val);
    }
}
