//! Forward-mode automatic differentiation carriers.
//!
//! `Dual2` propagates a value, its gradient and its full Hessian through
//! arithmetic, so a closure written over `Dual2` yields machine-exact
//! partials up to order two. This backs user-defined fields (expression
//! files); the built-in catalog uses hand-coded analytic partials instead.
//!
//! `Jet1` carries a single directional derivative and is used to
//! differentiate first-integral evaluators along the flow.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Second-order dual number in `n` variables: value, gradient and Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual2 {
    pub val: f64,
    pub grad: Vec<f64>,
    /// Row-major symmetric n x n matrix.
    pub hess: Vec<f64>,
}

impl Dual2 {
    pub fn constant(val: f64, n: usize) -> Self {
        Dual2 {
            val,
            grad: vec![0.0; n],
            hess: vec![0.0; n * n],
        }
    }

    /// Seed for the i-th independent variable.
    pub fn variable(val: f64, i: usize, n: usize) -> Self {
        let mut d = Dual2::constant(val, n);
        d.grad[i] = 1.0;
        d
    }

    pub fn nvars(&self) -> usize {
        self.grad.len()
    }

    pub fn hess_at(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.nvars() + j]
    }

    /// Chain rule for a smooth unary g: needs g(u), g'(u), g''(u).
    fn unary(&self, g: f64, dg: f64, d2g: f64) -> Self {
        let n = self.nvars();
        let mut out = Dual2::constant(g, n);
        for i in 0..n {
            out.grad[i] = dg * self.grad[i];
        }
        for i in 0..n {
            for j in 0..n {
                out.hess[i * n + j] =
                    dg * self.hess[i * n + j] + d2g * self.grad[i] * self.grad[j];
            }
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.val.exp();
        self.unary(e, e, e)
    }

    pub fn ln(&self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val, -1.0 / (self.val * self.val))
    }

    pub fn sin(&self) -> Self {
        self.unary(self.val.sin(), self.val.cos(), -self.val.sin())
    }

    pub fn cos(&self) -> Self {
        self.unary(self.val.cos(), -self.val.sin(), -self.val.cos())
    }

    pub fn tan(&self) -> Self {
        let t = self.val.tan();
        let sec2 = 1.0 + t * t;
        self.unary(t, sec2, 2.0 * t * sec2)
    }

    pub fn sqrt(&self) -> Self {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s, -0.25 / (s * s * s))
    }

    pub fn powi(&self, k: i32) -> Self {
        let g = self.val.powi(k);
        let dg = f64::from(k) * self.val.powi(k - 1);
        let d2g = f64::from(k) * f64::from(k - 1) * self.val.powi(k - 2);
        self.unary(g, dg, d2g)
    }

    pub fn powf(&self, p: f64) -> Self {
        let g = self.val.powf(p);
        let dg = p * self.val.powf(p - 1.0);
        let d2g = p * (p - 1.0) * self.val.powf(p - 2.0);
        self.unary(g, dg, d2g)
    }

    pub fn recip(&self) -> Self {
        let v = self.val;
        self.unary(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }
}

impl Add for &Dual2 {
    type Output = Dual2;
    fn add(self, rhs: &Dual2) -> Dual2 {
        let n = self.nvars();
        Dual2 {
            val: self.val + rhs.val,
            grad: (0..n).map(|i| self.grad[i] + rhs.grad[i]).collect(),
            hess: (0..n * n).map(|i| self.hess[i] + rhs.hess[i]).collect(),
        }
    }
}

impl Sub for &Dual2 {
    type Output = Dual2;
    fn sub(self, rhs: &Dual2) -> Dual2 {
        let n = self.nvars();
        Dual2 {
            val: self.val - rhs.val,
            grad: (0..n).map(|i| self.grad[i] - rhs.grad[i]).collect(),
            hess: (0..n * n).map(|i| self.hess[i] - rhs.hess[i]).collect(),
        }
    }
}

impl Mul for &Dual2 {
    type Output = Dual2;
    fn mul(self, rhs: &Dual2) -> Dual2 {
        let n = self.nvars();
        let mut out = Dual2::constant(self.val * rhs.val, n);
        for i in 0..n {
            out.grad[i] = self.grad[i] * rhs.val + self.val * rhs.grad[i];
        }
        for i in 0..n {
            for j in 0..n {
                out.hess[i * n + j] = self.hess[i * n + j] * rhs.val
                    + self.grad[i] * rhs.grad[j]
                    + self.grad[j] * rhs.grad[i]
                    + self.val * rhs.hess[i * n + j];
            }
        }
        out
    }
}

impl Div for &Dual2 {
    type Output = Dual2;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: &Dual2) -> Dual2 {
        self * &rhs.recip()
    }
}

impl Neg for &Dual2 {
    type Output = Dual2;
    fn neg(self) -> Dual2 {
        Dual2 {
            val: -self.val,
            grad: self.grad.iter().map(|g| -g).collect(),
            hess: self.hess.iter().map(|h| -h).collect(),
        }
    }
}

macro_rules! owned_ops {
    ($($trait:ident :: $m:ident),*) => {$(
        impl $trait for Dual2 {
            type Output = Dual2;
            fn $m(self, rhs: Dual2) -> Dual2 { $trait::$m(&self, &rhs) }
        }
        impl $trait<&Dual2> for Dual2 {
            type Output = Dual2;
            fn $m(self, rhs: &Dual2) -> Dual2 { $trait::$m(&self, rhs) }
        }
        impl $trait<Dual2> for &Dual2 {
            type Output = Dual2;
            fn $m(self, rhs: Dual2) -> Dual2 { $trait::$m(self, &rhs) }
        }
    )*};
}
owned_ops!(Add::add, Sub::sub, Mul::mul, Div::div);

impl Neg for Dual2 {
    type Output = Dual2;
    fn neg(self) -> Dual2 {
        -&self
    }
}

/// First-order jet along a single tangent direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet1 {
    pub val: f64,
    pub dot: f64,
}

impl Jet1 {
    pub fn new(val: f64, dot: f64) -> Self {
        Jet1 { val, dot }
    }

    pub fn constant(val: f64) -> Self {
        Jet1 { val, dot: 0.0 }
    }
}

impl Add for Jet1 {
    type Output = Jet1;
    fn add(self, r: Jet1) -> Jet1 {
        Jet1::new(self.val + r.val, self.dot + r.dot)
    }
}

impl Sub for Jet1 {
    type Output = Jet1;
    fn sub(self, r: Jet1) -> Jet1 {
        Jet1::new(self.val - r.val, self.dot - r.dot)
    }
}

impl Mul for Jet1 {
    type Output = Jet1;
    fn mul(self, r: Jet1) -> Jet1 {
        Jet1::new(self.val * r.val, self.dot * r.val + self.val * r.dot)
    }
}

impl Mul<f64> for Jet1 {
    type Output = Jet1;
    fn mul(self, c: f64) -> Jet1 {
        Jet1::new(self.val * c, self.dot * c)
    }
}

impl Neg for Jet1 {
    type Output = Jet1;
    fn neg(self) -> Jet1 {
        Jet1::new(-self.val, -self.dot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // f(x, y) = exp(x) * sin(y) + x^2 / y
    fn f(v: &[Dual2]) -> Dual2 {
        let (x, y) = (&v[0], &v[1]);
        &(&x.exp() * &y.sin()) + &(&x.powi(2) / y)
    }

    #[test]
    fn dual2_matches_hand_derivatives() {
        let (x, y) = (0.7, 1.3);
        let out = f(&[Dual2::variable(x, 0, 2), Dual2::variable(y, 1, 2)]);
        assert_relative_eq!(out.val, x.exp() * y.sin() + x * x / y, max_relative = 1e-14);
        assert_relative_eq!(
            out.grad[0],
            x.exp() * y.sin() + 2.0 * x / y,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            out.grad[1],
            x.exp() * y.cos() - x * x / (y * y),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            out.hess_at(0, 0),
            x.exp() * y.sin() + 2.0 / y,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            out.hess_at(0, 1),
            x.exp() * y.cos() - 2.0 * x / (y * y),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            out.hess_at(1, 1),
            -x.exp() * y.sin() + 2.0 * x * x / (y * y * y),
            max_relative = 1e-14
        );
        // Hessian symmetry is structural.
        assert_eq!(out.hess_at(0, 1), out.hess_at(1, 0));
    }

    #[test]
    fn dual2_quotient_and_tan() {
        let x = Dual2::variable(0.4, 0, 1);
        let out = &x.tan() / &x.sqrt();
        let v = 0.4_f64;
        let expect = v.tan() / v.sqrt();
        assert_relative_eq!(out.val, expect, max_relative = 1e-14);
        let h = 1e-6;
        let g = |t: f64| t.tan() / t.sqrt();
        let fd = (g(v + h) - g(v - h)) / (2.0 * h);
        assert_relative_eq!(out.grad[0], fd, max_relative = 1e-8);
        let fd2 = (g(v + h) - 2.0 * g(v) + g(v - h)) / (h * h);
        assert_relative_eq!(out.hess_at(0, 0), fd2, max_relative = 1e-3);
    }

    #[test]
    fn jet1_product_rule() {
        let a = Jet1::new(2.0, 3.0);
        let b = Jet1::new(-1.0, 0.5);
        let p = a * b;
        assert_eq!(p.val, -2.0);
        assert_eq!(p.dot, -3.0 + 2.0 * 0.5);
    }
}
