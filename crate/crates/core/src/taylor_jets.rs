//! Bivariate truncated Taylor arithmetic.
//!
//! A [`Jet2`] of order `J` stores the normalized Taylor coefficients
//! `c[i][j] = (1/(i! j!)) ∂^{i+j} f / ∂u^i ∂v^j` for all `i + j ≤ J` at a
//! fixed base point. Arithmetic on jets is exact up to roundoff in every
//! retained coefficient, so partial derivatives come out without any
//! finite-difference error.
//!
//! Elementary functions are evaluated by composing the univariate Taylor
//! series of the function at the constant term with the nilpotent part of
//! the jet. Binary operations between jets of different orders truncate
//! to the smaller order.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::pseudo_linear::Scalar;

/// Smallest admissible magnitude of the constant term for `recip`, `log`
/// and `sqrt`.
pub const EPS_JET: f64 = 1e-12;

/// Number of coefficients of a jet of total order `order`.
#[inline]
pub fn coeff_count(order: usize) -> usize {
    (order + 1) * (order + 2) / 2
}

#[inline]
fn idx(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

/// Truncated bivariate Taylor expansion in `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    order: usize,
    coeffs: Vec<f64>,
}

impl Jet2 {
    pub fn zero(order: usize) -> Self {
        Self {
            order,
            coeffs: vec![0.0; coeff_count(order)],
        }
    }

    pub fn constant(value: f64, order: usize) -> Self {
        let mut jet = Self::zero(order);
        jet.coeffs[0] = value;
        jet
    }

    /// The affine jet `base + du_coeff·du + dv_coeff·dv`.
    pub fn linear(base: f64, du_coeff: f64, dv_coeff: f64, order: usize) -> Self {
        let mut jet = Self::constant(base, order);
        if order >= 1 {
            jet.coeffs[idx(1, 0)] = du_coeff;
            jet.coeffs[idx(0, 1)] = dv_coeff;
        }
        jet
    }

    /// The coordinate `u` expanded at `u0`.
    pub fn variable_u(u0: f64, order: usize) -> Self {
        Self::linear(u0, 1.0, 0.0, order)
    }

    /// The coordinate `v` expanded at `v0`.
    pub fn variable_v(v0: f64, order: usize) -> Self {
        Self::linear(v0, 0.0, 1.0, order)
    }

    /// Build a jet from a function returning the normalized coefficient
    /// `c[i][j]`.
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut jet = Self::zero(order);
        for d in 0..=order {
            for j in 0..=d {
                jet.coeffs[idx(d - j, j)] = f(d - j, j);
            }
        }
        jet
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Normalized coefficient `c[i][j]`; zero beyond the truncation order.
    #[inline]
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.order {
            0.0
        } else {
            self.coeffs[idx(i, j)]
        }
    }

    pub fn set_coeff(&mut self, i: usize, j: usize, value: f64) {
        assert!(i + j <= self.order, "coefficient ({i},{j}) beyond order {}", self.order);
        self.coeffs[idx(i, j)] = value;
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `∂^{i+j} f / ∂u^i ∂v^j` at the base point.
    pub fn partial(&self, i: usize, j: usize) -> Result<f64> {
        if i + j > self.order {
            return Err(Error::OrderExhausted {
                i,
                j,
                order: self.order,
            });
        }
        Ok(factorial(i) * factorial(j) * self.coeffs[idx(i, j)])
    }

    pub fn truncate(&self, order: usize) -> Self {
        if order >= self.order {
            return self.clone();
        }
        Self {
            order,
            coeffs: self.coeffs[..coeff_count(order)].to_vec(),
        }
    }

    /// Jet of `∂f/∂u`, one order lower. A jet of order 0 differentiates to
    /// the zero jet of order 0: the information is gone and callers that
    /// care must budget orders up front.
    pub fn d_u(&self) -> Self {
        let order = self.order.saturating_sub(1);
        if self.order == 0 {
            return Self::zero(0);
        }
        Self::from_fn(order, |i, j| (i + 1) as f64 * self.coeffs[idx(i + 1, j)])
    }

    /// Jet of `∂f/∂v`, one order lower.
    pub fn d_v(&self) -> Self {
        let order = self.order.saturating_sub(1);
        if self.order == 0 {
            return Self::zero(0);
        }
        Self::from_fn(order, |i, j| (j + 1) as f64 * self.coeffs[idx(i, j + 1)])
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add_scalar(&self, value: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += value;
        out
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let order = self.order.min(other.order);
        let n = coeff_count(order);
        Self {
            order,
            coeffs: (0..n).map(|k| f(self.coeffs[k], other.coeffs[k])).collect(),
        }
    }

    fn product(&self, other: &Self) -> Self {
        let order = self.order.min(other.order);
        let mut out = Self::zero(order);
        for d1 in 0..=order {
            for j1 in 0..=d1 {
                let a = self.coeffs[idx(d1 - j1, j1)];
                if a == 0.0 {
                    continue;
                }
                let i1 = d1 - j1;
                for d2 in 0..=(order - d1) {
                    for j2 in 0..=d2 {
                        let i2 = d2 - j2;
                        out.coeffs[idx(i1 + i2, j1 + j2)] += a * other.coeffs[idx(i2, j2)];
                    }
                }
            }
        }
        out
    }

    /// Evaluate `Σ_k series[k] · h^k` with `h` the nilpotent part.
    fn compose(&self, series: &[f64]) -> Self {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut acc = Self::constant(series[self.order], self.order);
        for k in (0..self.order).rev() {
            acc = acc.product(&h).add_scalar(series[k]);
        }
        acc
    }

    pub fn recip(&self) -> Result<Self> {
        let c = self.value();
        if c.abs() < EPS_JET {
            return Err(Error::Singular { op: "div", value: c });
        }
        let r = -1.0 / c;
        let mut series = Vec::with_capacity(self.order + 1);
        let mut term = 1.0 / c;
        for _ in 0..=self.order {
            series.push(term);
            term *= r;
        }
        Ok(self.compose(&series))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.product(&other.recip()?))
    }

    /// Real power with positive constant term.
    pub fn powf(&self, p: f64) -> Result<Self> {
        let c = self.value();
        if c < EPS_JET {
            return Err(Error::Singular { op: "pow", value: c });
        }
        let mut series = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        let mut cpow = c.powf(p);
        for k in 0..=self.order {
            series.push(binom * cpow);
            binom *= (p - k as f64) / (k + 1) as f64;
            cpow /= c;
        }
        Ok(self.compose(&series))
    }

    /// Integer power by repeated squaring; any sign of the base.
    pub fn powi(&self, n: i32) -> Result<Self> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut result = Self::constant(1.0, self.order);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.product(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.product(&base);
            }
        }
        Ok(result)
    }

    pub fn sqrt(&self) -> Result<Self> {
        let c = self.value();
        if c < EPS_JET {
            return Err(Error::Singular { op: "sqrt", value: c });
        }
        self.powf(0.5)
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        let series: Vec<f64> = (0..=self.order).map(|k| e / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn log(&self) -> Result<Self> {
        let c = self.value();
        if c < EPS_JET {
            return Err(Error::Singular { op: "log", value: c });
        }
        let mut series = vec![c.ln()];
        for k in 1..=self.order {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            series.push(sign / (k as f64 * c.powi(k as i32)));
        }
        Ok(self.compose(&series))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let series: Vec<f64> = (0..=self.order).map(|k| cycle[k % 4] / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let series: Vec<f64> = (0..=self.order).map(|k| cycle[k % 4] / factorial(k)).collect();
        self.compose(&series)
    }

    pub fn sinh(&self) -> Self {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        let series: Vec<f64> = (0..=self.order)
            .map(|k| if k % 2 == 0 { s } else { c } / factorial(k))
            .collect();
        self.compose(&series)
    }

    pub fn cosh(&self) -> Self {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        let series: Vec<f64> = (0..=self.order)
            .map(|k| if k % 2 == 0 { c } else { s } / factorial(k))
            .collect();
        self.compose(&series)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&Jet2> for &Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: &Jet2) -> Jet2 {
                $body(self, rhs)
            }
        }
        impl $trait<Jet2> for Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: Jet2) -> Jet2 {
                $body(&self, &rhs)
            }
        }
        impl $trait<&Jet2> for Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: &Jet2) -> Jet2 {
                $body(&self, rhs)
            }
        }
        impl $trait<Jet2> for &Jet2 {
            type Output = Jet2;
            fn $method(self, rhs: Jet2) -> Jet2 {
                $body(self, &rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a: &Jet2, b: &Jet2| a.zip_with(b, |x, y| x + y));
forward_binop!(Sub, sub, |a: &Jet2, b: &Jet2| a.zip_with(b, |x, y| x - y));
forward_binop!(Mul, mul, |a: &Jet2, b: &Jet2| a.product(b));

impl Mul<f64> for &Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: f64) -> Jet2 {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: f64) -> Jet2 {
        self.scale(rhs)
    }
}

impl Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Scalar for Jet2 {
    fn constant_like(value: f64, like: &Self) -> Self {
        Jet2::constant(value, like.order)
    }
    fn value(&self) -> f64 {
        self.coeffs[0]
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, factor: f64) -> Self {
        Jet2::scale(self, factor)
    }
    fn sqrt(&self) -> Result<Self> {
        Jet2::sqrt(self)
    }
    fn recip(&self) -> Result<Self> {
        Jet2::recip(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn u(order: usize) -> Jet2 {
        Jet2::variable_u(0.0, order)
    }
    fn v(order: usize) -> Jet2 {
        Jet2::variable_v(0.0, order)
    }

    #[test]
    fn product_mixed_partial() {
        let f = u(2) * v(2);
        assert_eq!(f.partial(1, 1).unwrap(), 1.0);
    }

    #[test]
    fn sine_series() {
        let f = (u(3) + v(3)).sin();
        assert_abs_diff_eq!(f.partial(1, 0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.partial(2, 0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.partial(3, 0).unwrap(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn geometric_series() {
        let f = u(2).add_scalar(1.0).recip().unwrap();
        assert_abs_diff_eq!(f.partial(2, 0).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_partials() {
        let c = Jet2::constant(5.0, 3);
        assert_eq!(c.partial(0, 0).unwrap(), 5.0);
        assert_eq!(c.partial(1, 0).unwrap(), 0.0);
    }

    #[test]
    fn monomial_partial() {
        let f = u(3) * u(3) * v(3);
        assert_eq!(f.partial(2, 1).unwrap(), 2.0);
    }

    #[test]
    fn order_exhausted() {
        let f = u(2);
        assert!(matches!(f.partial(2, 1), Err(Error::OrderExhausted { .. })));
    }

    #[test]
    fn singular_operations() {
        assert!(Jet2::constant(0.0, 2).recip().is_err());
        assert!(Jet2::constant(-1.0, 2).sqrt().is_err());
        assert!(Jet2::constant(0.0, 2).log().is_err());
    }

    #[test]
    fn mixed_order_truncates() {
        let a = Jet2::variable_u(1.0, 4);
        let b = Jet2::variable_v(2.0, 2);
        assert_eq!((a * b).order(), 2);
    }

    #[test]
    fn derivative_lowers_order() {
        let f = (u(4) * v(4)).sin();
        let g = f.d_u().d_v();
        assert_eq!(g.order(), 2);
        // ∂²/∂u∂v sin(uv) = cos(uv) − uv sin(uv) → 1 at the origin
        assert_abs_diff_eq!(g.value(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn hyperbolic_identity() {
        let x = Jet2::linear(0.3, 1.2, -0.7, 5);
        let r = x.cosh() * x.cosh() - x.sinh() * x.sinh();
        assert_abs_diff_eq!(r.value(), 1.0, epsilon = 1e-14);
        for k in 1..r.coeffs().len() {
            assert!(r.coeffs()[k].abs() < 1e-12);
        }
    }

    #[test]
    fn integer_power_negative_base() {
        let x = Jet2::linear(-2.0, 1.0, 0.0, 3);
        let cube = x.powi(3).unwrap();
        assert_abs_diff_eq!(cube.value(), -8.0, epsilon = 1e-14);
        assert_abs_diff_eq!(cube.partial(1, 0).unwrap(), 12.0, epsilon = 1e-13);
        assert_abs_diff_eq!(cube.partial(3, 0).unwrap(), 6.0, epsilon = 1e-13);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn jet_strategy() -> impl Strategy<Value = Jet2> {
            (0.5f64..3.0, proptest::collection::vec(-1.0f64..1.0, coeff_count(5) - 1)).prop_map(
                |(c0, rest)| {
                    let mut k = 0;
                    Jet2::from_fn(5, |i, j| {
                        if i + j == 0 {
                            c0
                        } else {
                            k += 1;
                            rest[k - 1]
                        }
                    })
                },
            )
        }

        proptest! {
            #[test]
            fn sqrt_squares_back(f in jet_strategy()) {
                let s = f.sqrt().unwrap();
                let r = &s * &s - &f;
                prop_assert!(r.max_abs() < 1e-12 * (1.0 + f.max_abs()).powi(6));
            }

            #[test]
            fn exp_log_roundtrip(f in jet_strategy()) {
                let r = f.log().unwrap().exp() - &f;
                prop_assert!(r.max_abs() < 1e-12 * (1.0 + f.max_abs()).powi(6));
            }

            #[test]
            fn leibniz_rule(f in jet_strategy(), g in jet_strategy()) {
                let lhs = (&f * &g).d_u();
                let rhs = &f.d_u() * &g + &f * &g.d_u();
                prop_assert!((lhs - rhs).max_abs() < 1e-12 * (1.0 + f.max_abs() * g.max_abs()) * 10.0);
            }
        }
    }
}
