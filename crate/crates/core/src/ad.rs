//! Second-order forward-mode automatic differentiation.
//!
//! Every quantity in this crate that needs derivatives of a Lagrangian (fiber
//! Hessians, Euler-Lagrange normal forms, Legendre maps) is computed by
//! evaluating the Lagrangian on [`Jet2`] numbers: truncated multivariate
//! Taylor expansions carrying the value, the gradient and the packed upper
//! triangle of the Hessian. No tape is recorded; each arithmetic operation
//! propagates the second-order chain rule directly.
//!
//! The numeric kernels are written once against the [`Scalar`] trait and run
//! unchanged on `f64`, on [`Dual`] (one directional derivative) and on
//! `Jet2<Dual>`, which carries one extra directional derivative on top of
//! a full Hessian. The last one gives exact third derivatives along a single
//! direction, which is what the Lie derivative of the fundamental tensor needs.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::DMatrix;
use thiserror::Error;

/// Failure of a primitive outside its smooth domain.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    #[error("domain error in `{primitive}` at argument {arg}")]
    Domain { primitive: &'static str, arg: f64 },
    #[error("variable `{0}` is not bound in this evaluation")]
    UnboundVariable(String),
}

fn domain(primitive: &'static str, arg: f64) -> AdError {
    AdError::Domain { primitive, arg }
}

/// Number type the evaluators are generic over.
pub trait Scalar:
    Clone
    + fmt::Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    fn from_f64(c: f64) -> Self;
    /// Real part.
    fn value(&self) -> f64;
    /// True when every derivative coefficient is zero.
    fn is_constant(&self) -> bool;

    fn recip(&self) -> Result<Self, AdError>;
    fn sqrt(&self) -> Result<Self, AdError>;
    fn ln(&self) -> Result<Self, AdError>;
    fn powi(&self, n: i32) -> Result<Self, AdError>;
    fn powf(&self, p: f64) -> Result<Self, AdError>;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;

    fn checked_div(&self, rhs: &Self) -> Result<Self, AdError> {
        if rhs.value() == 0.0 {
            return Err(domain("div", self.value()));
        }
        Ok(self.clone() * rhs.recip()?)
    }
}

// ---------------------------------------------------------------------------
// f64

impl Scalar for f64 {
    fn from_f64(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn is_constant(&self) -> bool {
        true
    }
    fn recip(&self) -> Result<Self, AdError> {
        if *self == 0.0 {
            return Err(domain("recip", *self));
        }
        Ok(1.0 / self)
    }
    fn sqrt(&self) -> Result<Self, AdError> {
        if *self < 0.0 {
            return Err(domain("sqrt", *self));
        }
        Ok(f64::sqrt(*self))
    }
    fn ln(&self) -> Result<Self, AdError> {
        if *self <= 0.0 {
            return Err(domain("ln", *self));
        }
        Ok(f64::ln(*self))
    }
    fn powi(&self, n: i32) -> Result<Self, AdError> {
        if n < 0 && *self == 0.0 {
            return Err(domain("powi", *self));
        }
        Ok(f64::powi(*self, n))
    }
    fn powf(&self, p: f64) -> Result<Self, AdError> {
        if *self < 0.0 || (*self == 0.0 && p < 0.0) {
            return Err(domain("powf", *self));
        }
        Ok(f64::powf(*self, p))
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
}

/// Derivatives (f, f', f'') of a unary primitive at a point, in coefficient type `T`.
struct Unary<T> {
    f0: T,
    f1: T,
    f2: T,
}

/// Coefficient types usable inside a [`Jet2`]: plain copyable scalars.
pub trait Coef: Scalar + Copy {}
impl Coef for f64 {}
impl Coef for Dual {}

fn unary_data<T: Coef>(a: T, prim: &'static str, constant: bool, p: f64) -> Result<Unary<T>, AdError> {
    let v = a.value();
    match prim {
        "sqrt" => {
            if v < 0.0 || (v == 0.0 && !constant) {
                return Err(domain("sqrt", v));
            }
            let s = a.sqrt()?;
            if v == 0.0 {
                let z = T::from_f64(0.0);
                return Ok(Unary { f0: z, f1: z, f2: z });
            }
            let inv = s.recip()?;
            let f1 = inv * 0.5;
            let f2 = -(f1 * inv * inv * 0.5);
            Ok(Unary { f0: s, f1, f2 })
        }
        "ln" => {
            if v <= 0.0 {
                return Err(domain("ln", v));
            }
            let inv = a.recip()?;
            Ok(Unary { f0: a.ln()?, f1: inv, f2: -(inv * inv) })
        }
        "recip" => {
            if v == 0.0 {
                return Err(domain("recip", v));
            }
            let inv = a.recip()?;
            let inv2 = inv * inv;
            Ok(Unary { f0: inv, f1: -inv2, f2: inv2 * inv * 2.0 })
        }
        "sin" => Ok(Unary { f0: a.sin(), f1: a.cos(), f2: -a.sin() }),
        "cos" => Ok(Unary { f0: a.cos(), f1: -a.sin(), f2: -a.cos() }),
        "exp" => {
            let e = a.exp();
            Ok(Unary { f0: e, f1: e, f2: e })
        }
        "powf" => {
            if v < 0.0 {
                return Err(domain("powf", v));
            }
            if v == 0.0 {
                let z = T::from_f64(0.0);
                if constant {
                    return Ok(Unary { f0: a.powf(p)?, f1: z, f2: z });
                }
                // Below exponent 2 the second derivative blows up at the origin.
                if p > 2.0 {
                    return Ok(Unary { f0: z, f1: z, f2: z });
                }
                if p == 2.0 {
                    return Ok(Unary { f0: z, f1: z, f2: T::from_f64(2.0) });
                }
                return Err(domain("powf", v));
            }
            Ok(Unary {
                f0: a.powf(p)?,
                f1: a.powf(p - 1.0)? * p,
                f2: a.powf(p - 2.0)? * (p * (p - 1.0)),
            })
        }
        _ => unreachable!("unknown primitive {prim}"),
    }
}

// ---------------------------------------------------------------------------
// Dual: value plus one directional derivative.

/// First-order dual number `re + eps·ε`, ε² = 0.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub fn new(re: f64, eps: f64) -> Self {
        Self { re, eps }
    }
    fn chain(self, f0: f64, f1: f64) -> Self {
        Self { re: f0, eps: f1 * self.eps }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, r: Dual) -> Dual {
        Dual::new(self.re + r.re, self.eps + r.eps)
    }
}
impl Sub for Dual {
    type Output = Dual;
    fn sub(self, r: Dual) -> Dual {
        Dual::new(self.re - r.re, self.eps - r.eps)
    }
}
impl Mul for Dual {
    type Output = Dual;
    fn mul(self, r: Dual) -> Dual {
        Dual::new(self.re * r.re, self.re * r.eps + self.eps * r.re)
    }
}
impl Div for Dual {
    type Output = Dual;
    fn div(self, r: Dual) -> Dual {
        let q = self.re / r.re;
        Dual::new(q, (self.eps - q * r.eps) / r.re)
    }
}
impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.re, -self.eps)
    }
}
impl Add<f64> for Dual {
    type Output = Dual;
    fn add(self, r: f64) -> Dual {
        Dual::new(self.re + r, self.eps)
    }
}
impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, r: f64) -> Dual {
        Dual::new(self.re * r, self.eps * r)
    }
}

impl Scalar for Dual {
    fn from_f64(c: f64) -> Self {
        Dual::new(c, 0.0)
    }
    fn value(&self) -> f64 {
        self.re
    }
    fn is_constant(&self) -> bool {
        self.eps == 0.0
    }
    fn recip(&self) -> Result<Self, AdError> {
        if self.re == 0.0 {
            return Err(domain("recip", self.re));
        }
        let r = 1.0 / self.re;
        Ok(self.chain(r, -r * r))
    }
    fn sqrt(&self) -> Result<Self, AdError> {
        if self.re < 0.0 || (self.re == 0.0 && self.eps != 0.0) {
            return Err(domain("sqrt", self.re));
        }
        let s = self.re.sqrt();
        if s == 0.0 {
            return Ok(Dual::default());
        }
        Ok(self.chain(s, 0.5 / s))
    }
    fn ln(&self) -> Result<Self, AdError> {
        if self.re <= 0.0 {
            return Err(domain("ln", self.re));
        }
        Ok(self.chain(self.re.ln(), 1.0 / self.re))
    }
    fn powi(&self, n: i32) -> Result<Self, AdError> {
        if n < 0 && self.re == 0.0 {
            return Err(domain("powi", self.re));
        }
        if n == 0 {
            return Ok(Dual::new(1.0, 0.0));
        }
        Ok(self.chain(self.re.powi(n), n as f64 * self.re.powi(n - 1)))
    }
    fn powf(&self, p: f64) -> Result<Self, AdError> {
        if self.re < 0.0 {
            return Err(domain("powf", self.re));
        }
        if self.re == 0.0 {
            if self.eps == 0.0 || p > 1.0 {
                return Ok(Dual::new(0.0f64.powf(p), 0.0));
            }
            return Err(domain("powf", self.re));
        }
        Ok(self.chain(self.re.powf(p), p * self.re.powf(p - 1.0)))
    }
    fn sin(&self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn exp(&self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
}

// ---------------------------------------------------------------------------
// Jet2: value, gradient, Hessian.

/// Second-order truncated Taylor number over `m` independent variables.
///
/// The Hessian is stored as its packed upper triangle (row-major), so it is
/// symmetric by construction. A jet with no derivative storage (`m = 0`)
/// acts as a constant and mixes freely with jets of any size.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2<T = f64> {
    value: T,
    grad: Vec<T>,
    hess: Vec<T>,
}

#[inline]
fn packed_len(m: usize) -> usize {
    m * (m + 1) / 2
}

#[inline]
fn packed_index(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // Row i starts after sum_{k<i} (m - k) entries.
    i * (2 * m + 1 - i) / 2 + (j - i)
}

impl<T: Coef> Jet2<T> {
    pub fn constant(value: T) -> Self {
        Self { value, grad: Vec::new(), hess: Vec::new() }
    }

    /// The `index`-th of `m` independent variables, evaluated at `value`.
    pub fn variable(value: T, index: usize, m: usize) -> Self {
        assert!(index < m, "variable index {index} out of range for {m} variables");
        let zero = T::from_f64(0.0);
        let mut grad = vec![zero; m];
        grad[index] = T::from_f64(1.0);
        Self { value, grad, hess: vec![zero; packed_len(m)] }
    }

    pub fn n_vars(&self) -> usize {
        self.grad.len()
    }

    pub fn real(&self) -> T {
        self.value
    }

    pub fn gradient(&self) -> &[T] {
        &self.grad
    }

    /// Packed upper triangle of the Hessian.
    pub fn hessian_packed(&self) -> &[T] {
        &self.hess
    }

    pub fn hessian(&self, i: usize, j: usize) -> T {
        let m = self.n_vars();
        if m == 0 {
            return T::from_f64(0.0);
        }
        self.hess[packed_index(m, i, j)]
    }

    fn zeros_like(m: usize, value: T) -> Self {
        let zero = T::from_f64(0.0);
        Self { value, grad: vec![zero; m], hess: vec![zero; packed_len(m)] }
    }

    fn apply_unary(self, u: Unary<T>) -> Self {
        let m = self.n_vars();
        if m == 0 {
            return Self::constant(u.f0);
        }
        let mut out = Self::zeros_like(m, u.f0);
        let mut k = 0;
        for i in 0..m {
            out.grad[i] = u.f1 * self.grad[i];
            for j in i..m {
                out.hess[k] = u.f1 * self.hess[k] + u.f2 * self.grad[i] * self.grad[j];
                k += 1;
            }
        }
        out
    }

    fn unary(self, prim: &'static str, p: f64) -> Result<Self, AdError> {
        let constant = self.is_constant();
        let u = unary_data(self.value, prim, constant, p)?;
        Ok(self.apply_unary(u))
    }
}

impl Jet2<f64> {
    /// Hessian as a dense symmetric matrix.
    pub fn hessian_matrix(&self) -> DMatrix<f64> {
        let m = self.n_vars();
        DMatrix::from_fn(m, m, |i, j| self.hessian(i, j))
    }

    pub fn value_f64(&self) -> f64 {
        self.value
    }
}

impl<T: Coef> Add for Jet2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        match (self.n_vars(), rhs.n_vars()) {
            (0, 0) => Self::constant(self.value + rhs.value),
            (0, _) => {
                let mut r = rhs;
                r.value = self.value + r.value;
                r
            }
            (_, 0) => {
                let mut l = self;
                l.value = l.value + rhs.value;
                l
            }
            (a, b) => {
                assert_eq!(a, b, "jet size mismatch");
                let mut l = self;
                l.value = l.value + rhs.value;
                for (x, y) in l.grad.iter_mut().zip(&rhs.grad) {
                    *x = *x + *y;
                }
                for (x, y) in l.hess.iter_mut().zip(&rhs.hess) {
                    *x = *x + *y;
                }
                l
            }
        }
    }
}

impl<T: Coef> Neg for Jet2<T> {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.value = -self.value;
        for x in self.grad.iter_mut().chain(self.hess.iter_mut()) {
            *x = -*x;
        }
        self
    }
}

impl<T: Coef> Sub for Jet2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<T: Coef> Mul for Jet2<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        match (self.n_vars(), rhs.n_vars()) {
            (0, 0) => Self::constant(self.value * rhs.value),
            (0, _) => rhs.scale(self.value),
            (_, 0) => self.scale(rhs.value),
            (m, b) => {
                assert_eq!(m, b, "jet size mismatch");
                let (a0, b0) = (self.value, rhs.value);
                let mut out = Self::zeros_like(m, a0 * b0);
                let mut k = 0;
                for i in 0..m {
                    out.grad[i] = a0 * rhs.grad[i] + b0 * self.grad[i];
                    for j in i..m {
                        out.hess[k] = a0 * rhs.hess[k]
                            + b0 * self.hess[k]
                            + self.grad[i] * rhs.grad[j]
                            + self.grad[j] * rhs.grad[i];
                        k += 1;
                    }
                }
                out
            }
        }
    }
}

impl<T: Coef> Jet2<T> {
    fn scale(mut self, c: T) -> Self {
        self.value = self.value * c;
        for x in self.grad.iter_mut().chain(self.hess.iter_mut()) {
            *x = *x * c;
        }
        self
    }
}

impl<T: Coef> Add<f64> for Jet2<T> {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.value = self.value + rhs;
        self
    }
}

impl<T: Coef> Mul<f64> for Jet2<T> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(T::from_f64(rhs))
    }
}

impl<T: Coef> Scalar for Jet2<T> {
    fn from_f64(c: f64) -> Self {
        Self::constant(T::from_f64(c))
    }
    fn value(&self) -> f64 {
        self.value.value()
    }
    fn is_constant(&self) -> bool {
        self.value.is_constant()
            && self.grad.iter().all(|g| g.value() == 0.0 && g.is_constant())
            && self.hess.iter().all(|h| h.value() == 0.0 && h.is_constant())
    }
    fn recip(&self) -> Result<Self, AdError> {
        self.clone().unary("recip", 0.0)
    }
    fn sqrt(&self) -> Result<Self, AdError> {
        self.clone().unary("sqrt", 0.0)
    }
    fn ln(&self) -> Result<Self, AdError> {
        self.clone().unary("ln", 0.0)
    }
    fn powi(&self, n: i32) -> Result<Self, AdError> {
        match n {
            0 => Ok(Self::from_f64(1.0)),
            1 => Ok(self.clone()),
            2 => Ok(self.clone() * self.clone()),
            _ if n < 0 => self.powi(-n)?.recip(),
            _ => {
                let v = self.value;
                let nf = n as f64;
                let u = Unary {
                    f0: v.powi(n)?,
                    f1: v.powi(n - 1)? * nf,
                    f2: v.powi(n - 2)? * (nf * (nf - 1.0)),
                };
                Ok(self.clone().apply_unary(u))
            }
        }
    }
    fn powf(&self, p: f64) -> Result<Self, AdError> {
        self.clone().unary("powf", p)
    }
    fn sin(&self) -> Self {
        self.clone().unary("sin", 0.0).expect("sin is total")
    }
    fn cos(&self) -> Self {
        self.clone().unary("cos", 0.0).expect("cos is total")
    }
    fn exp(&self) -> Self {
        self.clone().unary("exp", 0.0).expect("exp is total")
    }
}

// ---------------------------------------------------------------------------
// Drivers

/// Value, gradient and Hessian of `f` at `point` by second-order forward propagation.
pub fn jet2<F>(f: F, point: &[f64]) -> Result<Jet2, AdError>
where
    F: Fn(&[Jet2]) -> Result<Jet2, AdError>,
{
    let m = point.len();
    let vars: Vec<Jet2> = point.iter().enumerate().map(|(i, &p)| Jet2::variable(p, i, m)).collect();
    let mut out = f(&vars)?;
    if out.n_vars() == 0 {
        out = Jet2::zeros_like(m, out.value);
    }
    Ok(out)
}

/// Step used by [`fd_jet2_default`] for coordinate `x`: the fourth root of
/// machine epsilon balances O(h²) truncation against O(ε/h²) roundoff in
/// central second differences.
pub fn default_fd_step(x: f64) -> f64 {
    f64::EPSILON.powf(0.25) * x.abs().max(1.0)
}

/// Central-difference estimate of value, gradient and Hessian with step `h`.
///
/// Intended as an oracle for [`jet2`]; gradient and Hessian are both O(h²).
pub fn fd_jet2<F>(f: F, point: &[f64], h: f64) -> Result<Jet2, AdError>
where
    F: Fn(&[f64]) -> Result<f64, AdError>,
{
    let steps = vec![h; point.len()];
    fd_jet2_steps(f, point, &steps)
}

/// [`fd_jet2`] with a per-coordinate step from [`default_fd_step`].
pub fn fd_jet2_default<F>(f: F, point: &[f64]) -> Result<Jet2, AdError>
where
    F: Fn(&[f64]) -> Result<f64, AdError>,
{
    let steps: Vec<f64> = point.iter().map(|&x| default_fd_step(x)).collect();
    fd_jet2_steps(f, point, &steps)
}

/// Richardson extrapolation of central differences at steps `h` and `h/2`, O(h⁴) accurate.
///
/// The step is the sixth root of machine epsilon, scaled like [`default_fd_step`].
pub fn fd_jet2_richardson<F>(f: F, point: &[f64]) -> Result<Jet2, AdError>
where
    F: Fn(&[f64]) -> Result<f64, AdError>,
{
    let steps: Vec<f64> = point.iter().map(|&x| f64::EPSILON.powf(1.0 / 6.0) * x.abs().max(1.0)).collect();
    let half: Vec<f64> = steps.iter().map(|h| 0.5 * h).collect();
    let coarse = fd_jet2_steps(&f, point, &steps)?;
    let mut fine = fd_jet2_steps(&f, point, &half)?;
    for (a, b) in fine.grad.iter_mut().zip(&coarse.grad) {
        *a = (4.0 * *a - b) / 3.0;
    }
    for (a, b) in fine.hess.iter_mut().zip(&coarse.hess) {
        *a = (4.0 * *a - b) / 3.0;
    }
    Ok(fine)
}

fn fd_jet2_steps<F>(f: F, point: &[f64], steps: &[f64]) -> Result<Jet2, AdError>
where
    F: Fn(&[f64]) -> Result<f64, AdError>,
{
    let m = point.len();
    let f0 = f(point)?;
    let mut x = point.to_vec();
    let mut eval = |shifts: &[(usize, f64)]| -> Result<f64, AdError> {
        x.copy_from_slice(point);
        for &(i, d) in shifts {
            x[i] += d;
        }
        f(&x)
    };
    let mut out = Jet2::zeros_like(m, f0);
    for i in 0..m {
        let hi = steps[i];
        let fp = eval(&[(i, hi)])?;
        let fm = eval(&[(i, -hi)])?;
        out.grad[i] = (fp - fm) / (2.0 * hi);
        out.hess[packed_index(m, i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in (i + 1)..m {
            let hj = steps[j];
            let fpp = eval(&[(i, hi), (j, hj)])?;
            let fpm = eval(&[(i, hi), (j, -hj)])?;
            let fmp = eval(&[(i, -hi), (j, hj)])?;
            let fmm = eval(&[(i, -hi), (j, -hj)])?;
            out.hess[packed_index(m, i, j)] = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
        }
    }
    Ok(out)
}

/// Largest entrywise deviation between two jets' gradients and Hessians,
/// relative to `max(1, largest entry of a)`.
pub fn jet_relative_error(a: &Jet2, b: &Jet2) -> (f64, f64) {
    let scale_g = a.grad.iter().fold(1.0f64, |s, g| s.max(g.abs()));
    let scale_h = a.hess.iter().fold(1.0f64, |s, h| s.max(h.abs()));
    let eg = a.grad.iter().zip(&b.grad).fold(0.0f64, |e, (x, y)| e.max((x - y).abs()));
    let eh = a.hess.iter().zip(&b.hess).fold(0.0f64, |e, (x, y)| e.max((x - y).abs()));
    (eg / scale_g, eh / scale_h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm2<S: Scalar>(u: &[S]) -> Result<S, AdError> {
        (u[0].clone() * u[0].clone() + u[1].clone() * u[1].clone()).sqrt()
    }

    #[test]
    fn packed_indexing_covers_upper_triangle() {
        for m in 1..7 {
            let mut seen = vec![false; packed_len(m)];
            let mut k = 0;
            for i in 0..m {
                for j in i..m {
                    assert_eq!(packed_index(m, i, j), k);
                    assert_eq!(packed_index(m, j, i), k);
                    seen[k] = true;
                    k += 1;
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn square_of_three() {
        let j = jet2(|u| Ok(u[0].clone() * u[0].clone()), &[3.0]).unwrap();
        assert_eq!(j.real(), 9.0);
        assert_eq!(j.gradient(), &[6.0]);
        assert_eq!(j.hessian(0, 0), 2.0);
    }

    #[test]
    fn bilinear_product() {
        let j = jet2(|u| Ok(u[0].clone() * u[1].clone()), &[2.0, 5.0]).unwrap();
        assert_eq!(j.gradient(), &[5.0, 2.0]);
        assert_eq!(j.hessian(0, 0), 0.0);
        assert_eq!(j.hessian(0, 1), 1.0);
        assert_eq!(j.hessian(1, 0), 1.0);
        assert_eq!(j.hessian(1, 1), 0.0);
    }

    #[test]
    fn euclidean_norm_matches_hand_derivatives() {
        let j = jet2(norm2, &[3.0, 4.0]).unwrap();
        assert!((j.real() - 5.0).abs() < 1e-15);
        assert!((j.gradient()[0] - 0.6).abs() < 1e-15);
        assert!((j.gradient()[1] - 0.8).abs() < 1e-15);
        // d²|u|/du_i du_j = (δ_ij |u|² - u_i u_j) / |u|³
        assert!((j.hessian(0, 0) - 16.0 / 125.0).abs() < 1e-15);
        assert!((j.hessian(0, 1) + 12.0 / 125.0).abs() < 1e-15);
        assert!((j.hessian(1, 1) - 9.0 / 125.0).abs() < 1e-15);
    }

    #[test]
    fn fd_cube_gradient() {
        let j = fd_jet2(|u| Ok(u[0] * u[0] * u[0]), &[1.0], 1e-4).unwrap();
        assert!((j.gradient()[0] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn fd_norm_hessian_matches_analytic() {
        let j = fd_jet2(norm2, &[3.0, 4.0], 1e-4).unwrap();
        let exact = [16.0 / 125.0, -12.0 / 125.0, 9.0 / 125.0];
        assert!((j.hessian(0, 0) - exact[0]).abs() < 1e-6);
        assert!((j.hessian(0, 1) - exact[1]).abs() < 1e-6);
        assert!((j.hessian(1, 1) - exact[2]).abs() < 1e-6);
    }

    #[test]
    fn sqrt_at_origin_is_a_domain_error_when_differentiated() {
        let err = jet2(norm2, &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, AdError::Domain { primitive: "sqrt", .. }));
        // value-only evaluation is fine
        assert_eq!(norm2(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn negative_sqrt_and_log_are_rejected() {
        assert!(jet2(|u| u[0].sqrt(), &[-1.0]).is_err());
        assert!(jet2(|u| u[0].ln(), &[0.0]).is_err());
        assert!(jet2(|u| u[0].powf(0.5), &[-2.0]).is_err());
        assert!(matches!(
            jet2(|u| u[0].powf(0.75), &[0.0]),
            Err(AdError::Domain { primitive: "powf", .. })
        ));
    }

    #[test]
    fn transcendental_chain_rule() {
        // f = exp(sin(x) * y) + ln(x) / cos(y)
        let f = |u: &[Jet2]| -> Result<Jet2, AdError> {
            let a = (u[0].sin() * u[1].clone()).exp();
            let b = u[0].ln()?.checked_div(&u[1].cos())?;
            Ok(a + b)
        };
        let g = |u: &[f64]| -> Result<f64, AdError> {
            Ok((u[0].sin() * u[1]).exp() + u[0].ln() / u[1].cos())
        };
        let p = [0.7, 0.3];
        let a = jet2(f, &p).unwrap();
        let b = fd_jet2_default(g, &p).unwrap();
        let (eg, eh) = jet_relative_error(&a, &b);
        assert!(eg < 1e-8 && eh < 1e-6, "{eg} {eh}");
    }

    #[test]
    fn nested_dual_gives_directional_third_derivative() {
        // f(x, y) = x^3 y^2 ; d/de of Hessian along direction (1, 0) at (1, 2)
        let m = 2;
        let x = Jet2::<Dual>::variable(Dual::new(1.0, 1.0), 0, m);
        let y = Jet2::<Dual>::variable(Dual::new(2.0, 0.0), 1, m);
        let f = x.clone() * x.clone() * x * y.clone() * y;
        // f_xx = 6 x y^2 -> d/dx = 6 y^2 = 24
        assert_eq!(f.hessian(0, 0).re, 24.0);
        assert_eq!(f.hessian(0, 0).eps, 24.0);
        // f_xy = 6 x^2 y = 24 -> d/dx = 12 x y = 24
        assert_eq!(f.hessian(0, 1).eps, 24.0);
    }

    #[test]
    fn powi_matches_repeated_products() {
        let a = jet2(|u| u[0].powi(5), &[1.3]).unwrap();
        let b = jet2(
            |u| {
                let x = u[0].clone();
                Ok(x.clone() * x.clone() * x.clone() * x.clone() * x)
            },
            &[1.3],
        )
        .unwrap();
        assert!((a.real() - b.real()).abs() < 1e-12);
        assert!((a.gradient()[0] - b.gradient()[0]).abs() < 1e-12);
        assert!((a.hessian(0, 0) - b.hessian(0, 0)).abs() < 1e-11);
        let inv = jet2(|u| u[0].powi(-2), &[2.0]).unwrap();
        assert!((inv.gradient()[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn richardson_is_fourth_order() {
        let f = |u: &[f64]| Ok::<f64, AdError>(u[0].sin() * u[1].exp());
        let p = [0.7, -0.3];
        let j = fd_jet2_richardson(f, &p).unwrap();
        let (s, c, e) = (p[0].sin(), p[0].cos(), p[1].exp());
        assert!((j.gradient()[0] - c * e).abs() < 1e-10);
        assert!((j.hessian(0, 0) + s * e).abs() < 1e-9);
        assert!((j.hessian(0, 1) - c * e).abs() < 1e-9);
        assert!((j.hessian(1, 1) - s * e).abs() < 1e-9);
    }
}
