//! Matrix Laurent polynomials in the loop parameter λ.
//!
//! A [`LaurentLoop`] stores the coefficients `g_lo, ..., g_hi` of
//! `g(λ) = Σ g_i λ^i` as dense complex matrices over a contiguous window.

mod group;
mod inverse;
pub(crate) mod serial;

pub use group::{GroupKind, GroupSpec};
pub(crate) use inverse::one_sided_inverse;
pub use inverse::{truncated_inverse, truncated_inverse_with, InverseResult, TOL_INV};

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{LoopError, Result};
use crate::linalg::{frob, identity, zeros, CMat, C64};

/// Relative threshold below which end coefficients are dropped.
pub const TOL_TRIM: f64 = 1e-14;

/// Which degrees [`LaurentLoop::project`] keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    /// degrees ≥ 0
    Plus,
    /// degrees ≤ 0
    Minus,
    /// degrees ≥ 1
    StrictPlus,
    /// degrees ≤ -1
    StrictMinus,
    /// degree 0
    Const,
}

#[derive(Clone, PartialEq)]
pub struct LaurentLoop {
    n: usize,
    lo: i32,
    coeffs: Vec<CMat>,
}

impl fmt::Debug for LaurentLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LaurentLoop")
            .field("n", &self.n)
            .field("window", &(self.lo, self.hi()))
            .field("wiener_norm", &self.wiener_norm())
            .finish()
    }
}

impl LaurentLoop {
    /// Builds a loop from coefficients for degrees `lo, lo+1, ...`, trimming negligible ends.
    pub fn new(lo: i32, coeffs: Vec<CMat>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| LoopError::Invalid("a loop needs at least one coefficient".into()))?;
        let n = first.nrows();
        for m in &coeffs {
            if m.nrows() != n || m.ncols() != n {
                return Err(LoopError::DimensionMismatch {
                    expected: n,
                    found: if m.nrows() != n { m.nrows() } else { m.ncols() },
                });
            }
        }
        if n == 0 {
            return Err(LoopError::Invalid("matrix dimension must be positive".into()));
        }
        Ok(Self::from_raw(n, lo, coeffs).trimmed())
    }

    fn from_raw(n: usize, lo: i32, coeffs: Vec<CMat>) -> Self {
        Self { n, lo, coeffs }
    }

    pub fn zero(n: usize) -> Self {
        Self::from_raw(n, 0, vec![zeros(n)])
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(identity(n))
    }

    /// The constant loop `m`.
    pub fn constant(m: CMat) -> Self {
        Self::monomial(m, 0)
    }

    /// The loop `m λ^degree`.
    pub fn monomial(m: CMat, degree: i32) -> Self {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "loop coefficients must be square");
        Self::from_raw(n, degree, vec![m]).trimmed()
    }

    /// Builds a loop from `(degree, matrix)` pairs; repeated degrees are summed.
    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (i32, CMat)>) -> Result<Self> {
        let terms: Vec<(i32, CMat)> = terms.into_iter().collect();
        if terms.is_empty() {
            return Ok(Self::zero(n));
        }
        let lo = terms.iter().map(|t| t.0).min().unwrap();
        let hi = terms.iter().map(|t| t.0).max().unwrap();
        let mut coeffs = vec![zeros(n); (hi - lo + 1) as usize];
        for (d, m) in terms {
            if m.nrows() != n || m.ncols() != n {
                return Err(LoopError::DimensionMismatch { expected: n, found: m.nrows() });
            }
            coeffs[(d - lo) as usize] += m;
        }
        Ok(Self::from_raw(n, lo, coeffs).trimmed())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lo(&self) -> i32 {
        self.lo
    }

    pub fn hi(&self) -> i32 {
        self.lo + self.coeffs.len() as i32 - 1
    }

    /// `max(|lo|, |hi|)`.
    pub fn radius(&self) -> i32 {
        self.lo.abs().max(self.hi().abs())
    }

    pub fn coeff(&self, degree: i32) -> Option<&CMat> {
        if degree < self.lo || degree > self.hi() {
            None
        } else {
            Some(&self.coeffs[(degree - self.lo) as usize])
        }
    }

    pub fn coeff_or_zero(&self, degree: i32) -> CMat {
        self.coeff(degree).cloned().unwrap_or_else(|| zeros(self.n))
    }

    /// `(degree, coefficient)` pairs in increasing degree.
    pub fn terms(&self) -> impl Iterator<Item = (i32, &CMat)> {
        self.coeffs.iter().enumerate().map(move |(i, m)| (self.lo + i as i32, m))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|m| m.iter().all(|z| *z == C64::new(0.0, 0.0)))
    }

    /// Σ ‖g_i‖ with the Frobenius norm.
    pub fn wiener_norm(&self) -> f64 {
        self.coeffs.iter().map(frob).sum()
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(frob).fold(0.0, f64::max)
    }

    /// Wiener distance `‖self − other‖`.
    pub fn distance(&self, other: &LaurentLoop) -> f64 {
        (self - other).wiener_norm()
    }

    /// Drops end coefficients whose norm is at most `TOL_TRIM` times the largest one.
    pub fn trimmed(self) -> Self {
        self.trimmed_with(TOL_TRIM)
    }

    pub fn trimmed_with(mut self, tol: f64) -> Self {
        let cut = tol * self.max_coeff_norm();
        let keep = |m: &CMat| frob(m) > cut;
        let Some(first) = self.coeffs.iter().position(keep) else {
            return Self::zero(self.n);
        };
        let last = self.coeffs.iter().rposition(keep).unwrap();
        self.coeffs.truncate(last + 1);
        self.coeffs.drain(..first);
        self.lo += first as i32;
        self
    }

    fn check_dim(&self, other: &LaurentLoop) -> Result<()> {
        if self.n != other.n {
            Err(LoopError::DimensionMismatch { expected: self.n, found: other.n })
        } else {
            Ok(())
        }
    }

    /// Cauchy product over the full window `[x.lo + y.lo, x.hi + y.hi]`.
    pub fn mul(&self, other: &LaurentLoop) -> Result<LaurentLoop> {
        self.check_dim(other)?;
        Ok(self.mul_windowed(other, self.lo + other.lo, self.hi() + other.hi()))
    }

    /// The product restricted to degrees `[lo, hi]`, computing only those coefficients.
    pub fn mul_windowed(&self, other: &LaurentLoop, lo: i32, hi: i32) -> LaurentLoop {
        assert_eq!(self.n, other.n, "loop dimension mismatch");
        let lo = lo.max(self.lo + other.lo);
        let hi = hi.min(self.hi() + other.hi());
        if lo > hi {
            return Self::zero(self.n);
        }
        let mut coeffs = Vec::with_capacity((hi - lo + 1) as usize);
        for k in lo..=hi {
            let mut acc = zeros(self.n);
            let i_lo = self.lo.max(k - other.hi());
            let i_hi = self.hi().min(k - other.lo);
            for i in i_lo..=i_hi {
                let a = &self.coeffs[(i - self.lo) as usize];
                let b = &other.coeffs[(k - i - other.lo) as usize];
                acc.gemm(C64::new(1.0, 0.0), a, b, C64::new(1.0, 0.0));
            }
            coeffs.push(acc);
        }
        Self::from_raw(self.n, lo, coeffs).trimmed()
    }

    pub fn add(&self, other: &LaurentLoop) -> Result<LaurentLoop> {
        self.check_dim(other)?;
        Ok(self.combine(other, 1.0))
    }

    pub fn sub(&self, other: &LaurentLoop) -> Result<LaurentLoop> {
        self.check_dim(other)?;
        Ok(self.combine(other, -1.0))
    }

    fn combine(&self, other: &LaurentLoop, sign: f64) -> LaurentLoop {
        assert_eq!(self.n, other.n, "loop dimension mismatch");
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        let coeffs = (lo..=hi)
            .map(|d| match (self.coeff(d), other.coeff(d)) {
                (Some(a), Some(b)) => a + b * C64::new(sign, 0.0),
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b * C64::new(sign, 0.0),
                (None, None) => zeros(self.n),
            })
            .collect();
        Self::from_raw(self.n, lo, coeffs).trimmed()
    }

    pub fn scale(&self, s: C64) -> LaurentLoop {
        self.map_coeffs(|_, m| m * s)
    }

    /// Applies `f(degree, coefficient)` to every coefficient, keeping the window.
    pub fn map_coeffs(&self, f: impl Fn(i32, &CMat) -> CMat) -> LaurentLoop {
        let coeffs = self.terms().map(|(d, m)| f(d, m)).collect();
        Self::from_raw(self.n, self.lo, coeffs).trimmed()
    }

    /// Left and right multiplication by constant matrices: `a g(λ) b`.
    pub fn sandwich(&self, a: &CMat, b: &CMat) -> LaurentLoop {
        self.map_coeffs(|_, m| a * m * b)
    }

    pub fn left_mul_const(&self, a: &CMat) -> LaurentLoop {
        self.map_coeffs(|_, m| a * m)
    }

    pub fn right_mul_const(&self, b: &CMat) -> LaurentLoop {
        self.map_coeffs(|_, m| m * b)
    }

    /// Coefficientwise transpose, i.e. `g(λ)^T`.
    pub fn transpose(&self) -> LaurentLoop {
        self.map_coeffs(|_, m| m.transpose())
    }

    /// The loop `λ ↦ g(1/λ)`.
    pub fn mirror(&self) -> LaurentLoop {
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        Self::from_raw(self.n, -self.hi(), coeffs)
    }

    /// Keeps the degrees selected by `part`; the zero loop if none remain.
    pub fn project(&self, part: Part) -> LaurentLoop {
        match part {
            Part::Plus => self.window(0, i32::MAX),
            Part::Minus => self.window(i32::MIN, 0),
            Part::StrictPlus => self.window(1, i32::MAX),
            Part::StrictMinus => self.window(i32::MIN, -1),
            Part::Const => self.window(0, 0),
        }
    }

    /// Keeps degrees in `[lo, hi]`.
    pub fn window(&self, lo: i32, hi: i32) -> LaurentLoop {
        let lo = lo.max(self.lo);
        let hi = hi.min(self.hi());
        if lo > hi {
            return Self::zero(self.n);
        }
        let coeffs = (lo..=hi).map(|d| self.coeffs[(d - self.lo) as usize].clone()).collect();
        Self::from_raw(self.n, lo, coeffs).trimmed()
    }

    /// `Σ g_i λ^i`, by Horner's rule separately on the nonnegative and negative parts.
    pub fn eval(&self, lambda: C64) -> Result<CMat> {
        if lambda == C64::new(0.0, 0.0) {
            return Err(LoopError::ZeroLambda);
        }
        let mut plus = zeros(self.n);
        for d in (self.lo.max(0)..=self.hi()).rev() {
            plus = plus * lambda + &self.coeffs[(d - self.lo) as usize];
        }
        let mut minus = zeros(self.n);
        let inv = C64::new(1.0, 0.0) / lambda;
        if self.lo < 0 {
            for d in self.lo..=self.hi().min(-1) {
                minus = (minus + &self.coeffs[(d - self.lo) as usize]) * inv;
            }
        }
        Ok(plus + minus)
    }

    /// Whether the loop is `I` up to `tol` in the Wiener norm.
    pub fn is_identity(&self, tol: f64) -> bool {
        self.distance(&Self::identity(self.n)) <= tol
    }
}

fn must<T>(r: Result<T>) -> T {
    match r {
        Ok(v) => v,
        Err(e) => panic!("{e}"),
    }
}

/// Operator forms panic on dimension mismatch; use the named methods for a `Result`.
impl Mul for &LaurentLoop {
    type Output = LaurentLoop;
    fn mul(self, rhs: &LaurentLoop) -> LaurentLoop {
        must(LaurentLoop::mul(self, rhs))
    }
}

impl Add for &LaurentLoop {
    type Output = LaurentLoop;
    fn add(self, rhs: &LaurentLoop) -> LaurentLoop {
        must(LaurentLoop::add(self, rhs))
    }
}

impl Sub for &LaurentLoop {
    type Output = LaurentLoop;
    fn sub(self, rhs: &LaurentLoop) -> LaurentLoop {
        must(LaurentLoop::sub(self, rhs))
    }
}

impl Neg for &LaurentLoop {
    type Output = LaurentLoop;
    fn neg(self) -> LaurentLoop {
        self.scale(C64::new(-1.0, 0.0))
    }
}

/// `exp(X)` for a loop `X`, summing the Taylor series until terms fall below `tol`
/// and keeping degrees in `[-radius, radius]`.
pub fn loop_exp(x: &LaurentLoop, radius: i32, tol: f64) -> LaurentLoop {
    let mut term = LaurentLoop::identity(x.n());
    let mut sum = term.clone();
    for k in 1..200 {
        term = term.mul_windowed(x, -radius, radius).scale(C64::new(1.0 / k as f64, 0.0));
        sum = &sum + &term;
        if term.wiener_norm() < tol {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn mat(n: usize, seed: u64) -> CMat {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        CMat::from_fn(n, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            c(a, b)
        })
    }

    #[test]
    fn identity_is_neutral() {
        let g = LaurentLoop::new(-1, vec![mat(3, 1), mat(3, 2), mat(3, 3)]).unwrap();
        let id = LaurentLoop::identity(3);
        assert_eq!(&id * &g, g);
        assert_eq!(&g * &id, g);
    }

    #[test]
    fn degrees_cancel() {
        let a = LaurentLoop::monomial(identity(2), 1);
        let b = LaurentLoop::monomial(identity(2), -1);
        assert_eq!(&a * &b, LaurentLoop::identity(2));
    }

    #[test]
    fn product_matches_schoolbook_convolution() {
        let (a, b, cc) = (mat(3, 4), mat(3, 5), mat(3, 6));
        let x = LaurentLoop::new(-1, vec![a.clone(), b.clone()]).unwrap();
        let y = LaurentLoop::monomial(cc.clone(), 1);
        let p = &x * &y;
        // brute force over all index pairs
        let mut expected = std::collections::BTreeMap::<i32, CMat>::new();
        for (i, xi) in x.terms() {
            for (j, yj) in y.terms() {
                *expected.entry(i + j).or_insert_with(|| zeros(3)) += xi * yj;
            }
        }
        assert_eq!(p.lo(), 0);
        assert_eq!(p.hi(), 1);
        for (d, m) in expected {
            assert!(frob(&(p.coeff_or_zero(d) - m)) < 1e-15);
        }
        assert!(frob(&(p.coeff_or_zero(0) - &a * &cc)) < 1e-15);
        assert!(frob(&(p.coeff_or_zero(1) - &b * &cc)) < 1e-15);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let x = LaurentLoop::identity(2);
        let y = LaurentLoop::identity(3);
        assert!(matches!(x.mul(&y), Err(LoopError::DimensionMismatch { .. })));
    }

    #[test]
    fn trimming_keeps_canonical_form() {
        let g = LaurentLoop::new(-2, vec![zeros(2), identity(2), zeros(2), identity(2), zeros(2)]).unwrap();
        assert_eq!((g.lo(), g.hi()), (-1, 1));
        let z = LaurentLoop::new(3, vec![zeros(2), zeros(2)]).unwrap();
        assert_eq!((z.lo(), z.hi()), (0, 0));
        assert!(z.is_zero());
    }

    #[test]
    fn projections() {
        let (a, b, cc) = (mat(2, 7), mat(2, 8), mat(2, 9));
        let g = LaurentLoop::new(-1, vec![a.clone(), b.clone(), cc.clone()]).unwrap();
        assert_eq!(g.project(Part::Const), LaurentLoop::constant(b));
        assert_eq!(g.project(Part::StrictMinus), LaurentLoop::monomial(a, -1));
        assert_eq!(&g.project(Part::Plus) + &g.project(Part::StrictMinus), g);
        assert!(LaurentLoop::identity(2).project(Part::StrictPlus).is_zero());
    }

    #[test]
    fn evaluation() {
        let (a, b) = (mat(3, 10), mat(3, 11));
        let g = LaurentLoop::from_terms(3, [(1, a.clone()), (-1, b.clone())]).unwrap();
        assert!(frob(&(g.eval(c(1.0, 0.0)).unwrap() - (&a + &b))) < 1e-15);
        let l = c(0.3, -1.2);
        let expected = &a * l + &b / l;
        assert!(frob(&(g.eval(l).unwrap() - expected)) < 1e-14);
        assert_eq!(g.eval(c(0.0, 0.0)), Err(LoopError::ZeroLambda));
        assert!(frob(&(LaurentLoop::identity(3).eval(c(2.0, 5.0)).unwrap() - identity(3))) == 0.0);
    }

    #[test]
    fn mirror_inverts_lambda() {
        let g = LaurentLoop::new(-2, vec![mat(2, 1), mat(2, 2), mat(2, 3), mat(2, 4)]).unwrap();
        let l = c(0.7, 0.4);
        let lhs = g.mirror().eval(l).unwrap();
        let rhs = g.eval(c(1.0, 0.0) / l).unwrap();
        assert!(frob(&(lhs - rhs)) < 1e-13);
        assert_eq!(g.mirror().mirror(), g);
    }

    #[test]
    fn exponential_of_monomial() {
        let b = mat(3, 12) * c(0.3, 0.0);
        let e = loop_exp(&LaurentLoop::monomial(b.clone(), 1), 30, 1e-18);
        let mut fact = 1.0;
        let mut pow = identity(3);
        for k in 0..6 {
            if k > 0 {
                fact *= k as f64;
                pow = &pow * &b;
            }
            assert!(frob(&(e.coeff_or_zero(k) - &pow / c(fact, 0.0))) < 1e-15);
        }
    }
}
