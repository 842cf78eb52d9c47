//! Dense complex linear algebra helpers shared by the factorization code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

/// Frobenius norm.
pub fn frob(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_imag(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.im.abs()))
}

pub fn real_diag(entries: &[f64]) -> CMat {
    let n = entries.len();
    CMat::from_fn(n, n, |i, j| if i == j { c(entries[i], 0.0) } else { c(0.0, 0.0) })
}

pub fn conj(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().lu().try_inverse()
}

fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// LU factorization with a one-norm condition estimate.
pub struct LuSolver {
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    norm1: f64,
}

impl LuSolver {
    pub fn new(m: CMat) -> Self {
        let norm1 = one_norm(&m);
        Self { lu: m.lu(), norm1 }
    }

    pub fn solve(&self, b: &CMat) -> Option<CMat> {
        self.lu.solve(b)
    }

    fn solve_adjoint(&self, b: &DVector<C64>) -> Option<DVector<C64>> {
        // A = P^T L U, so A^H x = b is U^H L^H P x = b.
        let u = self.lu.u();
        let l = self.lu.l();
        let y = u.ad_solve_upper_triangular(b)?;
        let mut z = l.ad_solve_lower_triangular(&y)?;
        self.lu.p().inv_permute_rows(&mut z);
        Some(z)
    }

    /// Hager/Higham estimate of the one-norm condition number; infinite when singular.
    pub fn condition(&self) -> f64 {
        let n = self.norm1_dim();
        if n == 0 {
            return 1.0;
        }
        if !self.lu.is_invertible() {
            return f64::INFINITY;
        }
        let mut x = DVector::from_element(n, c(1.0 / n as f64, 0.0));
        let mut estimate = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = match self.lu.solve(&x) {
                Some(y) => y,
                None => return f64::INFINITY,
            };
            estimate = y.iter().map(|z| z.norm()).sum::<f64>();
            let xi = y.map(|z| {
                let r = z.norm();
                if r == 0.0 {
                    c(1.0, 0.0)
                } else {
                    z / r
                }
            });
            let z = match self.solve_adjoint(&xi) {
                Some(z) => z,
                None => return f64::INFINITY,
            };
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |acc, it| if it.1 > acc.1 { it } else { acc });
            let ztx = z.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().re;
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x = DVector::from_element(n, c(0.0, 0.0));
            x[j] = c(1.0, 0.0);
        }
        let est = estimate * self.norm1;
        if est.is_finite() {
            est
        } else {
            f64::INFINITY
        }
    }

    fn norm1_dim(&self) -> usize {
        self.lu.u().ncols()
    }
}

/// Least-squares solution of `a x = b` for a tall matrix `a` via Householder QR.
pub fn least_squares(a: CMat, b: &CMat) -> Option<CMat> {
    let k = a.ncols();
    let qr = a.qr();
    let mut rhs = b.clone();
    qr.q_tr_mul(&mut rhs);
    let r = qr.r();
    let top = rhs.rows(0, k).into_owned();
    r.solve_upper_triangular(&top)
}
