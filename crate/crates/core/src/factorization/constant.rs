//! The finite-dimensional middle step of the τ-Iwasawa splitting: given `a` with
//! `τ₂(a) = a^{-1}`, find a constant `k` with `k^{-1} Q k Q = a`.
//!
//! The equation says `M = aQ` is conjugate to `Q` with `k^{-1}` as the change of basis,
//! so the columns of `V = k^{-1}` are eigenvectors of `M` for the eigenvalues `Q_jj`.
//! Since `k` must also commute with `P` (when σ is imposed), each column lies in a joint eigenspace of
//! `(M, P)`. Those are cut out by the commuting projectors `(I ± M)/2 (I ± P)/2`; inside
//! each one we run Gram–Schmidt for the group's bilinear form `x^T J y`.

use crate::error::{LoopError, Result};
use crate::linalg::{frob, inverse, CMat, C64};
use crate::loop_algebra::GroupSpec;
use crate::symmetries::{SymmetrySpec, Twist};

/// Residual allowed in `k^{-1} τ₂(k) = a`.
pub const TOL_CONSTANT: f64 = 1e-9;

/// How the basis inside each joint eigenspace is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum TieBreak {
    /// Project the standard basis vectors, in index order.
    IndexOrder,
    /// Project the columns of a previous `V = k^{-1}`, so that nearby inputs give nearby `k`.
    Seeded(CMat),
}

#[derive(Debug, Clone)]
pub struct ConstantSolution {
    pub k: CMat,
    /// `V = k^{-1}`, usable as the seed for a neighbouring solve.
    pub k_inv: CMat,
    pub residual: f64,
}

/// Solves `k^{-1} Q k Q = a` for `k` commuting with `P`, in the group of `group` when
/// given (otherwise in `GL`), and respecting the reality condition of `s` on constants.
pub fn solve_constant_tau(a: &CMat, s: &SymmetrySpec, group: Option<&GroupSpec>, tie: &TieBreak) -> Result<ConstantSolution> {
    let n = s.dim();
    if a.nrows() != n || a.ncols() != n {
        return Err(LoopError::DimensionMismatch { expected: n, found: a.nrows() });
    }
    let fail = |reason: String| LoopError::NotInIwasawaCell { reason };
    let q = s.q_signs();
    // Without σ there is no block condition on k.
    let p = if s.twists.contains(&Twist::Sigma) { s.p_signs() } else { vec![1.0; n] };
    let involution = frob(&(s.tau_const(a) * a - CMat::identity(n, n)));
    if involution > 1e-8 {
        return Err(fail(format!("Q a Q a differs from I by {involution:.3e}")));
    }
    let m = CMat::from_fn(n, n, |i, j| a[(i, j)] * q[j]);
    let j_signs: Option<Vec<f64>> = group.map(|g| g.form_signs());
    let structure = s.constant_structure();
    let mut v = CMat::zeros(n, n);

    for eps in [1.0, -1.0] {
        for delta in [1.0, -1.0] {
            let idx: Vec<usize> = (0..n).filter(|&j| q[j] == eps && p[j] == delta).collect();
            // (I + eps M)/2 (I + delta P)/2, with P diagonal
            let proj = CMat::from_fn(n, n, |i, j| {
                let e = if i == j { 1.0 } else { 0.0 };
                (C64::new(e, 0.0) + m[(i, j)] * eps) * (0.25 * (1.0 + delta * p[j]))
            });
            let rank = proj.trace();
            if (rank - C64::new(idx.len() as f64, 0.0)).norm() > 1e-6 {
                return Err(fail(format!(
                    "eigenspace ({eps:+}, {delta:+}) has dimension {:.6} instead of {}",
                    rank.re,
                    idx.len()
                )));
            }
            let mut done: Vec<usize> = Vec::new();
            for &j in &idx {
                let seed = match tie {
                    TieBreak::IndexOrder => proj.column(j).into_owned(),
                    TieBreak::Seeded(prev) => &proj * prev.column(j),
                };
                let mut col = seed;
                match &j_signs {
                    Some(js) => {
                        let form = |x: &nalgebra::DVector<C64>, y: &nalgebra::DVector<C64>| {
                            (0..n).map(|r| x[r] * y[r] * js[r]).sum::<C64>()
                        };
                        for &d in &done {
                            let prev = v.column(d).into_owned();
                            let coef = form(&prev, &col) * js[d];
                            col -= prev * coef;
                        }
                        let nn = form(&col, &col) * js[j];
                        if nn.norm() < 1e-10 {
                            return Err(fail(format!("isotropic eigenvector in column {j}")));
                        }
                        col /= nn.sqrt();
                    }
                    None => {
                        for &d in &done {
                            let prev = v.column(d).into_owned();
                            let coef = prev.dotc(&col) / prev.dotc(&prev);
                            col -= prev * coef;
                        }
                        let nrm = col.norm();
                        if nrm < 1e-10 {
                            return Err(fail(format!("degenerate eigenvector in column {j}")));
                        }
                        col /= C64::new(nrm, 0.0);
                    }
                }
                if let (Some(st), Some(_)) = (&structure, &j_signs) {
                    // Real structure: S conj(col) must equal S_jj col.
                    let defect = (0..n).map(|r| (col[r].conj() * st[r] - col[r] * st[j]).norm_sqr()).sum::<f64>().sqrt();
                    if defect > 1e-8 {
                        return Err(fail(format!("eigenvector {j} has the wrong signature for the real form")));
                    }
                }
                v.set_column(j, &col);
                done.push(j);
            }
        }
    }

    let mut k = match &group {
        Some(g) => g.group_inverse(&v),
        None => inverse(&v).ok_or_else(|| fail("eigenvectors are linearly dependent".into()))?,
    };
    if let Some(g) = group.filter(|_| (v.determinant() + C64::new(1.0, 0.0)).norm() < 1e-6) {
        // Land in the identity component: flip the last column.
        let last = n - 1;
        let col = -v.column(last).into_owned();
        v.set_column(last, &col);
        k = g.group_inverse(&v);
    }
    let residual = frob(&(&v * s.tau_const(&k) - a));
    if residual.is_nan() || residual > TOL_CONSTANT {
        return Err(fail(format!("constant solve residual {residual:.3e}")));
    }
    Ok(ConstantSolution { k, k_inv: v, residual })
}
