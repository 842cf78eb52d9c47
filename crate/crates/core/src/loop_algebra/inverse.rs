use super::LaurentLoop;
use crate::error::{LoopError, Result};
use crate::linalg::{identity, inverse, least_squares, zeros, CMat, C64};

/// Default acceptance threshold for the windowed inversion residual.
pub const TOL_INV: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct InverseResult {
    pub inverse: LaurentLoop,
    /// `‖P_[-N,N](g x − I)‖` in the Wiener norm.
    pub residual: f64,
    /// True when the exact one-sided power series was used.
    pub exact: bool,
}

/// Approximate inverse of `g` supported in `[-N, N]`.
///
/// Loops supported on one side of degree 0 with an invertible constant term are
/// inverted by their power series, which is exact within the window. Anything else
/// goes through a block-Toeplitz least-squares solve.
pub fn truncated_inverse(g: &LaurentLoop, window: i32) -> Result<InverseResult> {
    truncated_inverse_with(g, window, TOL_INV)
}

pub fn truncated_inverse_with(g: &LaurentLoop, window: i32, tol: f64) -> Result<InverseResult> {
    let window = window.max(0);
    let (inv, exact) = if g.lo() == g.hi() {
        let c0 = inverse(g.coeff(g.lo()).unwrap()).ok_or(LoopError::SingularLoop { residual: f64::INFINITY })?;
        (LaurentLoop::monomial(c0, -g.lo()), true)
    } else if g.lo() >= 0 {
        (one_sided_inverse(g, window, 1)?, true)
    } else if g.hi() <= 0 {
        (one_sided_inverse(g, window, -1)?, true)
    } else {
        (toeplitz_inverse(g, window)?, false)
    };
    let residual = (&g.mul_windowed(&inv, -window, window) - &LaurentLoop::identity(g.n())).wiener_norm();
    if !residual.is_finite() || residual > tol {
        return Err(LoopError::SingularLoop { residual });
    }
    Ok(InverseResult { inverse: inv, residual, exact })
}

/// Power-series inverse of a loop supported in degrees of sign `dir` (0 included).
/// Requires an invertible constant term.
pub(crate) fn one_sided_inverse(g: &LaurentLoop, depth: i32, dir: i32) -> Result<LaurentLoop> {
    let n = g.n();
    let g0 = g.coeff_or_zero(0);
    let g0_inv = inverse(&g0).ok_or(LoopError::SingularLoop { residual: f64::INFINITY })?;
    let depth = depth.max(0) as usize;
    let mut out: Vec<CMat> = Vec::with_capacity(depth + 1);
    out.push(g0_inv.clone());
    for k in 1..=depth {
        let mut acc = zeros(n);
        for j in 1..=k {
            if let Some(gj) = g.coeff(dir * j as i32) {
                acc.gemm(C64::new(1.0, 0.0), gj, &out[k - j], C64::new(1.0, 0.0));
            }
        }
        out.push(-(&g0_inv * acc));
    }
    if dir > 0 {
        LaurentLoop::new(0, out)
    } else {
        out.reverse();
        LaurentLoop::new(-(depth as i32), out)
    }
}

fn toeplitz_inverse(g: &LaurentLoop, window: i32) -> Result<LaurentLoop> {
    let n = g.n();
    let cols = (2 * window + 1) as usize;
    let k_lo = g.lo() - window;
    let k_hi = g.hi() + window;
    let rows = (k_hi - k_lo + 1) as usize;
    let mut a = CMat::zeros(rows * n, cols * n);
    for (ri, k) in (k_lo..=k_hi).enumerate() {
        for (ci, j) in (-window..=window).enumerate() {
            if let Some(m) = g.coeff(k - j) {
                a.view_mut((ri * n, ci * n), (n, n)).copy_from(m);
            }
        }
    }
    let mut b = CMat::zeros(rows * n, n);
    b.view_mut(((-k_lo) as usize * n, 0), (n, n)).copy_from(&identity(n));
    let x = least_squares(a, &b).ok_or(LoopError::SingularLoop { residual: f64::INFINITY })?;
    let coeffs = (0..cols).map(|ci| x.view((ci * n, 0), (n, n)).into_owned()).collect();
    LaurentLoop::new(-window, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, frob};
    use crate::loop_algebra::loop_exp;

    fn small(n: usize, seed: u64, scale: f64) -> CMat {
        let mut s = seed;
        CMat::from_fn(n, n, |_, _| {
            s = s.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            let a = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            s = s.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            let b = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            c(a * scale, b * scale)
        })
    }

    #[test]
    fn identity_inverts_to_identity() {
        for n in [0, 3, 7] {
            let r = truncated_inverse(&LaurentLoop::identity(3), n).unwrap();
            assert_eq!(r.inverse, LaurentLoop::identity(3));
            assert_eq!(r.residual, 0.0);
        }
    }

    #[test]
    fn terminating_series_for_lambda_minus() {
        let a = small(3, 5, 1.0);
        let g = LaurentLoop::from_terms(3, [(0, identity(3)), (-1, a.clone())]).unwrap();
        let r = truncated_inverse(&g, 2).unwrap();
        assert!(r.exact);
        let expected = LaurentLoop::from_terms(3, [(0, identity(3)), (-1, -&a), (-2, &a * &a)]).unwrap();
        assert!(r.inverse.distance(&expected) < 1e-15);
        assert!(r.residual < 1e-15);
    }

    #[test]
    fn exponential_inverse() {
        let x = small(4, 9, 0.2);
        let g = loop_exp(&LaurentLoop::monomial(x.clone(), 1), 40, 1e-20);
        let r = truncated_inverse(&g, 8).unwrap();
        let expected = loop_exp(&LaurentLoop::monomial(-x, 1), 8, 1e-20);
        assert!(r.inverse.distance(&expected) < 1e-12);
        assert!(r.residual < 1e-10);
    }

    #[test]
    fn two_sided_loop_uses_least_squares() {
        let a = small(3, 11, 0.3);
        let b = small(3, 12, 0.3);
        let gm = LaurentLoop::from_terms(3, [(0, identity(3)), (-1, a)]).unwrap();
        let gp = LaurentLoop::from_terms(3, [(0, identity(3)), (1, b)]).unwrap();
        let g = &gm * &gp;
        let r = truncated_inverse(&g, 24).unwrap();
        assert!(!r.exact);
        assert!(r.residual < 1e-10);
        let l = C64::from_polar(1.0, 0.8);
        let prod = g.eval(l).unwrap() * r.inverse.eval(l).unwrap();
        assert!(frob(&(prod - identity(3))) < 1e-9);
    }

    #[test]
    fn singular_loop_is_reported() {
        let g = LaurentLoop::constant(CMat::zeros(2, 2));
        assert!(matches!(truncated_inverse(&g, 3), Err(LoopError::SingularLoop { .. })));
        // λ + λ^{-1} vanishes at λ = ±i on the unit circle
        let h = LaurentLoop::from_terms(2, [(-1, identity(2)), (1, identity(2))]).unwrap();
        assert!(truncated_inverse(&h, 6).is_err());
    }
}
