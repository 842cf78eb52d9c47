use crate::error::{LoopError, Result};
use crate::linalg::{identity, CMat, LuSolver};
use crate::loop_algebra::{LaurentLoop, Part};

use super::MAX_CONDITION;

/// Largest window tried by [`birkhoff_left_auto`].
pub const MAX_AUTO_WINDOW: i32 = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `g = minus · plus` with `minus(∞) = I`.
    Left,
    /// `g = plus · minus` with `plus(0) = I`.
    Right,
}

#[derive(Debug, Clone)]
pub struct BirkhoffResult {
    pub side: Side,
    pub minus: LaurentLoop,
    pub plus: LaurentLoop,
    /// Truncation defect plus reconstruction error, in the Wiener norm.
    pub residual: f64,
    /// One-norm condition estimate of the Toeplitz system.
    pub condition: f64,
    pub window: i32,
}

impl BirkhoffResult {
    /// The factors multiplied back in the order of `side`.
    pub fn product(&self) -> LaurentLoop {
        match self.side {
            Side::Left => &self.minus * &self.plus,
            Side::Right => &self.plus * &self.minus,
        }
    }
}

/// `2 max(|lo|, |hi|) + 4`.
pub fn default_window(g: &LaurentLoop) -> i32 {
    2 * g.radius() + 4
}

/// Left Birkhoff factorization `g = g_- g_+` with `g_-` normalized to `I` at λ = ∞.
///
/// Solves for `y = g_-^{-1}`, truncated to degrees `[-N, 0]`, from the block-Toeplitz
/// system `P_{<0}(y g) = 0`. Then `g_+ = P_{≥0}(y g)` and, because `g` is a Laurent
/// polynomial, `g_- = P_{≤0}(g g_+^{-1})` is recovered exactly from the power series of
/// `g_+^{-1}`.
pub fn birkhoff_left(g: &LaurentLoop, window: i32, tol: f64) -> Result<BirkhoffResult> {
    let n = g.n();
    let big_n = window.max(1);
    if g.lo() >= 0 {
        return Ok(BirkhoffResult {
            side: Side::Left,
            minus: LaurentLoop::identity(n),
            plus: g.clone(),
            residual: 0.0,
            condition: 1.0,
            window: big_n,
        });
    }
    let nn = n * big_n as usize;
    // Unknowns Y = [y_{-1} ... y_{-N}] satisfy Y T = R with T block (s, r) = g_{s-r}
    // and R block r = -g_{-r}; solve the transposed system T^T Y^T = R^T.
    let mut tt = CMat::zeros(nn, nn);
    let mut rt = CMat::zeros(nn, n);
    for r in 1..=big_n {
        let row = (r - 1) as usize * n;
        for s in 1..=big_n {
            if let Some(m) = g.coeff(s - r) {
                tt.view_mut((row, (s - 1) as usize * n), (n, n)).copy_from(&m.transpose());
            }
        }
        if let Some(m) = g.coeff(-r) {
            rt.view_mut((row, 0), (n, n)).copy_from(&(-m.transpose()));
        }
    }
    let solver = LuSolver::new(tt);
    let condition = solver.condition();
    let fail = |residual: f64| LoopError::BigCellViolation { condition, residual };
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(fail(f64::INFINITY));
    }
    let yt = solver.solve(&rt).ok_or_else(|| fail(f64::INFINITY))?;
    let mut coeffs: Vec<CMat> = (1..=big_n)
        .rev()
        .map(|s| yt.view(((s - 1) as usize * n, 0), (n, n)).transpose())
        .collect();
    coeffs.push(identity(n));
    let y = LaurentLoop::new(-big_n, coeffs)?;

    let yg = &y * g;
    let defect = yg.project(Part::StrictMinus).wiener_norm();
    let plus = yg.window(0, g.hi().max(0));
    let plus_inv = crate::loop_algebra::one_sided_inverse(&plus, -g.lo(), 1).map_err(|_| fail(f64::INFINITY))?;
    let mut minus = g.mul_windowed(&plus_inv, g.lo(), 0);
    minus = replace_coeff(&minus, 0, identity(n));
    let reconstruction = (&minus * &plus).distance(g);
    let residual = defect + reconstruction;
    if !residual.is_finite() || residual > tol {
        return Err(fail(residual));
    }
    Ok(BirkhoffResult { side: Side::Left, minus, plus, residual, condition, window: big_n })
}

fn replace_coeff(g: &LaurentLoop, degree: i32, m: CMat) -> LaurentLoop {
    let lo = g.lo().min(degree);
    let hi = g.hi().max(degree);
    let terms = (lo..=hi).map(|d| (d, if d == degree { m.clone() } else { g.coeff_or_zero(d) }));
    LaurentLoop::from_terms(g.n(), terms).expect("dimensions agree")
}

/// Right Birkhoff factorization `g = g_+ g_-` with `g_+` normalized to `I` at λ = 0,
/// via the mirror `λ ↦ 1/λ` of the left factorization.
pub fn birkhoff_right(g: &LaurentLoop, window: i32, tol: f64) -> Result<BirkhoffResult> {
    let r = birkhoff_left(&g.mirror(), window, tol)?;
    Ok(BirkhoffResult {
        side: Side::Right,
        minus: r.plus.mirror(),
        plus: r.minus.mirror(),
        residual: r.residual,
        condition: r.condition,
        window: r.window,
    })
}

/// [`birkhoff_left`] starting at [`default_window`] and doubling the window while the
/// failure is a truncation defect rather than ill-conditioning.
pub fn birkhoff_left_auto(g: &LaurentLoop, tol: f64) -> Result<BirkhoffResult> {
    auto(g, tol, birkhoff_left)
}

pub fn birkhoff_right_auto(g: &LaurentLoop, tol: f64) -> Result<BirkhoffResult> {
    auto(g, tol, birkhoff_right)
}

fn auto(
    g: &LaurentLoop,
    tol: f64,
    f: impl Fn(&LaurentLoop, i32, f64) -> Result<BirkhoffResult>,
) -> Result<BirkhoffResult> {
    let mut window = default_window(g);
    loop {
        match f(g, window, tol) {
            Err(LoopError::BigCellViolation { condition, .. }) if condition <= MAX_CONDITION && window < MAX_AUTO_WINDOW => {
                window = (window * 2).min(MAX_AUTO_WINDOW);
            }
            other => return other,
        }
    }
}
