use crate::error::{LoopError, Result};
use crate::linalg::{frob, identity, CMat};
use crate::loop_algebra::{one_sided_inverse, truncated_inverse, GroupSpec, LaurentLoop, Part};
use crate::symmetries::SymmetrySpec;

use super::birkhoff::{birkhoff_right, birkhoff_right_auto, BirkhoffResult, MAX_AUTO_WINDOW};
use super::constant::{solve_constant_tau, TieBreak};

#[derive(Debug, Clone)]
pub struct IwasawaOptions {
    /// Birkhoff window for `x^{-1} τx`; `None` grows it automatically.
    pub window: Option<i32>,
    pub tol: f64,
    /// When set, inverses of `x` use `J x^T J` and `k` is built inside the group.
    pub group: Option<GroupSpec>,
    pub tie: TieBreak,
}

impl Default for IwasawaOptions {
    fn default() -> Self {
        Self { window: None, tol: 1e-8, group: None, tie: TieBreak::IndexOrder }
    }
}

#[derive(Debug, Clone)]
pub struct IwasawaResult {
    /// The τ-fixed factor.
    pub z: LaurentLoop,
    /// The one-sided factor: in Λ^+ for [`tau_iwasawa`], in Λ^- for [`tau_iwasawa_minus`].
    pub y: LaurentLoop,
    pub y_part: Part,
    pub k_const: CMat,
    pub k_inv: CMat,
    /// Middle term of the Birkhoff splitting of `x^{-1} τx`.
    pub a: CMat,
    /// `‖z y − x‖`.
    pub reconstruction: f64,
    /// `‖z − τz‖`.
    pub tau_fixedness: f64,
    /// `‖τ(a) a − I‖`.
    pub middle_reality: f64,
    /// `‖τ(v_+) v_- − I‖`, how far the minus factor is from the expected `(τ v_+)^{-1}`.
    pub minus_defect: f64,
    pub condition: f64,
    pub window: i32,
}

impl IwasawaResult {
    pub fn y_plus(&self) -> &LaurentLoop {
        &self.y
    }
}

/// Truncated inverse whose window doubles until the series converges; a generic loop
/// has an infinite inverse.
fn auto_inverse(x: &LaurentLoop) -> Result<LaurentLoop> {
    let mut window = 2 * x.radius() + 4;
    loop {
        match truncated_inverse(x, window) {
            Err(LoopError::SingularLoop { residual }) if residual.is_finite() && window < MAX_AUTO_WINDOW => {
                window = (window * 2).min(MAX_AUTO_WINDOW);
            }
            other => return other.map(|r| r.inverse),
        }
    }
}

/// τ-Iwasawa splitting `x = z y_+` with `τz = z` and `y_+ ∈ Λ^+`.
///
/// `w = x^{-1} τx` splits as `v_+ a v_-`, the constant `a` is written as `k^{-1} τ(k)`,
/// and then `y_+ = k v_+^{-1}`, `z = x v_+ k^{-1}`.
pub fn tau_iwasawa(x: &LaurentLoop, s: &SymmetrySpec, opts: &IwasawaOptions) -> Result<IwasawaResult> {
    let n = s.dim();
    if x.n() != n {
        return Err(LoopError::DimensionMismatch { expected: n, found: x.n() });
    }
    let x_inv = match &opts.group {
        Some(g) => g.loop_inverse(x),
        None => match opts.window {
            Some(window) => truncated_inverse(x, window)?.inverse,
            None => auto_inverse(x)?,
        },
    };
    let w = &x_inv * &s.apply_tau(x)?;
    let b: BirkhoffResult = match opts.window {
        Some(window) => birkhoff_right(&w, window, opts.tol)?,
        None => birkhoff_right_auto(&w, opts.tol)?,
    };
    let v_plus = &b.plus;
    let a = b.minus.coeff_or_zero(0);
    let middle_reality = frob(&(s.tau_const(&a) * &a - identity(n)));
    let a_inv = crate::linalg::inverse(&a).ok_or_else(|| LoopError::NotInIwasawaCell { reason: "singular middle term".into() })?;
    let v_minus = b.minus.left_mul_const(&a_inv);
    let minus_defect = (&s.apply_tau(v_plus)? * &v_minus).distance(&LaurentLoop::identity(n));

    let sol = solve_constant_tau(&a, s, opts.group.as_ref(), &opts.tie)?;
    let depth = b.window.max(2 * x.radius() + 4);
    let v_plus_inv = one_sided_inverse(v_plus, depth, 1)?;
    let y = v_plus_inv.left_mul_const(&sol.k);
    let z = (x * v_plus).right_mul_const(&sol.k_inv);

    let reconstruction = (&z * &y).distance(x);
    let tau_fixedness = z.distance(&s.apply_tau(&z)?);
    if !(reconstruction <= opts.tol && tau_fixedness <= opts.tol) {
        return Err(LoopError::NotInIwasawaCell {
            reason: format!("reconstruction {reconstruction:.3e}, τ-fixedness {tau_fixedness:.3e}"),
        });
    }
    Ok(IwasawaResult {
        z,
        y,
        y_part: Part::Plus,
        k_const: sol.k,
        k_inv: sol.k_inv,
        a,
        reconstruction,
        tau_fixedness,
        middle_reality,
        minus_defect,
        condition: b.condition,
        window: b.window,
    })
}

/// The opposite splitting `x = z y_-` with `y_- ∈ Λ^-`, obtained through `λ ↦ 1/λ`
/// (which commutes with τ).
pub fn tau_iwasawa_minus(x: &LaurentLoop, s: &SymmetrySpec, opts: &IwasawaOptions) -> Result<IwasawaResult> {
    let r = tau_iwasawa(&x.mirror(), s, opts)?;
    Ok(IwasawaResult { z: r.z.mirror(), y: r.y.mirror(), y_part: Part::Minus, ..r })
}
