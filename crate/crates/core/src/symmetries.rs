//! Twisting automorphisms and reality involutions acting coefficientwise on loops.
//!
//! With `P = diag(I_n, -I_{k+1})` and `Q = diag(I_{n+1}, -I_k)`:
//!
//! - σ: `(σg)_j = (-1)^j P g_j P`, the order-two twist,
//! - τ: `(τg)_j = Q g_{-j} Q`, which swaps positive and negative degrees,
//! - the reality involutions `R1, R2, Rm1, Rm2` and the composites `Rhat1 = τ∘Rm1`,
//!   `Rhat2 = τ∘Rm2`,
//! - φ = Ad_T with `T = diag(i I_n, 1, i I_k)`, which carries `g^T g = I` to `g^T J g = J`.

use serde::{Deserialize, Serialize};

use crate::error::{LoopError, Result};
use crate::linalg::{conj, real_diag, CMat, C64};
use crate::loop_algebra::LaurentLoop;

/// Anti-linear involutions fixing loops that are real on a curve in the λ-plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Reality {
    /// real for λ ∈ iℝ*
    R1,
    /// real for λ ∈ ℝ*
    R2,
    /// real for λ ∈ S¹
    Rm1,
    /// `g(λ) = conj(g(-1/conj λ))`
    Rm2,
    /// τ∘Rm1
    Rhat1,
    /// τ∘Rm2
    Rhat2,
    None,
}

impl Reality {
    /// Whether the involution preserves Λ^+ (first kind) rather than swapping Λ^±.
    pub fn is_first_kind(self) -> bool {
        matches!(self, Reality::R1 | Reality::R2 | Reality::Rhat1 | Reality::Rhat2 | Reality::None)
    }

    /// A representative λ at which fixed loops evaluate to real matrices.
    pub fn locus_point(self) -> Option<C64> {
        match self {
            Reality::R1 => Some(C64::new(0.0, 0.5)),
            Reality::R2 => Some(C64::new(0.5, 0.0)),
            Reality::Rm1 => Some(C64::from_polar(1.0, 0.7)),
            _ => None,
        }
    }

    /// Whether fixed loops are real at `lambda`.
    pub fn on_locus(self, lambda: C64, tol: f64) -> bool {
        match self {
            Reality::R1 => lambda.re.abs() <= tol && lambda.im.abs() > tol,
            Reality::R2 => lambda.im.abs() <= tol && lambda.re.abs() > tol,
            Reality::Rm1 => (lambda.norm() - 1.0).abs() <= tol,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Twist {
    Sigma,
    Tau,
}

/// One involution in a composite; composites are applied right to left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Involution {
    Sigma,
    Tau,
    Real(Reality),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiDirection {
    SphereToHyperbolic,
    HyperbolicToSphere,
}

/// Block sizes, reality condition and twists of a loop group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetrySpec {
    pub n: usize,
    pub k: usize,
    pub reality: Reality,
    #[serde(default = "default_twists")]
    pub twists: Vec<Twist>,
}

fn default_twists() -> Vec<Twist> {
    vec![Twist::Sigma, Twist::Tau]
}

impl Default for SymmetrySpec {
    fn default() -> Self {
        Self::new(2, 1, Reality::None)
    }
}

impl SymmetrySpec {
    pub fn new(n: usize, k: usize, reality: Reality) -> Self {
        Self { n, k, reality, twists: default_twists() }
    }

    pub fn with_reality(&self, reality: Reality) -> Self {
        Self { reality, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.n + self.k + 1
    }

    pub fn p_signs(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| if i < self.n { 1.0 } else { -1.0 }).collect()
    }

    pub fn q_signs(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| if i <= self.n { 1.0 } else { -1.0 }).collect()
    }

    pub fn p(&self) -> CMat {
        real_diag(&self.p_signs())
    }

    pub fn q(&self) -> CMat {
        real_diag(&self.q_signs())
    }

    fn check(&self, g: &LaurentLoop) -> Result<()> {
        if g.n() != self.dim() {
            Err(LoopError::DimensionMismatch { expected: self.dim(), found: g.n() })
        } else {
            Ok(())
        }
    }

    /// Checks on a few generator loops that σ and τ commute and that the reality
    /// involution commutes with σ and τ and squares to the identity.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let gen = LaurentLoop::from_terms(
            n,
            (-2..=2).map(|d| {
                (
                    d,
                    CMat::from_fn(n, n, |i, j| {
                        C64::new(((i * 7 + j * 3) as f64 + d as f64).sin(), ((i + 2 * j) as f64 * 0.7 - d as f64).cos())
                    }),
                )
            }),
        )?;
        let st = self.apply_sigma(&self.apply_tau(&gen)?)?;
        let ts = self.apply_tau(&self.apply_sigma(&gen)?)?;
        let mut worst = st.distance(&ts);
        let r = self.apply_reality(&gen)?;
        worst = worst.max(self.apply_reality(&r)?.distance(&gen));
        worst = worst.max(self.apply_reality(&self.apply_sigma(&gen)?)?.distance(&self.apply_sigma(&r)?));
        if worst > 1e-12 * gen.wiener_norm() {
            return Err(LoopError::Invalid(format!("symmetries do not commute (defect {worst:.3e})")));
        }
        Ok(())
    }

    pub fn apply_sigma(&self, g: &LaurentLoop) -> Result<LaurentLoop> {
        self.check(g)?;
        let p = self.p_signs();
        Ok(g.map_coeffs(|d, m| {
            let parity = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (parity * p[i] * p[j]))
        }))
    }

    pub fn apply_tau(&self, g: &LaurentLoop) -> Result<LaurentLoop> {
        self.check(g)?;
        let q = self.q_signs();
        Ok(g.mirror().map_coeffs(|_, m| CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (q[i] * q[j]))))
    }

    /// `Q m Q` for a constant matrix.
    pub fn tau_const(&self, m: &CMat) -> CMat {
        let q = self.q_signs();
        CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (q[i] * q[j]))
    }

    pub fn apply_reality(&self, g: &LaurentLoop) -> Result<LaurentLoop> {
        self.apply_reality_tag(g, self.reality)
    }

    pub fn apply_reality_tag(&self, g: &LaurentLoop, which: Reality) -> Result<LaurentLoop> {
        self.check(g)?;
        let alt = |d: i32| if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let q = self.q_signs();
        let conj_q = |m: &CMat, s: f64| CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj() * (s * q[i] * q[j]));
        Ok(match which {
            Reality::None => g.clone(),
            Reality::R1 => g.map_coeffs(|d, m| conj(m) * C64::new(alt(d), 0.0)),
            Reality::R2 => g.map_coeffs(|_, m| conj(m)),
            Reality::Rm1 => g.mirror().map_coeffs(|_, m| conj(m)),
            Reality::Rm2 => g.mirror().map_coeffs(|d, m| conj(m) * C64::new(alt(d), 0.0)),
            Reality::Rhat1 => g.map_coeffs(|_, m| conj_q(m, 1.0)),
            Reality::Rhat2 => g.map_coeffs(|d, m| conj_q(m, alt(d))),
        })
    }

    /// The action of the reality condition on constant loops: `m ↦ S conj(m) S`.
    /// Returns the diagonal of `S`, or `None` when there is no reality condition.
    pub fn constant_structure(&self) -> Option<Vec<f64>> {
        match self.reality {
            Reality::None => None,
            Reality::Rhat1 | Reality::Rhat2 => Some(self.q_signs()),
            _ => Some(vec![1.0; self.dim()]),
        }
    }

    pub fn apply(&self, g: &LaurentLoop, inv: Involution) -> Result<LaurentLoop> {
        match inv {
            Involution::Sigma => self.apply_sigma(g),
            Involution::Tau => self.apply_tau(g),
            Involution::Real(r) => self.apply_reality_tag(g, r),
        }
    }

    /// Applies a composite, rightmost first.
    pub fn apply_composite(&self, g: &LaurentLoop, composite: &[Involution]) -> Result<LaurentLoop> {
        composite.iter().rev().try_fold(g.clone(), |acc, &inv| self.apply(&acc, inv))
    }

    /// `max ‖g − ι(g)‖` over the requested involutions.
    pub fn fixed_residual(&self, g: &LaurentLoop, involutions: &[Involution]) -> Result<f64> {
        involutions
            .iter()
            .map(|&inv| self.apply(g, inv).map(|h| g.distance(&h)))
            .try_fold(0.0_f64, |acc, r| r.map(|r| acc.max(r)))
    }

    /// The involutions declared by this spec: twists plus the reality condition.
    pub fn declared(&self) -> Vec<Involution> {
        let mut v: Vec<Involution> = self
            .twists
            .iter()
            .map(|t| match t {
                Twist::Sigma => Involution::Sigma,
                Twist::Tau => Involution::Tau,
            })
            .collect();
        if self.reality != Reality::None {
            v.push(Involution::Real(self.reality));
        }
        v
    }

    /// Diagonal of `T = diag(i I_n, 1, i I_k)`.
    pub fn t_diag(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| if i == self.n { C64::new(1.0, 0.0) } else { C64::new(0.0, 1.0) }).collect()
    }

    /// φ = Ad_T (or its inverse) applied coefficientwise.
    pub fn phi_map(&self, g: &LaurentLoop, direction: PhiDirection) -> Result<LaurentLoop> {
        self.check(g)?;
        let t = self.t_diag();
        Ok(g.map_coeffs(|_, m| self.phi_const(m, direction, &t)))
    }

    /// φ on a single matrix.
    pub fn phi_matrix(&self, m: &CMat, direction: PhiDirection) -> CMat {
        self.phi_const(m, direction, &self.t_diag())
    }

    fn phi_const(&self, m: &CMat, direction: PhiDirection, t: &[C64]) -> CMat {
        CMat::from_fn(m.nrows(), m.ncols(), |i, j| match direction {
            PhiDirection::SphereToHyperbolic => t[i] * m[(i, j)] / t[j],
            PhiDirection::HyperbolicToSphere => m[(i, j)] * t[j] / t[i],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, frob, identity};
    use crate::loop_algebra::GroupSpec;

    fn spec() -> SymmetrySpec {
        SymmetrySpec::new(2, 1, Reality::R2)
    }

    fn generic(seed: f64) -> LaurentLoop {
        LaurentLoop::from_terms(
            4,
            (-2..=3).map(|d| {
                (d, CMat::from_fn(4, 4, |i, j| c((seed + (i * 5 + j) as f64 + d as f64 * 1.3).sin(), (seed * 2.0 + (i + 3 * j) as f64 - d as f64).cos())))
            }),
        )
        .unwrap()
    }

    #[test]
    fn identity_is_fixed_by_everything() {
        let s = spec();
        let id = LaurentLoop::identity(4);
        assert_eq!(s.apply_sigma(&id).unwrap(), id);
        assert_eq!(s.apply_tau(&id).unwrap(), id);
        assert_eq!(s.phi_map(&id, PhiDirection::SphereToHyperbolic).unwrap(), id);
        let all = [
            Involution::Sigma,
            Involution::Tau,
            Involution::Real(Reality::R1),
            Involution::Real(Reality::R2),
            Involution::Real(Reality::Rm1),
            Involution::Real(Reality::Rm2),
            Involution::Real(Reality::Rhat1),
            Involution::Real(Reality::Rhat2),
        ];
        assert_eq!(s.fixed_residual(&id, &all).unwrap(), 0.0);
    }

    #[test]
    fn off_diagonal_degree_one_is_sigma_fixed() {
        let s = spec();
        let a = CMat::from_fn(4, 4, |i, j| if (i < 2) != (j < 2) { c(1.0 + i as f64, j as f64) } else { c(0.0, 0.0) });
        let g = LaurentLoop::monomial(a, 1);
        assert_eq!(s.apply_sigma(&g).unwrap(), g);
    }

    #[test]
    fn block_pattern_by_parity_is_sigma_fixed() {
        let s = spec();
        let g = generic(0.3).map_coeffs(|d, m| {
            CMat::from_fn(4, 4, |i, j| {
                let diag_block = (i < 2) == (j < 2);
                if diag_block == (d % 2 == 0) {
                    m[(i, j)]
                } else {
                    c(0.0, 0.0)
                }
            })
        });
        // brute-force coefficient check
        for (d, m) in s.apply_sigma(&g).unwrap().terms() {
            assert!(frob(&(m - g.coeff_or_zero(d))) == 0.0);
        }
        assert_eq!(s.fixed_residual(&g, &[Involution::Sigma]).unwrap(), 0.0);
    }

    #[test]
    fn tau_reflects_the_window() {
        let s = spec();
        let a = CMat::from_fn(4, 4, |i, j| c(i as f64 + 1.0, j as f64));
        let t = s.apply_tau(&LaurentLoop::monomial(a.clone(), 1)).unwrap();
        assert_eq!(t, LaurentLoop::monomial(s.q() * a * s.q(), -1));
        let g = generic(1.1);
        assert_eq!(s.apply_tau(&s.apply_tau(&g).unwrap()).unwrap(), g);
        assert_eq!((s.apply_tau(&g).unwrap().lo(), s.apply_tau(&g).unwrap().hi()), (-3, 2));
    }

    #[test]
    fn reality_examples() {
        let s = spec();
        let real = LaurentLoop::from_terms(4, [(0, identity(4)), (1, identity(4) * c(2.0, 0.0))]).unwrap();
        assert_eq!(s.apply_reality_tag(&real, Reality::R2).unwrap(), real);
        let a = CMat::from_fn(4, 4, |i, j| c((i * 4 + j) as f64, 0.0));
        let g = LaurentLoop::monomial(a * c(0.0, 1.0), 1);
        assert_eq!(s.apply_reality_tag(&g, Reality::R1).unwrap(), g);
    }

    #[test]
    fn involutions_square_to_identity() {
        let s = spec();
        let g = generic(2.0);
        for r in [Reality::R1, Reality::R2, Reality::Rm1, Reality::Rm2, Reality::Rhat1, Reality::Rhat2] {
            let twice = s.apply_reality_tag(&s.apply_reality_tag(&g, r).unwrap(), r).unwrap();
            assert!(twice.distance(&g) < 1e-15, "{r:?}");
        }
    }

    #[test]
    fn hat_involutions_are_compositions_with_tau() {
        let s = spec();
        let g = generic(0.7);
        for (hat, base) in [(Reality::Rhat1, Reality::Rm1), (Reality::Rhat2, Reality::Rm2)] {
            let direct = s.apply_reality_tag(&g, hat).unwrap();
            let composed = s.apply_composite(&g, &[Involution::Tau, Involution::Real(base)]).unwrap();
            assert!(direct.distance(&composed) < 1e-15);
        }
    }

    #[test]
    fn reality_fixed_loops_are_real_on_their_locus() {
        let s = spec();
        let g = generic(0.1);
        for r in [Reality::R1, Reality::R2, Reality::Rm1] {
            let h = &g + &s.apply_reality_tag(&g, r).unwrap();
            let m = h.eval(r.locus_point().unwrap()).unwrap();
            assert!(crate::linalg::max_abs_imag(&m) < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn sigma_and_tau_commute() {
        let s = spec();
        let g = generic(3.0);
        let a = s.apply_sigma(&s.apply_tau(&g).unwrap()).unwrap();
        let b = s.apply_tau(&s.apply_sigma(&g).unwrap()).unwrap();
        assert!(a.distance(&b) < 1e-14);
        s.validate().unwrap();
        for r in [Reality::R1, Reality::R2, Reality::Rm1, Reality::Rm2, Reality::Rhat1, Reality::Rhat2] {
            s.with_reality(r).validate().unwrap();
        }
    }

    #[test]
    fn first_kind_preserves_positive_windows() {
        let s = spec();
        let g = generic(0.4).project(crate::loop_algebra::Part::Plus);
        for r in [Reality::R1, Reality::R2, Reality::Rhat1, Reality::Rhat2] {
            assert!(r.is_first_kind());
            let h = s.apply_reality_tag(&g, r).unwrap();
            assert_eq!((h.lo(), h.hi()), (g.lo(), g.hi()));
        }
        let h = s.apply_reality_tag(&g, Reality::Rm1).unwrap();
        assert_eq!((h.lo(), h.hi()), (-g.hi(), -g.lo()));
    }

    #[test]
    fn phi_carries_orthogonal_to_lorentz() {
        let s = spec();
        let x = CMat::from_fn(4, 4, |i, j| c((i as f64 - j as f64) * 0.3, (i * j) as f64 * 0.1));
        let x = &x - x.transpose();
        let g = LaurentLoop::constant(x.exp());
        let sphere = GroupSpec::sphere(2, 1);
        let hyper = GroupSpec::hyperbolic(2, 1);
        let samples = GroupSpec::default_samples();
        assert!(g.group_residual(&sphere, &samples) < 1e-12);
        let h = s.phi_map(&g, PhiDirection::SphereToHyperbolic).unwrap();
        assert!(h.group_residual(&hyper, &samples) < 1e-12);
        let back = s.phi_map(&h, PhiDirection::HyperbolicToSphere).unwrap();
        assert!(back.distance(&g) < 1e-15);
    }

    #[test]
    fn pqt_identity() {
        // PQT = -conj(T) = -T^{-1}
        let s = spec();
        let t = s.t_diag();
        for (i, ti) in t.iter().enumerate() {
            let lhs = ti * (s.p_signs()[i] * s.q_signs()[i]);
            assert_eq!(lhs, -ti.conj());
        }
    }

    #[test]
    fn dimension_is_checked() {
        let s = spec();
        assert!(matches!(s.apply_sigma(&LaurentLoop::identity(3)), Err(LoopError::DimensionMismatch { .. })));
    }
}
