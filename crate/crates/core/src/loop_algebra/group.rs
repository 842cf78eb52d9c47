use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::LaurentLoop;
use crate::linalg::{c, frob, real_diag, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    /// `g^T g = I`: frames for the round sphere.
    Orthogonal,
    /// `g^T J g = J` with `J = diag(I_n, -1, I_k)`: frames for hyperbolic space.
    Lorentz,
}

/// The matrix group `{g : g^T J g = J}` of size `n + k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub kind: GroupKind,
    #[serde(rename = "n")]
    pub n_tan: usize,
    #[serde(rename = "k")]
    pub k_nor: usize,
}

impl Default for GroupSpec {
    fn default() -> Self {
        Self::sphere(2, 1)
    }
}

impl GroupSpec {
    pub fn sphere(n: usize, k: usize) -> Self {
        Self { kind: GroupKind::Orthogonal, n_tan: n, k_nor: k }
    }

    pub fn hyperbolic(n: usize, k: usize) -> Self {
        Self { kind: GroupKind::Lorentz, n_tan: n, k_nor: k }
    }

    pub fn dim(&self) -> usize {
        self.n_tan + self.k_nor + 1
    }

    /// The same block sizes with the other form.
    pub fn opposite(&self) -> Self {
        let kind = match self.kind {
            GroupKind::Orthogonal => GroupKind::Lorentz,
            GroupKind::Lorentz => GroupKind::Orthogonal,
        };
        Self { kind, ..*self }
    }

    /// Diagonal signs of `J`.
    pub fn form_signs(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| if self.kind == GroupKind::Lorentz && i == self.n_tan { -1.0 } else { 1.0 })
            .collect()
    }

    pub fn form_matrix(&self) -> CMat {
        real_diag(&self.form_signs())
    }

    /// `J g^T J`, the inverse of a group element.
    pub fn group_inverse(&self, g: &CMat) -> CMat {
        let s = self.form_signs();
        CMat::from_fn(g.nrows(), g.ncols(), |i, j| g[(j, i)] * (s[i] * s[j]))
    }

    /// Coefficientwise `J g^T J`; equals `g^{-1}` for loops in the group.
    pub fn loop_inverse(&self, g: &LaurentLoop) -> LaurentLoop {
        g.map_coeffs(|_, m| self.group_inverse(m))
    }

    /// Eight points on the unit circle and four on the imaginary axis.
    pub fn default_samples() -> Vec<C64> {
        let mut v: Vec<C64> = (0..8).map(|k| C64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.25) / 8.0)).collect();
        v.extend([c(0.0, 0.5), c(0.0, 2.0), c(0.0, -0.7), c(0.0, 1.3)]);
        v
    }
}

/// `max_λ ‖g(λ)^T J g(λ) − J‖` over the sample points.
pub fn group_residual(g: &LaurentLoop, spec: &GroupSpec, samples: &[C64]) -> f64 {
    let j = spec.form_matrix();
    samples
        .iter()
        .filter_map(|&l| g.eval(l).ok())
        .map(|m| frob(&(m.transpose() * &j * &m - &j)))
        .fold(0.0, f64::max)
}

impl LaurentLoop {
    pub fn group_residual(&self, spec: &GroupSpec, samples: &[C64]) -> f64 {
        group_residual(self, spec, samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;

    #[test]
    fn identity_is_in_every_group() {
        let g = LaurentLoop::identity(4);
        for spec in [GroupSpec::sphere(2, 1), GroupSpec::hyperbolic(2, 1)] {
            assert_eq!(group_residual(&g, &spec, &GroupSpec::default_samples()), 0.0);
        }
    }

    #[test]
    fn scaling_breaks_the_form() {
        let g = LaurentLoop::constant(identity(4) * c(2.0, 0.0));
        let r = group_residual(&g, &GroupSpec::sphere(2, 1), &GroupSpec::default_samples());
        // (2I)^T (2I) - I = 3I, Frobenius norm 3 * sqrt(4)
        assert!((r - 6.0).abs() < 1e-12);
    }

    #[test]
    fn lorentz_form_has_one_negative_entry() {
        let s = GroupSpec::hyperbolic(2, 1);
        assert_eq!(s.form_signs(), vec![1.0, 1.0, -1.0, 1.0]);
        assert_eq!(s.opposite(), GroupSpec::sphere(2, 1));
    }

    #[test]
    fn group_inverse_of_boost() {
        let (ch, sh) = (0.4f64.cosh(), 0.4f64.sinh());
        let mut b = identity(4);
        b[(2, 2)] = c(ch, 0.0);
        b[(3, 3)] = c(ch, 0.0);
        b[(2, 3)] = c(sh, 0.0);
        b[(3, 2)] = c(sh, 0.0);
        let spec = GroupSpec::hyperbolic(2, 1);
        let inv = spec.group_inverse(&b);
        assert!(frob(&(inv * &b - identity(4))) < 1e-14);
    }
}
