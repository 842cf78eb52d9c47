//! Closed-form ground truth: the deforming family of round 2-spheres in S³, its flat
//! partner in H³, and flat tori with parallel frames.

use super::connection::{BlockForm, ConnectionKind, ExtendedConnectionSpec};
use crate::connection_maps::{FrameField, Grid};
use crate::error::{LoopError, Result};
use crate::linalg::{c, CMat, C64};
use crate::loop_algebra::{loop_exp, GroupKind, GroupSpec, LaurentLoop};
use crate::symmetries::Reality;

/// Scalar Laurent polynomial on degrees `-2..=2`.
type Scalar = [C64; 5];

const A: Scalar = [C64::new(0.0, 0.0), C64::new(0.5, 0.0), C64::new(0.0, 0.0), C64::new(0.5, 0.0), C64::new(0.0, 0.0)];
const B: Scalar = [C64::new(0.0, 0.0), C64::new(0.0, -0.5), C64::new(0.0, 0.0), C64::new(0.0, 0.5), C64::new(0.0, 0.0)];

fn konst(x: f64) -> Scalar {
    let mut s = [C64::new(0.0, 0.0); 5];
    s[2] = c(x, 0.0);
    s
}

fn scaled(s: &Scalar, x: f64) -> Scalar {
    s.map(|z| z * x)
}

fn plus(p: &Scalar, q: &Scalar) -> Scalar {
    std::array::from_fn(|i| p[i] + q[i])
}

/// Product of two degree-one polynomials, which stays on `-2..=2`.
fn times(p: &Scalar, q: &Scalar) -> Scalar {
    let mut r = [C64::new(0.0, 0.0); 5];
    for i in 0..5 {
        for j in 0..5 {
            if p[i] != C64::new(0.0, 0.0) && q[j] != C64::new(0.0, 0.0) {
                r[i + j - 2] += p[i] * q[j];
            }
        }
    }
    r
}

fn entries(u: f64, v: f64) -> [[Scalar; 4]; 4] {
    let (su, cu, sv, cv) = (u.sin(), u.cos(), v.sin(), v.cos());
    let aa = times(&A, &A);
    let bb = times(&B, &B);
    let ab = times(&A, &B);
    [
        [konst(cu), konst(-su * sv), scaled(&A, su * cv), scaled(&B, su * cv)],
        [konst(0.0), konst(cv), scaled(&A, sv), scaled(&B, sv)],
        [scaled(&A, -su), scaled(&A, -cu * sv), plus(&scaled(&aa, cu * cv), &bb), scaled(&ab, cu * cv - 1.0)],
        [scaled(&B, -su), scaled(&B, -cu * sv), scaled(&ab, cu * cv - 1.0), plus(&scaled(&bb, cu * cv), &aa)],
    ]
}

/// The 4×4 frame of the sphere family at `(u, v)` evaluated at `λ`, with
/// `a = (λ+λ⁻¹)/2` and `b = i(λ−λ⁻¹)/2`.
pub fn example_sphere_family(u: f64, v: f64, lambda: C64) -> Result<CMat> {
    if lambda.norm() == 0.0 {
        return Err(LoopError::ZeroLambda);
    }
    let a = (lambda + lambda.inv()) * 0.5;
    let b = (lambda - lambda.inv()) * C64::new(0.0, 0.5);
    let (su, cu, sv, cv) = (u.sin(), u.cos(), v.sin(), v.cos());
    let z = c(0.0, 0.0);
    let r = |x: f64| c(x, 0.0);
    Ok(CMat::from_row_slice(
        4,
        4,
        &[
            r(cu),
            r(-su * sv),
            a * su * cv,
            b * su * cv,
            z,
            r(cv),
            a * sv,
            b * sv,
            -a * su,
            -a * cu * sv,
            a * a * cu * cv + b * b,
            a * b * (cu * cv - 1.0),
            -b * su,
            -b * cu * sv,
            a * b * (cu * cv - 1.0),
            b * b * cu * cv + a * a,
        ],
    ))
}

/// The same frame as an exact Laurent loop on degrees `-2..=2`.
pub fn example_sphere_loop(u: f64, v: f64) -> LaurentLoop {
    let e = entries(u, v);
    let terms = (0..5).map(|d| (d as i32 - 2, CMat::from_fn(4, 4, |i, j| e[i][j][d])));
    LaurentLoop::from_terms(4, terms).expect("4x4 coefficients")
}

/// The sphere family sampled on a grid, in the orthogonal group.
pub fn example_sphere_frame(grid: &Grid) -> FrameField {
    FrameField::tabulate(grid, Some(GroupSpec::sphere(2, 1)), example_sphere_loop)
}

/// Blocks of the sphere family: `ω₁₂ = -sin v du`, `θ = ½[cos v du, dv]ᵀ`,
/// `β = (i/2)[cos v du, dv]ᵀ`, `η = 0`.
pub fn example_sphere_connection(grid: &Grid) -> ExtendedConnectionSpec {
    let data = (0..grid.len())
        .map(|idx| {
            let (_, v) = grid.point(idx);
            let mut b = BlockForm::zero(2, 1);
            b.omega[0] = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-v.sin(), 0.0), c(v.sin(), 0.0), c(0.0, 0.0)]);
            b.theta[0] = CMat::from_row_slice(2, 1, &[c(0.5 * v.cos(), 0.0), c(0.0, 0.0)]);
            b.theta[1] = CMat::from_row_slice(2, 1, &[c(0.0, 0.0), c(0.5, 0.0)]);
            b.beta[0] = CMat::from_row_slice(2, 1, &[c(0.0, 0.5 * v.cos()), c(0.0, 0.0)]);
            b.beta[1] = CMat::from_row_slice(2, 1, &[c(0.0, 0.0), c(0.0, 0.5)]);
            b
        })
        .collect();
    ExtendedConnectionSpec {
        kind: ConnectionKind::TypeBm1,
        n: 2,
        k: 1,
        grid: grid.clone(),
        target: GroupSpec::sphere(2, 1),
        data,
    }
}

/// The flat partner surface in H³,
/// `[ixλ, iyλ, (2 − (x²+y²)λ²)/2, (x²+y²)λ²/2]`, for `λ ∈ iℝ*`.
pub fn example_flat_target(x: f64, y: f64, lambda: C64) -> Result<[f64; 4]> {
    if lambda.norm() == 0.0 {
        return Err(LoopError::ZeroLambda);
    }
    if lambda.re.abs() > 1e-12 * lambda.norm() {
        return Err(LoopError::NonRealFrame { residual: lambda.re.abs() });
    }
    let t = lambda.im;
    let q = 0.5 * (x * x + y * y) * t * t;
    Ok([-x * t, -y * t, 1.0 + q, -q])
}

/// Parameters of a flat torus-type frame `exp(λ(u X₁ + v X₂))` with commuting
/// `X_i = [[0, B_i], [-S B_iᵀ, 0]]`, `B_i = R D_i W`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusParams {
    /// Rotation angle of `R` in the first two tangent directions.
    pub rotation: f64,
    /// Angle (sphere) or rapidity (hyperbolic) of `W` in the first two normal directions.
    pub normal: f64,
    /// Diagonals of `D₁` and `D₂`, of length `min(n, k+1)`.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl TorusParams {
    /// The two generators `(X₁, X₂)` for the given target and reality `R1` or `R2`.
    pub fn generators(&self, target: &GroupSpec, reality: Reality) -> Result<(CMat, CMat)> {
        let (n, k) = (target.n_tan, target.k_nor);
        let m = n.min(k + 1);
        if self.p.len() != m || self.q.len() != m {
            return Err(LoopError::Invalid(format!("torus diagonals must have length {m}")));
        }
        let scale = match reality {
            Reality::R1 => c(0.0, 1.0),
            Reality::R2 => c(1.0, 0.0),
            other => return Err(LoopError::Invalid(format!("flat frames carry R1 or R2, not {other:?}"))),
        };
        let mut r = CMat::identity(n, n);
        if n >= 2 {
            let (s, co) = self.rotation.sin_cos();
            r[(0, 0)] = c(co, 0.0);
            r[(0, 1)] = c(-s, 0.0);
            r[(1, 0)] = c(s, 0.0);
            r[(1, 1)] = c(co, 0.0);
        }
        let mut w = CMat::identity(k + 1, k + 1);
        let (a, b) = match target.kind {
            GroupKind::Orthogonal => (self.normal.cos(), self.normal.sin()),
            GroupKind::Lorentz => (self.normal.cosh(), self.normal.sinh()),
        };
        let off = if target.kind == GroupKind::Orthogonal { -b } else { b };
        w[(0, 0)] = c(a, 0.0);
        w[(0, 1)] = c(off, 0.0);
        w[(1, 0)] = c(b, 0.0);
        w[(1, 1)] = c(a, 0.0);
        let signs = target.form_signs();
        let gen = |d: &[f64]| {
            let dm = CMat::from_fn(n, k + 1, |i, j| if i == j { c(d[i], 0.0) } else { c(0.0, 0.0) });
            let bm = &r * dm * &w * scale;
            let dim = n + k + 1;
            let mut x = CMat::zeros(dim, dim);
            for i in 0..n {
                for j in 0..=k {
                    x[(i, n + j)] = bm[(i, j)];
                    x[(n + j, i)] = -bm[(i, j)] * signs[n + j];
                }
            }
            x
        };
        Ok((gen(&self.p), gen(&self.q)))
    }
}

/// The based flat frame `exp(λ(u X₁ + v X₂))`, with `(u, v)` measured from the base node.
pub fn torus_flat_frame(grid: &Grid, target: &GroupSpec, reality: Reality, params: &TorusParams) -> Result<FrameField> {
    if target.k_nor + 1 < 2 {
        return Err(LoopError::Invalid("torus frames need k >= 1".into()));
    }
    let (x1, x2) = params.generators(target, reality)?;
    let (u0, v0) = grid.point(grid.base_idx());
    Ok(FrameField::tabulate(grid, Some(*target), |u, v| {
        let m = &x1 * c(u - u0, 0.0) + &x2 * c(v - v0, 0.0);
        loop_exp(&LaurentLoop::monomial(m, 1), 40, 1e-18)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection_maps::{maurer_cartan, DiffScheme, Direction};
    use crate::linalg::frob;
    use crate::spaceforms::connection::assemble_component;
    use crate::symmetries::{Involution, SymmetrySpec};

    #[test]
    fn based_at_the_origin() {
        let m = example_sphere_family(0.0, 0.0, C64::from_polar(0.8, 1.1)).unwrap();
        assert!(frob(&(m - CMat::identity(4, 4))) < 1e-15);
    }

    #[test]
    fn totally_geodesic_at_lambda_one() {
        let (u, v) = (0.4, -0.7);
        let m = example_sphere_family(u, v, c(1.0, 0.0)).unwrap();
        let want = [u.sin() * v.cos(), v.sin(), u.cos() * v.cos(), 0.0];
        for i in 0..4 {
            assert!((m[(i, 2)] - c(want[i], 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn loop_matches_closed_form_and_symmetries() {
        let s = SymmetrySpec::new(2, 1, Reality::Rm1);
        let sphere = GroupSpec::sphere(2, 1);
        for &(u, v) in &[(0.3, 0.2), (-1.1, 0.9)] {
            let g = example_sphere_loop(u, v);
            for l in [c(1.0, 0.0), C64::from_polar(0.6, 2.0), c(0.0, 2.0)] {
                assert!(frob(&(g.eval(l).unwrap() - example_sphere_family(u, v, l).unwrap())) < 1e-14);
            }
            let r = s.fixed_residual(&g, &[Involution::Sigma, Involution::Tau, Involution::Real(Reality::Rm1)]).unwrap();
            assert!(r < 1e-15);
            assert!(g.group_residual(&sphere, &GroupSpec::default_samples()) < 1e-14);
        }
    }

    #[test]
    fn assembled_blocks_match_printed_form() {
        // Entries written out from the displayed Maurer-Cartan form.
        let grid = Grid::centered(3, 0.1);
        let spec = example_sphere_connection(&grid);
        let v: f64 = 0.1;
        let a = |l: C64| (l + l.inv()) * 0.5;
        let b = |l: C64| (l - l.inv()) * C64::new(0.0, 0.5);
        let l = C64::from_polar(1.2, 0.5);
        let z = c(0.0, 0.0);
        let cv = c(v.cos(), 0.0);
        let sv = c(v.sin(), 0.0);
        let du = CMat::from_row_slice(
            4,
            4,
            &[z, -sv, a(l) * cv, b(l) * cv, sv, z, z, z, -a(l) * cv, z, z, z, -b(l) * cv, z, z, z],
        );
        let one = c(1.0, 0.0);
        let dv = CMat::from_row_slice(4, 4, &[z, z, z, z, z, z, a(l) * one, b(l) * one, z, -a(l), z, z, z, -b(l), z, z]);
        let idx = grid.idx(1, 2);
        let au = assemble_component(spec.kind, &spec.target, &spec.data[idx], Direction::U).eval(l).unwrap();
        let av = assemble_component(spec.kind, &spec.target, &spec.data[idx], Direction::V).eval(l).unwrap();
        assert!(frob(&(au - du)) < 1e-15);
        assert!(frob(&(av - dv)) < 1e-15);
    }

    #[test]
    fn flat_target_on_hyperboloid() {
        assert_eq!(example_flat_target(0.0, 0.0, c(0.0, 2.0)).unwrap(), [0.0, 0.0, 1.0, 0.0]);
        for &(x, y, t) in &[(0.3, -0.8, 2.0), (1.7, 0.2, -0.4)] {
            let f = example_flat_target(x, y, c(0.0, t)).unwrap();
            let lorentz = f[0] * f[0] + f[1] * f[1] - f[2] * f[2] + f[3] * f[3];
            assert!((lorentz + 1.0).abs() < 1e-12);
        }
        assert!(matches!(example_flat_target(1.0, 1.0, c(0.5, 1.0)), Err(LoopError::NonRealFrame { .. })));
    }

    #[test]
    fn torus_frames_are_flat_and_parallel() {
        let grid = Grid::centered(7, 0.05);
        let params = TorusParams { rotation: 0.4, normal: 0.3, p: vec![0.9, -0.4], q: vec![0.2, 0.7] };
        for target in [GroupSpec::sphere(2, 1), GroupSpec::hyperbolic(2, 1)] {
            for reality in [Reality::R1, Reality::R2] {
                let (x1, x2) = params.generators(&target, reality).unwrap();
                assert!(frob(&(&x1 * &x2 - &x2 * &x1)) < 1e-14);
                let f = torus_flat_frame(&grid, &target, reality, &params).unwrap();
                let s = SymmetrySpec::new(2, 1, reality);
                let g = f.values[0].as_ref().unwrap();
                // Series rounding at |λ| = 2 sits near 1e-11.
                assert!(g.group_residual(&target, &GroupSpec::default_samples()) < 1e-10);
                assert!(s.fixed_residual(g, &[Involution::Sigma, Involution::Real(reality)]).unwrap() < 1e-14);
                let a = maurer_cartan(&f, DiffScheme::Central4).unwrap();
                let got = a.au[grid.base_idx()].as_ref().unwrap();
                assert!(got.distance(&LaurentLoop::monomial(x1.clone(), 1)) < 1e-6);
            }
        }
    }
}
