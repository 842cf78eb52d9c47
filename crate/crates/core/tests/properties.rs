//! Algebraic invariants checked on random loops. Every oracle here is independent of the
//! solver under test: pointwise evaluation, explicit products, or the construction itself.

use loopsplit_core::factorization::{birkhoff_left_auto, birkhoff_right_auto, tau_iwasawa, IwasawaOptions};
use loopsplit_core::linalg::{c, frob, identity};
use loopsplit_core::loop_algebra::truncated_inverse;
use loopsplit_core::symmetries::{PhiDirection, Reality, SymmetrySpec};
use loopsplit_core::{CMat, GroupSpec, LaurentLoop, C64};
use proptest::prelude::*;

const N: usize = 4;

fn matrix(entries: &[f64], norm: f64) -> CMat {
    let m = CMat::from_fn(N, N, |i, j| c(entries[2 * (i * N + j)], entries[2 * (i * N + j) + 1]));
    let f = frob(&m);
    if f == 0.0 {
        m
    } else {
        m * c(norm / f, 0.0)
    }
}

/// Raw entries for `count` matrices.
fn entries(count: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 2 * N * N), count)
}

/// `I + Σ_d M_d λ^d` over `degrees`, each `M_d` of Frobenius norm `norm`.
fn perturbation(raw: &[Vec<f64>], degrees: &[i32], norm: f64) -> LaurentLoop {
    let terms = degrees.iter().zip(raw).map(|(&d, e)| (d, matrix(e, norm)));
    &LaurentLoop::identity(N) + &LaurentLoop::from_terms(N, terms).unwrap()
}

fn unit_circle() -> impl Iterator<Item = C64> {
    (0..16).map(|k| C64::from_polar(1.0, 0.39 * k as f64 + 0.1))
}

fn eval_gap(a: &LaurentLoop, b: &CMat, lambda: C64) -> f64 {
    frob(&(a.eval(lambda).unwrap() - b))
}

/// Keeps entries of matching σ-parity: block-diagonal for even degrees, off-diagonal
/// blocks for odd ones.
fn sigma_fixed(raw: &[Vec<f64>], degrees: &[i32], norm: f64, p: &[f64]) -> LaurentLoop {
    let terms = degrees.iter().zip(raw).map(|(&d, e)| {
        let m = matrix(e, 1.0);
        let odd = d.rem_euclid(2) == 1;
        let kept = CMat::from_fn(N, N, |i, j| if (p[i] * p[j] < 0.0) == odd { m[(i, j)] } else { c(0.0, 0.0) });
        let f = frob(&kept);
        (d, if f > 0.0 { kept * c(norm / f, 0.0) } else { kept })
    });
    &LaurentLoop::identity(N) + &LaurentLoop::from_terms(N, terms).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn products_evaluate_pointwise(raw in entries(6)) {
        let g = perturbation(&raw[..3], &[-1, 0, 2], 0.4);
        let h = perturbation(&raw[3..], &[-2, 1, 3], 0.4);
        let gh = &g * &h;
        for l in unit_circle().chain([c(0.0, 2.0), c(0.5, 0.0)]) {
            let want = g.eval(l).unwrap() * h.eval(l).unwrap();
            prop_assert!(eval_gap(&gh, &want, l) < 1e-12 * (1.0 + frob(&want)));
        }
    }

    #[test]
    fn serde_round_trip_is_exact(raw in entries(3)) {
        let g = perturbation(&raw, &[-3, 0, 1], 0.7);
        let text = serde_json::to_string(&g).unwrap();
        let back: LaurentLoop = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn truncated_inverse_inverts_on_the_circle(raw in entries(4)) {
        let g = perturbation(&raw, &[-2, -1, 1, 2], 0.08);
        let inv = truncated_inverse(&g, 30).unwrap().inverse;
        for l in unit_circle() {
            let prod = g.eval(l).unwrap() * inv.eval(l).unwrap();
            prop_assert!(frob(&(prod - identity(N))) < 1e-10);
        }
    }

    #[test]
    fn left_birkhoff_recovers_planted_factors(raw in entries(5), scale in 0.2..1.0f64) {
        let minus = perturbation(&raw[..2], &[-1, -2], 0.12 * scale);
        let plus = perturbation(&raw[2..], &[0, 1, 3], 0.1 * scale);
        let g = &minus * &plus;
        let b = birkhoff_left_auto(&g, 1e-10).unwrap();
        prop_assert!(b.residual < 1e-9);
        prop_assert!(b.minus.distance(&minus) < 1e-8);
        prop_assert!(b.plus.distance(&plus) < 1e-8);
    }

    #[test]
    fn right_birkhoff_factors_are_one_sided_and_reconstruct(raw in entries(4)) {
        let g = perturbation(&raw, &[-2, -1, 1, 2], 0.1);
        let b = birkhoff_right_auto(&g, 1e-10).unwrap();
        prop_assert!(b.plus.lo() >= 0 && b.minus.hi() <= 0);
        prop_assert!(frob(&(b.plus.coeff_or_zero(0) - identity(N))) < 1e-10);
        for l in unit_circle() {
            let want = g.eval(l).unwrap();
            let got = b.plus.eval(l).unwrap() * b.minus.eval(l).unwrap();
            prop_assert!(frob(&(got - want)) < 1e-9);
        }
    }

    #[test]
    fn sigma_fixed_loops_have_sigma_fixed_factors(raw in entries(4)) {
        let spec = SymmetrySpec::new(2, 1, Reality::None);
        let g = sigma_fixed(&raw, &[-2, -1, 1, 2], 0.1, &spec.p_signs());
        prop_assert!(spec.apply_sigma(&g).unwrap().distance(&g) < 1e-14);
        let b = birkhoff_left_auto(&g, 1e-10).unwrap();
        prop_assert!(spec.apply_sigma(&b.minus).unwrap().distance(&b.minus) < 1e-8);
        prop_assert!(spec.apply_sigma(&b.plus).unwrap().distance(&b.plus) < 1e-8);
    }

    #[test]
    fn phi_is_multiplicative_and_invertible(raw in entries(6)) {
        let spec = SymmetrySpec::new(2, 1, Reality::None);
        let g = perturbation(&raw[..3], &[-1, 0, 1], 0.5);
        let h = perturbation(&raw[3..], &[-2, 1, 2], 0.5);
        let there = |x: &LaurentLoop| spec.phi_map(x, PhiDirection::SphereToHyperbolic).unwrap();
        let lhs = there(&(&g * &h));
        let rhs = &there(&g) * &there(&h);
        prop_assert!(lhs.distance(&rhs) <= 1e-14 * g.wiener_norm() * h.wiener_norm());
        let back = spec.phi_map(&there(&g), PhiDirection::HyperbolicToSphere).unwrap();
        prop_assert!(back.distance(&g) < 1e-14 * g.wiener_norm());
    }

    #[test]
    fn tau_iwasawa_factor_is_tau_fixed(raw in entries(3)) {
        // σ is declared, so x must lie in the twisted loop group.
        let spec = SymmetrySpec::new(2, 1, Reality::Rm1);
        let x = sigma_fixed(&raw, &[-1, 1, 2], 0.1, &spec.p_signs());
        let opts = IwasawaOptions { tol: 1e-8, group: None, ..Default::default() };
        let r = tau_iwasawa(&x, &spec, &opts).unwrap();
        prop_assert!(r.reconstruction < 1e-8);
        prop_assert!(spec.apply_tau(&r.z).unwrap().distance(&r.z) < 1e-8);
        prop_assert!(r.y.lo() >= 0);
        for l in unit_circle() {
            let got = r.z.eval(l).unwrap() * r.y.eval(l).unwrap();
            prop_assert!(eval_gap(&x, &got, l) < 1e-8);
        }
    }
}

#[test]
fn orthogonal_group_accepts_exact_rotations() {
    let (s, co) = 0.3f64.sin_cos();
    let mut m = identity(N);
    m[(0, 0)] = c(co, 0.0);
    m[(0, 1)] = c(-s, 0.0);
    m[(1, 0)] = c(s, 0.0);
    m[(1, 1)] = c(co, 0.0);
    let g = LaurentLoop::constant(m);
    assert!(g.group_residual(&GroupSpec::sphere(2, 1), &GroupSpec::default_samples()) < 1e-15);
}
