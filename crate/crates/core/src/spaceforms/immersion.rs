//! Immersions read off frames at a fixed λ, with finite-difference diagnostics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::connection_maps::{
    maurer_cartan, mc_defects, stencil, ConnectionForm, DiffScheme, Direction, FrameField, Grid,
};
use crate::error::{LoopError, Result};
use crate::linalg::{frob, max_abs_imag, CMat, C64};
use crate::loop_algebra::{GroupKind, GroupSpec, LaurentLoop};

/// Frames whose evaluation has a larger imaginary part are off the reality locus.
pub const TOL_REAL: f64 = 1e-8;

/// Coframes with `σ_min / σ_max` below this are reported as not immersive.
pub const TOL_IMMERSIVE: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeDiagnostics {
    /// `EG − F²` of the first fundamental form.
    pub metric_det: Option<f64>,
    /// Brioschi curvature of the finite-difference metric.
    pub gauss_curvature: Option<f64>,
    /// `‖dη + η∧η‖` of the normal connection.
    pub normal_flatness: Option<f64>,
    /// Whether the coframe has full rank.
    pub immersive: bool,
    /// `|⟨f, f⟩ − ε|` with `ε = 1` on the sphere and `-1` on the hyperboloid.
    pub quadric: Option<f64>,
    pub imag_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImmersionGrid {
    pub grid: Grid,
    pub lambda: C64,
    pub target: GroupSpec,
    /// Ambient coordinates, `None` at masked nodes.
    pub points: Vec<Option<Vec<f64>>>,
    pub diagnostics: Vec<NodeDiagnostics>,
}

impl ImmersionGrid {
    pub fn masked_count(&self) -> usize {
        self.points.iter().filter(|p| p.is_none()).count()
    }

    /// Largest quadric defect over unmasked nodes.
    pub fn max_quadric(&self) -> f64 {
        self.diagnostics.iter().filter_map(|d| d.quadric).fold(0.0, f64::max)
    }
}

/// Derivative of a scalar field along `dir`; `None` where the stencil meets a gap.
pub(crate) fn diff(grid: &Grid, idx: usize, dir: Direction, scheme: DiffScheme, get: impl Fn(usize) -> Option<f64>) -> Option<f64> {
    let (i, j) = grid.coords(idx);
    let pos = if dir == Direction::U { i } else { j };
    let st = stencil(scheme, pos, grid.count(dir))?;
    let mut acc = 0.0;
    for (off, w) in st {
        acc += w * get(grid.step(idx, dir, off)?)?;
    }
    Some(acc / grid.spacing(dir))
}

/// Gauss curvature from the first fundamental form and its derivatives.
pub fn brioschi(e: [f64; 6], f: [f64; 6], g: [f64; 6]) -> f64 {
    // Each array holds (value, ∂u, ∂v, ∂uu, ∂uv, ∂vv).
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let m1 = [
        [-0.5 * e[5] + f[4] - 0.5 * g[3], 0.5 * e[1], f[1] - 0.5 * e[2]],
        [f[2] - 0.5 * g[1], e[0], f[0]],
        [0.5 * g[2], f[0], g[0]],
    ];
    let m2 = [[0.0, 0.5 * e[2], 0.5 * g[1]], [0.5 * e[2], e[0], f[0]], [0.5 * g[1], f[0], g[0]]];
    let w = e[0] * g[0] - f[0] * f[0];
    (det3(m1) - det3(m2)) / (w * w)
}

/// Gauss curvature of the metric `(E, F, G)` sampled on a grid.
fn gauss_field(grid: &Grid, metric: &[Option<[f64; 3]>], scheme: DiffScheme) -> Vec<Option<f64>> {
    let comp = |c: usize| -> Vec<Option<f64>> { metric.iter().map(|m| m.map(|m| m[c])).collect() };
    let fields = [comp(0), comp(1), comp(2)];
    let d1: Vec<[Vec<Option<f64>>; 2]> = fields
        .iter()
        .map(|fld| {
            let along = |dir| (0..grid.len()).map(|idx| diff(grid, idx, dir, scheme, |n| fld[n])).collect();
            [along(Direction::U), along(Direction::V)]
        })
        .collect();
    (0..grid.len())
        .map(|idx| {
            let jet = |c: usize| -> Option<[f64; 6]> {
                let du = &d1[c][0];
                let dv = &d1[c][1];
                Some([
                    fields[c][idx]?,
                    du[idx]?,
                    dv[idx]?,
                    diff(grid, idx, Direction::U, scheme, |n| du[n])?,
                    diff(grid, idx, Direction::U, scheme, |n| dv[n])?,
                    diff(grid, idx, Direction::V, scheme, |n| dv[n])?,
                ])
            };
            Some(brioschi(jet(0)?, jet(1)?, jet(2)?))
        })
        .collect()
}

/// Evaluates the frame at `lambda` and returns the matrices with the Maurer–Cartan form
/// of the evaluated field.
fn frame_form_at(f: &FrameField, lambda: C64, target: &GroupSpec) -> Result<(Vec<Option<CMat>>, ConnectionForm)> {
    if f.dim().is_some_and(|d| d != target.dim()) {
        return Err(LoopError::DimensionMismatch { expected: target.dim(), found: f.dim().unwrap_or(0) });
    }
    let evals = f.eval(lambda)?;
    let consts = FrameField {
        grid: f.grid.clone(),
        group: Some(*target),
        values: evals.iter().map(|m| m.clone().map(LaurentLoop::constant)).collect(),
    };
    let form = maurer_cartan(&consts, DiffScheme::Central4)?;
    Ok((evals, form))
}

fn at(form: &ConnectionForm, idx: usize) -> Option<(CMat, CMat)> {
    Some((form.au[idx].as_ref()?.coeff_or_zero(0), form.av[idx].as_ref()?.coeff_or_zero(0)))
}

/// Sub-block `[r0.., c0..]` of size `(r, c)` of a constant form, as its own form.
fn sub_form(form: &ConnectionForm, start: usize, size: usize) -> ConnectionForm {
    let pick = |v: &Vec<Option<LaurentLoop>>| -> Vec<Option<LaurentLoop>> {
        v.iter()
            .map(|g| g.as_ref().map(|g| LaurentLoop::constant(g.coeff_or_zero(0).view((start, start), (size, size)).into_owned())))
            .collect()
    };
    ConnectionForm { grid: form.grid.clone(), au: pick(&form.au), av: pick(&form.av), declared: None }
}

/// `‖dη + η∧η‖` per node for the normal block.
fn normal_flatness(form: &ConnectionForm, target: &GroupSpec) -> Vec<Option<f64>> {
    let n = target.n_tan;
    let eta = sub_form(form, n, target.k_nor + 1);
    mc_defects(&eta, DiffScheme::Central4).into_iter().map(|d| d.map(|d| frob(&d.coeff_or_zero(0)))).collect()
}

/// The immersion `f = F e_{n+1}` at `lambda` with per-node diagnostics.
pub fn extract_immersion(f: &FrameField, lambda: C64, target: &GroupSpec) -> Result<ImmersionGrid> {
    let (evals, form) = frame_form_at(f, lambda, target)?;
    let imag: Vec<Option<f64>> = evals.iter().map(|m| m.as_ref().map(max_abs_imag)).collect();
    let worst = imag.iter().flatten().cloned().fold(0.0, f64::max);
    if worst > TOL_REAL {
        return Err(LoopError::NonRealFrame { residual: worst });
    }
    let n = target.n_tan;
    let signs = target.form_signs();
    let eps = signs[n];
    let grid = &f.grid;
    let points: Vec<Option<Vec<f64>>> =
        evals.iter().map(|m| m.as_ref().map(|m| (0..target.dim()).map(|i| m[(i, n)].re).collect())).collect();
    let inner = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(&signs).map(|((x, y), s)| x * y * s).sum::<f64>();

    let scheme = DiffScheme::Central4;
    let tangents: Vec<Option<[Vec<f64>; 2]>> = (0..grid.len())
        .map(|idx| {
            let along = |dir| -> Option<Vec<f64>> {
                (0..target.dim())
                    .map(|c| diff(grid, idx, dir, scheme, |node| points[node].as_ref().map(|p| p[c])))
                    .collect()
            };
            Some([along(Direction::U)?, along(Direction::V)?])
        })
        .collect();
    let metric: Vec<Option<[f64; 3]>> = tangents
        .iter()
        .map(|t| t.as_ref().map(|[fu, fv]| [inner(fu, fu), inner(fu, fv), inner(fv, fv)]))
        .collect();
    let gauss = gauss_field(grid, &metric, scheme);
    let flat = normal_flatness(&form, target);

    let diagnostics = (0..grid.len())
        .map(|idx| {
            let immersive = at(&form, idx).is_some_and(|(au, av)| {
                let cof = DMatrix::from_fn(n, 2, |i, j| if j == 0 { au[(i, n)].re } else { av[(i, n)].re });
                let sv = cof.singular_values();
                let hi = sv.max();
                hi > 0.0 && sv.min() > TOL_IMMERSIVE * hi
            });
            NodeDiagnostics {
                metric_det: metric[idx].map(|[e, ff, g]| e * g - ff * ff),
                gauss_curvature: gauss[idx],
                normal_flatness: flat[idx],
                immersive,
                quadric: points[idx].as_ref().map(|p| (inner(p, p) - eps).abs()),
                imag_residual: imag[idx],
            }
        })
        .collect();
    Ok(ImmersionGrid { grid: grid.clone(), lambda, target: *target, points, diagnostics })
}

/// Residuals of the adapted-frame structure at one node.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdaptedReport {
    /// Largest entry in the first row or column of η, which must vanish.
    pub adaptedness: Option<f64>,
    /// `‖dω + ω∧ω − c θ̂∧θ̂ᵀ‖`, present when a curvature is supplied.
    pub curvature: Option<f64>,
    /// `‖dη + η∧η‖`.
    pub normal_flatness: Option<f64>,
}

/// Per-node adaptedness, Gauss-equation and normal-flatness residuals of the frame at
/// `lambda`.
pub fn validate_adapted(f: &FrameField, lambda: C64, target: &GroupSpec, c: Option<f64>) -> Result<Vec<AdaptedReport>> {
    let (_, form) = frame_form_at(f, lambda, target)?;
    let n = target.n_tan;
    let dim = target.dim();
    let omega = mc_defects(&sub_form(&form, 0, n), DiffScheme::Central4);
    let flat = normal_flatness(&form, target);
    Ok((0..f.grid.len())
        .map(|idx| {
            let Some((au, av)) = at(&form, idx) else { return AdaptedReport::default() };
            let adaptedness = (n + 1..dim)
                .flat_map(|j| [au[(n, j)], au[(j, n)], av[(n, j)], av[(j, n)]])
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            let curvature = c.and_then(|c| {
                let big = omega[idx].as_ref()?.coeff_or_zero(0);
                let tu = au.view((0, n), (n, 1)).into_owned();
                let tv = av.view((0, n), (n, 1)).into_owned();
                let wedge = &tu * tv.transpose() - &tv * tu.transpose();
                Some(frob(&(big - wedge * C64::new(c, 0.0))))
            });
            AdaptedReport { adaptedness: Some(adaptedness), curvature, normal_flatness: flat[idx] }
        })
        .collect())
}

/// Whether `target` is the hyperbolic one.
pub fn is_hyperbolic(target: &GroupSpec) -> bool {
    target.kind == GroupKind::Lorentz
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection_maps::Grid;
    use crate::linalg::c;
    use crate::loop_algebra::loop_exp;
    use crate::spaceforms::connection::curvature_c;
    use crate::spaceforms::examples::example_sphere_frame;
    use std::f64::consts::PI;

    fn grid(n: usize, h: f64) -> Grid {
        let m = (n - 1) as f64 / 2.0;
        Grid::new(n, n, -m * h, -m * h, h, h, [n / 2, n / 2]).unwrap()
    }

    #[test]
    fn brioschi_on_round_sphere() {
        // E = 1, F = 0, G = cos²u has K = 1.
        let u: f64 = 0.3;
        let e = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let f = [0.0; 6];
        let g = [u.cos().powi(2), -2.0 * u.sin() * u.cos(), 0.0, -2.0 * (2.0 * u).cos(), 0.0, 0.0];
        assert!((brioschi(e, f, g) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn totally_geodesic_sphere() {
        let g = grid(11, 0.02);
        let im = extract_immersion(&example_sphere_frame(&g), c(1.0, 0.0), &GroupSpec::sphere(2, 1)).unwrap();
        assert!(im.max_quadric() < 1e-12);
        let base = im.points[g.base_idx()].as_ref().unwrap();
        assert!((base[2] - 1.0).abs() < 1e-15);
        for idx in 0..g.len() {
            let (u, v) = g.point(idx);
            let p = im.points[idx].as_ref().unwrap();
            assert!((p[0] - u.sin() * v.cos()).abs() < 1e-14 && (p[1] - v.sin()).abs() < 1e-14);
            assert!(im.diagnostics[idx].immersive);
            if g.is_interior(idx, 4) {
                assert!((im.diagnostics[idx].gauss_curvature.unwrap() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn curvature_of_the_family_on_the_circle() {
        let g = grid(21, 0.01);
        let target = GroupSpec::sphere(2, 1);
        let l = C64::from_polar(1.0, PI / 6.0);
        let im = extract_immersion(&example_sphere_frame(&g), l, &target).unwrap();
        let want = curvature_c(l, &target).unwrap().re;
        for idx in (0..g.len()).filter(|&i| g.is_interior(i, 4)) {
            assert!((im.diagnostics[idx].gauss_curvature.unwrap() - want).abs() < 1e-3);
            assert!(im.diagnostics[idx].normal_flatness.unwrap() < 1e-6);
        }
    }

    #[test]
    fn off_locus_is_rejected() {
        let g = grid(5, 0.1);
        let err = extract_immersion(&example_sphere_frame(&g), c(0.5, 0.0), &GroupSpec::sphere(2, 1)).unwrap_err();
        assert!(matches!(err, LoopError::NonRealFrame { .. }));
    }

    #[test]
    fn adaptedness_is_gauge_invariant_and_detects_faults() {
        // The gauge adds derivative content, so the grid is fine enough for O(h^4) < 1e-6.
        let g = grid(11, 0.02);
        let target = GroupSpec::sphere(2, 1);
        let l = C64::from_polar(1.0, 0.5);
        let f = example_sphere_frame(&g);
        let c0 = curvature_c(l, &target).unwrap().re;
        let base = validate_adapted(&f, l, &target, Some(c0)).unwrap();
        let worst = |r: &[AdaptedReport], pick: fn(&AdaptedReport) -> Option<f64>| {
            r.iter().enumerate().filter(|(i, _)| g.is_interior(*i, 2)).filter_map(|(_, x)| pick(x)).fold(0.0, f64::max)
        };
        assert!(worst(&base, |r| r.adaptedness) < 1e-12);
        assert!(worst(&base, |r| r.curvature) < 1e-6);

        // Right multiplication by a rotation of the tangent plane.
        let rot = |t: f64| {
            let mut m = CMat::identity(4, 4);
            m[(0, 0)] = c(t.cos(), 0.0);
            m[(0, 1)] = c(-t.sin(), 0.0);
            m[(1, 0)] = c(t.sin(), 0.0);
            m[(1, 1)] = c(t.cos(), 0.0);
            m
        };
        let gauged = FrameField::tabulate(&g, f.group, |u, v| {
            crate::spaceforms::examples::example_sphere_loop(u, v).right_mul_const(&rot(0.7 * u - v * v))
        });
        let r = validate_adapted(&gauged, l, &target, Some(c0)).unwrap();
        assert!(worst(&r, |r| r.adaptedness) < 1e-12);
        assert!(worst(&r, |r| r.curvature) < 1e-6);
        let im0 = extract_immersion(&f, l, &target).unwrap();
        let im1 = extract_immersion(&gauged, l, &target).unwrap();
        assert_eq!(im0.points, im1.points);

        // A rotation mixing the immersion column with the normal shows up at its rate.
        let eps = 1e-3;
        let mut gen = CMat::zeros(4, 4);
        gen[(2, 3)] = c(-1.0, 0.0);
        gen[(3, 2)] = c(1.0, 0.0);
        let faulty = FrameField::tabulate(&g, f.group, |u, v| {
            let t = loop_exp(&LaurentLoop::constant(&gen * c(eps * u, 0.0)), 0, 1e-18);
            crate::spaceforms::examples::example_sphere_loop(u, v).mul(&t).unwrap()
        });
        let r = validate_adapted(&faulty, l, &target, None).unwrap();
        let a = worst(&r, |r| r.adaptedness);
        assert!((a - eps).abs() < 0.05 * eps, "{a}");
    }
}
