//! Flat ↔ non-flat correspondence between constant curvature maps.
//!
//! | non-flat target | reality | curvature      | flat partner          |
//! |-----------------|---------|----------------|-----------------------|
//! | sphere          | R1      | (−∞, 0)        | sphere, R1            |
//! | sphere          | R2      | (0, 1)         | sphere, R2            |
//! | sphere          | Rm1     | (1, ∞)         | hyperbolic, R1 via φ  |
//! | hyperbolic      | R1      | (0, ∞)         | hyperbolic, R1        |
//! | hyperbolic      | R2      | (−1, 0)        | hyperbolic, R2        |
//! | hyperbolic      | Rm1     | (−∞, −1)       | sphere, R1 via φ⁻¹    |
//!
//! `Rm2` routes through φ to `R2` on the opposite target; its loops have no real locus,
//! so it carries no curvature interval.

use crate::connection_maps::{
    split, tau_merge, ConnectionOrder, FrameField, NodeReport, PipelineOptions, TauMergeOptions,
};
use crate::error::{LoopError, Result};
use crate::linalg::{frob, max_abs_imag, CMat};
use crate::loop_algebra::{GroupKind, GroupSpec};
use crate::symmetries::{PhiDirection, Reality, SymmetrySpec};

/// Open curvature interval of the maps with the given non-flat reality and target.
pub fn curvature_interval(target: &GroupSpec, reality: Reality) -> Option<(f64, f64)> {
    let inf = f64::INFINITY;
    let (lo, hi) = match reality {
        Reality::R1 => (-inf, 0.0),
        Reality::R2 => (0.0, 1.0),
        Reality::Rm1 => (1.0, inf),
        _ => return None,
    };
    Some(match target.kind {
        GroupKind::Orthogonal => (lo, hi),
        GroupKind::Lorentz => (-hi, -lo),
    })
}

/// The reality whose interval contains `c`, or `None` on a boundary (`c ∈ {0, ±1}`).
pub fn classify_curvature(c: f64, target: &GroupSpec) -> Option<Reality> {
    [Reality::R1, Reality::R2, Reality::Rm1].into_iter().find(|&r| {
        let (lo, hi) = curvature_interval(target, r).expect("listed realities have intervals");
        c > lo && c < hi
    })
}

/// Target and reality of the flat maps paired with non-flat maps of `reality`.
pub fn flat_partner(target: &GroupSpec, reality: Reality) -> Option<(GroupSpec, Reality)> {
    match reality {
        Reality::R1 | Reality::R2 => Some((*target, reality)),
        Reality::Rm1 => Some((target.opposite(), Reality::R1)),
        Reality::Rm2 => Some((target.opposite(), Reality::R2)),
        _ => None,
    }
}

fn phi_direction(from: &GroupSpec) -> PhiDirection {
    match from.kind {
        GroupKind::Orthogonal => PhiDirection::SphereToHyperbolic,
        GroupKind::Lorentz => PhiDirection::HyperbolicToSphere,
    }
}

/// φ applied at every node, moving the field to the opposite group.
pub fn phi_field(f: &FrameField, from: &GroupSpec, s: &SymmetrySpec) -> FrameField {
    let dir = phi_direction(from);
    let to = from.opposite();
    f.map_nodes(Some(to), |_, g| Ok((s.phi_map(g, dir)?, NodeReport::ok(0.0, 1.0)))).0
}

fn require_group(f: &FrameField) -> Result<GroupSpec> {
    f.group.ok_or_else(|| LoopError::Invalid("the frame must declare its target group".into()))
}

#[derive(Debug, Clone)]
pub struct CorrespondenceOutcome {
    pub frame: FrameField,
    pub target: GroupSpec,
    pub reality: Reality,
    pub reports: Vec<NodeReport>,
    pub order: Option<ConnectionOrder>,
}

/// The based flat frame `F_+` of `F = F_+ F_-`, moved through φ for second-kind
/// realities so that it is real on its own locus.
pub fn nonflat_to_flat(f: &FrameField, s: &SymmetrySpec, opts: &PipelineOptions) -> Result<CorrespondenceOutcome> {
    let target = require_group(f)?;
    let (flat_target, flat_reality) = flat_partner(&target, s.reality)
        .ok_or_else(|| LoopError::Invalid(format!("non-flat frames carry R1, R2, Rm1 or Rm2, not {:?}", s.reality)))?;
    let out = split(f, opts);
    let frame = if flat_target == target { out.f_plus } else { phi_field(&out.f_plus, &target, s) };
    let order = if flat_target == target { out.order_plus } else { opts.order_of(&frame) };
    Ok(CorrespondenceOutcome { frame, target: flat_target, reality: flat_reality, reports: out.reports, order })
}

/// The τ-fixed frame paired with a based flat frame. `s.reality` names the non-flat
/// reality; for `Rm1` and `Rm2` the flat frame lives on the opposite target.
pub fn flat_to_nonflat(f_plus: &FrameField, s: &SymmetrySpec, opts: &TauMergeOptions) -> Result<CorrespondenceOutcome> {
    let flat_target = require_group(f_plus)?;
    let (input, target, merge_reality) = match s.reality {
        Reality::R1 | Reality::R2 => (f_plus.clone(), flat_target, s.reality),
        Reality::Rm1 => (phi_field(f_plus, &flat_target, s), flat_target.opposite(), Reality::Rhat1),
        Reality::Rm2 => (phi_field(f_plus, &flat_target, s), flat_target.opposite(), Reality::Rhat2),
        other => return Err(LoopError::Invalid(format!("non-flat frames carry R1, R2, Rm1 or Rm2, not {other:?}"))),
    };
    let out = tau_merge(&input, &s.with_reality(merge_reality), opts);
    Ok(CorrespondenceOutcome { frame: out.frame, target, reality: s.reality, reports: out.reports, order: out.order })
}

/// Largest distance of `F^{-1} H` from a real, constant, σ- and τ-fixed gauge, i.e. how
/// far `H` is from `F T` with `T = diag(T₁, 1, T₂)`.
pub fn gauge_quotient_residual(f: &FrameField, h: &FrameField, s: &SymmetrySpec) -> Result<f64> {
    if f.grid != h.grid {
        return Err(LoopError::Invalid("fields live on different grids".into()));
    }
    let p = s.p();
    let q = s.q();
    let mut worst: f64 = 0.0;
    for (a, b) in f.values.iter().zip(&h.values) {
        let (Some(a), Some(b)) = (a, b) else { continue };
        let t = f.invert(a, 2 * a.radius().max(b.radius()) + 4)?.mul(b)?;
        let t0: CMat = t.coeff_or_zero(0);
        let lambda_part = t.terms().filter(|(d, _)| *d != 0).map(|(_, m)| frob(m)).fold(0.0, f64::max);
        let twist = frob(&(&t0 - &p * &t0 * &p)).max(frob(&(&t0 - &q * &t0 * &q)));
        worst = worst.max(lambda_part).max(twist).max(max_abs_imag(&t0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection_maps::{identity_field, Grid};
    use crate::linalg::C64;
    use crate::spaceforms::connection::curvature_c;

    #[test]
    fn intervals_follow_the_table() {
        let s = GroupSpec::sphere(2, 1);
        let h = GroupSpec::hyperbolic(2, 1);
        for target in [s, h] {
            for r in [Reality::R1, Reality::R2, Reality::Rm1] {
                let l = r.locus_point().unwrap();
                let c = curvature_c(l, &target).unwrap();
                assert!(c.im.abs() < 1e-14);
                assert_eq!(classify_curvature(c.re, &target), Some(r));
            }
        }
        assert_eq!(flat_partner(&s, Reality::Rm1), Some((h, Reality::R1)));
        assert_eq!(flat_partner(&h, Reality::Rm1), Some((s, Reality::R1)));
        assert_eq!(classify_curvature(1.0, &s), None);
        assert_eq!(curvature_c(C64::new(1.0, 0.0), &s).unwrap().re, 1.0);
    }

    #[test]
    fn identity_maps_to_identity() {
        let grid = Grid::centered(5, 0.1);
        let s = SymmetrySpec::new(2, 1, Reality::R2);
        let id = identity_field(&grid, 4, Some(GroupSpec::sphere(2, 1)));
        let flat = nonflat_to_flat(&id, &s, &PipelineOptions::default()).unwrap();
        assert!(flat.frame.max_distance(&id) < 1e-14);
        let back = flat_to_nonflat(&id, &s, &TauMergeOptions::default()).unwrap();
        assert!(back.frame.max_distance(&id) < 1e-12);
        assert!(gauge_quotient_residual(&id, &back.frame, &s).unwrap() < 1e-12);
    }

    #[test]
    fn sphere_family_round_trip() {
        use crate::spaceforms::examples::example_sphere_frame;
        let grid = Grid::centered(7, 0.05);
        let target = GroupSpec::sphere(2, 1);
        let s = SymmetrySpec::new(2, 1, Reality::Rm1);
        let f = example_sphere_frame(&grid);
        let flat = nonflat_to_flat(&f, &s, &PipelineOptions::default()).unwrap();
        assert_eq!(flat.target, target.opposite());
        assert_eq!(flat.reality, Reality::R1);
        assert!(flat.order.unwrap().is(1, 1));
        let back = flat_to_nonflat(&flat.frame, &s, &TauMergeOptions::default()).unwrap();
        assert_eq!(back.target, target);
        assert_eq!(back.frame.masked_count(), 0);
        assert!(gauge_quotient_residual(&f, &back.frame, &s).unwrap() < 1e-6);
    }

    #[test]
    fn torus_rows_land_in_their_intervals() {
        use crate::spaceforms::examples::{torus_flat_frame, TorusParams};
        use crate::spaceforms::immersion::extract_immersion;
        let grid = Grid::centered(9, 0.02);
        let params = TorusParams { rotation: 0.4, normal: 0.3, p: vec![0.9, -0.4], q: vec![0.2, 0.7] };
        for target in [GroupSpec::sphere(2, 1), GroupSpec::hyperbolic(2, 1)] {
            for reality in [Reality::R1, Reality::R2, Reality::Rm1] {
                let (ft, fr) = flat_partner(&target, reality).unwrap();
                let flat = torus_flat_frame(&grid, &ft, fr, &params).unwrap();
                let s = SymmetrySpec::new(2, 1, reality);
                let out = flat_to_nonflat(&flat, &s, &TauMergeOptions::default()).unwrap();
                assert_eq!(out.target, target);
                assert_eq!(out.frame.masked_count(), 0, "{target:?} {reality:?}");
                let l = reality.locus_point().unwrap();
                let want = curvature_c(l, &target).unwrap().re;
                let im = extract_immersion(&out.frame, l, &target).unwrap();
                assert!(im.max_quadric() < 1e-10);
                let k = im.diagnostics[grid.base_idx()].gauss_curvature.unwrap();
                assert!((k - want).abs() < 1e-3, "{target:?} {reality:?}: {k} vs {want}");
                assert_eq!(classify_curvature(k, &target), Some(reality));
                let again = nonflat_to_flat(&out.frame, &s, &PipelineOptions::default()).unwrap();
                assert_eq!((again.target, again.reality), (ft, fr));
                assert!(again.order.unwrap().is(1, 1));
            }
        }
    }
}
