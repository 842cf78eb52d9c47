use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::form::{connection_order, maurer_cartan, mc_residual, ConnectionOrder, DiffScheme};
use super::frame::{FrameField, NodeReport};
use super::integrate::{integrate_potential, IntegrateOptions};
use crate::error::{LoopError, Result};
use crate::factorization::{
    birkhoff_left, birkhoff_left_auto, birkhoff_right, birkhoff_right_auto, tau_iwasawa_minus, BirkhoffResult,
    IwasawaOptions, TieBreak,
};
use crate::linalg::{inverse, CMat};
use crate::loop_algebra::LaurentLoop;
use crate::symmetries::SymmetrySpec;

/// Settings shared by the pointwise factorization pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineOptions {
    /// Birkhoff window; `None` starts from the default and grows it on truncation defects.
    pub window: Option<i32>,
    pub tol: f64,
    /// Relative threshold for measured connection orders.
    pub tol_order: f64,
    /// Difference scheme used when verifying orders of the outputs.
    pub scheme: DiffScheme,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { window: None, tol: 1e-9, tol_order: 1e-6, scheme: DiffScheme::Central4 }
    }
}

impl PipelineOptions {
    pub(crate) fn left(&self, g: &LaurentLoop) -> Result<BirkhoffResult> {
        match self.window {
            Some(n) => birkhoff_left(g, n, self.tol),
            None => birkhoff_left_auto(g, self.tol),
        }
    }

    pub(crate) fn right(&self, g: &LaurentLoop) -> Result<BirkhoffResult> {
        match self.window {
            Some(n) => birkhoff_right(g, n, self.tol),
            None => birkhoff_right_auto(g, self.tol),
        }
    }

    /// Measured order of `F^{-1} dF`, or `None` on grids too small to differentiate.
    pub fn order_of(&self, f: &FrameField) -> Option<ConnectionOrder> {
        maurer_cartan(f, self.scheme).ok().map(|a| connection_order(&a, self.tol_order))
    }
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub g_minus: FrameField,
    pub f_plus: FrameField,
    pub reports: Vec<NodeReport>,
    pub order_minus: Option<ConnectionOrder>,
    pub order_plus: Option<ConnectionOrder>,
}

/// `F = G_- G_+ = F_+ F_-` pointwise: the normalized minus factor of the left Birkhoff
/// splitting and the normalized plus factor of the right one.
pub fn split(f: &FrameField, opts: &PipelineOptions) -> SplitOutcome {
    let nodes: Vec<(Option<LaurentLoop>, Option<LaurentLoop>, NodeReport)> = f
        .values
        .par_iter()
        .map(|v| {
            let Some(g) = v else {
                return (None, None, NodeReport { masked: true, reason: Some("masked input".into()), ..Default::default() });
            };
            let run = || -> Result<_> {
                let l = opts.left(g)?;
                let r = opts.right(g)?;
                Ok((l.residual.max(r.residual), l.condition.max(r.condition), l.minus, r.plus))
            };
            match run() {
                Ok((res, cond, gm, fp)) => (Some(gm), Some(fp), NodeReport::ok(res, cond)),
                Err(e) => (None, None, NodeReport::failed(&e)),
            }
        })
        .collect();
    let mut gm = Vec::with_capacity(nodes.len());
    let mut fp = Vec::with_capacity(nodes.len());
    let mut reports = Vec::with_capacity(nodes.len());
    for (a, b, r) in nodes {
        gm.push(a);
        fp.push(b);
        reports.push(r);
    }
    let g_minus = FrameField { grid: f.grid.clone(), group: f.group, values: gm };
    let f_plus = FrameField { grid: f.grid.clone(), group: f.group, values: fp };
    let order_minus = opts.order_of(&g_minus);
    let order_plus = opts.order_of(&f_plus);
    SplitOutcome { g_minus, f_plus, reports, order_minus, order_plus }
}

#[derive(Debug, Clone)]
pub struct MergeOutcome {
    pub frame: FrameField,
    pub reports: Vec<NodeReport>,
    pub order: Option<ConnectionOrder>,
}

/// Rebuilds `F = F_+ F_-` from `G_-` and `F_+`, where `F_+^{-1} G_- = F_- G_+^{-1}` is a
/// left Birkhoff splitting.
pub fn merge(g_minus: &FrameField, f_plus: &FrameField, opts: &PipelineOptions) -> Result<MergeOutcome> {
    let group = if g_minus.group == f_plus.group { f_plus.group } else { None };
    let (frame, reports) = f_plus.zip_nodes(g_minus, group, |_, fp, gm| {
        let fp_inv = f_plus.invert(fp, 2 * fp.radius() + 4)?;
        let h = &fp_inv * gm;
        let b = opts.left(&h)?;
        let f = fp.mul(&b.minus)?;
        Ok((f, NodeReport::ok(b.residual, b.condition)))
    })?;
    let order = opts.order_of(&frame);
    Ok(MergeOutcome { frame, reports, order })
}

#[derive(Debug, Clone)]
pub struct TauMergeOutcome {
    pub frame: FrameField,
    pub reports: Vec<NodeReport>,
    /// The constant `k` chosen at each node.
    pub k: Vec<Option<CMat>>,
    /// Largest `‖F − τF‖` over unmasked nodes.
    pub tau_residual: f64,
    pub order: Option<ConnectionOrder>,
}

#[derive(Debug, Clone)]
pub struct TauMergeOptions {
    pub pipeline: PipelineOptions,
    pub iwasawa_tol: f64,
    /// Seed each node's constant solve with its predecessor in the sweep.
    pub seeded: bool,
}

impl Default for TauMergeOptions {
    fn default() -> Self {
        Self { pipeline: PipelineOptions::default(), iwasawa_tol: 1e-8, seeded: true }
    }
}

/// Sweep order used by [`tau_merge`]: the base row outward from the base node, then
/// every column outward from the base row. Each entry carries its predecessor.
pub fn sweep_order(grid: &super::grid::Grid) -> Vec<(usize, Option<usize>)> {
    let [ib, jb] = grid.base;
    let mut out = vec![(grid.idx(ib, jb), None)];
    for i in ib + 1..grid.nu {
        out.push((grid.idx(i, jb), Some(grid.idx(i - 1, jb))));
    }
    for i in (0..ib).rev() {
        out.push((grid.idx(i, jb), Some(grid.idx(i + 1, jb))));
    }
    for i in 0..grid.nu {
        for j in jb + 1..grid.nv {
            out.push((grid.idx(i, j), Some(grid.idx(i, j - 1))));
        }
        for j in (0..jb).rev() {
            out.push((grid.idx(i, j), Some(grid.idx(i, j + 1))));
        }
    }
    out
}

/// The τ-fixed frame `F` with `F_+ = F F_-^{-1}` at every node, obtained from the
/// τ-Iwasawa splitting against Λ^-. The constant gauge is fixed by a sequential sweep in
/// which each node's constant solve is seeded by its predecessor.
pub fn tau_merge(f_plus: &FrameField, s: &SymmetrySpec, opts: &TauMergeOptions) -> TauMergeOutcome {
    let n = f_plus.grid.len();
    let mut values: Vec<Option<LaurentLoop>> = vec![None; n];
    let mut reports = vec![NodeReport::default(); n];
    let mut ks: Vec<Option<CMat>> = vec![None; n];
    let mut seeds: Vec<Option<CMat>> = vec![None; n];
    let mut tau_residual: f64 = 0.0;
    for (idx, parent) in sweep_order(&f_plus.grid) {
        let Some(x) = f_plus.values[idx].as_ref() else {
            reports[idx] = NodeReport { masked: true, reason: Some("masked input".into()), ..Default::default() };
            continue;
        };
        let tie = match parent.and_then(|p| seeds[p].clone()) {
            Some(prev) if opts.seeded => TieBreak::Seeded(prev),
            _ => TieBreak::IndexOrder,
        };
        let iw = IwasawaOptions { window: opts.pipeline.window, tol: opts.iwasawa_tol, group: f_plus.group, tie };
        match tau_iwasawa_minus(x, s, &iw) {
            Ok(r) => {
                tau_residual = tau_residual.max(r.tau_fixedness);
                reports[idx] = NodeReport::ok(r.reconstruction.max(r.tau_fixedness), r.condition);
                values[idx] = Some(r.z);
                ks[idx] = Some(r.k_const);
                seeds[idx] = Some(r.k_inv);
            }
            Err(e) => reports[idx] = NodeReport::failed(&e),
        }
    }
    let frame = FrameField { grid: f_plus.grid.clone(), group: f_plus.group, values };
    let order = opts.pipeline.order_of(&frame);
    TauMergeOutcome { frame, reports, k: ks, tau_residual, order }
}

#[derive(Debug, Clone)]
pub struct GaugeOutcome {
    /// `F G`, whose Maurer-Cartan form has no λ⁰ part.
    pub frame: FrameField,
    /// The constant-in-λ gauge `G = H^{-1}` with `dH = H A₀`, `H(t₀) = I`.
    pub gauge: FrameField,
    pub order: Option<ConnectionOrder>,
}

/// Removes the λ⁰ part of the Maurer-Cartan form by a constant-in-λ gauge.
///
/// `tol_mc` bounds the Maurer-Cartan defect of `A₀` itself, which must be flat.
pub fn gauge_parallel(f: &FrameField, opts: &PipelineOptions, tol_mc: f64) -> Result<GaugeOutcome> {
    let a0 = maurer_cartan(f, opts.scheme)?.window(0, 0);
    let rep = mc_residual(&a0, opts.scheme);
    if rep.max > tol_mc {
        let (_, degree, (r, c)) = rep.worst.unwrap_or((0, 0, (0, 0)));
        return Err(LoopError::IntegrabilityViolation { degree, block: format!("A0 entry ({r}, {c})"), residual: rep.max });
    }
    let int = integrate_potential(
        &a0,
        &f.grid,
        &IntegrateOptions { window: 0, tol_mc: None, holonomy: false, group: f.group, ..Default::default() },
    )?;
    let (gauge, _) = int.frame.map_nodes(f.group, |_, h| {
        let h0 = h.coeff_or_zero(0);
        let g = match &f.group {
            Some(spec) => spec.group_inverse(&h0),
            None => inverse(&h0).ok_or(LoopError::SingularLoop { residual: f64::INFINITY })?,
        };
        Ok((LaurentLoop::constant(g), NodeReport::ok(0.0, 1.0)))
    });
    let frame = f.mul_field(&gauge)?;
    let order = opts.order_of(&frame);
    Ok(GaugeOutcome { frame, gauge, order })
}
