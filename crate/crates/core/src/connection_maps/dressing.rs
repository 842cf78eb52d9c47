//! Dressing actions of Λ^- and Λ^- × Λ^+ on frames.
//!
//! When the field declares a group, the dressing loops are expected to lie in it too, so
//! that the exact group inverse stays valid for the outputs.

use super::frame::{FrameField, NodeReport};
use super::ops::{merge, split, PipelineOptions};
use crate::error::Result;
use crate::loop_algebra::LaurentLoop;

/// `g_- ⋄ F_+`: the plus factor of the right Birkhoff splitting `g_- F_+ = F̂_+ h_-`.
pub fn dress_plus(g_minus: &LaurentLoop, f_plus: &FrameField, opts: &PipelineOptions) -> (FrameField, Vec<NodeReport>) {
    f_plus.map_nodes(f_plus.group, |_, fp| {
        let b = opts.right(&g_minus.mul(fp)?)?;
        Ok((b.plus, NodeReport::ok(b.residual, b.condition)))
    })
}

/// `g_+ ⋄ G_-`: the minus factor of the left Birkhoff splitting `g_+ G_- = Ĝ_- h_+`.
pub fn dress_minus(g_plus: &LaurentLoop, g_minus: &FrameField, opts: &PipelineOptions) -> (FrameField, Vec<NodeReport>) {
    g_minus.map_nodes(g_minus.group, |_, gm| {
        let b = opts.left(&g_plus.mul(gm)?)?;
        Ok((b.minus, NodeReport::ok(b.residual, b.condition)))
    })
}

#[derive(Debug, Clone)]
pub struct DressPairOutcome {
    pub frame: FrameField,
    pub reports: Vec<NodeReport>,
}

/// `(g_-, g_+) ⋄ F`: `F̂_+` from `g_- F = F̂_+ h_-`, `Ĝ_-` from `g_+ F = Ĝ_- h_+`, merged.
pub fn dress_pair(
    g_minus: &LaurentLoop,
    g_plus: &LaurentLoop,
    f: &FrameField,
    opts: &PipelineOptions,
) -> Result<DressPairOutcome> {
    let (fp, r1) = dress_plus(g_minus, f, opts);
    let (gm, r2) = dress_minus(g_plus, f, opts);
    let m = merge(&gm, &fp, opts)?;
    let reports = r1.iter().zip(&r2).zip(&m.reports).map(|((a, b), c)| a.merge(b).merge(c)).collect();
    Ok(DressPairOutcome { frame: m.frame, reports })
}

/// The same action computed by splitting `F` first and dressing each factor separately.
pub fn dress_pair_by_parts(
    g_minus: &LaurentLoop,
    g_plus: &LaurentLoop,
    f: &FrameField,
    opts: &PipelineOptions,
) -> Result<DressPairOutcome> {
    let s = split(f, opts);
    let (fp, r1) = dress_plus(g_minus, &s.f_plus, opts);
    let (gm, r2) = dress_minus(g_plus, &s.g_minus, opts);
    let m = merge(&gm, &fp, opts)?;
    let reports = s
        .reports
        .iter()
        .zip(&r1)
        .zip(&r2)
        .zip(&m.reports)
        .map(|(((a, b), c), d)| a.merge(b).merge(c).merge(d))
        .collect();
    Ok(DressPairOutcome { frame: m.frame, reports })
}
