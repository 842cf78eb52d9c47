use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frame::FrameField;
use super::grid::{Direction, Grid};
use crate::error::{LoopError, Result};
use crate::linalg::frob;
use crate::loop_algebra::LaurentLoop;

/// Finite-difference scheme for derivatives along grid lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffScheme {
    /// Three-point central differences, one-sided second order at the edges.
    #[default]
    Central2,
    /// Five-point central differences, one-sided fourth order near the edges.
    /// Falls back to [`DiffScheme::Central2`] on lines shorter than five nodes.
    Central4,
}

impl DiffScheme {
    /// Width of the edge band where the stencil is one-sided.
    pub fn ring(self) -> usize {
        match self {
            DiffScheme::Central2 => 1,
            DiffScheme::Central4 => 2,
        }
    }
}

/// `(offset, weight)` pairs such that `f'(x_pos) ≈ Σ w f(x_pos + offset h) / h`.
pub fn stencil(scheme: DiffScheme, pos: usize, len: usize) -> Option<Vec<(isize, f64)>> {
    if len < 2 || pos >= len {
        return None;
    }
    if len == 2 {
        return Some(if pos == 0 { vec![(0, -1.0), (1, 1.0)] } else { vec![(-1, -1.0), (0, 1.0)] });
    }
    let mirror = |s: Vec<(isize, f64)>| s.into_iter().map(|(o, w)| (-o, -w)).collect();
    if scheme == DiffScheme::Central4 && len >= 5 {
        let t = 1.0 / 12.0;
        let left0 = vec![(0, -25.0 * t), (1, 48.0 * t), (2, -36.0 * t), (3, 16.0 * t), (4, -3.0 * t)];
        let left1 = vec![(-1, -3.0 * t), (0, -10.0 * t), (1, 18.0 * t), (2, -6.0 * t), (3, t)];
        return Some(match pos {
            0 => left0,
            1 => left1,
            p if p == len - 1 => mirror(left0),
            p if p == len - 2 => mirror(left1),
            _ => vec![(-2, t), (-1, -8.0 * t), (1, 8.0 * t), (2, -t)],
        });
    }
    let left = vec![(0, -1.5), (1, 2.0), (2, -0.5)];
    Some(match pos {
        0 => left,
        p if p == len - 1 => mirror(left),
        _ => vec![(-1, -0.5), (1, 0.5)],
    })
}

/// Derivative along `dir` of a loop-valued field at node `idx`; `None` if the
/// stencil touches a masked node.
pub fn derivative(
    grid: &Grid,
    values: &[Option<LaurentLoop>],
    idx: usize,
    dir: Direction,
    scheme: DiffScheme,
) -> Option<LaurentLoop> {
    let (i, j) = grid.coords(idx);
    let pos = match dir {
        Direction::U => i,
        Direction::V => j,
    };
    let st = stencil(scheme, pos, grid.count(dir))?;
    let h = grid.spacing(dir);
    let mut acc: Option<LaurentLoop> = None;
    for (off, w) in st {
        let node = grid.step(idx, dir, off)?;
        let term = values[node].as_ref()?.scale(w.into());
        acc = Some(match acc {
            None => term,
            Some(a) => &a + &term,
        });
    }
    acc.map(|a| a.scale((1.0 / h).into()))
}

/// Loop-valued 1-form `A_u du + A_v dv` sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionForm {
    pub grid: Grid,
    pub au: Vec<Option<LaurentLoop>>,
    pub av: Vec<Option<LaurentLoop>>,
    /// Window of λ-degrees the form is expected to occupy.
    #[serde(default)]
    pub declared: Option<(i32, i32)>,
}

/// Measured λ-support of a connection form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionOrder {
    pub lo: i32,
    pub hi: i32,
    /// Set when every coefficient vanishes; `lo = hi = 0` then.
    pub zero: bool,
}

impl ConnectionOrder {
    pub fn is(&self, lo: i32, hi: i32) -> bool {
        !self.zero && self.lo == lo && self.hi == hi
    }

    /// Whether the support lies inside `[lo, hi]`.
    pub fn within(&self, lo: i32, hi: i32) -> bool {
        self.zero || (self.lo >= lo && self.hi <= hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub max: f64,
    /// Largest residual per λ-degree.
    pub per_degree: BTreeMap<i32, f64>,
    /// Node, degree and matrix entry of the largest residual.
    pub worst: Option<(usize, i32, (usize, usize))>,
}

impl ConnectionForm {
    pub fn new(grid: Grid, au: Vec<Option<LaurentLoop>>, av: Vec<Option<LaurentLoop>>) -> Result<Self> {
        if au.len() != grid.len() || av.len() != grid.len() {
            return Err(LoopError::Invalid("connection form size does not match the grid".into()));
        }
        Ok(Self { grid, au, av, declared: None })
    }

    pub fn component(&self, dir: Direction) -> &[Option<LaurentLoop>] {
        match dir {
            Direction::U => &self.au,
            Direction::V => &self.av,
        }
    }

    /// Keeps only the coefficients in degrees `[lo, hi]`.
    pub fn window(&self, lo: i32, hi: i32) -> ConnectionForm {
        let cut = |c: &Vec<Option<LaurentLoop>>| c.iter().map(|v| v.as_ref().map(|g| g.window(lo, hi))).collect();
        ConnectionForm { grid: self.grid.clone(), au: cut(&self.au), av: cut(&self.av), declared: Some((lo, hi)) }
    }

    /// `max ‖A − B‖` over nodes and directions where both are present.
    pub fn max_distance(&self, other: &ConnectionForm) -> f64 {
        let d = |a: &[Option<LaurentLoop>], b: &[Option<LaurentLoop>]| {
            a.iter()
                .zip(b)
                .filter_map(|p| match p {
                    (Some(x), Some(y)) => Some(x.distance(y)),
                    _ => None,
                })
                .fold(0.0, f64::max)
        };
        d(&self.au, &other.au).max(d(&self.av, &other.av))
    }
}

/// `A = F^{-1} dF` by finite differences.
///
/// Products are kept on the degree window `[-R, R]` with `R` the largest radius in the
/// field; coefficients beyond it only carry truncation error.
pub fn maurer_cartan(f: &FrameField, scheme: DiffScheme) -> Result<ConnectionForm> {
    let grid = &f.grid;
    if grid.nu < 3 || grid.nv < 3 {
        return Err(LoopError::Invalid("Maurer-Cartan forms need at least 3 nodes per direction".into()));
    }
    let window = f.radius();
    let per_node: Vec<(Option<LaurentLoop>, Option<LaurentLoop>)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let Some(g) = f.values[idx].as_ref() else { return (None, None) };
            let Ok(inv) = f.invert(g, 2 * window + 4) else { return (None, None) };
            let side = |dir| {
                derivative(grid, &f.values, idx, dir, scheme).map(|d| inv.mul_windowed(&d, -window, window))
            };
            (side(Direction::U), side(Direction::V))
        })
        .collect();
    let (au, av) = per_node.into_iter().unzip();
    ConnectionForm::new(grid.clone(), au, av)
}

/// Forms whose largest coefficient is below this are reported as zero.
pub const ZERO_FORM: f64 = 1e-12;

/// Tightest degree window outside which every coefficient is below `tol_order` times
/// the largest coefficient of the form.
pub fn connection_order(a: &ConnectionForm, tol_order: f64) -> ConnectionOrder {
    let mut by_degree: BTreeMap<i32, f64> = BTreeMap::new();
    for g in a.au.iter().chain(&a.av).flatten() {
        for (d, m) in g.terms() {
            let e = by_degree.entry(d).or_insert(0.0);
            *e = e.max(frob(m));
        }
    }
    let top = by_degree.values().cloned().fold(0.0, f64::max);
    if top <= ZERO_FORM {
        return ConnectionOrder { lo: 0, hi: 0, zero: true };
    }
    let kept: Vec<i32> = by_degree.iter().filter(|(_, &v)| v >= tol_order * top && v > 0.0).map(|(&d, _)| d).collect();
    match (kept.first(), kept.last()) {
        (Some(&lo), Some(&hi)) => ConnectionOrder { lo, hi, zero: false },
        _ => ConnectionOrder { lo: 0, hi: 0, zero: true },
    }
}

/// Per-node, per-degree Maurer-Cartan defect
/// `∂_u A_v − ∂_v A_u + A_u A_v − A_v A_u`, or `None` where it cannot be formed.
pub fn mc_defects(a: &ConnectionForm, scheme: DiffScheme) -> Vec<Option<LaurentLoop>> {
    let grid = &a.grid;
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let au = a.au[idx].as_ref()?;
            let av = a.av[idx].as_ref()?;
            let du_av = derivative(grid, &a.av, idx, Direction::U, scheme)?;
            let dv_au = derivative(grid, &a.au, idx, Direction::V, scheme)?;
            let comm = &(au * av) - &(av * au);
            Some(&(&du_av - &dv_au) + &comm)
        })
        .collect()
}

/// Largest Maurer-Cartan defect over nodes at least [`DiffScheme::ring`] away from the
/// edges, resolved by λ-degree.
pub fn mc_residual(a: &ConnectionForm, scheme: DiffScheme) -> McReport {
    let defects = mc_defects(a, scheme);
    let ring = scheme.ring();
    summarize_defects(defects.iter().enumerate().filter(|(idx, _)| a.grid.is_interior(*idx, ring)).map(|(i, d)| (i, d.as_ref())))
}

pub(crate) fn summarize_defects<'a>(items: impl Iterator<Item = (usize, Option<&'a LaurentLoop>)>) -> McReport {
    let mut report = McReport { max: 0.0, per_degree: BTreeMap::new(), worst: None };
    for (idx, d) in items {
        let Some(d) = d else { continue };
        for (deg, m) in d.terms() {
            let r = frob(m);
            let e = report.per_degree.entry(deg).or_insert(0.0);
            *e = e.max(r);
            if r > report.max {
                report.max = r;
                let entry = (0..m.nrows())
                    .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
                    .max_by(|x, y| m[*x].norm().total_cmp(&m[*y].norm()))
                    .unwrap_or((0, 0));
                report.worst = Some((idx, deg, entry));
            }
        }
    }
    report
}
