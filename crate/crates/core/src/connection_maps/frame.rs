use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{LoopError, Result};
use crate::linalg::{CMat, C64};
use crate::loop_algebra::{truncated_inverse, GroupSpec, LaurentLoop};

/// A loop per grid node; `None` marks a masked node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameField {
    pub grid: Grid,
    /// Declared matrix group; enables exact inverses `J g^T J`.
    #[serde(default)]
    pub group: Option<GroupSpec>,
    pub values: Vec<Option<LaurentLoop>>,
}

/// Per-node outcome of a pointwise operation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeReport {
    pub residual: f64,
    pub condition: f64,
    pub masked: bool,
    pub reason: Option<String>,
}

impl NodeReport {
    pub fn ok(residual: f64, condition: f64) -> Self {
        Self { residual, condition, masked: false, reason: None }
    }

    pub fn failed(err: &LoopError) -> Self {
        let (residual, condition) = match err {
            LoopError::BigCellViolation { condition, residual } => (*residual, *condition),
            LoopError::SingularLoop { residual } => (*residual, f64::INFINITY),
            _ => (f64::NAN, f64::NAN),
        };
        Self { residual, condition, masked: true, reason: Some(err.to_string()) }
    }

    /// Worse of two reports for the same node.
    pub fn merge(&self, other: &NodeReport) -> NodeReport {
        if self.masked {
            return self.clone();
        }
        if other.masked {
            return other.clone();
        }
        NodeReport::ok(self.residual.max(other.residual), self.condition.max(other.condition))
    }
}

impl FrameField {
    pub fn new(grid: Grid, group: Option<GroupSpec>, values: Vec<Option<LaurentLoop>>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(LoopError::Invalid(format!("expected {} node values, found {}", grid.len(), values.len())));
        }
        let mut dim = None;
        for v in values.iter().flatten() {
            match dim {
                None => dim = Some(v.n()),
                Some(d) if d != v.n() => return Err(LoopError::DimensionMismatch { expected: d, found: v.n() }),
                _ => {}
            }
        }
        if let (Some(g), Some(d)) = (group, dim) {
            if g.dim() != d {
                return Err(LoopError::DimensionMismatch { expected: g.dim(), found: d });
            }
        }
        Ok(Self { grid, group, values })
    }

    /// Samples `f(u, v)` at every node.
    pub fn tabulate(grid: &Grid, group: Option<GroupSpec>, f: impl Fn(f64, f64) -> LaurentLoop + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (u, v) = grid.point(idx);
                Some(f(u, v))
            })
            .collect();
        Self { grid: grid.clone(), group, values }
    }

    /// The field that is `g` everywhere.
    pub fn constant(grid: &Grid, group: Option<GroupSpec>, g: &LaurentLoop) -> Self {
        Self { grid: grid.clone(), group, values: vec![Some(g.clone()); grid.len()] }
    }

    /// Matrix size of the loops, `None` if every node is masked.
    pub fn dim(&self) -> Option<usize> {
        self.values.iter().flatten().map(|v| v.n()).next()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&LaurentLoop> {
        self.values[self.grid.idx(i, j)].as_ref()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.values.iter().map(|v| v.is_none()).collect()
    }

    pub fn masked_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn base_value(&self) -> Option<&LaurentLoop> {
        self.values[self.grid.base_idx()].as_ref()
    }

    /// `‖F(t₀) − I‖`, infinite if the base node is masked.
    pub fn base_defect(&self) -> f64 {
        self.base_value().map_or(f64::INFINITY, |b| b.distance(&LaurentLoop::identity(b.n())))
    }

    pub fn is_based(&self, tol: f64) -> bool {
        self.base_defect() <= tol
    }

    /// Largest radius over unmasked nodes.
    pub fn radius(&self) -> i32 {
        self.values.iter().flatten().map(|v| v.radius()).max().unwrap_or(0)
    }

    /// Inverse of a node value: `J g^T J` when a group is declared, otherwise the
    /// truncated inverse on `window`.
    pub fn invert(&self, g: &LaurentLoop, window: i32) -> Result<LaurentLoop> {
        match &self.group {
            Some(spec) => Ok(spec.loop_inverse(g)),
            None => Ok(truncated_inverse(g, window)?.inverse),
        }
    }

    /// Applies a fallible pointwise map; failures mask the node.
    pub fn map_nodes<F>(&self, group: Option<GroupSpec>, f: F) -> (FrameField, Vec<NodeReport>)
    where
        F: Fn(usize, &LaurentLoop) -> Result<(LaurentLoop, NodeReport)> + Sync,
    {
        let out: Vec<(Option<LaurentLoop>, NodeReport)> = self
            .values
            .par_iter()
            .enumerate()
            .map(|(idx, v)| match v {
                None => (None, NodeReport { masked: true, reason: Some("masked input".into()), ..Default::default() }),
                Some(g) => match f(idx, g) {
                    Ok((h, rep)) => (Some(h), rep),
                    Err(e) => (None, NodeReport::failed(&e)),
                },
            })
            .collect();
        let (values, reports) = out.into_iter().unzip();
        (FrameField { grid: self.grid.clone(), group, values }, reports)
    }

    /// Pointwise combination of two fields on the same grid; masked where either is.
    pub fn zip_nodes<F>(&self, other: &FrameField, group: Option<GroupSpec>, f: F) -> Result<(FrameField, Vec<NodeReport>)>
    where
        F: Fn(usize, &LaurentLoop, &LaurentLoop) -> Result<(LaurentLoop, NodeReport)> + Sync,
    {
        if self.grid != other.grid {
            return Err(LoopError::Invalid("fields live on different grids".into()));
        }
        let out: Vec<(Option<LaurentLoop>, NodeReport)> = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .enumerate()
            .map(|(idx, pair)| match pair {
                (Some(a), Some(b)) => match f(idx, a, b) {
                    Ok((h, rep)) => (Some(h), rep),
                    Err(e) => (None, NodeReport::failed(&e)),
                },
                _ => (None, NodeReport { masked: true, reason: Some("masked input".into()), ..Default::default() }),
            })
            .collect();
        let (values, reports) = out.into_iter().unzip();
        Ok((FrameField { grid: self.grid.clone(), group, values }, reports))
    }

    /// Pointwise product `F(t) H(t)`.
    pub fn mul_field(&self, other: &FrameField) -> Result<FrameField> {
        let group = if self.group == other.group { self.group } else { None };
        Ok(self.zip_nodes(other, group, |_, a, b| Ok((a.mul(b)?, NodeReport::ok(0.0, 1.0))))?.0)
    }

    /// `max_t ‖F(t) − H(t)‖` over nodes unmasked in both.
    pub fn max_distance(&self, other: &FrameField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .filter_map(|p| match p {
                (Some(a), Some(b)) => Some(a.distance(b)),
                _ => None,
            })
            .fold(0.0, f64::max)
    }

    /// Each node evaluated at `lambda`.
    pub fn eval(&self, lambda: C64) -> Result<Vec<Option<CMat>>> {
        self.values.iter().map(|v| v.as_ref().map(|g| g.eval(lambda)).transpose()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frame fields serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: FrameField = serde_json::from_str(text).map_err(|e| LoopError::Invalid(e.to_string()))?;
        Self::new(f.grid, f.group, f.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, identity};

    fn field() -> FrameField {
        let grid = Grid::new(3, 2, 0.0, 0.0, 0.1, 0.1, [0, 0]).unwrap();
        FrameField::tabulate(&grid, None, |u, v| {
            LaurentLoop::from_terms(2, [(0, identity(2)), (1, identity(2) * c(u, v))]).unwrap()
        })
    }

    #[test]
    fn tabulated_field_is_based() {
        let f = field();
        assert!(f.is_based(0.0));
        assert_eq!(f.radius(), 1);
    }

    #[test]
    fn failures_become_masks() {
        let f = field();
        let (g, reps) = f.map_nodes(None, |idx, v| {
            if idx == 3 {
                Err(LoopError::SingularLoop { residual: 1.0 })
            } else {
                Ok((v.clone(), NodeReport::ok(0.0, 1.0)))
            }
        });
        assert_eq!(g.masked_count(), 1);
        assert!(reps[3].masked);
        assert_eq!(g.max_distance(&f), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let mut f = field();
        f.values[2] = None;
        let back = FrameField::from_json(&f.to_json()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn mismatched_values_are_rejected() {
        let f = field();
        assert!(FrameField::new(f.grid.clone(), None, vec![None; 2]).is_err());
    }
}
