//! Type A and type B extended connections assembled from their blocks.
//!
//! With `β̂ = [θ β]` and `S` the normal part of the target form (`-1` on the immersion
//! column for hyperbolic targets):
//!
//! ```text
//! type A:  [[0, λβ̂], [-λSβ̂ᵀ, 0]]              (A1 uses iλ)
//! type B:  [[ω, X(λ)], [-S X(λ)ᵀ, η]],  X(λ) = [(λ+λ⁻¹)θ  (λ−λ⁻¹)β]
//! ```

use serde::{Deserialize, Serialize};

use crate::connection_maps::{mc_defects, ConnectionForm, DiffScheme, Direction, Grid, McReport};
use crate::error::{LoopError, Result};
use crate::linalg::{c, frob, zeros, CMat, C64};
use crate::loop_algebra::{GroupKind, GroupSpec, LaurentLoop};
use crate::symmetries::{Involution, Reality, SymmetrySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConnectionKind {
    /// λ-linear, real on iℝ* via `Â = A₀ + iA₁λ`.
    TypeA1,
    /// λ-linear, real on ℝ*.
    TypeA2,
    TypeB1,
    TypeB2,
    TypeBm1,
}

impl ConnectionKind {
    pub fn reality(self) -> Reality {
        match self {
            ConnectionKind::TypeA1 | ConnectionKind::TypeB1 => Reality::R1,
            ConnectionKind::TypeA2 | ConnectionKind::TypeB2 => Reality::R2,
            ConnectionKind::TypeBm1 => Reality::Rm1,
        }
    }

    pub fn is_flat(self) -> bool {
        matches!(self, ConnectionKind::TypeA1 | ConnectionKind::TypeA2)
    }

    /// Degree window of the assembled form.
    pub fn order(self) -> (i32, i32) {
        if self.is_flat() {
            (1, 1)
        } else {
            (-1, 1)
        }
    }
}

/// The `du` and `dv` components of the blocks at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockForm {
    /// `n × n`, antisymmetric.
    pub omega: [CMat; 2],
    /// `n × 1`.
    pub theta: [CMat; 2],
    /// `n × k`.
    pub beta: [CMat; 2],
    /// `(k+1) × (k+1)`, antisymmetric with zero first row and column.
    pub eta: [CMat; 2],
}

impl BlockForm {
    pub fn zero(n: usize, k: usize) -> Self {
        let z = |r, c| [CMat::zeros(r, c), CMat::zeros(r, c)];
        Self { omega: z(n, n), theta: z(n, 1), beta: z(n, k), eta: z(k + 1, k + 1) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedConnectionSpec {
    pub kind: ConnectionKind,
    pub n: usize,
    pub k: usize,
    pub grid: Grid,
    pub target: GroupSpec,
    pub data: Vec<BlockForm>,
}

impl ExtendedConnectionSpec {
    pub fn symmetry(&self) -> SymmetrySpec {
        SymmetrySpec::new(self.n, self.k, self.kind.reality())
    }

    fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.target.n_tan != self.n || self.target.k_nor != self.k {
            return Err(LoopError::Invalid(format!(
                "target has blocks ({}, {}) but the connection has ({}, {})",
                self.target.n_tan, self.target.k_nor, self.n, self.k
            )));
        }
        if self.data.len() != self.grid.len() {
            return Err(LoopError::Invalid(format!("expected {} nodes of data, found {}", self.grid.len(), self.data.len())));
        }
        let (n, k) = (self.n, self.k);
        for (idx, b) in self.data.iter().enumerate() {
            for d in 0..2 {
                let shapes = [
                    ("omega", &b.omega[d], (n, n)),
                    ("theta", &b.theta[d], (n, 1)),
                    ("beta", &b.beta[d], (n, k)),
                    ("eta", &b.eta[d], (k + 1, k + 1)),
                ];
                for (name, m, want) in shapes {
                    if m.shape() != want {
                        return Err(LoopError::Invalid(format!(
                            "node {idx}: {name} has shape {:?}, expected {want:?}",
                            m.shape()
                        )));
                    }
                }
                let scale = 1.0 + frob(&b.omega[d]) + frob(&b.eta[d]);
                if frob(&(&b.omega[d] + b.omega[d].transpose())) > 1e-12 * scale {
                    return Err(LoopError::Invalid(format!("node {idx}: omega is not antisymmetric")));
                }
                if frob(&(&b.eta[d] + b.eta[d].transpose())) > 1e-12 * scale {
                    return Err(LoopError::Invalid(format!("node {idx}: eta is not antisymmetric")));
                }
                let edge = (0..=k).map(|j| b.eta[d][(0, j)].norm().max(b.eta[d][(j, 0)].norm())).fold(0.0, f64::max);
                if edge > 1e-12 * scale {
                    return Err(LoopError::Invalid(format!("node {idx}: the first row and column of eta must vanish")));
                }
                if self.kind.is_flat() && frob(&b.omega[d]).max(frob(&b.eta[d])) > 1e-12 {
                    return Err(LoopError::Invalid(format!("node {idx}: type A connections have omega = 0 and eta = 0")));
                }
            }
        }
        Ok(())
    }
}

/// An assembled connection with its grade-resolved Maurer–Cartan defect.
#[derive(Debug, Clone)]
pub struct AssembledConnection {
    pub form: ConnectionForm,
    pub mc: McReport,
    /// Largest `‖ι(A) − A‖` over σ, τ (type B only) and the reality condition.
    pub symmetry_residual: f64,
}

/// Normal signs `S`: the target form restricted to the last `k + 1` coordinates.
fn normal_signs(target: &GroupSpec) -> Vec<f64> {
    target.form_signs()[target.n_tan..].to_vec()
}

/// Places `ur` (n × (k+1)) and its partner `-S urᵀ` into a zero matrix.
fn off_diagonal(n: usize, k: usize, ur: &CMat, s: &[f64]) -> CMat {
    let dim = n + k + 1;
    let mut m = zeros(dim);
    for i in 0..n {
        for j in 0..=k {
            m[(i, n + j)] = ur[(i, j)];
            m[(n + j, i)] = -ur[(i, j)] * s[j];
        }
    }
    m
}

fn hat(theta: &CMat, beta: &CMat, beta_sign: f64) -> CMat {
    let (n, k) = (theta.nrows(), beta.ncols());
    CMat::from_fn(n, k + 1, |i, j| if j == 0 { theta[(i, 0)] } else { beta[(i, j - 1)] * beta_sign })
}

fn diagonal(n: usize, k: usize, omega: &CMat, eta: &CMat) -> CMat {
    let mut m = zeros(n + k + 1);
    m.view_mut((0, 0), (n, n)).copy_from(omega);
    m.view_mut((n, n), (k + 1, k + 1)).copy_from(eta);
    m
}

/// The loop-valued component of the extended connection along one direction.
pub fn assemble_component(kind: ConnectionKind, target: &GroupSpec, b: &BlockForm, dir: Direction) -> LaurentLoop {
    let d = match dir {
        Direction::U => 0,
        Direction::V => 1,
    };
    let n = b.theta[d].nrows();
    let k = b.beta[d].ncols();
    let s = normal_signs(target);
    let mut terms: Vec<(i32, CMat)> = Vec::new();
    match kind {
        ConnectionKind::TypeA1 | ConnectionKind::TypeA2 => {
            let scale = if kind == ConnectionKind::TypeA1 { c(0.0, 1.0) } else { c(1.0, 0.0) };
            terms.push((1, off_diagonal(n, k, &hat(&b.theta[d], &b.beta[d], 1.0), &s) * scale));
        }
        _ => {
            terms.push((0, diagonal(n, k, &b.omega[d], &b.eta[d])));
            terms.push((1, off_diagonal(n, k, &hat(&b.theta[d], &b.beta[d], 1.0), &s)));
            terms.push((-1, off_diagonal(n, k, &hat(&b.theta[d], &b.beta[d], -1.0), &s)));
        }
    }
    LaurentLoop::from_terms(n + k + 1, terms).expect("block shapes were validated")
}

/// Which structure equation a defect entry belongs to.
pub fn classify_defect(kind: ConnectionKind, n: usize, degree: i32, entry: (usize, usize)) -> String {
    let (r, col) = entry;
    let tangent = r < n && col < n;
    let normal = r >= n && col >= n;
    let what = match (degree, tangent, normal) {
        (0, true, _) if kind.is_flat() => "item (2): dω + ω∧ω = 0",
        (0, true, _) => "item (2): dω + ω∧ω = ±4 θ∧θᵀ",
        (0, _, true) => "item (3): dη + η∧η = 0",
        _ => "item (1): Maurer-Cartan equation at fixed λ",
    };
    format!("{what}, entry ({r}, {col})")
}

/// Assembles the Laurent-graded connection form, checks the Lie-algebra symmetries and
/// evaluates the Maurer–Cartan equation grade by grade (fourth-order differences).
pub fn assemble_connection(spec: &ExtendedConnectionSpec, tol_mc: f64) -> Result<AssembledConnection> {
    spec.validate()?;
    let comp = |dir| -> Vec<Option<LaurentLoop>> {
        spec.data.iter().map(|b| Some(assemble_component(spec.kind, &spec.target, b, dir))).collect()
    };
    let mut form = ConnectionForm::new(spec.grid.clone(), comp(Direction::U), comp(Direction::V))?;
    form.declared = Some(spec.kind.order());

    let sym = spec.symmetry();
    let mut invs = vec![Involution::Sigma, Involution::Real(spec.kind.reality())];
    if !spec.kind.is_flat() {
        invs.push(Involution::Tau);
    }
    let mut symmetry_residual: f64 = 0.0;
    for g in form.au.iter().chain(&form.av).flatten() {
        symmetry_residual = symmetry_residual.max(sym.fixed_residual(g, &invs)?);
    }
    if symmetry_residual > 1e-10 {
        return Err(LoopError::Invalid(format!(
            "the blocks violate the {:?} reality condition (residual {symmetry_residual:.3e})",
            spec.kind.reality()
        )));
    }

    let scheme = DiffScheme::Central4;
    let defects = mc_defects(&form, scheme);
    let ring = scheme.ring();
    let mc = crate::connection_maps::summarize_defects(
        defects.iter().enumerate().filter(|(idx, _)| spec.grid.is_interior(*idx, ring)).map(|(i, d)| (i, d.as_ref())),
    );
    if mc.max > tol_mc {
        let (_, degree, entry) = mc.worst.unwrap_or((0, 0, (0, 0)));
        return Err(LoopError::IntegrabilityViolation {
            degree,
            block: classify_defect(spec.kind, spec.n, degree, entry),
            residual: mc.max,
        });
    }
    Ok(AssembledConnection { form, mc, symmetry_residual })
}

/// Induced sectional curvature `4/(λ+λ⁻¹)²` of a type B frame at `λ`, negated for
/// hyperbolic targets.
pub fn curvature_c(lambda: C64, target: &GroupSpec) -> Result<C64> {
    if lambda.norm() == 0.0 {
        return Err(LoopError::ZeroLambda);
    }
    let s = lambda + lambda.inv();
    if s.norm() <= 1e-12 * (1.0 + lambda.norm() + lambda.inv().norm()) {
        return Err(LoopError::DegenerateLambda);
    }
    let c = C64::new(4.0, 0.0) / (s * s);
    Ok(match target.kind {
        GroupKind::Orthogonal => c,
        GroupKind::Lorentz => -c,
    })
}
