use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::form::{mc_residual, summarize_defects, ConnectionForm, DiffScheme, McReport};
use super::frame::FrameField;
use super::grid::{Direction, Grid};
use crate::error::{LoopError, Result};
use crate::linalg::{identity, CMat, C64};
use crate::loop_algebra::serial::{matrix_to_pairs, pairs_to_matrix};
use crate::loop_algebra::{GroupSpec, LaurentLoop};

/// A loop-valued 1-form that can be evaluated anywhere in the parameter plane.
pub trait ConnectionSource: Sync {
    fn dim(&self) -> usize;

    /// `[A_u, A_v]` at `(u, v)`.
    fn components(&self, u: f64, v: f64) -> Result<[LaurentLoop; 2]>;

    /// Exact `(∂_v A_u, ∂_u A_v)` when available; used for the integrability check.
    fn cross_derivatives(&self, _u: f64, _v: f64) -> Option<(LaurentLoop, LaurentLoop)> {
        None
    }
}

/// One term `u^u_pow v^v_pow λ^degree M` of a polynomial potential component.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTerm {
    pub dir: Direction,
    pub degree: i32,
    pub u_pow: u32,
    pub v_pow: u32,
    pub matrix: CMat,
}

/// A connection whose components are polynomial in `(u, v)` and Laurent in λ.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialPotential {
    pub n: usize,
    pub terms: Vec<PotentialTerm>,
}

impl PolynomialPotential {
    pub fn new(n: usize) -> Self {
        Self { n, terms: Vec::new() }
    }

    pub fn with_term(mut self, dir: Direction, degree: i32, u_pow: u32, v_pow: u32, matrix: CMat) -> Self {
        self.terms.push(PotentialTerm { dir, degree, u_pow, v_pow, matrix });
        self
    }

    fn sum(&self, dir: Direction, coeff: impl Fn(&PotentialTerm) -> f64) -> LaurentLoop {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.dir == dir)
            .map(|t| (t.degree, &t.matrix * C64::new(coeff(t), 0.0)));
        LaurentLoop::from_terms(self.n, terms).expect("term sizes are checked on construction")
    }
}

fn mono(x: f64, p: u32) -> f64 {
    x.powi(p as i32)
}

fn dmono(x: f64, p: u32) -> f64 {
    if p == 0 {
        0.0
    } else {
        p as f64 * x.powi(p as i32 - 1)
    }
}

impl ConnectionSource for PolynomialPotential {
    fn dim(&self) -> usize {
        self.n
    }

    fn components(&self, u: f64, v: f64) -> Result<[LaurentLoop; 2]> {
        let value = |t: &PotentialTerm| mono(u, t.u_pow) * mono(v, t.v_pow);
        Ok([self.sum(Direction::U, value), self.sum(Direction::V, value)])
    }

    fn cross_derivatives(&self, u: f64, v: f64) -> Option<(LaurentLoop, LaurentLoop)> {
        let dv = self.sum(Direction::U, |t| mono(u, t.u_pow) * dmono(v, t.v_pow));
        let du = self.sum(Direction::V, |t| dmono(u, t.u_pow) * mono(v, t.v_pow));
        Some((dv, du))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRepr {
    dir: String,
    degree: i32,
    #[serde(default)]
    u_pow: u32,
    #[serde(default)]
    v_pow: u32,
    matrix: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialRepr {
    n: usize,
    terms: Vec<TermRepr>,
}

impl Serialize for PolynomialPotential {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PotentialRepr {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|t| TermRepr {
                    dir: if t.dir == Direction::U { "u".into() } else { "v".into() },
                    degree: t.degree,
                    u_pow: t.u_pow,
                    v_pow: t.v_pow,
                    matrix: matrix_to_pairs(&t.matrix),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PolynomialPotential {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let repr = PotentialRepr::deserialize(d)?;
        if repr.n == 0 {
            return Err(D::Error::custom("n must be positive"));
        }
        let mut out = PolynomialPotential::new(repr.n);
        for (k, t) in repr.terms.into_iter().enumerate() {
            let dir = match t.dir.as_str() {
                "u" => Direction::U,
                "v" => Direction::V,
                other => return Err(D::Error::custom(format!("terms[{k}].dir: expected \"u\" or \"v\", found {other:?}"))),
            };
            let matrix = pairs_to_matrix(repr.n, &t.matrix)
                .ok_or_else(|| D::Error::custom(format!("terms[{k}].matrix must have n*n entries")))?;
            out.terms.push(PotentialTerm { dir, degree: t.degree, u_pow: t.u_pow, v_pow: t.v_pow, matrix });
        }
        Ok(out)
    }
}

/// A connection given by a closure `(u, v) ↦ [A_u, A_v]`.
pub struct FnSource<F> {
    pub n: usize,
    pub f: F,
}

impl<F> ConnectionSource for FnSource<F>
where
    F: Fn(f64, f64) -> [LaurentLoop; 2] + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn components(&self, u: f64, v: f64) -> Result<[LaurentLoop; 2]> {
        Ok((self.f)(u, v))
    }
}

/// Lagrange weights on up to four consecutive nodes around fractional index `x`.
fn lagrange_nodes(x: f64, len: usize) -> (usize, Vec<f64>) {
    let m = len.min(4);
    let start = ((x.floor() as isize) - 1).clamp(0, (len - m) as isize) as usize;
    let w = (0..m)
        .map(|a| {
            (0..m)
                .filter(|&b| b != a)
                .map(|b| (x - (start + b) as f64) / (a as f64 - b as f64))
                .product()
        })
        .collect();
    (start, w)
}

/// Sampled forms are evaluated off the grid by tensor-product cubic interpolation.
impl ConnectionSource for ConnectionForm {
    fn dim(&self) -> usize {
        self.au.iter().chain(&self.av).flatten().map(|g| g.n()).next().unwrap_or(1)
    }

    fn components(&self, u: f64, v: f64) -> Result<[LaurentLoop; 2]> {
        let g = &self.grid;
        let (su, wu) = lagrange_nodes((u - g.u0) / g.h_u, g.nu);
        let (sv, wv) = lagrange_nodes((v - g.v0) / g.h_v, g.nv);
        let n = self.dim();
        let mut out = [LaurentLoop::zero(n), LaurentLoop::zero(n)];
        for (b, &wb) in wv.iter().enumerate() {
            for (a, &wa) in wu.iter().enumerate() {
                let w = wa * wb;
                if w.abs() < 1e-14 {
                    continue;
                }
                let idx = g.idx(su + a, sv + b);
                for (k, comp) in [&self.au, &self.av].into_iter().enumerate() {
                    let val = comp[idx]
                        .as_ref()
                        .ok_or_else(|| LoopError::Invalid(format!("connection form is masked at node {idx}")))?;
                    out[k] = &out[k] + &val.scale(C64::new(w, 0.0));
                }
            }
        }
        Ok(out)
    }
}

/// Samples a source on every node of `grid`.
pub fn sample_form(src: &dyn ConnectionSource, grid: &Grid) -> ConnectionForm {
    let per: Vec<(Option<LaurentLoop>, Option<LaurentLoop>)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (u, v) = grid.point(idx);
            match src.components(u, v) {
                Ok([a, b]) => (Some(a), Some(b)),
                Err(_) => (None, None),
            }
        })
        .collect();
    let (au, av) = per.into_iter().unzip();
    ConnectionForm { grid: grid.clone(), au, av, declared: None }
}

/// Maurer-Cartan defect of a source over the grid: exact when the source supplies its
/// derivatives, otherwise by fourth-order differences of the sampled form.
pub fn source_mc_residual(src: &dyn ConnectionSource, grid: &Grid) -> McReport {
    let exact: Option<Vec<Option<LaurentLoop>>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (u, v) = grid.point(idx);
            let (dv_au, du_av) = src.cross_derivatives(u, v)?;
            let Ok([au, av]) = src.components(u, v) else { return Some(None) };
            Some(Some(&(&(&du_av - &dv_au) + &(&au * &av)) - &(&av * &au)))
        })
        .collect();
    match exact {
        Some(defects) => summarize_defects(defects.iter().enumerate().map(|(i, d)| (i, d.as_ref()))),
        None => mc_residual(&sample_form(src, grid), DiffScheme::Central4),
    }
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    /// Loops are kept on degrees `[-window, window]`.
    pub window: i32,
    /// Refuse sources whose Maurer-Cartan defect exceeds this; `None` skips the check.
    pub tol_mc: Option<f64>,
    /// Compute the plaquette holonomy diagnostic.
    pub holonomy: bool,
    /// Group declared on the output field.
    pub group: Option<GroupSpec>,
    /// RK4 steps per grid spacing.
    pub substeps: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { window: 16, tol_mc: Some(1e-6), holonomy: true, group: None, substeps: 4 }
    }
}

#[derive(Debug, Clone)]
pub struct Integrated {
    pub frame: FrameField,
    /// `max ‖Φ_u Φ_v − Φ_v Φ_u‖` over plaquettes; zero when not computed.
    pub holonomy: f64,
    pub mc: McReport,
}

/// Transport of `Φ' = Φ A` from `(u, v)` over `h` along `dir`, starting at `Φ = I`, by
/// `m` RK4 steps.
fn transport(src: &dyn ConnectionSource, u: f64, v: f64, dir: Direction, h: f64, w: i32, m: usize) -> Result<LaurentLoop> {
    let m = m.max(1);
    let dh = h / m as f64;
    let mut phi: Option<LaurentLoop> = None;
    for s in 0..m {
        let off = s as f64 * dh;
        let (uu, vv) = match dir {
            Direction::U => (u + off, v),
            Direction::V => (u, v + off),
        };
        let step = rk4_step(src, uu, vv, dir, dh, w)?;
        phi = Some(match phi {
            None => step,
            Some(p) => p.mul_windowed(&step, -w, w),
        });
    }
    Ok(phi.expect("at least one step"))
}

fn rk4_step(src: &dyn ConnectionSource, u: f64, v: f64, dir: Direction, h: f64, w: i32) -> Result<LaurentLoop> {
    let comp = |s: f64| -> Result<LaurentLoop> {
        let [au, av] = match dir {
            Direction::U => src.components(u + s, v)?,
            Direction::V => src.components(u, v + s)?,
        };
        Ok(if dir == Direction::U { au } else { av })
    };
    let one = LaurentLoop::identity(src.dim());
    let step = |k: &LaurentLoop, s: f64, a: &LaurentLoop| {
        (&one + &k.scale(C64::new(s, 0.0))).mul_windowed(a, -w, w)
    };
    let a0 = comp(0.0)?;
    let a1 = comp(0.5 * h)?;
    let a2 = comp(h)?;
    let k1 = a0.window(-w, w);
    let k2 = step(&k1, 0.5 * h, &a1);
    let k3 = step(&k2, 0.5 * h, &a1);
    let k4 = step(&k3, h, &a2);
    let incr = &(&k1 + &k4) + &(&k2 + &k3).scale(C64::new(2.0, 0.0));
    Ok(&one + &incr.scale(C64::new(h / 6.0, 0.0)))
}

/// Integrates `dF = F A` with `F(t₀) = I` by RK4, first along the base row and then
/// along every column. Nodes downstream of a failed step are masked.
pub fn integrate_potential(src: &dyn ConnectionSource, grid: &Grid, opts: &IntegrateOptions) -> Result<Integrated> {
    grid.validate()?;
    let mc = match opts.tol_mc {
        Some(tol) => {
            let rep = source_mc_residual(src, grid);
            if rep.max > tol {
                let (_, degree, (r, c)) = rep.worst.unwrap_or((0, 0, (0, 0)));
                return Err(LoopError::IntegrabilityViolation { degree, block: format!("entry ({r}, {c})"), residual: rep.max });
            }
            rep
        }
        None => McReport { max: 0.0, per_degree: Default::default(), worst: None },
    };
    let w = opts.window;
    let [ib, jb] = grid.base;
    let mut row: Vec<Option<LaurentLoop>> = vec![None; grid.nu];
    row[ib] = Some(LaurentLoop::identity(src.dim()));
    for i in ib + 1..grid.nu {
        row[i] = row[i - 1].as_ref().and_then(|f| {
            let t = transport(src, grid.u(i - 1), grid.v(jb), Direction::U, grid.h_u, w, opts.substeps).ok()?;
            Some(f.mul_windowed(&t, -w, w))
        });
    }
    for i in (0..ib).rev() {
        row[i] = row[i + 1].as_ref().and_then(|f| {
            let t = transport(src, grid.u(i + 1), grid.v(jb), Direction::U, -grid.h_u, w, opts.substeps).ok()?;
            Some(f.mul_windowed(&t, -w, w))
        });
    }
    let columns: Vec<Vec<Option<LaurentLoop>>> = (0..grid.nu)
        .into_par_iter()
        .map(|i| {
            let mut col = vec![None; grid.nv];
            col[jb] = row[i].clone();
            for j in jb + 1..grid.nv {
                col[j] = col[j - 1].as_ref().and_then(|f: &LaurentLoop| {
                    let t = transport(src, grid.u(i), grid.v(j - 1), Direction::V, grid.h_v, w, opts.substeps).ok()?;
                    Some(f.mul_windowed(&t, -w, w))
                });
            }
            for j in (0..jb).rev() {
                col[j] = col[j + 1].as_ref().and_then(|f: &LaurentLoop| {
                    let t = transport(src, grid.u(i), grid.v(j + 1), Direction::V, -grid.h_v, w, opts.substeps).ok()?;
                    Some(f.mul_windowed(&t, -w, w))
                });
            }
            col
        })
        .collect();
    let mut values = vec![None; grid.len()];
    for (i, col) in columns.into_iter().enumerate() {
        for (j, val) in col.into_iter().enumerate() {
            values[grid.idx(i, j)] = val;
        }
    }
    let holonomy = if opts.holonomy { plaquette_holonomy(src, grid, w, opts.substeps) } else { 0.0 };
    Ok(Integrated { frame: FrameField { grid: grid.clone(), group: opts.group, values }, holonomy, mc })
}

/// `max ‖Φ_u(i,j) Φ_v(i+1,j) − Φ_v(i,j) Φ_u(i,j+1)‖` over plaquettes.
pub fn plaquette_holonomy(src: &dyn ConnectionSource, grid: &Grid, w: i32, substeps: usize) -> f64 {
    if grid.nu < 2 || grid.nv < 2 {
        return 0.0;
    }
    (0..(grid.nu - 1) * (grid.nv - 1))
        .into_par_iter()
        .map(|p| {
            let i = p % (grid.nu - 1);
            let j = p / (grid.nu - 1);
            let step = |i: usize, j: usize, dir| {
                let h = grid.spacing(dir);
                transport(src, grid.u(i), grid.v(j), dir, h, w, substeps)
            };
            let run = || -> Result<f64> {
                let a = step(i, j, Direction::U)?.mul_windowed(&step(i + 1, j, Direction::V)?, -w, w);
                let b = step(i, j, Direction::V)?.mul_windowed(&step(i, j + 1, Direction::U)?, -w, w);
                Ok(a.distance(&b))
            };
            run().unwrap_or(f64::INFINITY)
        })
        .reduce(|| 0.0, f64::max)
}

/// The identity frame on a grid.
pub fn identity_field(grid: &Grid, n: usize, group: Option<GroupSpec>) -> FrameField {
    FrameField::constant(grid, group, &LaurentLoop::constant(identity(n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection_maps::form::maurer_cartan;
    use crate::linalg::c;
    use crate::loop_algebra::loop_exp;

    fn gen(seed: f64) -> CMat {
        let x = CMat::from_fn(3, 3, |i, j| c(((i * 2 + j) as f64 + seed).sin(), ((i + 3 * j) as f64 * seed).cos()));
        (&x - x.transpose()) * c(0.4, 0.0)
    }

    #[test]
    fn zero_potential_gives_identity() {
        let grid = Grid::centered(5, 0.1);
        let out = integrate_potential(&PolynomialPotential::new(3), &grid, &IntegrateOptions::default()).unwrap();
        assert!(out.frame.values.iter().all(|v| v.as_ref().unwrap().is_identity(0.0)));
        assert_eq!(out.holonomy, 0.0);
    }

    #[test]
    fn constant_potential_integrates_to_exponential() {
        let x = gen(0.4);
        let h = 0.05;
        let grid = Grid::centered(9, h);
        let pot = PolynomialPotential::new(3).with_term(Direction::U, 1, 0, 0, x.clone());
        let out = integrate_potential(&pot, &grid, &IntegrateOptions { window: 20, ..Default::default() }).unwrap();
        for idx in 0..grid.len() {
            let (u, _) = grid.point(idx);
            let want = loop_exp(&LaurentLoop::monomial(&x * c(u, 0.0), 1), 20, 1e-18);
            assert!(out.frame.values[idx].as_ref().unwrap().distance(&want) < 1e-6);
        }
        assert!(out.holonomy < 1e-12);
    }

    #[test]
    fn non_integrable_source_is_refused() {
        let grid = Grid::centered(5, 0.1);
        let pot = PolynomialPotential::new(3)
            .with_term(Direction::U, 1, 0, 0, gen(0.3))
            .with_term(Direction::V, 1, 1, 0, gen(1.1));
        let err = integrate_potential(&pot, &grid, &IntegrateOptions::default()).unwrap_err();
        assert!(matches!(err, LoopError::IntegrabilityViolation { .. }));
        let out = integrate_potential(&pot, &grid, &IntegrateOptions { tol_mc: None, ..Default::default() }).unwrap();
        assert!(out.holonomy > 1e-4);
    }

    #[test]
    fn integrated_frame_has_small_mc_defect() {
        // Commuting directions: A = λ (X du + v X dv) is flat.
        let x = gen(0.9);
        let grid = Grid::centered(9, 0.05);
        let pot = PolynomialPotential::new(3)
            .with_term(Direction::U, 1, 0, 0, x.clone())
            .with_term(Direction::V, 1, 0, 1, x.clone());
        let out = integrate_potential(&pot, &grid, &IntegrateOptions::default()).unwrap();
        let form = maurer_cartan(&out.frame, DiffScheme::Central4).unwrap();
        assert!(mc_residual(&form, DiffScheme::Central4).max < 1e-6);
        let sampled = sample_form(&pot, &grid);
        assert!(form.max_distance(&sampled) < 1e-5);
    }

    #[test]
    fn sampled_form_interpolates_polynomials() {
        let x = gen(0.2);
        let grid = Grid::centered(7, 0.1);
        let pot = PolynomialPotential::new(3).with_term(Direction::U, 0, 3, 2, x.clone());
        let form = sample_form(&pot, &grid);
        let [au, _] = form.components(0.037, -0.121).unwrap();
        let [want, _] = pot.components(0.037, -0.121).unwrap();
        assert!(au.distance(&want) < 1e-12);
    }

    #[test]
    fn potential_json_round_trip() {
        let pot = PolynomialPotential::new(3).with_term(Direction::V, -1, 2, 0, gen(0.5));
        let text = serde_json::to_string(&pot).unwrap();
        let back: PolynomialPotential = serde_json::from_str(&text).unwrap();
        assert_eq!(back, pot);
    }
}
