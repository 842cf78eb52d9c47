use serde::{Deserialize, Serialize};

use crate::error::{LoopError, Result};

/// Rectangular lattice `u_i = u0 + i h_u`, `v_j = v0 + j h_v`, stored row-major
/// (`idx = j * nu + i`), with a distinguished base node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub nu: usize,
    pub nv: usize,
    pub u0: f64,
    pub v0: f64,
    pub h_u: f64,
    pub h_v: f64,
    /// `[i, j]` of the node where frames are based.
    #[serde(default)]
    pub base: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    U,
    V,
}

impl Grid {
    pub fn new(nu: usize, nv: usize, u0: f64, v0: f64, h_u: f64, h_v: f64, base: [usize; 2]) -> Result<Self> {
        let g = Self { nu, nv, u0, v0, h_u, h_v, base };
        g.validate()?;
        Ok(g)
    }

    /// `n × n` nodes with spacing `h`, centred on the origin, based at the centre node.
    /// `n` should be odd so that the origin is a node.
    pub fn centered(n: usize, h: f64) -> Self {
        let half = (n / 2) as f64;
        Self { nu: n, nv: n, u0: -half * h, v0: -half * h, h_u: h, h_v: h, base: [n / 2, n / 2] }
    }

    /// Checks sizes, spacings and the base node; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(LoopError::Invalid(format!("{field}: {why}")));
        if self.nu == 0 {
            return bad("nu", "must be at least 1");
        }
        if self.nv == 0 {
            return bad("nv", "must be at least 1");
        }
        if !(self.h_u > 0.0 && self.h_u.is_finite()) {
            return bad("h_u", "must be positive and finite");
        }
        if !(self.h_v > 0.0 && self.h_v.is_finite()) {
            return bad("h_v", "must be positive and finite");
        }
        if !self.u0.is_finite() {
            return bad("u0", "must be finite");
        }
        if !self.v0.is_finite() {
            return bad("v0", "must be finite");
        }
        if self.base[0] >= self.nu || self.base[1] >= self.nv {
            return bad("base", "must index a grid node");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nu + i
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nu, idx / self.nu)
    }

    pub fn u(&self, i: usize) -> f64 {
        self.u0 + i as f64 * self.h_u
    }

    pub fn v(&self, j: usize) -> f64 {
        self.v0 + j as f64 * self.h_v
    }

    pub fn point(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.coords(idx);
        (self.u(i), self.v(j))
    }

    pub fn base_idx(&self) -> usize {
        self.idx(self.base[0], self.base[1])
    }

    pub fn count(&self, dir: Direction) -> usize {
        match dir {
            Direction::U => self.nu,
            Direction::V => self.nv,
        }
    }

    pub fn spacing(&self, dir: Direction) -> f64 {
        match dir {
            Direction::U => self.h_u,
            Direction::V => self.h_v,
        }
    }

    /// Index of the node `offset` steps from `idx` along `dir`, if it exists.
    pub fn step(&self, idx: usize, dir: Direction, offset: isize) -> Option<usize> {
        let (i, j) = self.coords(idx);
        let (pos, len) = match dir {
            Direction::U => (i, self.nu),
            Direction::V => (j, self.nv),
        };
        let p = pos as isize + offset;
        if p < 0 || p >= len as isize {
            return None;
        }
        Some(match dir {
            Direction::U => self.idx(p as usize, j),
            Direction::V => self.idx(i, p as usize),
        })
    }

    /// Whether `idx` is at least `ring` nodes away from every edge.
    pub fn is_interior(&self, idx: usize, ring: usize) -> bool {
        let (i, j) = self.coords(idx);
        i >= ring && j >= ring && i + ring < self.nu && j + ring < self.nv
    }
}
