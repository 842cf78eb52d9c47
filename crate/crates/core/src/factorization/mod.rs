//! Birkhoff and τ-Iwasawa factorizations of a single loop.

mod birkhoff;
mod constant;
mod iwasawa;

pub use birkhoff::{
    birkhoff_left, birkhoff_left_auto, birkhoff_right, birkhoff_right_auto, default_window, BirkhoffResult, Side,
    MAX_AUTO_WINDOW,
};
pub use constant::{solve_constant_tau, ConstantSolution, TieBreak, TOL_CONSTANT};
pub use iwasawa::{tau_iwasawa, tau_iwasawa_minus, IwasawaOptions, IwasawaResult};

/// Toeplitz systems with a larger condition estimate are treated as off the big cell.
pub const MAX_CONDITION: f64 = 1e12;
