//! Loop-group machinery for isometric immersions into space forms.
//!
//! The crate is organised bottom-up:
//!
//! - [`loop_algebra`]: matrix Laurent polynomials in λ, products, projections,
//!   evaluation and truncated inversion.
//! - [`symmetries`]: the twisting automorphisms σ, τ, the reality involutions and the
//!   sphere/hyperbolic bridge φ.
//! - [`factorization`]: Birkhoff and τ-Iwasawa splittings of single loops.
//! - [`connection_maps`]: grid-sampled frames, Maurer–Cartan forms, split/merge,
//!   potentials and dressing.
//! - [`spaceforms`]: extended connections, immersion extraction and the flat/non-flat
//!   correspondence.

pub mod error;
pub mod linalg;
pub mod loop_algebra;
pub mod symmetries;
pub mod factorization;
pub mod connection_maps;
pub mod spaceforms;

pub use error::{LoopError, Result};
pub use linalg::{CMat, C64};
pub use loop_algebra::{GroupKind, GroupSpec, LaurentLoop, Part};
