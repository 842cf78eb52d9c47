//! Grid-sampled loop-valued maps: Maurer–Cartan forms, connection orders, potentials,
//! the split/merge correspondences and dressing.

mod dressing;
mod form;
mod frame;
mod grid;
mod integrate;
mod ops;

pub use dressing::{dress_minus, dress_pair, dress_pair_by_parts, dress_plus, DressPairOutcome};
pub use form::{
    connection_order, derivative, ZERO_FORM, maurer_cartan, mc_defects, mc_residual, stencil, ConnectionForm, ConnectionOrder,
    DiffScheme, McReport,
};
pub use frame::{FrameField, NodeReport};
pub use grid::{Direction, Grid};
pub use integrate::{
    identity_field, integrate_potential, plaquette_holonomy, sample_form, source_mc_residual, ConnectionSource,
    FnSource, IntegrateOptions, Integrated, PolynomialPotential, PotentialTerm,
};
pub(crate) use form::summarize_defects;
pub use ops::{
    gauge_parallel, merge, split, sweep_order, tau_merge, GaugeOutcome, MergeOutcome, PipelineOptions, SplitOutcome,
    TauMergeOptions, TauMergeOutcome,
};
