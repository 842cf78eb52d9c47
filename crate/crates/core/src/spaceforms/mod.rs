//! Extended connections of constant curvature maps into spheres and hyperbolic spaces,
//! the immersions they carry, and the flat/non-flat correspondence.

mod connection;
mod correspondence;
mod examples;
mod immersion;

pub use connection::{
    assemble_component, assemble_connection, classify_defect, curvature_c, AssembledConnection, BlockForm,
    ConnectionKind, ExtendedConnectionSpec,
};
pub use correspondence::{
    classify_curvature, curvature_interval, flat_partner, flat_to_nonflat, gauge_quotient_residual, nonflat_to_flat,
    phi_field, CorrespondenceOutcome,
};
pub use examples::{
    example_flat_target, example_sphere_connection, example_sphere_family, example_sphere_frame, example_sphere_loop,
    torus_flat_frame, TorusParams,
};
pub use immersion::{
    brioschi, extract_immersion, is_hyperbolic, validate_adapted, AdaptedReport, ImmersionGrid, NodeDiagnostics,
    TOL_IMMERSIVE, TOL_REAL,
};
