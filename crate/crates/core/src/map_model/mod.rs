//! Sampled sphere-valued maps: lattice domains, the analytic catalog,
//! gradients, tension residuals, blow-ups and ball quadrature.

mod catalog;
mod domain;
pub mod io;
pub mod quadrature;
mod sampled;

pub use catalog::{CatalogEntry, Exactness};
pub use domain::GridDomain;
pub use sampled::{
    blow_up, compute_tension, from_node_values, sample_map, GradientKind, Provenance, Sample, SampledMap, TensionField,
    TENSION_MASK_CELLS,
};

pub(crate) use domain::LatticeBox;
pub(crate) use sampled::ball_box as sampled_ball_box;
