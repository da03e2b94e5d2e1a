//! Relationships between MC, PMC and DC: closed-form bounds, plot curves
//! and randomized verification.

mod bounds;
pub mod curves;
pub mod verify;

pub use bounds::{
    dc_to_mc_bound, mc_to_dc_bound, pmc_discretization_bound_geometric, pmc_discretization_bound_uniform,
    pmc_to_dc_bound, pmc_to_mc_bound,
};
pub use curves::{BoundCurve, CurveParams};
pub use verify::{verify_bound, BoundId, VerifyReport, Violation};
