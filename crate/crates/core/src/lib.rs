//! Calibration-fairness auditing and post-processing for risk scores.
//!
//! The crate measures how far a risk model is from multicalibration (MC),
//! proportional multicalibration (PMC) and differential calibration (DC)
//! over intersectional subgroups, and post-processes scores toward PMC or MC
//! with an iterative boosting procedure.
//!
//! * [`dataset`], [`groups`], [`discretization`], [`category`]: the data model
//!   and the per-(group, bin) statistics everything else is built on.
//! * [`metrics`]: the empirical losses, AUROC and calibration curves.
//! * [`boost`]: PMC and MC post-processing.
//! * [`theory`]: closed-form relationships between the three criteria and
//!   randomized checks of them.
//! * [`sim`]: synthetic populations scored by an α-multicalibrated model.

// `!(x >= 0.0)` is used on purpose to reject NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boost;
pub mod category;
pub mod dataset;
pub mod discretization;
pub mod error;
pub mod groups;
pub mod metrics;
pub mod seed;
pub mod sim;
pub mod theory;

pub use boost::{
    apply_trace, boost, mc_boost, pmc_boost, squash, BoostConfig, BoostMode, BoostOutcome, UpdateRecord, UpdateTrace,
};
pub use category::{category_stats, Category, CategoryTable};
pub use dataset::{Attribute, AuditDataset, Row, MISSING_LEVEL};
pub use discretization::{make_discretization, Bin, Discretization, DiscretizationKind};
pub use error::{Error, Result};
pub use groups::{enumerate_groups, Group, GroupCollection, Term};
pub use metrics::{auroc, dc_loss, mc_loss, pmc_loss, AuditParams, LossKind, LossResult};

/// Absolute slack, as a fraction of the sample size, when comparing a count
/// against a mass floor such as `alpha * lambda * N`. Keeps floors that are
/// whole numbers in exact arithmetic inclusive after floating-point rounding.
pub const MASS_TOLERANCE: f64 = 1e-9;
