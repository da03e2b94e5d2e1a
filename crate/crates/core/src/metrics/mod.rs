//! Loss functions and evaluation metrics.

mod auroc;
mod curve;
mod loss;

pub use auroc::{auroc, auroc_scores};
pub use curve::{calibration_curve, curve_from_table, CurvePoint, GroupCurve};
pub use loss::{
    dc_loss, dc_over, loss_from_table, mc_loss, mc_over, pmc_loss, pmc_over, AuditParams, FilterParams, LossKind,
    LossOutcome, LossResult, Qualifier, Witness,
};
