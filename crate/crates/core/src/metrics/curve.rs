//! Per-group calibration curves.

use serde::{Deserialize, Serialize};

use crate::category::{category_stats, CategoryTable};
use crate::dataset::AuditDataset;
use crate::discretization::Discretization;
use crate::error::Result;
use crate::groups::GroupCollection;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub bin_index: usize,
    pub rbar: f64,
    pub ybar: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCurve {
    pub group_id: usize,
    pub label: String,
    /// One point per nonempty bin; empty bins are absent.
    pub points: Vec<CurvePoint>,
}

pub fn curve_from_table(table: &CategoryTable, groups: &GroupCollection) -> Vec<GroupCurve> {
    groups
        .groups()
        .iter()
        .map(|g| GroupCurve {
            group_id: g.id,
            label: g.label.clone(),
            points: table
                .for_group(g.id)
                .map(|c| CurvePoint {
                    bin_index: c.bin_index,
                    rbar: c.rbar,
                    ybar: c.ybar,
                    n: c.n,
                })
                .collect(),
        })
        .collect()
}

pub fn calibration_curve(
    dataset: &AuditDataset,
    groups: &GroupCollection,
    disc: &Discretization,
) -> Result<Vec<GroupCurve>> {
    let table = category_stats(dataset, groups, disc, false)?;
    Ok(curve_from_table(&table, groups))
}
